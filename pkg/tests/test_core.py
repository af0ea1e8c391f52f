import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from revpref import core
from revpref.core import (
    AfriatCertificate,
    ChangePointCertificate,
    Dataset,
    DimensionMismatch,
    EmptyDataset,
    NonPositiveProbe,
    PiecewiseLinearUtility,
    read_csv,
    validate_dataset,
    write_csv,
)


def test_budget_defaults_to_expenditure():
    d = validate_dataset([[1, 1.0, 2.0, 3.0, 4.0]])
    assert d.T == 1 and d.m == 2
    assert_allclose(d.budgets, [11.0])


def test_even_width_carries_budget():
    d = validate_dataset([[1, 1.0, 2.0, 3.0, 4.0, 20.0], [2, 1.0, 1.0, 1.0, 1.0, 3.0]])
    assert_allclose(d.budgets, [20.0, 3.0])


def test_validation_errors():
    with pytest.raises(EmptyDataset):
        validate_dataset([])
    with pytest.raises(NonPositiveProbe):
        validate_dataset([[1, 0.0, 1.0, 1.0, 1.0]])
    with pytest.raises(DimensionMismatch):
        validate_dataset([[1, 1.0, 1.0, 1.0, 1.0], [2, 1.0, 1.0, 1.0]])
    with pytest.raises(ValueError):
        validate_dataset([[2, 1.0, 1.0, 1.0, 1.0], [1, 1.0, 1.0, 1.0, 1.0]])
    with pytest.raises(ValueError):
        validate_dataset([[1, 1.0, 1.0, -1.0, 3.0]])


def test_negative_responses_allowed_on_request():
    d = validate_dataset([[1, 1.0, 1.0, -0.5, 3.0]], allow_negative_responses=True)
    assert_allclose(d.budgets, [2.5])


def test_dataset_is_read_only(cobb_douglas_data):
    with pytest.raises(ValueError):
        cobb_douglas_data.probes[0, 0] = 5.0


def test_expenditure_matrix(cobb_douglas_data):
    d = cobb_douglas_data
    E = d.expenditure()
    assert_allclose(E[2, 5], d.probes[2] @ d.responses[5])
    assert_allclose(np.diag(E), d.budgets)


def test_csv_round_trip(tmp_path, cobb_douglas_data):
    path = tmp_path / "d.csv"
    write_csv(cobb_douglas_data, path)
    header = path.read_text().splitlines()[0]
    assert header == "t,p1,p2,x1,x2,budget"
    assert read_csv(path) == cobb_douglas_data


def test_csv_without_budget(tmp_path, cobb_douglas_data):
    path = tmp_path / "d.csv"
    write_csv(cobb_douglas_data, path, include_budget=False)
    back = read_csv(path)
    assert_allclose(back.budgets, cobb_douglas_data.budgets)


def test_csv_rejects_bad_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("time,p1,x1\n1,1,1\n")
    with pytest.raises(ValueError):
        read_csv(path)


def test_certificates_round_trip_json():
    a = AfriatCertificate([0.0, 1.5], [1.0, 2.0])
    assert json.loads(core.to_json(a)) == {"u": [0.0, 1.5], "lambda": [1.0, 2.0]}
    back = AfriatCertificate.from_dict(json.loads(core.to_json(a)))
    assert_array_equal(back.lam, a.lam)

    c = ChangePointCertificate([0.0, 1.0], [1.0, 1.0], [0.5, 0.0], 2)
    back = ChangePointCertificate.from_dict(json.loads(core.to_json(c)))
    assert back.tau == 2
    assert_array_equal(back.alpha, [0.5, 0.0])


def test_tolerance_override(monkeypatch):
    monkeypatch.setenv("REVPREF_TOL", "1e-6")
    assert core.get_tol() == 1e-6
    monkeypatch.setenv("REVPREF_TOL", "-1")
    with pytest.raises(ValueError):
        core.get_tol()


def test_utility_evaluates_lower_envelope():
    u = PiecewiseLinearUtility([0.0, 1.0], [[1.0, 0.0], [0.0, 1.0]], [[0.0, 0.0], [1.0, 1.0]])
    # pieces: x1 and 1 + (x2 - 1) = x2
    assert u([2.0, 3.0]) == pytest.approx(2.0)
    assert_allclose(u(np.array([[2.0, 3.0], [5.0, 1.0]])), [2.0, 1.0])
    assert_allclose(u.offsets(), [0.0, 0.0])
    back = PiecewiseLinearUtility.from_dict(u.to_dict())
    assert back([4.0, 4.0]) == u([4.0, 4.0])


def test_utility_dimension_checks():
    with pytest.raises(DimensionMismatch):
        PiecewiseLinearUtility([0.0], [[1.0, 0.0]], [[0.0, 0.0], [1.0, 1.0]])
    u = PiecewiseLinearUtility([0.0], [[1.0, 0.0]], [[0.0, 0.0]])
    with pytest.raises(DimensionMismatch):
        u([1.0, 2.0, 3.0])


def _random_utility(seed: int) -> PiecewiseLinearUtility:
    rng = np.random.default_rng(seed)
    k = rng.integers(1, 6)
    return PiecewiseLinearUtility(rng.normal(size=k), rng.uniform(0, 2, (k, 3)), rng.uniform(0, 3, (k, 3)))


points = st.lists(st.floats(0.0, 10.0, allow_nan=False), min_size=3, max_size=3)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), points, points, st.floats(0.0, 1.0))
def test_utility_is_concave(seed, x, y, w):
    u = _random_utility(seed)
    x, y = np.asarray(x), np.asarray(y)
    assert u(w * x + (1 - w) * y) >= w * u(x) + (1 - w) * u(y) - 1e-9


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), points, st.integers(0, 2), st.floats(0.0, 5.0))
def test_utility_is_monotone(seed, x, i, step):
    u = _random_utility(seed)
    x = np.asarray(x)
    y = x.copy()
    y[i] += step
    assert u(y) >= u(x) - 1e-12
