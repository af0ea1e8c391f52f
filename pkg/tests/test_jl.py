import json
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from revpref import Dataset
from revpref.core import DimensionMismatch, DomainError
from revpref.garp import garp
from revpref.jl import EmbeddingConfig, embed, garp_embedded, projection_matrix, target_dimension


def test_target_dimension_examples():
    assert target_dimension(0.1, 0.65, 30) == 3863
    assert abs(target_dimension(0.1, 0.65, 30) - 3800) / 3800 <= 0.02
    assert target_dimension(0.1, 1.0, 2) == 892


def test_target_dimension_monotone():
    assert target_dimension(0.1, 1.0, 30) > target_dimension(0.1, 0.5, 30)
    assert target_dimension(0.05, 1.0, 30) > target_dimension(0.1, 1.0, 30)
    assert target_dimension(0.1, 1.0, 300) > target_dimension(0.1, 1.0, 30)


@pytest.mark.parametrize("eps,beta,n", [(0.0, 1.0, 10), (0.5, 1.0, 10), (0.1, 0.0, 10), (0.1, 1.0, 1)])
def test_target_dimension_domain(eps, beta, n):
    with pytest.raises(DomainError):
        target_dimension(eps, beta, n)


def test_projection_entries_and_determinism():
    cfg = EmbeddingConfig(0.2, 1.0, 10, seed=3)
    R = projection_matrix(40, cfg)
    assert R.shape == (40, cfg.k)
    assert set(np.unique(R)) == {-1.0, 1.0}
    assert_array_equal(R, projection_matrix(40, cfg))
    other = projection_matrix(40, EmbeddingConfig(0.2, 1.0, 10, seed=4))
    assert not np.array_equal(R, other)


def test_embedding_is_linear():
    cfg = EmbeddingConfig(0.25, 1.0, 4, seed=1)
    rng = np.random.default_rng(0)
    x, y = rng.normal(size=(2, 30))
    lhs = embed([2.0 * x - 3.0 * y], cfg)
    rhs = 2.0 * embed([x], cfg) - 3.0 * embed([y], cfg)
    assert_allclose(lhs, rhs, atol=1e-12)
    assert np.all(embed(np.zeros((1, 30)), cfg) == 0.0)


def test_embed_shape_checks():
    cfg = EmbeddingConfig(0.25, 1.0, 4)
    with pytest.raises(DimensionMismatch):
        embed(np.ones(5), cfg)


def test_identity_mode_is_exact():
    cfg = EmbeddingConfig(0.25, 1.0, 4, identity=True)
    x = np.random.default_rng(2).normal(size=(3, 7))
    assert_allclose(embed(x, cfg), x, atol=1e-12)


@pytest.mark.parametrize("seed", range(20))
def test_identity_mode_matches_exact_garp(seed):
    rng = np.random.default_rng(seed)
    d = Dataset.from_arrays(rng.uniform(0.5, 2, (6, 4)), rng.uniform(0, 2, (6, 4)))
    report = garp_embedded(d, EmbeddingConfig(0.1, 1.0, 12, identity=True))
    assert report.verdict.passed == garp(d).passed
    assert report.slack == 0.0
    assert report.max_distortion == pytest.approx(0.0, abs=1e-12)


def test_norm_preservation_audit():
    n, m, eps, beta = 1000, 300, 0.2, 1.0
    cfg = EmbeddingConfig(eps, beta, n, seed=0)
    x = np.random.default_rng(9).normal(size=(n, m))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    sq = np.sum(embed(x, cfg) ** 2, axis=1)
    rate = np.mean((sq < 1 - eps) | (sq > 1 + eps))
    delta = cfg.delta
    assert rate <= delta + 3 * math.sqrt(delta * (1 - delta) / n)


def test_inner_product_audit_and_savings():
    rng = np.random.default_rng(4)
    m, T = 2000, 10
    d = Dataset.from_arrays(rng.uniform(1, 2, (T, m)), rng.uniform(0, 1, (T, m)))
    cfg = EmbeddingConfig.for_dataset(d, 0.1, 0.65, seed=2)
    assert cfg.n == 2 * T
    report = garp_embedded(d, cfg)
    assert report.k == cfg.k and report.savings == pytest.approx(m / cfg.k)
    assert report.slack == pytest.approx(0.2)
    se = math.sqrt(cfg.delta * (1 - cfg.delta) / T**2)
    assert report.violation_rate <= cfg.delta + 3 * se
    out = json.loads(json.dumps(report.to_dict()))
    assert out["k"] == cfg.k and "verdict" in out


def test_config_round_trip_fields():
    cfg = EmbeddingConfig(0.1, 0.65, 30, seed=7)
    assert cfg.to_dict() == {"epsilon": 0.1, "beta": 0.65, "n": 30, "k": 3863, "seed": 7, "identity": False}
    assert cfg.delta == pytest.approx(30**-0.65)
