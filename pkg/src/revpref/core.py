"""Domain types, dataset validation and (de)serialization.

Every other module consumes a :class:`Dataset`: an ordered sequence of
probe/response pairs ``(p_t, x_t)`` with budgets ``I_t``.  Budgets that are
not observed are inferred as ``p_t . x_t``.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

#: Floor on marginal utilities of income; strict positivity is not LP-expressible.
LAMBDA_MIN = 1e-6

_DEFAULT_TOL = 1e-8


def get_tol() -> float:
    """Feasibility tolerance, overridable through ``REVPREF_TOL``."""
    raw = os.environ.get("REVPREF_TOL")
    if raw is None:
        return _DEFAULT_TOL
    tol = float(raw)
    if not tol > 0:
        raise ValueError(f"REVPREF_TOL must be positive, got {raw!r}")
    return tol


class RevPrefError(Exception):
    """Base class for all errors raised by this package."""


class NonPositiveProbe(RevPrefError):
    pass


class DimensionMismatch(RevPrefError):
    pass


class EmptyDataset(RevPrefError):
    pass


class NumericalFailure(RevPrefError):
    """The underlying solver stopped without a trustworthy answer."""


class NonMonotonePiece(RevPrefError):
    pass


class DomainError(RevPrefError):
    pass


class NoUpperBracket(RevPrefError):
    pass


def _frozen(a: ArrayLike, dtype=float) -> NDArray:
    out = np.array(a, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class Dataset:
    """Ordered probe/response observations.

    Attributes:
        probes: ``(T, m)`` array of strictly positive probes ``p_t``.
        responses: ``(T, m)`` array of responses ``x_t`` (or noisy ``y_t``).
        budgets: length ``T`` array of positive budgets ``I_t``.
        times: length ``T`` array of observation labels, ascending.
    """

    probes: NDArray[np.float64]
    responses: NDArray[np.float64]
    budgets: NDArray[np.float64]
    times: NDArray[np.float64] = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        object.__setattr__(self, "probes", _frozen(self.probes))
        object.__setattr__(self, "responses", _frozen(self.responses))
        object.__setattr__(self, "budgets", _frozen(self.budgets))
        times = np.arange(1, len(self.probes) + 1) if self.times is None else self.times
        object.__setattr__(self, "times", _frozen(times))

    @property
    def T(self) -> int:
        return self.probes.shape[0]

    @property
    def m(self) -> int:
        return self.probes.shape[1]

    def expenditure(self) -> NDArray[np.float64]:
        """``E[t, s] = p_t . x_s``."""
        return self.probes @ self.responses.T

    def subset(self, idx: Sequence[int] | slice) -> "Dataset":
        return Dataset(self.probes[idx], self.responses[idx], self.budgets[idx], self.times[idx])

    def with_responses(self, responses: ArrayLike) -> "Dataset":
        return Dataset(self.probes, np.asarray(responses, dtype=float), self.budgets, self.times)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return all(
            np.array_equal(getattr(self, name), getattr(other, name))
            for name in ("probes", "responses", "budgets", "times")
        )

    def __repr__(self) -> str:
        return f"Dataset(T={self.T}, m={self.m})"

    @classmethod
    def from_arrays(
        cls,
        probes: ArrayLike,
        responses: ArrayLike,
        budgets: ArrayLike | None = None,
        *,
        allow_negative_responses: bool = False,
    ) -> "Dataset":
        p = np.atleast_2d(np.asarray(probes, dtype=float))
        x = np.atleast_2d(np.asarray(responses, dtype=float))
        if p.shape != x.shape:
            raise DimensionMismatch(f"probes {p.shape} vs responses {x.shape}")
        T = p.shape[0]
        times = np.arange(1, T + 1, dtype=float)
        cols = [times[:, None], p, x]
        if budgets is not None:
            cols.append(np.asarray(budgets, dtype=float).reshape(-1, 1))
        rows = np.hstack(cols) if T else np.empty((0, 1))
        return validate_dataset(rows, allow_negative_responses=allow_negative_responses)


def validate_dataset(
    raw: Iterable[Sequence[float]],
    *,
    allow_negative_responses: bool = False,
) -> Dataset:
    """Build a :class:`Dataset` from rows ``t, p_1..p_m, x_1..x_m[, budget]``.

    The row width fixes the layout: odd widths carry no budget, even widths
    end in a budget column.  Missing budgets default to ``p_t . x_t``.

    ``allow_negative_responses`` admits noisy measurements ``y_t = x_t + w_t``,
    which can dip below zero.
    """
    rows = [list(map(float, r)) for r in raw]
    if not rows:
        raise EmptyDataset("dataset has no rows")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise DimensionMismatch(f"inconsistent row widths {sorted(widths)}")
    (width,) = widths
    has_budget = width % 2 == 0
    m = (width - 2) // 2 if has_budget else (width - 1) // 2
    if m < 1:
        raise DimensionMismatch(f"row width {width} leaves no goods")

    arr = np.asarray(rows, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError("dataset contains non-finite values")
    times = arr[:, 0]
    probes = arr[:, 1 : 1 + m]
    responses = arr[:, 1 + m : 1 + 2 * m]
    if np.any(np.diff(times) < 0):
        raise ValueError("rows must be sorted by t ascending")
    if np.any(probes <= 0):
        t, i = np.argwhere(probes <= 0)[0]
        raise NonPositiveProbe(f"probe entry p[{t}][{i}] = {probes[t, i]} is not positive")
    if not allow_negative_responses and np.any(responses < 0):
        raise ValueError("response entries must be nonnegative")

    budgets = arr[:, -1] if has_budget else np.einsum("ti,ti->t", probes, responses)
    if np.any(budgets <= 0):
        raise ValueError("budgets must be positive")
    return Dataset(probes, responses, budgets, times)


def dataset_rows(d: Dataset, *, include_budget: bool = True) -> NDArray[np.float64]:
    cols = [d.times[:, None], d.probes, d.responses]
    if include_budget:
        cols.append(d.budgets[:, None])
    return np.hstack(cols)


def csv_header(m: int, *, include_budget: bool = True) -> list[str]:
    head = ["t"] + [f"p{i}" for i in range(1, m + 1)] + [f"x{i}" for i in range(1, m + 1)]
    return head + ["budget"] if include_budget else head


def write_csv(d: Dataset, path: str | Path, *, include_budget: bool = True) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(csv_header(d.m, include_budget=include_budget))
        for row in dataset_rows(d, include_budget=include_budget):
            w.writerow([repr(float(v)) for v in row])


def read_csv(path: str | Path, *, allow_negative_responses: bool = False) -> Dataset:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise EmptyDataset(f"{path}: empty file") from None
        rows = [r for r in reader if r and any(c.strip() for c in r)]
    if not header or header[0] != "t":
        raise ValueError(f"{path}: header must start with 't'")
    has_budget = header[-1] == "budget"
    m = (len(header) - 1 - has_budget) // 2
    if header != csv_header(m, include_budget=has_budget):
        raise ValueError(f"{path}: malformed header {header}")
    bad = [i for i, r in enumerate(rows, start=2) if len(r) != len(header)]
    if bad:
        raise DimensionMismatch(f"{path}: line {bad[0]} has wrong number of fields")
    return validate_dataset(rows, allow_negative_responses=allow_negative_responses)


@dataclass(frozen=True, eq=False)
class AfriatCertificate:
    """Feasible ``{u_t, lambda_t}`` for the Afriat inequalities."""

    u: NDArray[np.float64]
    lam: NDArray[np.float64]

    def __post_init__(self) -> None:
        object.__setattr__(self, "u", _frozen(self.u))
        object.__setattr__(self, "lam", _frozen(self.lam))

    def to_dict(self) -> dict[str, Any]:
        return {"u": self.u.tolist(), "lambda": self.lam.tolist()}

    @classmethod
    def from_dict(cls, obj: dict[str, Any]) -> "AfriatCertificate":
        return cls(np.asarray(obj["u"], float), np.asarray(obj["lambda"], float))


@dataclass(frozen=True, eq=False)
class ChangePointCertificate:
    """Feasible ``{v_t, lambda_t, alpha}`` for a change at index ``tau`` (1-based)."""

    v: NDArray[np.float64]
    lam: NDArray[np.float64]
    alpha: NDArray[np.float64]
    tau: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "v", _frozen(self.v))
        object.__setattr__(self, "lam", _frozen(self.lam))
        object.__setattr__(self, "alpha", _frozen(self.alpha))
        object.__setattr__(self, "tau", int(self.tau))

    def to_dict(self) -> dict[str, Any]:
        return {
            "v": self.v.tolist(),
            "lambda": self.lam.tolist(),
            "alpha": self.alpha.tolist(),
            "tau": self.tau,
        }

    @classmethod
    def from_dict(cls, obj: dict[str, Any]) -> "ChangePointCertificate":
        return cls(
            np.asarray(obj["v"], float),
            np.asarray(obj["lambda"], float),
            np.asarray(obj["alpha"], float),
            int(obj["tau"]),
        )


@dataclass(frozen=True, eq=False)
class PiecewiseLinearUtility:
    """``u(x) = min_t { intercept_t + gradient_t . (x - anchor_t) }``."""

    intercepts: NDArray[np.float64]
    gradients: NDArray[np.float64]
    anchors: NDArray[np.float64]

    def __post_init__(self) -> None:
        object.__setattr__(self, "intercepts", _frozen(np.ravel(self.intercepts)))
        object.__setattr__(self, "gradients", _frozen(np.atleast_2d(self.gradients)))
        object.__setattr__(self, "anchors", _frozen(np.atleast_2d(self.anchors)))
        n = len(self.intercepts)
        if self.gradients.shape != self.anchors.shape or self.gradients.shape[0] != n:
            raise DimensionMismatch(
                f"pieces disagree: {n} intercepts, gradients {self.gradients.shape}, "
                f"anchors {self.anchors.shape}"
            )

    @property
    def m(self) -> int:
        return self.gradients.shape[1]

    @property
    def pieces(self) -> list[tuple[float, NDArray, NDArray]]:
        return list(zip(self.intercepts.tolist(), self.gradients, self.anchors))

    def offsets(self) -> NDArray[np.float64]:
        """Constant terms ``intercept_t - gradient_t . anchor_t`` of each piece."""
        return self.intercepts - np.einsum("ti,ti->t", self.gradients, self.anchors)

    def __call__(self, x: ArrayLike) -> float | NDArray[np.float64]:
        return evaluate_utility(self, x)

    def to_dict(self) -> dict[str, Any]:
        return {
            "intercepts": self.intercepts.tolist(),
            "gradients": self.gradients.tolist(),
            "anchors": self.anchors.tolist(),
        }

    @classmethod
    def from_dict(cls, obj: dict[str, Any]) -> "PiecewiseLinearUtility":
        return cls(
            np.asarray(obj["intercepts"], float),
            np.asarray(obj["gradients"], float),
            np.asarray(obj["anchors"], float),
        )


def evaluate_utility(u: PiecewiseLinearUtility, x: ArrayLike) -> float | NDArray[np.float64]:
    """Evaluate the lower envelope at ``x``.

    ``x`` may be a single length-``m`` point or an ``(n, m)`` batch, in which
    case an array of ``n`` values is returned.
    """
    pts = np.asarray(x, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    if pts.shape[1] != u.m:
        raise DimensionMismatch(f"point has dimension {pts.shape[1]}, utility has {u.m}")
    diff = pts[:, None, :] - u.anchors[None, :, :]
    vals = (u.intercepts + np.einsum("nti,ti->nt", diff, u.gradients)).min(axis=1)
    return float(vals[0]) if single else vals


def to_json(obj: Any, **kwargs: Any) -> str:
    """Serialize a certificate, utility or report (anything with ``to_dict``)."""
    payload = obj.to_dict() if hasattr(obj, "to_dict") else obj
    return json.dumps(payload, **kwargs)
