"""Small dense LP / convex QP contract.

Callers assemble a :class:`LinearProgram` and get back a :class:`SolveOutcome`.
LPs go to HiGHS (dual simplex, which handles the heavy degeneracy of Afriat
systems); the minimum-norm QP goes to Clarabel through cvxpy.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.optimize import linprog

from .core import DimensionMismatch, NumericalFailure, get_tol

LE, EQ, GE = "<=", "==", ">="
_SENSES = {"<=": LE, "=": EQ, "==": EQ, ">=": GE}

_HIGHS_OPTIONS = {
    "primal_feasibility_tolerance": 1e-10,
    "dual_feasibility_tolerance": 1e-10,
    "presolve": True,
}


class Status(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"


@dataclass
class LinearProgram:
    """``min c'z`` subject to ``A z (<=|==|>=) rhs`` and per-variable bounds.

    Rows are kept as a dense matrix; ``add`` appends constraints in bulk.
    """

    objective: NDArray[np.float64]
    A: NDArray[np.float64] = None  # type: ignore[assignment]
    senses: list[str] = field(default_factory=list)
    rhs: NDArray[np.float64] = None  # type: ignore[assignment]
    bounds: NDArray[np.float64] = None  # type: ignore[assignment]

    def __post_init__(self) -> None:
        self.objective = np.asarray(self.objective, dtype=float).ravel()
        n = self.n
        self.A = np.zeros((0, n)) if self.A is None else np.atleast_2d(np.asarray(self.A, float))
        self.rhs = np.zeros(0) if self.rhs is None else np.asarray(self.rhs, float).ravel()
        self.senses = [_SENSES[s] for s in self.senses]
        if self.bounds is None:
            self.bounds = np.tile([-np.inf, np.inf], (n, 1))
        self.bounds = np.asarray(self.bounds, dtype=float).reshape(n, 2)
        if self.A.shape[1] != n and self.A.shape[0]:
            raise DimensionMismatch(f"rows have length {self.A.shape[1]}, expected {n}")
        if not (len(self.senses) == self.A.shape[0] == len(self.rhs)):
            raise DimensionMismatch("constraint rows, senses and rhs disagree in count")
        if np.any(self.bounds[:, 0] > self.bounds[:, 1]):
            raise ValueError("lower bound exceeds upper bound")

    @property
    def n(self) -> int:
        return self.objective.size

    def add(self, rows: ArrayLike, sense: str, rhs: ArrayLike) -> "LinearProgram":
        rows = np.atleast_2d(np.asarray(rows, dtype=float))
        if rows.size == 0:
            return self
        if rows.shape[1] != self.n:
            raise DimensionMismatch(f"rows have length {rows.shape[1]}, expected {self.n}")
        rhs = np.broadcast_to(np.asarray(rhs, dtype=float), (rows.shape[0],))
        self.A = np.vstack([self.A, rows])
        self.rhs = np.concatenate([self.rhs, rhs])
        self.senses.extend([_SENSES[sense]] * rows.shape[0])
        return self

    def set_bounds(self, idx, lo: float = -np.inf, hi: float = np.inf) -> "LinearProgram":
        self.bounds[idx, 0] = lo
        self.bounds[idx, 1] = hi
        return self

    def copy(self) -> "LinearProgram":
        return LinearProgram(
            self.objective.copy(), self.A.copy(), list(self.senses), self.rhs.copy(), self.bounds.copy()
        )

    def split(self):
        """Return ``(A_ub, b_ub, A_eq, b_eq)`` with ``>=`` rows negated."""
        s = np.asarray(self.senses, dtype=object)
        le, ge, eq = s == LE, s == GE, s == EQ
        A_ub = np.vstack([self.A[le], -self.A[ge]])
        b_ub = np.concatenate([self.rhs[le], -self.rhs[ge]])
        return A_ub, b_ub, self.A[eq], self.rhs[eq]

    def violation(self, z: ArrayLike) -> float:
        """Largest constraint or bound violation at ``z`` (0 when feasible)."""
        z = np.asarray(z, dtype=float)
        A_ub, b_ub, A_eq, b_eq = self.split()
        parts = [0.0]
        if len(b_ub):
            parts.append(float(np.max(A_ub @ z - b_ub)))
        if len(b_eq):
            parts.append(float(np.max(np.abs(A_eq @ z - b_eq))))
        parts.append(float(np.max(self.bounds[:, 0] - z)))
        parts.append(float(np.max(z - self.bounds[:, 1])))
        return max(parts)


@dataclass(frozen=True)
class SolveOutcome:
    status: Status
    solution: NDArray[np.float64] | None = None
    objective_value: float = float("nan")

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL


def _check_feasible(lp: LinearProgram, z: NDArray) -> None:
    # scale-aware: Afriat rows carry lambda-weighted terms that can be large
    viol = lp.violation(z)
    scale = 1.0 + float(np.max(np.abs(z), initial=0.0))
    if viol > 1e3 * get_tol() * scale:
        raise NumericalFailure(f"solver returned a point violating constraints by {viol:.3g}")


# Retry for the rare "model status unknown" exits of the default run.
_RETRIES = (("highs-ds", {**_HIGHS_OPTIONS, "presolve": False}),)


def solve_lp(lp: LinearProgram) -> SolveOutcome:
    """Solve ``lp``; ``NumericalFailure`` if every solver gives up.

    HiGHS can stall when the optimum needs multipliers many orders of
    magnitude apart (noisy adjustment LPs do this); those instances go to
    Clarabel's interior-point method instead.
    """
    A_ub, b_ub, A_eq, b_eq = lp.split()
    kwargs = dict(
        A_ub=A_ub if len(b_ub) else None,
        b_ub=b_ub if len(b_ub) else None,
        A_eq=A_eq if len(b_eq) else None,
        b_eq=b_eq if len(b_eq) else None,
        bounds=[(None if np.isinf(lo) else lo, None if np.isinf(hi) else hi) for lo, hi in lp.bounds],
    )
    res = linprog(lp.objective, method="highs", options=_HIGHS_OPTIONS, **kwargs)
    for method, options in _RETRIES:
        if res.status in (0, 2, 3):
            break
        res = linprog(lp.objective, method=method, options=options, **kwargs)
    if res.status == 0:
        _check_feasible(lp, res.x)
        return SolveOutcome(Status.OPTIMAL, np.asarray(res.x), float(res.fun))
    if res.status == 2:
        return SolveOutcome(Status.INFEASIBLE)
    if res.status == 3:
        return SolveOutcome(Status.UNBOUNDED)
    out = _clarabel(lp, None)
    if out.optimal:
        _check_feasible(lp, out.solution)
    return out


def feasible_point(lp: LinearProgram) -> SolveOutcome:
    """Solve the feasibility problem of ``lp`` (objective dropped)."""
    probe = lp.copy()
    probe.objective = np.zeros(lp.n)
    return solve_lp(probe)


def solve_min_norm_qp(quadratic_vars: Sequence[int], lp: LinearProgram) -> SolveOutcome:
    """Minimize ``sum(z[i]**2 for i in quadratic_vars)`` over the feasible set of ``lp``.

    ``lp.objective`` is ignored.  When the indexed variables can all be zero the
    LP point is returned directly, so a zero minimizer comes back exactly zero.
    """
    idx = np.asarray(list(quadratic_vars), dtype=int)
    first = feasible_point(lp)
    if first.status is Status.INFEASIBLE:
        return first
    if idx.size == 0:
        return SolveOutcome(Status.OPTIMAL, first.solution, 0.0)

    pinned = lp.copy()
    pinned.objective = np.zeros(lp.n)
    lo = np.maximum(pinned.bounds[idx, 0], 0.0)
    hi = np.minimum(pinned.bounds[idx, 1], 0.0)
    if np.all(lo <= hi):
        pinned.bounds[idx, 0] = 0.0
        pinned.bounds[idx, 1] = 0.0
        zero = solve_lp(pinned)
        if zero.optimal:
            return SolveOutcome(Status.OPTIMAL, zero.solution, 0.0)

    return _clarabel(lp, idx)


_CLARABEL_TIGHT = dict(tol_gap_abs=1e-12, tol_gap_rel=1e-12, tol_feas=1e-12, tol_ktratio=1e-10, max_iter=500)
_CLARABEL_DONE = ("optimal", "optimal_inaccurate", "infeasible", "infeasible_inaccurate", "unbounded", "unbounded_inaccurate")


def _clarabel(lp: LinearProgram, idx: NDArray | None) -> SolveOutcome:
    """``min ||z[idx]||^2`` over ``lp``, or ``lp`` itself when ``idx`` is None."""
    import cvxpy as cp

    z = cp.Variable(lp.n)
    A_ub, b_ub, A_eq, b_eq = lp.split()
    cons = []
    if len(b_ub):
        cons.append(A_ub @ z <= b_ub)
    if len(b_eq):
        cons.append(A_eq @ z == b_eq)
    lo, hi = lp.bounds[:, 0], lp.bounds[:, 1]
    if np.isfinite(lo).any():
        k = np.flatnonzero(np.isfinite(lo))
        cons.append(z[k] >= lo[k])
    if np.isfinite(hi).any():
        k = np.flatnonzero(np.isfinite(hi))
        cons.append(z[k] <= hi[k])
    goal = lp.objective @ z if idx is None else cp.sum_squares(z[idx])
    prob = cp.Problem(cp.Minimize(goal), cons)
    # tight settings first; near-degenerate instances (e.g. a bisection step
    # on the feasibility boundary) can make them fail where defaults succeed
    for settings in (_CLARABEL_TIGHT, {}):
        try:
            prob.solve(solver=cp.CLARABEL, **settings)
        except cp.error.SolverError as exc:
            error = exc
            continue
        if prob.status in _CLARABEL_DONE:
            break
        error = NumericalFailure(f"QP solver status {prob.status}")
    else:
        raise NumericalFailure(str(error)) from error
    if prob.status in (cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE):
        return SolveOutcome(Status.INFEASIBLE)
    if prob.status in (cp.UNBOUNDED, cp.UNBOUNDED_INACCURATE):
        return SolveOutcome(Status.UNBOUNDED)
    if prob.status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE) or z.value is None:
        raise NumericalFailure(f"QP solver status {prob.status}")
    sol = np.asarray(z.value, dtype=float)
    value = float(lp.objective @ sol) if idx is None else float(np.sum(sol[idx] ** 2))
    return SolveOutcome(Status.OPTIMAL, sol, value)
