"""Afriat feasibility test, utility reconstruction and response prediction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .core import (
    AfriatCertificate,
    Dataset,
    DimensionMismatch,
    NumericalFailure,
    PiecewiseLinearUtility,
)
from .lpqp import LinearProgram, Status, solve_lp
from .systems import build_system, max_violation


def afriat_feasibility(d: Dataset) -> AfriatCertificate | None:
    """Solve the Afriat inequalities; ``None`` means infeasible (GARP fails).

    The gauge is pinned with ``u_1 = 0`` and ``lambda_1 = 1``.
    """
    lp, lay = build_system(d.probes, d.responses, with_alpha=False)
    out = solve_lp(lp)
    if out.status is Status.INFEASIBLE:
        return None
    if not out.optimal:
        raise NumericalFailure(f"Afriat LP returned {out.status.value}")
    return AfriatCertificate(out.solution[lay.v], out.solution[lay.lam])


def certificate_violation(d: Dataset, cert: AfriatCertificate) -> float:
    return max_violation(d.probes, d.responses, cert.u, cert.lam)


def reconstruct_utility(d: Dataset, cert: AfriatCertificate) -> PiecewiseLinearUtility:
    return PiecewiseLinearUtility(cert.u, cert.lam[:, None] * d.probes, d.responses)


@dataclass(frozen=True)
class Prediction:
    response: NDArray[np.float64]
    utility: float

    @property
    def total(self) -> float:
        """Predicted total traffic: component sum of the response."""
        return float(self.response.sum())

    def to_dict(self) -> dict:
        return {"response": self.response.tolist(), "utility": self.utility, "total": self.total}


def predict_response(u: PiecewiseLinearUtility, p: ArrayLike, budget: float) -> Prediction:
    """Maximize the piecewise-linear utility over ``{x >= 0 : p.x <= budget}``.

    Solved as ``max theta`` s.t. ``theta <= intercept_i + g_i.(x - a_i)``.
    Only ``utility`` and ``total`` are determined when the optimum face is flat.
    """
    p = np.asarray(p, dtype=float).ravel()
    if p.size != u.m:
        raise DimensionMismatch(f"probe has dimension {p.size}, utility has {u.m}")
    if np.any(p <= 0) or budget <= 0:
        raise ValueError("probe entries and budget must be positive")
    k = u.m
    lp = LinearProgram(np.r_[np.zeros(k), -1.0])
    lp.add(np.hstack([-u.gradients, np.ones((len(u.intercepts), 1))]), "<=", u.offsets())
    lp.add(np.r_[p, 0.0], "<=", budget)
    lp.set_bounds(slice(0, k), 0.0, np.inf)
    out = solve_lp(lp)
    if not out.optimal:
        raise NumericalFailure(f"prediction LP returned {out.status.value}")
    x = np.clip(out.solution[:k], 0.0, None)
    return Prediction(x, float(u(x)))
