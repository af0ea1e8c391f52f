"""Deterministic detection of a linear utility perturbation ``v(x) + alpha.x 1{t >= tau}``."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import (
    ChangePointCertificate,
    Dataset,
    NonMonotonePiece,
    NumericalFailure,
    PiecewiseLinearUtility,
    get_tol,
)
from .lpqp import Status, solve_lp, solve_min_norm_qp
from .systems import build_system, max_violation


def _check_tau(d: Dataset, tau: int) -> None:
    if not 1 <= tau <= d.T:
        raise ValueError(f"tau must lie in 1..{d.T}, got {tau}")


def theorem2_feasible(
    d: Dataset, tau: int, *, force_zero_alpha: bool = False
) -> ChangePointCertificate | None:
    """A certificate ``(v, lambda, alpha)`` for a change at ``tau``, or ``None``.

    ``tau`` is 1-based: observations ``t >= tau`` are post-change.
    """
    _check_tau(d, tau)
    lp, lay = build_system(d.probes, d.responses, tau)
    if force_zero_alpha:
        lp.set_bounds(lay.alpha, 0.0, 0.0)
    out = solve_lp(lp)
    if out.status is Status.INFEASIBLE:
        return None
    if not out.optimal:
        raise NumericalFailure(f"change-point LP returned {out.status.value}")
    z = out.solution
    alpha = z[lay.alpha] if lay.has_alpha else np.zeros(d.m)
    return ChangePointCertificate(z[lay.v], z[lay.lam], np.clip(alpha, 0.0, None), tau)


def certificate_violation(d: Dataset, cert: ChangePointCertificate) -> float:
    return max_violation(d.probes, d.responses, cert.v, cert.lam, cert.alpha, cert.tau)


@dataclass(frozen=True)
class ChangePointReport:
    feasible: dict[int, ChangePointCertificate] = field(default_factory=dict)

    @property
    def taus(self) -> list[int]:
        return sorted(self.feasible)

    @property
    def headline(self) -> int | None:
        """Smallest feasible change point, or ``None`` when the model is rejected."""
        return self.taus[0] if self.feasible else None

    def to_dict(self) -> dict:
        return {
            "feasible_taus": self.taus,
            "headline_tau": self.headline,
            "certificates": {str(t): c.to_dict() for t, c in sorted(self.feasible.items())},
        }


def detect_change_point(d: Dataset) -> ChangePointReport:
    """Run the feasibility test at every ``tau`` in ``1..T``."""
    found = {}
    for tau in range(1, d.T + 1):
        cert = theorem2_feasible(d, tau)
        if cert is not None:
            found[tau] = cert
    return ChangePointReport(found)


def recover_min_alpha(
    d: Dataset, tau: int, *, beta: float = 0.0, delta: float = 1.0
) -> ChangePointCertificate | None:
    """Minimum ``||alpha||_2`` certificate under the gauge ``v_1 = beta``, ``lambda_1 = delta``.

    Returns ``None`` when no change at ``tau`` is consistent with the data.
    """
    _check_tau(d, tau)
    lp, lay = build_system(d.probes, d.responses, tau, normalize=(beta, delta))
    if not lay.has_alpha:
        return theorem2_feasible(d, tau)
    idx = range(lay.alpha.start, lay.alpha.stop)
    out = solve_min_norm_qp(idx, lp)
    if out.status is Status.INFEASIBLE:
        return None
    alpha = np.clip(out.solution[lay.alpha], 0.0, None)
    return _polish(d, tau, alpha, (beta, delta)) or ChangePointCertificate(
        out.solution[lay.v], out.solution[lay.lam], alpha, tau
    )


def _polish(d: Dataset, tau: int, alpha, normalize) -> ChangePointCertificate | None:
    """Re-solve ``(v, lambda)`` by simplex with ``alpha`` held fixed.

    The interior-point QP lands on the boundary only approximately.  The
    minimizer's own direction points into the feasible set, so scaling
    ``alpha`` up by a relative 1e-9 (or at most 1e-7) and re-solving restores
    simplex-accurate feasibility while moving the norm by no more than that.
    """
    for grow in (0.0, 1e-9, 1e-8, 1e-7):
        fixed = alpha * (1.0 + grow)
        lp, lay = build_system(d.probes, d.responses, tau, normalize=normalize)
        lp.bounds[lay.alpha, 0] = fixed
        lp.bounds[lay.alpha, 1] = fixed
        out = solve_lp(lp)
        if out.optimal:
            return ChangePointCertificate(out.solution[lay.v], out.solution[lay.lam], fixed, tau)
    return None


def recover_base_utility(d: Dataset, cert: ChangePointCertificate) -> PiecewiseLinearUtility:
    """Lower envelope with post-change gradients ``lambda_t p_t - alpha``."""
    tol = get_tol()
    post = np.arange(d.T) >= cert.tau - 1
    grads = cert.lam[:, None] * d.probes
    grads[post] -= cert.alpha
    if np.any(grads < -tol):
        t, i = np.argwhere(grads < -tol)[0]
        raise NonMonotonePiece(
            f"piece {t + 1} has gradient {grads[t, i]:.3g} in good {i + 1}; "
            "alpha exceeds lambda_t p_t"
        )
    return PiecewiseLinearUtility(cert.v, np.clip(grads, 0.0, None), d.responses)
