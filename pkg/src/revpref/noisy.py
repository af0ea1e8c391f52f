"""Change-point estimation and hypothesis tests under Gaussian measurement noise.

Responses are observed as ``y_t = x_t + w_t`` with ``w_t ~ N(0, sigma^2 I)``.
The test statistic ``Phi*`` is the smallest adjustment that makes the
(perturbed) Afriat system feasible; its false-alarm probability is the tail
``Pr{M >= Phi*}`` of the noise statistic ``M``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.optimize import brentq
from scipy.sparse import csr_matrix

from .core import (
    AfriatCertificate,
    Dataset,
    NoUpperBracket,
    NumericalFailure,
    get_tol,
)
from .lpqp import Status, solve_lp, solve_min_norm_qp
from .systems import build_system, pair_index

BISECTION_WIDTH = 1e-6
DEFAULT_SAMPLES = 100_000


class Mode(str, enum.Enum):
    CLASSICAL = "classical"
    PERTURBED = "perturbed"


class Decision(str, enum.Enum):
    H0 = "H0"
    H1 = "H1"


def _check_tau(T: int, tau: int) -> None:
    if not 1 <= tau <= T:
        raise ValueError(f"tau must lie in 1..{T}, got {tau}")


def phi_tau(d: Dataset, tau: int) -> float:
    """Minimum additive adjustment ``Phi_tau`` for a change at ``tau``.

    ``Phi`` enters every inequality un-weighted, so the LP is homogeneous in
    ``(v, lambda, alpha, Phi)``; the scale is fixed by ``min_t lambda_t = 1``.
    """
    _check_tau(d.T, tau)
    lp, lay = build_system(
        d.probes, d.responses, tau, free_phi=True, lam_floor=1.0, normalize=None
    )
    lp.set_bounds(0, 0.0, 0.0)
    lp.objective[lay.phi] = 1.0
    out = solve_lp(lp)
    if not out.optimal:
        raise NumericalFailure(f"Phi_tau LP returned {out.status.value}")
    return max(float(out.solution[lay.phi]), 0.0)


def phi_curve(d: Dataset) -> NDArray[np.float64]:
    """``Phi_tau`` for ``tau = 1..T``.

    Consecutive change points differ only in whether one observation carries
    the ``alpha`` terms, so the sweep edits a single HiGHS model in place and
    warm-starts each solve from the previous basis.  Any non-optimal exit
    falls back to a cold :func:`phi_tau` solve.
    """
    import highspy

    T, m = d.T, d.m
    lp, lay = build_system(
        d.probes, d.responses, 1, free_phi=True, lam_floor=1.0, normalize=None
    )
    lp.set_bounds(0, 0.0, 0.0)
    lp.objective[lay.phi] = 1.0
    inf = highspy.kHighsInf
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.setOptionValue("primal_feasibility_tolerance", 1e-10)
    h.setOptionValue("dual_feasibility_tolerance", 1e-10)
    lo = np.where(np.isinf(lp.bounds[:, 0]), -inf, lp.bounds[:, 0])
    hi = np.where(np.isinf(lp.bounds[:, 1]), inf, lp.bounds[:, 1])
    h.addVars(lp.n, lo, hi)
    h.changeColsCost(lp.n, np.arange(lp.n, dtype=np.int32), lp.objective)
    A = csr_matrix(lp.A)
    h.addRows(
        A.shape[0], np.full(A.shape[0], -inf), lp.rhs, A.nnz,
        A.indptr[:-1].astype(np.int32), A.indices.astype(np.int32), A.data,
    )
    t_idx, _ = pair_index(T)
    n_pairs = len(t_idx)
    curve = np.empty(T)
    for tau in range(1, T + 1):
        h.run()
        if h.getModelStatus() == highspy.HighsModelStatus.kOptimal:
            curve[tau - 1] = max(h.getInfo().objective_function_value, 0.0)
        else:
            curve[tau - 1] = phi_tau(d, tau)
        # observation tau leaves the post-change block for the next solve
        o = tau - 1
        for r in np.flatnonzero(t_idx == o):
            for j in range(m):
                h.changeCoeff(int(r), lay.alpha.start + j, 0.0)
        for j in range(m):
            h.changeRowBounds(n_pairs + o * m + j, -inf, inf)
    return curve


def estimate_change_point(d: Dataset, *, curve: NDArray | None = None) -> int:
    """``argmin_tau Phi_tau`` (1-based), ties toward the smallest ``tau``.

    Values within the feasibility tolerance of the minimum count as ties.
    """
    if d.T < 2:
        raise ValueError("need at least two observations")
    curve = phi_curve(d) if curve is None else np.asarray(curve)
    best = curve.min()
    return int(np.flatnonzero(curve <= best + get_tol())[0]) + 1


def phi_upper_bracket(d: Dataset) -> float:
    """An adjustment at which the classical system is feasible with ``u = 0, lambda = 1``."""
    E = d.expenditure()
    cost = E - np.diag(E)[:, None]
    return 2.0 * float(np.abs(cost).max()) + 1.0


def _feasible_at(d: Dataset, phi: float, tau: int | None):
    lp, lay = build_system(d.probes, d.responses, tau, phi=phi, with_alpha=tau is not None)
    out = solve_lp(lp)
    if out.status is Status.INFEASIBLE:
        return None
    if not out.optimal:
        raise NumericalFailure(f"feasibility LP returned {out.status.value}")
    return out.solution, lay


def _bisect(d: Dataset, tau: int | None, width: float):
    hit = _feasible_at(d, 0.0, tau)
    if hit is not None:
        return 0.0, hit
    lo, hi = 0.0, phi_upper_bracket(d)
    best = _feasible_at(d, hi, tau)
    if best is None:
        raise NoUpperBracket(f"system infeasible at the bracket Phi = {hi:.6g}")
    while hi - lo > width:
        mid = 0.5 * (lo + hi)
        hit = _feasible_at(d, mid, tau)
        if hit is None:
            lo = mid
        else:
            hi, best = mid, hit
    return hi, best


def phi_star_classical(
    d: Dataset, *, width: float = BISECTION_WIDTH
) -> tuple[float, AfriatCertificate]:
    """Smallest ``Phi`` with ``u_s - u_t - lambda_t (p_t.(y_s - y_t) + Phi) <= 0`` feasible.

    ``lambda_t Phi`` is bilinear, so ``Phi`` is found by bisection with an LP
    feasibility oracle; the returned value is the feasible end of a bracket
    of width ``width``.
    """
    phi, (z, lay) = _bisect(d, None, width)
    return phi, AfriatCertificate(z[lay.v], z[lay.lam])


@dataclass(frozen=True)
class PerturbedFit:
    phi_star: float
    alpha: NDArray[np.float64]
    lam: NDArray[np.float64]
    v: NDArray[np.float64]
    tau: int


def phi_star_perturbed(
    d: Dataset, tau: int, *, width: float = BISECTION_WIDTH, force_zero_alpha: bool = False
) -> PerturbedFit:
    """Bisection for ``Phi*`` with the change at ``tau``, then the minimum-``||alpha||``
    certificate at that adjustment."""
    _check_tau(d.T, tau)
    if force_zero_alpha:
        phi, cert = phi_star_classical(d, width=width)
        return PerturbedFit(phi, np.zeros(d.m), cert.lam, cert.u, tau)
    phi, (z, lay) = _bisect(d, tau, width)
    lp, lay = build_system(d.probes, d.responses, tau, phi=phi)
    if lay.has_alpha:
        out = solve_min_norm_qp(range(lay.alpha.start, lay.alpha.stop), lp)
        if out.optimal:
            z = out.solution
    alpha = np.clip(z[lay.alpha], 0.0, None) if lay.has_alpha else np.zeros(d.m)
    return PerturbedFit(phi, alpha, z[lay.lam], z[lay.v], tau)


@dataclass(frozen=True)
class MStatisticSpec:
    """Noise statistic ``M`` (classical) or ``M1 + M2`` (perturbed)."""

    probes: NDArray[np.float64]
    noise_sigma: float = 1.0
    kind: Mode = Mode.CLASSICAL
    tau: int | None = None
    alpha: NDArray[np.float64] | None = None
    lam: NDArray[np.float64] | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "probes", np.atleast_2d(np.asarray(self.probes, dtype=float)))
        object.__setattr__(self, "kind", Mode(self.kind))
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be nonnegative")
        if self.kind is Mode.PERTURBED:
            if self.tau is None or self.alpha is None or self.lam is None:
                raise ValueError("perturbed M needs tau, alpha and lambda")
            _check_tau(self.probes.shape[0], self.tau)


@dataclass(frozen=True)
class EmpiricalDistribution:
    samples: NDArray[np.float64]  # sorted ascending

    @property
    def n(self) -> int:
        return self.samples.size

    def tail(self, x: float) -> float:
        """Empirical ``Pr{M >= x}``."""
        return float(self.n - np.searchsorted(self.samples, x, side="left")) / self.n

    def stderr(self, p: float) -> float:
        return math.sqrt(p * (1.0 - p) / self.n)

    def mean(self) -> float:
        return float(self.samples.mean())


def _max_excluding_self(a: NDArray) -> NDArray:
    """For ``a[n, t]`` return ``a[n, t] - min_{s != t} a[n, s]``."""
    order = np.sort(a, axis=1)
    lowest, second = order[:, :1], order[:, 1:2]
    other_min = np.where(a == lowest, second, lowest)
    return a - other_min


def _m1(P: NDArray, w: NDArray) -> NDArray:
    # Q[n, t, s] = p_t . w_s
    Q = np.einsum("ti,nsi->nts", P, w)
    own = np.einsum("ntt->nt", Q).copy()
    T = P.shape[0]
    Q[:, np.arange(T), np.arange(T)] = np.inf
    return (own - Q.min(axis=2)).max(axis=1)


def sample_m(
    spec: MStatisticSpec, n_samples: int = DEFAULT_SAMPLES, seed=None, *, chunk: int = 4096
) -> EmpiricalDistribution:
    """Monte Carlo draws of ``M`` with i.i.d. ``w_t ~ N(0, sigma^2 I)``."""
    if n_samples < 1:
        raise ValueError("n_samples must be positive")
    rng = np.random.default_rng(seed)
    P = spec.probes
    T, m = P.shape
    if T < 2:
        return EmpiricalDistribution(np.full(n_samples, -np.inf))
    out = np.empty(n_samples)
    done = 0
    while done < n_samples:
        k = min(chunk, n_samples - done)
        w = spec.noise_sigma * rng.standard_normal((k, T, m))
        vals = _m1(P, w)
        if spec.kind is Mode.PERTURBED:
            aw = w @ np.asarray(spec.alpha, dtype=float)
            post = slice(spec.tau - 1, T)
            m2 = _max_excluding_self(aw)[:, post] / np.asarray(spec.lam, dtype=float)[post]
            vals = vals + m2.max(axis=1)
        out[done : done + k] = vals
        done += k
    out.sort()
    return EmpiricalDistribution(out)


def _scaled_norms(probes: ArrayLike, sigma: float) -> NDArray:
    P = np.atleast_2d(np.asarray(probes, dtype=float))
    return sigma * np.linalg.norm(P, axis=1)


def fa_lower_bound(phi_star: float, probes: ArrayLike, noise_sigma: float = 1.0) -> float:
    """Closed-form lower bound on ``Pr{M >= phi_star}``.

    Built from the cyclic chain ``p_t.(w_t - w_{t+1})``, whose members are
    negatively dependent, and the Gaussian tail lower bound.
    """
    if phi_star < 0:
        raise ValueError("phi_star must be nonnegative")
    sq = _scaled_norms(probes, noise_sigma) ** 2
    x = float(phi_star)
    tail = (
        math.sqrt(2.0 / math.pi)
        * np.sqrt(2.0 * sq)
        * np.exp(-(x**2) / (4.0 * sq))
        / (x + np.sqrt(x**2 + 8.0 * sq))
    )
    return float(1.0 - np.prod(1.0 - tail))


def fa_upper_bound(phi_star: float, probes: ArrayLike, noise_sigma: float = 1.0) -> float:
    """``T^2 exp(-phi^2 / 4 ||p_max||^2)``, clamped to ``[0, 1]``."""
    if phi_star < 0:
        raise ValueError("phi_star must be nonnegative")
    norms = _scaled_norms(probes, noise_sigma)
    T = norms.size
    return float(min(1.0, T**2 * math.exp(-(phi_star**2) / (4.0 * norms.max() ** 2))))


def phi_threshold_from_bound(gamma: float, probes: ArrayLike, noise_sigma: float = 1.0) -> float:
    """Invert :func:`fa_lower_bound`: statistics above the result reject at level ``gamma``."""
    if not 0 < gamma < 1:
        raise ValueError("gamma must lie in (0, 1)")
    f0 = fa_lower_bound(0.0, probes, noise_sigma)
    if gamma >= f0:
        return 0.0
    hi = float(_scaled_norms(probes, noise_sigma).max()) + 1.0
    while fa_lower_bound(hi, probes, noise_sigma) > gamma:
        hi *= 2.0
    return float(
        brentq(lambda x: fa_lower_bound(x, probes, noise_sigma) - gamma, 0.0, hi, xtol=1e-13, rtol=1e-15)
    )


@dataclass(frozen=True)
class NoisyTestReport:
    mode: Mode
    phi_star: float
    tau_hat: int | None
    alpha: NDArray[np.float64]
    lam: NDArray[np.float64]
    p_value_mc: float
    mc_stderr: float
    fa_lower_bound: float
    fa_upper_bound: float
    phi_threshold: float
    gamma: float
    decision: Decision
    noise_sigma: float
    n_samples: int
    phi_curve: NDArray[np.float64] | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode.value,
            "phi_star": self.phi_star,
            "tau_hat": self.tau_hat,
            "alpha": self.alpha.tolist(),
            "lambda": self.lam.tolist(),
            "p_value_mc": self.p_value_mc,
            "mc_stderr": self.mc_stderr,
            "fa_lower_bound": self.fa_lower_bound,
            "fa_upper_bound": self.fa_upper_bound,
            "phi_threshold": self.phi_threshold,
            "gamma": self.gamma,
            "decision": self.decision.value,
            "noise_sigma": self.noise_sigma,
            "n_samples": self.n_samples,
            "phi_curve": None if self.phi_curve is None else self.phi_curve.tolist(),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "NoisyTestReport":
        curve = obj.get("phi_curve")
        return cls(
            mode=Mode(obj["mode"]),
            phi_star=float(obj["phi_star"]),
            tau_hat=obj["tau_hat"],
            alpha=np.asarray(obj["alpha"], float),
            lam=np.asarray(obj["lambda"], float),
            p_value_mc=float(obj["p_value_mc"]),
            mc_stderr=float(obj["mc_stderr"]),
            fa_lower_bound=float(obj["fa_lower_bound"]),
            fa_upper_bound=float(obj["fa_upper_bound"]),
            phi_threshold=float(obj["phi_threshold"]),
            gamma=float(obj["gamma"]),
            decision=Decision(obj["decision"]),
            noise_sigma=float(obj["noise_sigma"]),
            n_samples=int(obj["n_samples"]),
            phi_curve=None if curve is None else np.asarray(curve, float),
        )


def run_noisy_test(
    d: Dataset,
    gamma: float = 0.05,
    mode: Mode | str = Mode.CLASSICAL,
    n_samples: int = DEFAULT_SAMPLES,
    *,
    noise_sigma: float = 1.0,
    seed=None,
    width: float = BISECTION_WIDTH,
) -> NoisyTestReport:
    """Full test: statistic, Monte Carlo p-value, analytic bounds and decision.

    ``H0`` (data consistent with the model) is kept iff the p-value is at
    least ``gamma``.
    """
    if not 0 < gamma < 1:
        raise ValueError("gamma must lie in (0, 1)")
    mode = Mode(mode)
    curve = None
    if mode is Mode.CLASSICAL:
        phi, cert = phi_star_classical(d, width=width)
        tau_hat, alpha, lam = None, np.zeros(d.m), cert.lam
        spec = MStatisticSpec(d.probes, noise_sigma)
    else:
        curve = phi_curve(d)
        tau_hat = estimate_change_point(d, curve=curve)
        fit = phi_star_perturbed(d, tau_hat, width=width)
        phi, alpha, lam = fit.phi_star, fit.alpha, fit.lam
        spec = MStatisticSpec(d.probes, noise_sigma, Mode.PERTURBED, tau_hat, alpha, lam)

    if phi == 0.0:
        p_value = 1.0
    else:
        p_value = sample_m(spec, n_samples, seed).tail(phi)
    return NoisyTestReport(
        mode=mode,
        phi_star=phi,
        tau_hat=tau_hat,
        alpha=alpha,
        lam=lam,
        p_value_mc=p_value,
        mc_stderr=math.sqrt(p_value * (1.0 - p_value) / n_samples),
        fa_lower_bound=fa_lower_bound(phi, d.probes, noise_sigma),
        fa_upper_bound=fa_upper_bound(phi, d.probes, noise_sigma),
        phi_threshold=phi_threshold_from_bound(gamma, d.probes, noise_sigma),
        gamma=gamma,
        decision=Decision.H0 if p_value >= gamma else Decision.H1,
        noise_sigma=noise_sigma,
        n_samples=n_samples,
        phi_curve=curve,
    )
