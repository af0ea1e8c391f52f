"""Synthetic Cobb-Douglas agents, measurement noise and the CUSUM baseline."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.optimize import brentq

from .core import Dataset


@dataclass(frozen=True)
class CobbDouglasAgent:
    """Maximizes ``prod x_i^a_i`` before ``tau_star`` and adds ``alpha.x`` from it on.

    ``tau_star`` is 1-based; ``budgets`` is a scalar or one value per observation.
    """

    a: tuple[float, ...] = (0.6, 0.4)
    alpha: tuple[float, ...] = (1.0, 1.0)
    tau_star: int = 26
    budgets: float | tuple[float, ...] = 5.0
    noise_sigma: float = math.sqrt(0.5)

    def __post_init__(self) -> None:
        a = tuple(float(v) for v in np.ravel(self.a))
        alpha = tuple(float(v) for v in np.ravel(self.alpha))
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "alpha", alpha)
        if not np.isscalar(self.budgets):
            object.__setattr__(self, "budgets", tuple(float(b) for b in self.budgets))
        if len(a) != len(alpha):
            raise ValueError("a and alpha must have the same length")
        if min(a) <= 0 or abs(sum(a) - 1.0) > 1e-12:
            raise ValueError("exponents must be positive and sum to 1")
        if min(alpha) < 0:
            raise ValueError("alpha must be nonnegative")
        if self.tau_star < 1:
            raise ValueError("tau_star must be >= 1")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be nonnegative")

    @property
    def m(self) -> int:
        return len(self.a)

    def budget_vector(self, T: int) -> NDArray[np.float64]:
        b = np.broadcast_to(np.asarray(self.budgets, dtype=float), (T,)).copy()
        if np.any(b <= 0):
            raise ValueError("budgets must be positive")
        return b

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, obj: dict) -> "CobbDouglasAgent":
        fields = {"a", "alpha", "tau_star", "budgets", "noise_sigma"}
        return cls(**{k: v for k, v in obj.items() if k in fields})


def cobb_douglas(a: ArrayLike, x: ArrayLike) -> NDArray[np.float64] | float:
    x = np.asarray(x, dtype=float)
    return np.prod(np.power(x, np.asarray(a, dtype=float)), axis=-1)


def demand(a: ArrayLike, alpha: ArrayLike, p: ArrayLike, budget: float) -> tuple[NDArray, float]:
    """Maximizer of ``prod x_i^a_i + alpha.x`` on ``p.x <= budget`` and its multiplier.

    Stationarity gives ``x_i = a_i V / (lam p_i - alpha_i)`` with ``V`` the
    Cobb-Douglas value; homogeneity turns ``v(x) = V`` into the scalar equation
    ``sum a_i log(a_i / (lam p_i - alpha_i)) = 0``, monotone in ``lam``.
    """
    a = np.asarray(a, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    p = np.asarray(p, dtype=float)
    if not np.any(alpha > 0):
        x = a * budget / p
        return x, float(cobb_douglas(a, x) / budget)

    def f(lam: float) -> float:
        return float(np.sum(a * np.log(a / (lam * p - alpha))))

    lo = float(np.max(alpha / p))
    hi = max(lo, 1.0) * 2.0
    while f(hi) > 0:
        hi *= 2.0
    left = lo + 1e-12 * max(lo, 1.0)
    while f(left) < 0:
        # only if the bracket start overshoots the root
        left = lo + (left - lo) * 1e-3
    lam = brentq(f, left, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
    denom = lam * p - alpha
    V = budget / float(np.sum(p * a / denom))
    return a * V / denom, float(lam)


def random_probes(T: int, m: int, rng: np.random.Generator, low: float = 1.0, high: float = 2.0) -> NDArray:
    """Probes drawn uniformly from ``[low, high]^m``."""
    return rng.uniform(low, high, size=(T, m))


def clean_responses(agent: CobbDouglasAgent, probes: ArrayLike) -> tuple[NDArray, NDArray]:
    """Regime-appropriate maximizers and their multipliers ``lambda_t``."""
    P = np.asarray(probes, dtype=float)
    T = P.shape[0]
    budgets = agent.budget_vector(T)
    X = np.empty_like(P)
    lam = np.empty(T)
    zero = np.zeros(agent.m)
    for t in range(T):
        alpha = agent.alpha if t >= agent.tau_star - 1 else zero
        X[t], lam[t] = demand(agent.a, alpha, P[t], budgets[t])
    return X, lam


def generate(
    agent: CobbDouglasAgent, probes: ArrayLike, seed: int | np.random.Generator | None = None
) -> tuple[Dataset, Dataset]:
    """Return ``(clean, noisy)`` datasets; ``noisy`` adds ``N(0, sigma^2 I)`` to responses."""
    rng = np.random.default_rng(seed)
    P = np.asarray(probes, dtype=float)
    if P.ndim != 2 or P.shape[1] != agent.m:
        raise ValueError(f"probes must be (T, {agent.m})")
    if np.any(P <= 0):
        raise ValueError("probes must be positive")
    X, _ = clean_responses(agent, P)
    budgets = agent.budget_vector(P.shape[0])
    clean = Dataset(P, X, budgets)
    Y = X + agent.noise_sigma * rng.standard_normal(X.shape)
    return clean, Dataset(P, Y, budgets)


@dataclass(frozen=True)
class CusumConfig:
    """Fully informed CUSUM: known base exponents ``a``, perturbation and noise.

    ``alpha_candidates`` switches to the unknown-perturbation variant, which
    runs one recursion per candidate and alarms on the most likely one.
    """

    rho: float
    a: tuple[float, ...] = (0.6, 0.4)
    alpha: tuple[float, ...] = (1.0, 1.0)
    noise_sigma: float = math.sqrt(0.5)
    alpha_candidates: tuple[tuple[float, ...], ...] | None = None

    def __post_init__(self) -> None:
        if not self.rho > 0:
            raise ValueError("rho must be positive")


@dataclass(frozen=True)
class CusumResult:
    alarm_time: int | None
    tau_hat: int | None
    alpha: tuple[float, ...] | None = None
    statistic: NDArray[np.float64] = field(default=None, repr=False)  # type: ignore[assignment]


def log_likelihood_ratios(d: Dataset, a, alpha, sigma: float) -> NDArray[np.float64]:
    """``s(t) = log l(y_t, 1) - log l(y_t, 0)`` under Gaussian measurement noise."""
    if not sigma > 0:
        raise ValueError("CUSUM needs a positive noise level")
    zero = np.zeros(d.m)
    s = np.empty(d.T)
    for t in range(d.T):
        x0, _ = demand(a, zero, d.probes[t], d.budgets[t])
        x1, _ = demand(a, alpha, d.probes[t], d.budgets[t])
        y = d.responses[t]
        s[t] = (np.sum((y - x0) ** 2) - np.sum((y - x1) ** 2)) / (2.0 * sigma**2)
    return s


def _cusum_run(s: NDArray, rho: float) -> tuple[int | None, int | None, NDArray]:
    S = np.concatenate([[0.0], np.cumsum(s)])
    G = np.zeros(len(s) + 1)
    for t in range(1, len(s) + 1):
        G[t] = max(G[t - 1] + s[t - 1], 0.0)
        if G[t] > rho:
            # argmin over S(tau - 1), tau = 1..t
            return t, int(np.argmin(S[:t])) + 1, G[1:]
    return None, None, G[1:]


def cusum_detect(d: Dataset, cfg: CusumConfig) -> CusumResult:
    """Replay the CUSUM recursion; 1-based alarm time and change estimate."""
    if cfg.alpha_candidates is None:
        s = log_likelihood_ratios(d, cfg.a, cfg.alpha, cfg.noise_sigma)
        alarm, tau_hat, G = _cusum_run(s, cfg.rho)
        return CusumResult(alarm, tau_hat, tuple(cfg.alpha), G)

    runs = []
    for cand in cfg.alpha_candidates:
        s = log_likelihood_ratios(d, cfg.a, cand, cfg.noise_sigma)
        runs.append((tuple(cand), s, _cusum_run(s, float("inf"))[2]))
    G = np.max([g for _, _, g in runs], axis=0)
    hit = np.flatnonzero(G > cfg.rho)
    if hit.size == 0:
        return CusumResult(None, None, None, G)
    alarm = int(hit[0]) + 1
    best = max(runs, key=lambda r: r[2][alarm - 1])
    S = np.concatenate([[0.0], np.cumsum(best[1])])
    return CusumResult(alarm, int(np.argmin(S[:alarm])) + 1, best[0], G)


def cusum_score(d: Dataset, cfg: CusumConfig) -> float:
    """``max_t G(t)``: the smallest threshold at which the recursion would not alarm."""
    if cfg.alpha_candidates is None:
        s = log_likelihood_ratios(d, cfg.a, cfg.alpha, cfg.noise_sigma)
        return float(_cusum_run(s, float("inf"))[2].max(initial=0.0))
    return float(
        max(
            _cusum_run(log_likelihood_ratios(d, cfg.a, c, cfg.noise_sigma), float("inf"))[2].max(initial=0.0)
            for c in cfg.alpha_candidates
        )
    )


ROC_COLUMNS = ("method", "threshold", "fpr", "tpr", "n_trials", "seed")


@dataclass(frozen=True)
class RocPoint:
    method: str
    threshold: float
    fpr: float
    tpr: float


@dataclass(frozen=True)
class TrialScores:
    """Per-trial detector scores in the no-change (``h0``) and change (``h1``) worlds."""

    rp_h0: NDArray[np.float64]
    rp_h1: NDArray[np.float64]
    cusum_h0: NDArray[np.float64]
    cusum_h1: NDArray[np.float64]


@dataclass(frozen=True)
class RocTable:
    points: tuple[RocPoint, ...]
    n_trials: int
    seed: int

    def methods(self) -> list[str]:
        return sorted({p.method for p in self.points})

    def curve(self, method: str) -> tuple[NDArray, NDArray]:
        """``(fpr, tpr)`` ordered from the strictest to the loosest threshold.

        The trivial detectors (never / always flag) anchor the ends at
        ``(0, 0)`` and ``(1, 1)``; CUSUM cannot reach ``(1, 1)`` by itself
        when some no-change scores are exactly 0, since ``rho > 0``.
        """
        pts = sorted((p.fpr, p.tpr) for p in self.points if p.method == method)
        pts = [(0.0, 0.0)] + pts + [(1.0, 1.0)]
        fpr, tpr = np.array(pts).T
        return fpr, tpr

    def auc(self, method: str) -> float:
        fpr, tpr = self.curve(method)
        return float(np.trapezoid(tpr, fpr))

    def rows(self) -> list[tuple]:
        return [(p.method, p.threshold, p.fpr, p.tpr, self.n_trials, self.seed) for p in self.points]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(ROC_COLUMNS)
            w.writerows(self.rows())


def _trial_rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.default_rng([seed, trial])


def roc_scores(
    agent: CobbDouglasAgent,
    n_trials: int = 200,
    *,
    T: int = 50,
    seed: int = 0,
    probe_low: float = 1.0,
    probe_high: float = 2.0,
    n_samples: int = 2000,
    rp_mode: str = "classical",
    cusum: CusumConfig | None = None,
) -> TrialScores:
    """Detector scores on paired worlds sharing probes and noise draws.

    The no-change world is the same agent with ``alpha = 0``.  The RP score
    is the Monte Carlo p-value of the noisy revealed-preference test (small
    means "change"); the CUSUM score is ``max_t G(t)`` (large means "change").
    """
    from . import noisy

    if agent.noise_sigma <= 0:
        raise ValueError("the ROC harness needs a positive noise level")
    base = replace(agent, alpha=tuple(0.0 for _ in agent.alpha))
    cfg = cusum or CusumConfig(1.0, agent.a, agent.alpha, agent.noise_sigma)
    out = {k: np.empty(n_trials) for k in ("rp_h0", "rp_h1", "cusum_h0", "cusum_h1")}
    for i in range(n_trials):
        rng = _trial_rng(seed, i)
        probes = random_probes(T, agent.m, rng, probe_low, probe_high)
        noise_seed = int(rng.integers(2**63))
        mc_seed = int(rng.integers(2**63))
        for tag, who in (("h0", base), ("h1", agent)):
            _, d = generate(who, probes, noise_seed)
            rep = noisy.run_noisy_test(
                d, 0.05, rp_mode, n_samples, noise_sigma=agent.noise_sigma, seed=mc_seed, width=1e-4
            )
            out[f"rp_{tag}"][i] = rep.p_value_mc
            out[f"cusum_{tag}"][i] = cusum_score(d, cfg)
    return TrialScores(**out)


def _rates(neg: NDArray, pos: NDArray, flag) -> tuple[float, float]:
    return float(np.mean(flag(neg))), float(np.mean(flag(pos)))


def roc_from_scores(
    scores: TrialScores,
    *,
    gamma_grid: Sequence[float] | None = None,
    rho_grid: Sequence[float] | None = None,
    seed: int = 0,
) -> RocTable:
    """Sweep thresholds: RP flags ``p < gamma``, CUSUM flags ``max G > rho``.

    Default grids run through every observed score so each curve is the full
    empirical ROC, from (0, 0) to (1, 1).
    """
    n = scores.rp_h0.size
    if gamma_grid is None:
        seen = np.unique(np.r_[scores.rp_h0, scores.rp_h1])
        gamma_grid = np.r_[0.0, np.nextafter(seen, np.inf)]
    if rho_grid is None:
        seen = np.unique(np.r_[scores.cusum_h0, scores.cusum_h1])
        rho_grid = np.r_[np.nextafter(seen, -np.inf), seen.max(initial=0.0) + 1.0]
        rho_grid = rho_grid[rho_grid > 0]
    points = []
    for g in sorted(gamma_grid):
        fpr, tpr = _rates(scores.rp_h0, scores.rp_h1, lambda s: s < g)
        points.append(RocPoint("rp", float(g), fpr, tpr))
    for r in sorted(rho_grid, reverse=True):
        fpr, tpr = _rates(scores.cusum_h0, scores.cusum_h1, lambda s: s > r)
        points.append(RocPoint("cusum", float(r), fpr, tpr))
    return RocTable(tuple(points), n, seed)


def roc_harness(
    agent: CobbDouglasAgent,
    n_trials: int = 200,
    *,
    T: int = 50,
    seed: int = 0,
    gamma_grid: Sequence[float] | None = None,
    rho_grid: Sequence[float] | None = None,
    **kwargs,
) -> RocTable:
    """Paired-trial ROC comparison of the RP test and CUSUM."""
    if n_trials < 1:
        raise ValueError("n_trials must be positive")
    scores = roc_scores(agent, n_trials, T=T, seed=seed, **kwargs)
    return roc_from_scores(scores, gamma_grid=gamma_grid, rho_grid=rho_grid, seed=seed)


def load_agent(path: str) -> CobbDouglasAgent:
    with open(path, encoding="utf-8") as fh:
        return CobbDouglasAgent.from_dict(json.load(fh))


__all__: Sequence[str] = (
    "CobbDouglasAgent",
    "CusumConfig",
    "CusumResult",
    "RocPoint",
    "RocTable",
    "TrialScores",
    "cobb_douglas",
    "clean_responses",
    "cusum_detect",
    "cusum_score",
    "demand",
    "generate",
    "load_agent",
    "log_likelihood_ratios",
    "random_probes",
    "roc_from_scores",
    "roc_harness",
    "roc_scores",
)
