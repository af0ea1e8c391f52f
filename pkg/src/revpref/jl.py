"""Johnson-Lindenstrauss projection for GARP checks on very wide probes.

The map is the database-friendly one: ``B = A R / sqrt(k)`` with ``R`` an
``m x k`` matrix of independent, equiprobable ``+1``/``-1`` entries.  For
vectors of norm at most one, every inner product moves by less than ``epsilon``
with probability at least ``1 - n**-beta`` once ``k`` clears the bound in
:func:`target_dimension`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .core import Dataset, DimensionMismatch, DomainError, get_tol
from .garp import GarpVerdict, check_garp, relation_from_expenditure

# Above this many exact inner products the distortion audit is skipped.
EXACT_AUDIT_LIMIT = 50_000_000


def _check_epsilon(epsilon: float) -> None:
    if not 0.0 < epsilon < 0.5:
        raise DomainError(f"epsilon must lie in (0, 0.5), got {epsilon}")


def target_dimension(epsilon: float, beta: float, n: int) -> int:
    """``ceil((4 + 2 beta) / (eps^2/2 - eps^3/3) * ln n)``.

    >>> target_dimension(0.1, 0.65, 30)
    3863
    """
    _check_epsilon(epsilon)
    if not beta > 0:
        raise DomainError(f"beta must be positive, got {beta}")
    if n < 2:
        raise DomainError(f"need at least two vectors, got n={n}")
    return math.ceil((4.0 + 2.0 * beta) / (epsilon**2 / 2.0 - epsilon**3 / 3.0) * math.log(n))


@dataclass(frozen=True)
class EmbeddingConfig:
    """Projection parameters; ``k`` is derived from ``(epsilon, beta, n)`` unless given.

    ``identity=True`` is a debug mode that replaces ``R`` by ``sqrt(m) I``
    (so ``k = m`` and the map is the identity).
    """

    epsilon: float
    beta: float
    n: int
    seed: int = 0
    k: int | None = None
    identity: bool = False

    def __post_init__(self) -> None:
        need = target_dimension(self.epsilon, self.beta, self.n)
        if self.k is None:
            object.__setattr__(self, "k", need)
        elif self.k < 1:
            raise DomainError("k must be positive")

    @property
    def delta(self) -> float:
        """Failure probability ``n**-beta`` of the distortion guarantee."""
        return float(self.n) ** (-self.beta)

    @classmethod
    def for_dataset(cls, d: Dataset, epsilon: float, beta: float, seed: int = 0) -> "EmbeddingConfig":
        """Config for the ``2T`` probe and response vectors of ``d``."""
        return cls(epsilon, beta, max(2 * d.T, 2), seed)

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "beta": self.beta,
            "n": self.n,
            "k": self.k,
            "seed": self.seed,
            "identity": self.identity,
        }


def projection_matrix(m: int, cfg: EmbeddingConfig) -> NDArray[np.float64]:
    """The ``m x k`` matrix ``R`` (before the ``1/sqrt(k)`` factor)."""
    if cfg.identity:
        return math.sqrt(m) * np.eye(m)
    rng = np.random.default_rng(cfg.seed)
    signs = rng.integers(0, 2, size=(m, cfg.k), dtype=np.int8)
    return (2.0 * signs - 1.0).astype(float)


def embed(vectors: ArrayLike, cfg: EmbeddingConfig) -> NDArray[np.float64]:
    """Map each row of ``vectors`` (``n x m``) to ``R^k``; row order is kept."""
    A = np.asarray(vectors, dtype=float)
    if A.ndim != 2 or A.shape[1] == 0:
        raise DimensionMismatch(f"expected an n x m matrix, got shape {A.shape}")
    R = projection_matrix(A.shape[1], cfg)
    return A @ R / math.sqrt(R.shape[1])


@dataclass(frozen=True)
class EmbeddedGarpReport:
    verdict: GarpVerdict
    m: int
    k: int
    slack: float
    savings: float
    max_distortion: float | None
    violation_rate: float | None
    delta: float

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict.to_dict(),
            "m": self.m,
            "k": self.k,
            "slack": self.slack,
            "savings": self.savings,
            "max_distortion": self.max_distortion,
            "violation_rate": self.violation_rate,
            "delta": self.delta,
        }


def unit_scaled(d: Dataset) -> tuple[NDArray, NDArray]:
    """Probes and responses divided by their largest row norms.

    Each family is scaled by one positive constant, so every comparison
    ``p_t.x_t`` versus ``p_t.x_s`` keeps its sign.
    """
    P = d.probes / np.linalg.norm(d.probes, axis=1).max()
    nx = np.linalg.norm(d.responses, axis=1).max()
    X = d.responses / nx if nx > 0 else d.responses.copy()
    return P, X


def garp_embedded(d: Dataset, cfg: EmbeddingConfig) -> EmbeddedGarpReport:
    """GARP on projected inner products with comparison slack ``2 epsilon``.

    A revealed preference is only recorded when it survives the worst-case
    drift of both compared inner products.  In identity mode the slack is 0
    and the verdict equals the exact one.
    """
    P, X = unit_scaled(d)
    B = embed(np.vstack([P, X]), cfg)
    Pk, Xk = B[: d.T], B[d.T :]
    E_emb = Pk @ Xk.T
    slack = 0.0 if cfg.identity else 2.0 * cfg.epsilon
    verdict = check_garp(relation_from_expenditure(E_emb, tol=get_tol(), slack=slack))

    max_dist = rate = None
    if d.T * d.T * d.m <= EXACT_AUDIT_LIMIT:
        err = np.abs(E_emb - P @ X.T)
        max_dist = float(err.max())
        rate = float(np.mean(err >= cfg.epsilon))
    k = d.m if cfg.identity else int(cfg.k)
    return EmbeddedGarpReport(verdict, d.m, k, slack, d.m / k, max_dist, rate, cfg.delta)


__all__ = [
    "EmbeddedGarpReport",
    "EmbeddingConfig",
    "embed",
    "garp_embedded",
    "projection_matrix",
    "target_dimension",
    "unit_scaled",
]
