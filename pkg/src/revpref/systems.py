"""Assembly of the Afriat-type inequality systems shared by several modules.

All systems have the form, for every ordered pair ``t != s``::

    v_s - v_t - lam_t * (p_t.(x_s - x_t) + phi) + [t >= tau] alpha.(x_s - x_t) - Phi <= 0

with ``alpha_i <= lam_t p_t^i`` for ``t >= tau``.  ``phi`` is a fixed adjustment
multiplying ``lam_t``; ``Phi`` is an optional free adjustment variable.
``tau`` is 1-based and ``tau = T + 1`` means "no change".
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .core import LAMBDA_MIN
from .lpqp import LinearProgram


@dataclass(frozen=True)
class Layout:
    T: int
    m: int
    has_alpha: bool
    has_phi: bool

    @property
    def v(self) -> slice:
        return slice(0, self.T)

    @property
    def lam(self) -> slice:
        return slice(self.T, 2 * self.T)

    @property
    def alpha(self) -> slice:
        start = 2 * self.T
        return slice(start, start + (self.m if self.has_alpha else 0))

    @property
    def phi(self) -> int:
        return 2 * self.T + (self.m if self.has_alpha else 0)

    @property
    def n(self) -> int:
        return self.phi + int(self.has_phi)


def pair_index(T: int) -> tuple[NDArray[np.intp], NDArray[np.intp]]:
    t, s = np.nonzero(~np.eye(T, dtype=bool))
    return t, s


def build_system(
    probes: NDArray,
    responses: NDArray,
    tau: int | None = None,
    *,
    phi: float = 0.0,
    free_phi: bool = False,
    with_alpha: bool = True,
    lam_floor: float = LAMBDA_MIN,
    normalize: tuple[float, float] | None = (0.0, 1.0),
) -> tuple[LinearProgram, Layout]:
    """Return the feasibility LP (zero objective) and its variable layout.

    ``normalize=(beta, delta)`` pins ``v_1 = beta`` and ``lam_1 = delta``.
    """
    P = np.asarray(probes, dtype=float)
    X = np.asarray(responses, dtype=float)
    T, m = P.shape
    if tau is None:
        tau = T + 1
    post = np.arange(T) >= tau - 1
    with_alpha = with_alpha and bool(post.any())
    lay = Layout(T, m, with_alpha, free_phi)

    t, s = pair_index(T)
    E = P @ X.T
    cost = E[t, s] - E[t, t]
    k = len(t)
    rows = np.zeros((k, lay.n))
    r = np.arange(k)
    rows[r, s] += 1.0
    rows[r, t] -= 1.0
    rows[r, T + t] = -(cost + phi)
    if with_alpha:
        hit = post[t]
        rows[np.ix_(hit, np.arange(lay.alpha.start, lay.alpha.stop))] = X[s[hit]] - X[t[hit]]
    if free_phi:
        rows[:, lay.phi] = -1.0

    lp = LinearProgram(np.zeros(lay.n))
    lp.add(rows, "<=", 0.0)
    if with_alpha:
        tp = np.flatnonzero(post)
        cap = np.zeros((len(tp) * m, lay.n))
        for j, tt in enumerate(tp):
            blk = slice(j * m, (j + 1) * m)
            cap[blk, lay.alpha] = np.eye(m)
            cap[blk, T + tt] = -P[tt]
        lp.add(cap, "<=", 0.0)
        lp.set_bounds(lay.alpha, 0.0, np.inf)
    lp.set_bounds(lay.lam, lam_floor, np.inf)
    if free_phi:
        lp.set_bounds(lay.phi, 0.0, np.inf)
    if normalize is not None:
        beta, delta = normalize
        lp.set_bounds(0, beta, beta)
        lp.set_bounds(T, delta, delta)
    return lp, lay


def max_violation(
    probes: NDArray,
    responses: NDArray,
    v: NDArray,
    lam: NDArray,
    alpha: NDArray | None = None,
    tau: int | None = None,
    *,
    phi: float = 0.0,
) -> float:
    """Largest violation of the system at a candidate point (0 if feasible)."""
    P = np.asarray(probes, dtype=float)
    X = np.asarray(responses, dtype=float)
    T, m = P.shape
    tau = T + 1 if tau is None else tau
    alpha = np.zeros(m) if alpha is None else np.asarray(alpha, dtype=float)
    post = np.arange(T) >= tau - 1
    t, s = pair_index(T)
    E = P @ X.T
    lhs = v[s] - v[t] - lam[t] * (E[t, s] - E[t, t] + phi)
    lhs = lhs + np.where(post[t], (X[s] - X[t]) @ alpha, 0.0)
    worst = float(lhs.max(initial=0.0))
    if post.any():
        worst = max(worst, float((alpha[None, :] - lam[post, None] * P[post]).max()))
        worst = max(worst, float((-alpha).max()))
    return max(worst, 0.0)
