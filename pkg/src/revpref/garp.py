"""Revealed-preference relations and the GARP check."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .core import Dataset, get_tol


@dataclass(frozen=True, eq=False)
class PreferenceRelation:
    """Direct, strict and transitively closed revealed preference.

    ``direct[t, s]`` means bundle ``t`` is directly revealed preferred to ``s``
    (``p_t.x_t >= p_t.x_s``); ``strict`` is the same with ``>``.
    """

    direct: NDArray[np.bool_]
    strict: NDArray[np.bool_]
    closure: NDArray[np.bool_]

    @property
    def T(self) -> int:
        return self.direct.shape[0]


@dataclass(frozen=True)
class GarpVerdict:
    passed: bool
    witness: tuple[int, int] | None = None
    cycle: tuple[int, ...] | None = None

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "witness": None if self.witness is None else list(self.witness),
            "cycle": None if self.cycle is None else list(self.cycle),
        }


def warshall(adj: NDArray[np.bool_]) -> NDArray[np.bool_]:
    """Transitive closure, O(T^3)."""
    closure = np.array(adj, dtype=bool, copy=True)
    for k in range(closure.shape[0]):
        closure |= closure[:, k, None] & closure[None, k, :]
    return closure


def relation_from_expenditure(
    E: NDArray[np.float64], *, tol: float | None = None, slack: float = 0.0
) -> PreferenceRelation:
    """Build the relation from ``E[t, s] = p_t . x_s``.

    A comparison only counts once it clears ``slack``: ``direct`` needs
    ``E[t,t] - E[t,s] >= slack - tol`` and ``strict`` needs ``> slack + tol``.
    ``slack=0`` gives the plain tolerance-guarded relation.
    """
    tol = get_tol() if tol is None else tol
    E = np.asarray(E, dtype=float)
    margin = np.diag(E)[:, None] - E
    direct = margin >= slack - tol
    np.fill_diagonal(direct, True)
    strict = margin > slack + tol
    np.fill_diagonal(strict, False)
    return PreferenceRelation(direct, strict, warshall(direct))


def build_relation(d: Dataset, *, tol: float | None = None) -> PreferenceRelation:
    return relation_from_expenditure(d.expenditure(), tol=tol)


def _path(direct: NDArray[np.bool_], src: int, dst: int) -> list[int]:
    # BFS over direct edges; only called when closure[src, dst] holds
    prev = {src: src}
    frontier = [src]
    while frontier and dst not in prev:
        nxt = []
        for a in frontier:
            for b in np.flatnonzero(direct[a]):
                b = int(b)
                if b not in prev:
                    prev[b] = a
                    nxt.append(b)
        frontier = nxt
    path = [dst]
    while path[-1] != src:
        path.append(prev[path[-1]])
    return path[::-1]


def check_garp(rel: PreferenceRelation) -> GarpVerdict:
    """GARP holds iff no ``(t, s)`` has ``closure[t, s]`` and ``strict[s, t]``.

    On failure the lexicographically first violating pair is returned as a
    ``witness`` together with a cycle ``t -> ... -> s -> t``.  Both use
    1-based observation numbers, like change-point indices.
    """
    bad = rel.closure & rel.strict.T
    if not bad.any():
        return GarpVerdict(True)
    t, s = (int(i) for i in np.argwhere(bad)[0])
    cycle = [i + 1 for i in _path(rel.direct, t, s)] + [t + 1]
    return GarpVerdict(False, (t + 1, s + 1), tuple(cycle))


def garp(d: Dataset, *, tol: float | None = None) -> GarpVerdict:
    return check_garp(build_relation(d, tol=tol))
