"""Constructors for the state families used throughout: the 2x4 bound
entangled family, Haar sampling with splittable seeds, and purifications."""

from __future__ import annotations

from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from math import sqrt

import numpy as np

from purent.linalg import DimList, HermitianOp, PureState, partial_trace

__all__ = ["Ensemble", "horodecki_state", "haar_random_pure", "purify"]


@dataclass(frozen=True)
class Ensemble:
    """Weighted collection of states; probabilities must sum to 1."""

    members: tuple[tuple[float, object], ...]

    def __post_init__(self):
        probs = np.array([p for p, _ in self.members], dtype=float)
        if probs.size == 0:
            raise ValueError("ensemble needs at least one member")
        if probs.min() < -1e-12:
            raise ValueError(f"negative probability {probs.min()}")
        if abs(probs.sum() - 1.0) > 1e-10:
            raise ValueError(f"probabilities sum to {probs.sum()}, expected 1")

    def average(self) -> HermitianOp:
        """Weighted average state sum_i p_i rho_i."""
        mats = []
        dims = None
        for p, st in self.members:
            rho = st.density() if isinstance(st, PureState) else st
            mats.append(p * rho.mat)
            dims = rho.dims
        return HermitianOp(np.sum(mats, axis=0), dims)

    def deviation_from(self, rho: HermitianOp) -> float:
        """Largest entry-wise deviation of the average from ``rho``."""
        return float(np.abs(self.average().mat - rho.mat).max())


def horodecki_state(a: float) -> HermitianOp:
    """The 2x4 PPT family rho_a, entangled for 0 < a < 1.

    Entries are the 8x8 matrix with diagonal (a,a,a,a,(1+a)/2,a,a,(1+a)/2),
    symmetric off-diagonal a at (0,5),(1,6),(2,7) and sqrt(1-a^2)/2 at (4,7),
    normalized by 1/(7a+1).
    """
    a = float(a)
    if not 0.0 <= a <= 1.0:
        raise ValueError(f"parameter a must lie in [0, 1], got {a}")
    b = sqrt(max(0.0, 1.0 - a * a)) / 2.0
    m = np.zeros((8, 8))
    np.fill_diagonal(m, [a, a, a, a, (1 + a) / 2, a, a, (1 + a) / 2])
    for i, j in ((0, 5), (1, 6), (2, 7)):
        m[i, j] = m[j, i] = a
    m[4, 7] = m[7, 4] = b
    return HermitianOp(m / (7 * a + 1), DimList((2, 4)))


def haar_random_pure(dims: Iterable[int], seed) -> PureState:
    """Haar-distributed pure state, deterministic per seed.

    ``seed`` is anything ``numpy.random.default_rng`` accepts; pass a pair
    ``[seed, k]`` to get an independent, reproducible stream for the k-th
    sample of a sweep.
    """
    d = DimList(dims)
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(d.total) + 1j * rng.standard_normal(d.total)
    return PureState(z / np.linalg.norm(z), d)


def purify(r: HermitianOp, rank_tol: float = 1e-12) -> PureState:
    """Purification of a state with the purifier as the FIRST subsystem.

    The purifier dimension equals the number of eigenvalues above
    ``rank_tol`` relative to the largest one; tracing the purifier out
    reproduces the input.  Placing the purifier first keeps identity
    constraints of the assisted-cooling programs anchored at subsystem 0.
    """
    if abs(r.trace() - 1.0) > 1e-9:
        raise ValueError(f"purify expects a unit-trace state, got trace {r.trace()}")
    w, v = np.linalg.eigh(r.mat)
    if w[0] < -1e-9:
        raise ValueError("purify expects a positive semidefinite state")
    w = w[::-1]
    v = v[:, ::-1]
    keep = w > rank_tol * max(w[0], np.finfo(float).tiny)
    rank = int(keep.sum())
    amps = (np.sqrt(np.clip(w[keep], 0.0, None))[:, None] * v[:, keep].T).ravel()
    amps = amps / np.linalg.norm(amps)
    return PureState(amps, DimList((rank,) + tuple(r.dims)))
