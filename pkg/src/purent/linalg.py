"""Dense complex Hermitian linear algebra with multipartite tensor indexing.

Everything in this module is a pure function over immutable values: matrices
are stored as read-only ``numpy`` arrays and every operation returns a fresh
object, so values can be shared freely across threads.
"""

from __future__ import annotations

from collections.abc import Iterable, Sequence
from math import prod

import numpy as np

__all__ = [
    "DimList",
    "HermitianOp",
    "PureState",
    "identity",
    "basis_state",
    "tensor",
    "partial_trace",
    "partial_transpose",
    "eigh",
    "schmidt",
    "fidelity",
    "real_embed",
]

# Constructor gates; the post-construction guarantees are tighter (symmetrized
# storage, exactly normalized vectors).
_HERM_ATOL = 1e-9
_NORM_ATOL = 1e-9


class DimList(tuple):
    """Ordered subsystem dimensions of a tensor-product space."""

    def __new__(cls, dims: Iterable[int]):
        entries = tuple(int(d) for d in dims)
        if any(d < 1 for d in entries):
            raise ValueError(f"subsystem dimensions must be >= 1, got {entries}")
        return super().__new__(cls, entries)

    @property
    def total(self) -> int:
        """Side length of any operator carrying these dimensions."""
        return prod(self) if len(self) else 1


def _as_dims(dims, side: int) -> DimList:
    d = DimList(dims) if not isinstance(dims, DimList) else dims
    if d.total != side:
        raise ValueError(f"dims {tuple(d)} do not multiply to side length {side}")
    return d


class HermitianOp:
    """Complex Hermitian matrix on a multipartite space.

    The constructor symmetrizes the input as (M + M^dag)/2 and rejects
    matrices whose Hermiticity defect exceeds 1e-9 relative to the largest
    entry.  The stored array is read-only.

    Parameters
    ----------
    mat : array_like
        Square complex matrix.
    dims : iterable of int, optional
        Subsystem dimensions; defaults to a single subsystem of full size.
    """

    __slots__ = ("mat", "dims")

    def __init__(self, mat, dims: Iterable[int] | None = None):
        arr = np.array(mat, dtype=np.complex128)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {arr.shape}")
        side = arr.shape[0]
        scale = max(1.0, float(np.abs(arr).max()) if side else 1.0)
        defect = float(np.abs(arr - arr.conj().T).max())
        if defect > _HERM_ATOL * scale:
            raise ValueError(f"matrix is not Hermitian (defect {defect:.3e})")
        arr = (arr + arr.conj().T) / 2.0
        arr.setflags(write=False)
        object.__setattr__(self, "mat", arr)
        object.__setattr__(self, "dims", _as_dims(dims if dims is not None else (side,), side))

    def __setattr__(self, name, value):
        raise AttributeError("HermitianOp is immutable")

    @property
    def side(self) -> int:
        return self.mat.shape[0]

    @property
    def n_parties(self) -> int:
        return len(self.dims)

    def trace(self) -> float:
        return float(np.trace(self.mat).real)

    def min_eig(self) -> float:
        return float(np.linalg.eigvalsh(self.mat)[0])

    def __add__(self, other: "HermitianOp") -> "HermitianOp":
        self._check_compatible(other)
        return HermitianOp(self.mat + other.mat, self.dims)

    def __sub__(self, other: "HermitianOp") -> "HermitianOp":
        self._check_compatible(other)
        return HermitianOp(self.mat - other.mat, self.dims)

    def __mul__(self, scalar) -> "HermitianOp":
        s = float(scalar)
        return HermitianOp(self.mat * s, self.dims)

    __rmul__ = __mul__

    def __neg__(self) -> "HermitianOp":
        return HermitianOp(-self.mat, self.dims)

    def _check_compatible(self, other: "HermitianOp") -> None:
        if self.dims != other.dims:
            raise ValueError(f"dimension mismatch: {tuple(self.dims)} vs {tuple(other.dims)}")

    def __repr__(self) -> str:
        return f"HermitianOp(side={self.side}, dims={tuple(self.dims)})"


class PureState:
    """Unit-norm complex vector on a multipartite space."""

    __slots__ = ("vec", "dims")

    def __init__(self, amplitudes, dims: Iterable[int] | None = None):
        vec = np.array(amplitudes, dtype=np.complex128).ravel()
        nrm = float(np.linalg.norm(vec))
        if abs(nrm - 1.0) > _NORM_ATOL:
            raise ValueError(f"state vector norm {nrm} deviates from 1 beyond {_NORM_ATOL}")
        vec = vec / nrm
        vec.setflags(write=False)
        object.__setattr__(self, "vec", vec)
        object.__setattr__(self, "dims", _as_dims(dims if dims is not None else (vec.size,), vec.size))

    def __setattr__(self, name, value):
        raise AttributeError("PureState is immutable")

    @property
    def side(self) -> int:
        return self.vec.size

    def density(self) -> HermitianOp:
        return HermitianOp(np.outer(self.vec, self.vec.conj()), self.dims)

    def __repr__(self) -> str:
        return f"PureState(side={self.side}, dims={tuple(self.dims)})"


def identity(dims: Iterable[int]) -> HermitianOp:
    """Identity operator on the given tensor structure."""
    d = DimList(dims)
    return HermitianOp(np.eye(d.total), d)


def basis_state(dims: Iterable[int], occupation: Sequence[int]) -> PureState:
    """Computational-basis product state |occupation[0], occupation[1], ...>."""
    d = DimList(dims)
    if len(occupation) != len(d):
        raise ValueError("occupation length must match number of subsystems")
    idx = int(np.ravel_multi_index(tuple(occupation), tuple(d)))
    vec = np.zeros(d.total, dtype=np.complex128)
    vec[idx] = 1.0
    return PureState(vec, d)


def tensor(a, b):
    """Tensor product; dims are concatenated.  Accepts two operators or two states."""
    if isinstance(a, HermitianOp) and isinstance(b, HermitianOp):
        return HermitianOp(np.kron(a.mat, b.mat), DimList(tuple(a.dims) + tuple(b.dims)))
    if isinstance(a, PureState) and isinstance(b, PureState):
        return PureState(np.kron(a.vec, b.vec), DimList(tuple(a.dims) + tuple(b.dims)))
    raise TypeError("tensor expects two HermitianOp or two PureState arguments")


def _check_subsystems(indices: Iterable[int], n: int) -> tuple[int, ...]:
    subs = tuple(sorted(set(int(i) for i in indices)))
    if any(i < 0 or i >= n for i in subs):
        raise ValueError(f"subsystem indices {subs} out of range for {n} parties")
    return subs


def partial_trace(m: HermitianOp, keep: Iterable[int]) -> HermitianOp:
    """Trace out all subsystems not listed in ``keep`` (kept order is ascending)."""
    dims = m.dims
    n = len(dims)
    kept = _check_subsystems(keep, n)
    if not kept:
        return HermitianOp([[np.trace(m.mat)]], (1,))
    tens = m.mat.reshape(tuple(dims) * 2)
    row_labels = list(range(n))
    col_labels = [n + i if i in kept else i for i in range(n)]
    out_labels = [i for i in kept] + [n + i for i in kept]
    reduced = np.einsum(tens, row_labels + col_labels, out_labels)
    side = prod(dims[i] for i in kept)
    return HermitianOp(reduced.reshape(side, side), tuple(dims[i] for i in kept))


def partial_transpose(m: HermitianOp, subs: Iterable[int]) -> HermitianOp:
    """Transpose the chosen tensor factors; a pure entry permutation."""
    dims = m.dims
    n = len(dims)
    chosen = _check_subsystems(subs, n)
    tens = m.mat.reshape(tuple(dims) * 2)
    axes = list(range(2 * n))
    for k in chosen:
        axes[k], axes[n + k] = axes[n + k], axes[k]
    out = tens.transpose(axes).reshape(m.side, m.side)
    return HermitianOp(out, dims)


def _canonical_phase(column: np.ndarray) -> np.ndarray:
    amax = np.abs(column).max()
    if amax == 0.0:
        return column
    k = int(np.argmax(np.abs(column) > 1e-8 * amax))
    ph = column[k] / abs(column[k])
    return column * ph.conj()


def eigh(m: HermitianOp) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition with deterministic ordering.

    Returns eigenvalues in descending order and eigenvectors as matching
    columns.  Each eigenvector is phase-fixed so its first significant
    amplitude is real positive; near-degenerate eigenvalues are ordered by
    lexicographically greatest real part of the phase-fixed vectors.
    """
    w, v = np.linalg.eigh(m.mat)
    order = np.argsort(-w, kind="stable")
    w = w[order]
    v = v[:, order].copy()
    for c in range(v.shape[1]):
        v[:, c] = _canonical_phase(v[:, c])
    tie_tol = 1e-12 * max(1.0, float(np.abs(w).max()) if w.size else 1.0)
    start = 0
    while start < w.size:
        stop = start + 1
        while stop < w.size and abs(w[stop] - w[stop - 1]) <= tie_tol:
            stop += 1
        if stop - start > 1:
            cols = sorted(range(start, stop), key=lambda c: tuple(-np.round(v[:, c].real, 12)))
            v[:, start:stop] = v[:, cols]
            w[start:stop] = w[cols]
        start = stop
    v.setflags(write=False)
    w.setflags(write=False)
    return w, v


def schmidt(v: PureState, cut: Iterable[int]) -> tuple[np.ndarray, tuple[np.ndarray, np.ndarray]]:
    """Schmidt decomposition across the bipartition (cut | rest).

    Returns the squared Schmidt coefficients ``p`` in descending order and a
    pair of column matrices ``(a, b)`` with local vectors on the grouped left
    and right factors, so that ``v = sum_i sqrt(p_i) a_i (x) b_i``.
    """
    dims = v.dims
    n = len(dims)
    left = _check_subsystems(cut, n)
    if not left or len(left) == n:
        raise ValueError("cut must be a nontrivial bipartition")
    right = tuple(i for i in range(n) if i not in left)
    tens = v.vec.reshape(tuple(dims))
    mat = tens.transpose(left + right).reshape(
        prod(dims[i] for i in left), prod(dims[i] for i in right)
    )
    u, s, vh = np.linalg.svd(mat, full_matrices=False)
    a = u.copy()
    b = vh.T.copy()
    for c in range(a.shape[1]):
        amax = np.abs(a[:, c]).max()
        if amax > 0.0:
            k = int(np.argmax(np.abs(a[:, c]) > 1e-8 * amax))
            ph = a[k, c] / abs(a[k, c])
            a[:, c] *= ph.conj()
            b[:, c] *= ph
    p = s**2
    p = p / p.sum()
    return p, (a, b)


def fidelity(r: HermitianOp, s: HermitianOp) -> float:
    """Uhlmann fidelity (Tr sqrt(sqrt(r) s sqrt(r)))^2 of two states."""
    for st in (r, s):
        if abs(st.trace() - 1.0) > 1e-9:
            raise ValueError(f"fidelity input must have unit trace, got {st.trace()}")
    wr = np.linalg.eigvalsh(r.mat)
    ws = np.linalg.eigvalsh(s.mat)
    if wr[0] < -1e-9 or ws[0] < -1e-9:
        raise ValueError("fidelity input is not positive semidefinite")
    w, v = np.linalg.eigh(r.mat)
    sqrt_r = (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T
    inner = sqrt_r @ s.mat @ sqrt_r
    ev = np.clip(np.linalg.eigvalsh(inner), 0.0, None)
    return float(min(1.0, np.sqrt(ev).sum() ** 2))


def real_embed(m: HermitianOp) -> HermitianOp:
    """Real symmetric embedding [[Re, -Im], [Im, Re]] of doubled side.

    The embedding is PSD iff the input is, every eigenvalue appears twice and
    the trace doubles; callers translating trace-like quantities back must
    divide by 2.  The doubling factor is exposed as leading subsystem 0.
    """
    re = m.mat.real
    im = m.mat.imag
    emb = np.block([[re, -im], [im, re]])
    return HermitianOp(emb, DimList((2,) + tuple(m.dims)))
