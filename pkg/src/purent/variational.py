"""See-saw lower bounds complementing the SDP upper bounds.

Each routine is an alternating maximization whose subproblems are solved
exactly (top eigenvector, Schmidt decomposition, or a small SDP), so the
objective is nondecreasing step by step.  Restarts are independent and
deterministic per (seed, restart index); the best value wins, ties broken by
restart index.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import prod

import numpy as np

from purent import sdp
from purent.linalg import DimList, HermitianOp, PureState, eigh
from purent.states import Ensemble

__all__ = [
    "SeesawResult",
    "ArrowSeesawResult",
    "ConvexRoofResult",
    "fmax_product_seesaw",
    "f_arrow_seesaw",
    "eg_upper_convex_roof",
]


@dataclass
class SeesawResult:
    value: float
    states: list[PureState]
    history: np.ndarray


@dataclass
class ArrowSeesawResult:
    value: float
    povm: list[HermitianOp]
    targets: list[PureState]
    history: np.ndarray


@dataclass
class ConvexRoofResult:
    value: float
    ensemble: Ensemble
    isometry: np.ndarray
    history: np.ndarray


def _haar_vec(rng, d):
    z = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return z / np.linalg.norm(z)


def _top_eigvec(mat: np.ndarray) -> tuple[float, np.ndarray]:
    w, v = eigh(HermitianOp(mat))
    return float(w[0]), v[:, 0]


# ---------------------------------------------------------------------------
# Product-state see-saw for the joint ground-state overlap.
# ---------------------------------------------------------------------------


def _conditional_operator(tens, dims, vectors, k):
    """Contract all parties but ``k`` with their vectors (bra rows, ket cols)."""
    n = len(dims)
    operands = [tens, list(range(2 * n))]
    for l in range(n):
        if l == k:
            continue
        operands.extend([vectors[l].conj(), [l]])
        operands.extend([vectors[l], [n + l]])
    operands.append([k, n + k])
    return np.einsum(*operands)


def fmax_product_seesaw(
    rho: HermitianOp,
    parties=None,
    restarts: int = 20,
    seed: int = 0,
    init=None,
    max_sweeps: int = 500,
    tol: float = 1e-12,
) -> SeesawResult:
    """Best product-state overlap <phi_1...phi_n| rho |phi_1...phi_n>.

    Cycles the parties, replacing each local vector by the top eigenvector of
    the operator obtained by contracting all other parties; this never
    decreases the overlap.  ``init`` optionally provides the starting vectors
    for restart 0 (one per party).
    """
    dims = DimList(parties) if parties is not None else rho.dims
    if len(dims) < 2:
        raise ValueError("need at least two parties")
    if dims.total != rho.side:
        raise ValueError("parties do not match the state side")
    n = len(dims)
    tens = rho.mat.reshape(tuple(dims) * 2)

    best = None
    for rest in range(max(1, restarts)):
        rng = np.random.default_rng([seed, rest])
        if rest == 0 and init is not None:
            vectors = [np.array(v.vec if isinstance(v, PureState) else v, dtype=complex) for v in init]
        else:
            vectors = [_haar_vec(rng, d) for d in dims]
        history = []
        value = -np.inf
        for _ in range(max_sweeps):
            prev = value
            for k in range(n):
                op = _conditional_operator(tens, dims, vectors, k)
                value, vectors[k] = _top_eigvec(op)
                history.append(value)
            if value - prev < tol:
                break
        if best is None or value > best.value:
            best = SeesawResult(
                value=value,
                states=[PureState(v, (d,)) for v, d in zip(vectors, dims)],
                history=np.array(history),
            )
    return best


# ---------------------------------------------------------------------------
# POVM alternation for one-way assisted cooling.
# ---------------------------------------------------------------------------


def _conditional_bob(rho4, m_op):
    """Unnormalized Bob state Tr_A[(M (x) 1) rho]."""
    return np.einsum("ac,cbad->bd", m_op, rho4)


def _conditional_alice(rho4, mu_op):
    """Alice-side reward Tr_B[(1 (x) mu) rho]."""
    return np.einsum("db,abcd->ac", mu_op, rho4)


def _random_povm(rng, d, m):
    mats = []
    for _ in range(m):
        g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        mats.append(g @ g.conj().T)
    total = np.sum(mats, axis=0)
    w, v = np.linalg.eigh(total)
    isq = (v / np.sqrt(w)) @ v.conj().T
    return [isq @ g @ isq for g in mats]


def _projective_init(rho: HermitianOp, m: int):
    from purent.linalg import partial_trace

    rho_a = partial_trace(rho, (0,))
    _, vecs = eigh(rho_a)
    d = rho_a.side
    povm = [np.outer(vecs[:, i], vecs[:, i].conj()) for i in range(d)]
    povm += [np.zeros((d, d), dtype=complex) for _ in range(m - d)]
    return povm


def _povm_sdp_step(rewards, d):
    """Maximize sum_i Tr[M_i N_i] over POVMs {M_i} (small multi-block SDP)."""
    m = len(rewards)
    blocks = [DimList((d,))] * m
    cones = [(i, "psd", ()) for i in range(m)]
    rows = []
    eye_coords = sdp._hvec(np.eye(d, dtype=complex))
    basis = np.eye(d * d)
    for r in range(d * d):
        op = sdp._hmat(basis[r], d)
        rows.append(([op] * m, float(eye_coords[r])))
    sols = sdp._solve_blocks(blocks, rewards, cones, rows, tol_gap=1e-9, tol_feas=1e-9)
    return [s.maximizer.mat for s in sols]


def f_arrow_seesaw(
    rho: HermitianOp,
    m: int | None = None,
    restarts: int = 10,
    seed: int = 0,
    tol: float = 1e-10,
    max_alternations: int = 100,
) -> ArrowSeesawResult:
    """Alternating lower bound on one-way assisted cooling of subsystem B.

    Alternates (a) replacing each target state by the top eigenvector of the
    conditional Bob state and (b) re-optimizing the POVM by a small SDP with
    the targets fixed.  Restart 0 measures in the eigenbasis of rho^A.
    """
    if len(rho.dims) != 2:
        raise ValueError("expected a bipartite state")
    da, db = rho.dims
    if m is None:
        m = da * da
    rho4 = rho.mat.reshape(da, db, da, db)

    best = None
    for rest in range(max(1, restarts)):
        rng = np.random.default_rng([seed, rest])
        povm = _projective_init(rho, m) if rest == 0 else _random_povm(rng, da, m)
        targets = [np.zeros(db, dtype=complex) for _ in range(m)]
        targets = [t.copy() for t in targets]
        for i in range(m):
            targets[i][0] = 1.0
        history = []
        value = -np.inf
        for _ in range(max_alternations):
            prev = value
            value = 0.0
            for i in range(m):
                cond = _conditional_bob(rho4, povm[i])
                if abs(np.trace(cond)) > 1e-14:
                    lam, vec = _top_eigvec(cond)
                    targets[i] = vec
                    value += lam
                else:
                    value += float(np.real(targets[i].conj() @ cond @ targets[i]))
            history.append(value)
            rewards = [
                _conditional_alice(rho4, np.outer(t, t.conj())) for t in targets
            ]
            povm = _povm_sdp_step(rewards, da)
            value = sum(
                float(np.einsum("ij,ji->", mi, ni).real) for mi, ni in zip(povm, rewards)
            )
            history.append(value)
            if value - prev < tol:
                break
        # Exact POVM feasibility: symmetric renormalization plus spectral clip.
        povm = [(p + p.conj().T) / 2 for p in povm]
        clipped = []
        for p in povm:
            w, v = np.linalg.eigh(p)
            clipped.append((v * np.clip(w, 0.0, None)) @ v.conj().T)
        total = np.sum(clipped, axis=0)
        w, v = np.linalg.eigh(total)
        isq = (v / np.sqrt(w)) @ v.conj().T
        povm = [isq @ p @ isq for p in clipped]
        value = 0.0
        for i in range(m):
            cond = _conditional_bob(rho4, povm[i])
            lam, vec = _top_eigvec(cond)
            targets[i] = vec
            value += lam
        history.append(value)
        if best is None or value > best.value:
            best = ArrowSeesawResult(
                value=value,
                povm=[HermitianOp(p, (da,)) for p in povm],
                targets=[PureState(t, (db,)) for t in targets],
                history=np.array(history),
            )
    return best


# ---------------------------------------------------------------------------
# Convex-roof ensemble see-saw upper bound on geometric entanglement.
# ---------------------------------------------------------------------------


def _member_schmidt_tops(psi_cols, db, dc):
    """Per unnormalized member: squared top Schmidt value and product witness."""
    tops = []
    witnesses = []
    for i in range(psi_cols.shape[1]):
        mat = psi_cols[:, i].reshape(db, dc)
        u, s, vh = np.linalg.svd(mat, full_matrices=False)
        tops.append(s[0] ** 2)
        # <witness|psi_i> = u0^H mat v0 = s[0] for witness = u0 (x) conj(v0)
        witnesses.append(np.kron(u[:, 0], vh[0, :]))
    return np.array(tops), witnesses


def _jacobi_rotation(a_i, a_j):
    """Optimal 2x2 unitary mixing of an ensemble-member pair.

    Maximizes |a_i . u|^2 + |a_j . u_perp|^2 over unit u; the optimum is the
    top eigenvector of the 2x2 Hermitian matrix A - B with A, B the rank-one
    forms of a_i and a_j.  Returns (u, u_perp, gain) or None.
    """
    current = abs(a_i[0]) ** 2 + abs(a_j[1]) ** 2
    if abs(a_i[1]) ** 2 + abs(a_j[0]) ** 2 < 1e-15:
        return None
    m00 = abs(a_i[0]) ** 2 - abs(a_j[0]) ** 2
    m11 = abs(a_i[1]) ** 2 - abs(a_j[1]) ** 2
    m01 = a_i[0].conjugate() * a_i[1] - a_j[0].conjugate() * a_j[1]
    half = 0.5 * (m00 - m11)
    disc = np.hypot(half, abs(m01))
    lam_top = 0.5 * (m00 + m11) + disc
    if abs(m01) < 1e-300:
        u = np.array([1.0, 0.0], dtype=complex) if m00 >= m11 else np.array([0.0, 1.0], dtype=complex)
    else:
        u = np.array([m01, lam_top - m00], dtype=complex)
        u /= np.linalg.norm(u)
    u_perp = np.array([-u[1].conjugate(), u[0].conjugate()])
    gain = float(abs(a_i @ u) ** 2 + abs(a_j @ u_perp) ** 2 - current)
    if gain <= 1e-16:
        return None
    return u, u_perp, gain


def eg_upper_convex_roof(
    rho: HermitianOp,
    m: int | None = None,
    restarts: int = 20,
    seed: int = 0,
    max_sweeps: int = 200,
    tol: float = 1e-12,
    init_isometry: np.ndarray | None = None,
) -> ConvexRoofResult:
    """Upper bound on geometric entanglement via ensemble see-saw.

    Decompositions of rho are parametrized by co-isometries W (r x m, with
    W W^dag = 1) through unnormalized members psi_i = Phi w_i, where Phi is
    the spectral square-root factor of rho.  A sweep refreshes each member's
    best product witness (top Schmidt pair, the exact inner optimum for a
    bipartite cut), re-phases every column, and applies closed-form pairwise
    Jacobi rotations accepted on improvement.  The result is always a valid
    upper bound; ``init_isometry`` warm-starts one restart (useful in sweeps).
    """
    if len(rho.dims) != 2:
        raise ValueError("expected a bipartite state")
    db, dc = rho.dims
    w_eig, v_eig = eigh(rho)
    rank = int(np.sum(w_eig > 1e-12 * max(w_eig[0], 1e-300)))
    if m is None:
        m = min(rank * rank, 16)
    m = max(m, 1)
    if m < rank:
        raise ValueError(f"ensemble width {m} below state rank {rank}")
    phi = v_eig[:, :rank] * np.sqrt(np.clip(w_eig[:rank], 0.0, None))

    def sweep_from(w0: np.ndarray):
        w = w0.copy()
        history = []
        f_true = -np.inf
        for _ in range(max_sweeps):
            prev = f_true
            psi_cols = phi @ w
            tops, witnesses = _member_schmidt_tops(psi_cols, db, dc)
            f_true = float(tops.sum())
            history.append(1.0 - f_true)
            if f_true - prev < tol:
                break
            c_vecs = [phi.conj().T @ chi for chi in witnesses]
            # local re-phasing: make every overlap real nonnegative
            for i in range(m):
                z = c_vecs[i].conj() @ w[:, i]
                if abs(z) > 1e-14:
                    w[:, i] *= z.conj() / abs(z)
            for i in range(m - 1):
                for j in range(i + 1, m):
                    overlaps_i = np.array([c_vecs[i].conj() @ w[:, i], c_vecs[i].conj() @ w[:, j]])
                    overlaps_j = np.array([c_vecs[j].conj() @ w[:, i], c_vecs[j].conj() @ w[:, j]])
                    upd = _jacobi_pair_update(w, overlaps_i, overlaps_j, i, j)
                    if upd is not None:
                        w[:, i], w[:, j] = upd[0], upd[1]
        return f_true, w, history

    best = None
    for rest in range(max(1, restarts)):
        rng = np.random.default_rng([seed, rest])
        if rest == 0:
            w0 = np.zeros((rank, m), dtype=complex)
            w0[:, :rank] = np.eye(rank)
        elif rest == 1 and init_isometry is not None:
            w0 = np.array(init_isometry, dtype=complex)
            if w0.shape != (rank, m):
                raise ValueError("init_isometry shape mismatch")
        elif rest % 2 == 1:
            # product-seeded start: project random product states onto the range
            cols = []
            for _ in range(m):
                chi = np.kron(_haar_vec(rng, db), _haar_vec(rng, dc))
                cols.append(phi.conj().T @ chi)
            w0 = np.array(cols).T
            gram = w0 @ w0.conj().T
            gw, gv = np.linalg.eigh(gram)
            if gw[0] < 1e-10:
                w0 = w0 + 0.01 * (rng.standard_normal((rank, m)) + 1j * rng.standard_normal((rank, m)))
                gram = w0 @ w0.conj().T
                gw, gv = np.linalg.eigh(gram)
            isq = (gv / np.sqrt(gw)) @ gv.conj().T
            w0 = isq @ w0
        else:
            g = rng.standard_normal((m, rank)) + 1j * rng.standard_normal((m, rank))
            q, _ = np.linalg.qr(g)
            w0 = q[:, :rank].conj().T
        f_true, w, history = sweep_from(w0)
        if best is None or f_true > best[0]:
            best = (f_true, w, history)

    f_best, w_best, hist = best
    psi_cols = phi @ w_best
    members = []
    for i in range(m):
        q = float(np.linalg.norm(psi_cols[:, i]) ** 2)
        if q > 1e-14:
            members.append((q, PureState(psi_cols[:, i] / np.sqrt(q), rho.dims)))
    total = sum(p for p, _ in members)
    members = [(p / total, st) for p, st in members]
    return ConvexRoofResult(
        value=max(0.0, 1.0 - f_best),
        ensemble=Ensemble(tuple(members)),
        isometry=w_best,
        history=np.array(hist),
    )
