"""Embedded semidefinite-program solver for Hermitian variables.

Problems are stated over one Hermitian matrix block (or, internally, several)
with a linear objective, affine equality constraints, and cone constraints of
the form L(X) >= 0 where L is the identity, any partial transpose, or 1 - X.

The solver is a dense infeasible-start primal-dual interior-point method with
Nesterov-Todd scaling and a Mehrotra predictor-corrector step.  Hermitian
matrices are coordinatized over an orthonormal real basis (diagonal entries
plus sqrt(2)-scaled real/imaginary off-diagonal parts); partial transposes
act on this basis as entry permutations, which keeps the Schur complement
assembly at O(m^2) gathers per cone.  Positive-semidefiniteness checks agree
with checks on the real symmetric embedding (see ``linalg.real_embed``),
whose eigenvalues are those of the Hermitian matrix with doubled multiplicity.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import prod, sqrt

import numpy as np
import scipy.linalg

from purent.linalg import DimList, HermitianOp

__all__ = ["Cone", "SdpProblem", "SdpSolution", "solve"]

_SQRT2 = sqrt(2.0)


@dataclass(frozen=True)
class Cone:
    """Cone constraint descriptor: ``kind`` in {"psd", "ppt", "one_minus"}.

    "psd" requires X >= 0, "ppt" requires the partial transpose over ``subs``
    to be PSD, "one_minus" requires 1 - X >= 0.
    """

    kind: str
    subs: tuple[int, ...] = ()

    def __post_init__(self):
        if self.kind not in ("psd", "ppt", "one_minus"):
            raise ValueError(f"unknown cone kind {self.kind!r}")
        if self.kind == "ppt" and not self.subs:
            raise ValueError("ppt cone needs a nonempty subsystem set")
        object.__setattr__(self, "subs", tuple(sorted(set(self.subs))))


@dataclass
class SdpProblem:
    """Maximize Re Tr[objective X] subject to equality and cone constraints.

    ``equalities`` holds pairs (A_k, b_k) meaning Re Tr[A_k X] = b_k;
    ``ptrace_equalities`` holds pairs (keep, target) meaning the partial trace
    of X onto the kept subsystems equals ``target`` (compiled into one scalar
    constraint per Hermitian basis element of the kept space).
    """

    dims: DimList
    objective: HermitianOp
    cones: list[Cone] = field(default_factory=lambda: [Cone("psd")])
    equalities: list[tuple[HermitianOp, float]] = field(default_factory=list)
    ptrace_equalities: list[tuple[tuple[int, ...], HermitianOp]] = field(default_factory=list)


@dataclass
class SdpSolution:
    """Certified solve result.

    ``objective_value`` is the primal value of ``maximizer``; the true optimum
    is at most ``objective_value + duality_gap`` (up to the feasibility
    residual of the dual certificate).  ``delta`` is the solver precision
    duality_gap + feasibility_residual * ||objective||_inf used by the bound
    reports.
    """

    maximizer: HermitianOp
    objective_value: float
    dual_objective: float
    duality_gap: float
    feasibility_residual: float
    delta: float
    status: str
    iterations: int


class _NumericalStop(Exception):
    pass


# ---------------------------------------------------------------------------
# Hermitian coordinates.
#
# Basis element p is C_p E_{I_p J_p} + conj(C_p) E_{J_p I_p} with
#   diagonal   i:      I=J=i,  C = 1/2
#   real pair  (i<j):  C = 1/sqrt(2)
#   imag pair  (i<j):  C = 1j/sqrt(2)
# which is orthonormal for the real inner product <A, B> = Re Tr[A^dag B].
# ---------------------------------------------------------------------------


class _HvecMeta:
    def __init__(self, n: int):
        self.n = n
        iu, ju = np.triu_indices(n, 1)
        self.iu = iu
        self.ju = ju
        self.entry_row = np.concatenate([np.arange(n), np.repeat(iu, 2)])
        self.entry_col = np.concatenate([np.arange(n), np.repeat(ju, 2)])
        self.entry_coef = np.concatenate(
            [np.full(n, 0.5, dtype=complex), np.tile([1 / _SQRT2, 1j / _SQRT2], iu.size)]
        )


_HVEC_CACHE: dict[int, _HvecMeta] = {}


def _meta(n: int) -> _HvecMeta:
    m = _HVEC_CACHE.get(n)
    if m is None:
        m = _HvecMeta(n)
        _HVEC_CACHE[n] = m
    return m


def _hvec(mat: np.ndarray) -> np.ndarray:
    n = mat.shape[0]
    meta = _meta(n)
    out = np.empty(n * n)
    out[:n] = mat.diagonal().real
    off = mat[meta.iu, meta.ju]
    out[n::2] = _SQRT2 * off.real
    out[n + 1 :: 2] = _SQRT2 * off.imag
    return out


def _hmat(x: np.ndarray, n: int) -> np.ndarray:
    meta = _meta(n)
    mat = np.zeros((n, n), dtype=complex)
    mat[np.arange(n), np.arange(n)] = x[:n]
    off = (x[n::2] + 1j * x[n + 1 :: 2]) / _SQRT2
    mat[meta.iu, meta.ju] = off
    mat[meta.ju, meta.iu] = off.conj()
    return mat


def _ptranspose(mat: np.ndarray, dims: tuple[int, ...], subs: tuple[int, ...]) -> np.ndarray:
    if not subs:
        return mat
    n = len(dims)
    tens = mat.reshape(dims * 2)
    axes = list(range(2 * n))
    for k in subs:
        axes[k], axes[n + k] = axes[n + k], axes[k]
    return tens.transpose(axes).reshape(mat.shape)


_ENTRYMAP_CACHE: dict[tuple, tuple[np.ndarray, np.ndarray]] = {}


def _pt_entry_map(dims: tuple[int, ...], subs: tuple[int, ...]) -> tuple[np.ndarray, np.ndarray]:
    """Entry relocation (a,b) -> (a',b') of the partial transpose over subs."""
    key = (dims, subs)
    cached = _ENTRYMAP_CACHE.get(key)
    if cached is not None:
        return cached
    d = prod(dims)
    rows, cols = np.indices((d, d))
    new_rows = np.zeros_like(rows)
    new_cols = np.zeros_like(cols)
    stride = d
    for k, dk in enumerate(dims):
        stride //= dk
        dig_r = (rows // stride) % dk
        dig_c = (cols // stride) % dk
        if k in subs:
            dig_r, dig_c = dig_c, dig_r
        new_rows += dig_r * stride
        new_cols += dig_c * stride
    _ENTRYMAP_CACHE[key] = (new_rows, new_cols)
    return new_rows, new_cols


@dataclass
class _ConeSpec:
    block: int
    subs: tuple[int, ...]
    sign: float
    offset: np.ndarray | None  # None means zero offset
    # derived indexing arrays, filled at compile time
    rows: np.ndarray = None
    cols: np.ndarray = None
    coef: np.ndarray = None

    def apply(self, x_mat: np.ndarray, dims: tuple[int, ...]) -> np.ndarray:
        """Affine cone image offset + sign * PT(X)."""
        img = self.sign * _ptranspose(x_mat, dims, self.subs)
        if self.offset is not None:
            img = img + self.offset
        return img

    def adjoint(self, z: np.ndarray, dims: tuple[int, ...]) -> np.ndarray:
        """Adjoint of the linear part (partial transposes are self-adjoint)."""
        return self.sign * _ptranspose(z, dims, self.subs)


def _compile_cone_indices(spec: _ConeSpec, dims: tuple[int, ...]) -> None:
    n = prod(dims)
    meta = _meta(n)
    new_rows, new_cols = _pt_entry_map(dims, spec.subs)
    spec.rows = new_rows[meta.entry_row, meta.entry_col]
    spec.cols = new_cols[meta.entry_row, meta.entry_col]
    spec.coef = meta.entry_coef


def _cone_schur(spec: _ConeSpec, v: np.ndarray) -> np.ndarray:
    """Schur block <PT(B_p), V PT(B_q) V> over the Hermitian basis.

    With transported entries (A_p, B_p) and coefficient C_p, the Hermitian
    pair structure collapses the four entry-entry terms to
    2 Re[ cc(C_p) C_q V[A_p,A_q] V[B_q,B_p] + cc(C_p) cc(C_q) V[A_p,B_q] V[A_q,B_p] ].
    """
    a, b, c = spec.rows, spec.cols, spec.coef
    vt = v.T
    t1 = v[np.ix_(a, a)] * vt[np.ix_(b, b)]
    m3 = v[np.ix_(a, b)]
    t2 = m3 * m3.T
    cc = c.conj()
    out = t1 * cc[:, None]
    out *= c[None, :]
    tmp = t2 * cc[:, None]
    tmp *= cc[None, :]
    out += tmp
    return 2.0 * out.real


def _cone_schur_accumulate(h: np.ndarray, spec: _ConeSpec, v: np.ndarray) -> None:
    """Accumulate the cone's Schur block into the upper triangle of ``h``."""
    if _schur_upper_kernel is not None:
        _schur_upper_kernel(h, spec.rows, spec.cols, spec.coef, np.ascontiguousarray(v))
    else:
        block = _cone_schur(spec, v)
        iu = np.triu_indices(block.shape[0])
        h[iu] += block[iu]


try:  # single hot kernel; the numpy path above is the reference fallback
    import numba

    numba.config.THREADING_LAYER = "workqueue"

    @numba.njit(cache=True, parallel=True, fastmath=True)
    def _schur_upper_kernel(h, a, b, c, v):  # pragma: no cover - jit
        m = a.size
        for p in numba.prange(m):
            ap = a[p]
            bp = b[p]
            cp = np.conj(c[p])
            for q in range(p, m):
                t1 = c[q] * v[ap, a[q]] * v[b[q], bp]
                t2 = np.conj(c[q]) * v[ap, b[q]] * v[a[q], bp]
                h[p, q] += 2.0 * (cp * (t1 + t2)).real

except ImportError:  # pragma: no cover - numba is an optional accelerator
    _schur_upper_kernel = None


# ---------------------------------------------------------------------------
# Core multi-block solver.
# ---------------------------------------------------------------------------


@dataclass
class _CoreResult:
    x_blocks: list[np.ndarray]  # Hermitian matrices
    pobj: float
    dobj: float
    gap: float
    pres: float
    dres: float
    status: str
    iterations: int


def _nt_scaling(s: np.ndarray, z: np.ndarray):
    """Nesterov-Todd scaling point of a PSD cone pair (s, z).

    Returns (r, rinv, lam) with s = r diag(lam) r^dag and
    z = rinv^dag diag(lam) rinv.
    """
    try:
        ls = np.linalg.cholesky(s)
        lz = np.linalg.cholesky(z)
    except np.linalg.LinAlgError as exc:
        raise _NumericalStop("cone iterate lost positive definiteness") from exc
    u, lam, vh = np.linalg.svd(lz.conj().T @ ls)
    if lam.min() <= 0.0:
        raise _NumericalStop("degenerate NT scaling")
    sq = np.sqrt(lam)
    r = ls @ vh.conj().T / sq[None, :]
    rinv = (u.conj().T @ lz.conj().T) / sq[:, None]
    return r, rinv, lam


def _max_step(lam: np.ndarray, d_scaled: np.ndarray) -> float:
    """Largest alpha with diag(lam) + alpha * d_scaled >= 0."""
    isq = 1.0 / np.sqrt(lam)
    b = d_scaled * isq[:, None] * isq[None, :]
    emin = float(np.linalg.eigvalsh(b)[0])
    if emin >= 0.0:
        return np.inf
    return 1.0 / (-emin)


_TRACE = None  # dev hook: set to a callable(dict) to trace iterations


def _solve_core(
    block_dims: list[tuple[int, ...]],
    c_blocks: list[np.ndarray],
    cones: list[_ConeSpec],
    eq_rows: list[tuple[list[np.ndarray | None], float]],
    tol_gap: float,
    tol_feas: float,
    max_iter: int,
) -> _CoreResult:
    nblocks = len(block_dims)
    sides = [prod(d) for d in block_dims]
    msizes = [n * n for n in sides]
    offsets = np.concatenate([[0], np.cumsum(msizes)])
    m = int(offsets[-1])
    covered = {cn.block for cn in cones}
    if covered != set(range(nblocks)):
        raise ValueError("every variable block needs at least one cone constraint")
    for cn in cones:
        _compile_cone_indices(cn, block_dims[cn.block])
    absorber = {}
    for ji, cn in enumerate(cones):
        absorber.setdefault(cn.block, ji)

    c = np.concatenate([_hvec(cb) for cb in c_blocks])
    k = len(eq_rows)
    emat = np.zeros((k, m))
    b = np.zeros(k)
    for r, (ops, rhs) in enumerate(eq_rows):
        b[r] = rhs
        for bi, op in enumerate(ops):
            if op is not None:
                emat[r, offsets[bi] : offsets[bi + 1]] = _hvec(op)

    def split(vec):
        return [vec[offsets[i] : offsets[i + 1]] for i in range(nblocks)]

    def gather_adjoint(mats):
        """sum_j G_j^T(M_j) accumulated into coordinate space."""
        out = np.zeros(m)
        for cn, mj in zip(cones, mats):
            out[offsets[cn.block] : offsets[cn.block + 1]] += _hvec(cn.adjoint(mj, block_dims[cn.block]))
        return out

    x = np.zeros(m)
    y = np.zeros(k)
    s_mats = [np.eye(prod(block_dims[cn.block]), dtype=complex) for cn in cones]
    z_mats = [np.eye(prod(block_dims[cn.block]), dtype=complex) for cn in cones]
    ncone_total = sum(prod(block_dims[cn.block]) for cn in cones)

    bscale = max(1.0, float(np.abs(b).max()) if k else 0.0)
    for cn in cones:
        if cn.offset is not None:
            bscale = max(bscale, float(np.abs(cn.offset).max()))
    cscale = max(1.0, float(np.abs(c).max()))

    def infeasibility_certificate() -> bool:
        """Farkas-style test: a large dual ray with nonpositive cost."""
        scale = max(
            float(np.abs(y).max()) if k else 0.0,
            max(float(np.abs(zj).max()) for zj in z_mats),
        )
        if scale < 1e4:
            return False
        ray_res = float(np.abs((emat.T @ y if k else 0.0) - gather_adjoint(z_mats)).max())
        ray_obj = float(b @ y) + sum(
            float(np.einsum("ij,ji->", cn.offset, zj).real)
            for cn, zj in zip(cones, z_mats)
            if cn.offset is not None
        )
        return ray_res <= 1e-6 * scale and ray_obj <= -1e-6 * scale

    best = None
    status = "max_iterations"
    it = 0
    gap_history: list[float] = []
    try:
        for it in range(max_iter + 1):
            x_mats = [_hmat(xb, sides[i]) for i, xb in enumerate(split(x))]
            rc = [cn.apply(x_mats[cn.block], block_dims[cn.block]) - sj for cn, sj in zip(cones, s_mats)]
            rp = b - emat @ x if k else np.zeros(0)
            rd = c - (emat.T @ y if k else 0.0) + gather_adjoint(z_mats)

            pobj = float(c @ x)
            dobj = float(b @ y) + sum(
                float(np.einsum("ij,ji->", cn.offset, zj).real)
                for cn, zj in zip(cones, z_mats)
                if cn.offset is not None
            )
            gap = sum(float(np.einsum("ij,ji->", sj, zj).real) for sj, zj in zip(s_mats, z_mats))
            pres_abs = max(
                float(np.abs(rp).max()) if k else 0.0,
                max(float(np.abs(rcj).max()) for rcj in rc),
            )
            dres_abs = float(np.abs(rd).max())
            pres = pres_abs / bscale
            dres = dres_abs / cscale
            relgap = gap / max(1.0, abs(pobj), abs(dobj))

            if _TRACE is not None:
                _TRACE({"it": it, "pobj": pobj, "dobj": dobj, "gap": gap,
                        "pres": pres, "dres": dres})

            merit = max(pres, dres) + relgap
            if best is None or merit < best["merit"]:
                best = {
                    "merit": merit,
                    "x_mats": x_mats,
                    "pobj": pobj,
                    "dobj": dobj,
                    "gap": gap,
                    "pres": pres_abs,
                    "dres": dres_abs,
                    "it": it,
                }

            if pres <= tol_feas and dres <= tol_feas and (gap <= tol_gap or relgap <= tol_gap):
                status = "optimal"
                break

            # Float64 NT scaling cannot reliably push the gap much below
            # ~1e-9 absolute; once progress stalls, further iterations only
            # corrupt the iterates, so return the best point seen.
            gap_history.append(gap + max(pres, dres))
            if len(gap_history) >= 5 and gap_history[-1] > 0.5 * gap_history[-5]:
                break

            if infeasibility_certificate():
                status = "infeasible"
                break

            if it == max_iter:
                break

            scal = [_nt_scaling(sj, zj) for sj, zj in zip(s_mats, z_mats)]
            mu = sum(float((sc[2] ** 2).sum()) for sc in scal) / ncone_total

            h = np.zeros((m, m))
            for cn, (r, rinv, lam) in zip(cones, scal):
                v = rinv.conj().T @ rinv
                sl = slice(offsets[cn.block], offsets[cn.block + 1])
                _cone_schur_accumulate(h[sl, sl], cn, v)
            h += np.triu(h, 1).T

            kkt = _KktSolver(h, emat)

            def directions(g_mats):
                rx = rd.copy()
                for cn, (r, rinv, lam), gj, rcj in zip(cones, scal, g_mats, rc):
                    v = rinv.conj().T @ rinv
                    rx[offsets[cn.block] : offsets[cn.block + 1]] += _hvec(
                        cn.adjoint(v @ (gj - rcj) @ v, block_dims[cn.block])
                    )
                dx, dy = kkt.solve(rx, rp)
                dx_mats = [_hmat(db, sides[i]) for i, db in enumerate(split(dx))]
                ds = []
                dz = []
                for cn, (r, rinv, lam), gj, rcj in zip(cones, scal, g_mats, rc):
                    v = rinv.conj().T @ rinv
                    gdx = cn.sign * _ptranspose(dx_mats[cn.block], block_dims[cn.block], cn.subs)
                    ds.append(gdx + rcj)
                    dz.append(v @ (gj - rcj - gdx) @ v)
                # The V-congruences amplify reduced-solve error near convergence;
                # absorb the dual-row defect exactly into one cone per block
                # (every cone map is a self-adjoint involution up to sign).
                defect = -rd + (emat.T @ dy if k else 0.0) - gather_adjoint(dz)
                for bi, ji in absorber.items():
                    cn = cones[ji]
                    dmat = _hmat(defect[offsets[bi] : offsets[bi + 1]], sides[bi])
                    dz[ji] = dz[ji] + cn.sign * _ptranspose(dmat, block_dims[bi], cn.subs)
                return dx, dy, ds, dz

            # Predictor (affine scaling) direction: target lambda o lambda -> 0.
            g_aff = [-sj for sj in s_mats]
            dx_a, dy_a, ds_a, dz_a = directions(g_aff)

            ds_sc = [rinv @ dsj @ rinv.conj().T for (r, rinv, lam), dsj in zip(scal, ds_a)]
            dz_sc = [r.conj().T @ dzj @ r for (r, rinv, lam), dzj in zip(scal, dz_a)]
            alpha_aff = 1.0
            for (r, rinv, lam), dssj, dzsj in zip(scal, ds_sc, dz_sc):
                alpha_aff = min(alpha_aff, _max_step(lam, dssj), _max_step(lam, dzsj))

            mu_aff = (
                sum(
                    float(
                        np.einsum(
                            "ij,ji->",
                            np.diag(lam) + alpha_aff * dssj,
                            np.diag(lam) + alpha_aff * dzsj,
                        ).real
                    )
                    for (r, rinv, lam), dssj, dzsj in zip(scal, ds_sc, dz_sc)
                )
                / ncone_total
            )
            sigma = min(1.0, max(0.0, mu_aff / mu) ** 3)

            # Combined corrector: sigma*mu centering plus second-order term.
            # The second-order term divides by lambda sums and becomes noise-
            # amplifying once mu is tiny, so the endgame uses plain centering.
            use_soc = mu > 1e-7
            g_cc = []
            for (r, rinv, lam), dssj, dzsj in zip(scal, ds_sc, dz_sc):
                if use_soc:
                    rhs = -np.diag(lam * lam) - 0.5 * (dssj @ dzsj + dzsj @ dssj)
                else:
                    rhs = -np.diag(lam * lam)
                rhs[np.diag_indices_from(rhs)] += sigma * mu
                t = 2.0 * rhs / (lam[:, None] + lam[None, :])
                g_cc.append(r @ t @ r.conj().T)
            dx, dy, ds, dz = directions(g_cc)

            ds_sc = [rinv @ dsj @ rinv.conj().T for (r, rinv, lam), dsj in zip(scal, ds)]
            dz_sc = [r.conj().T @ dzj @ r for (r, rinv, lam), dzj in zip(scal, dz)]
            alpha = 1.0
            for (r, rinv, lam), dssj, dzsj in zip(scal, ds_sc, dz_sc):
                alpha = min(alpha, 0.99 * _max_step(lam, dssj), 0.99 * _max_step(lam, dzsj))
            if alpha < 1e-8:
                break

            x = x + alpha * dx
            if k:
                y = y + alpha * dy
            s_mats = [
                (sj + alpha * dsj + (sj + alpha * dsj).conj().T) / 2.0
                for sj, dsj in zip(s_mats, ds)
            ]
            z_mats = [
                (zj + alpha * dzj + (zj + alpha * dzj).conj().T) / 2.0
                for zj, dzj in zip(z_mats, dz)
            ]
    except _NumericalStop:
        pass

    if best is None:  # pragma: no cover - loop always records iterate 0
        raise RuntimeError("solver recorded no iterate")
    if status == "max_iterations" and infeasibility_certificate():
        status = "infeasible"
    if status == "max_iterations" and best["merit"] > 1e-3:
        status = "numerical_failure"
    return _CoreResult(
        x_blocks=best["x_mats"],
        pobj=best["pobj"],
        dobj=best["dobj"],
        gap=best["gap"],
        pres=best["pres"],
        dres=best["dres"],
        status=status,
        iterations=best["it"] if status == "optimal" else it,
    )


class _KktSolver:
    """Factorized solver for [[H, E^T], [E, 0]] with one refinement pass."""

    def __init__(self, h: np.ndarray, emat: np.ndarray):
        self.h = h
        self.emat = emat
        self.k = emat.shape[0]
        self.cho = self._factor(h)
        if self.k:
            self.ht_et = scipy.linalg.cho_solve(self.cho, emat.T, check_finite=False)
            schur = emat @ self.ht_et
            self.schur_cho = self._factor(schur)

    @staticmethod
    def _factor(mat: np.ndarray):
        jitter = 0.0
        scale = max(float(np.trace(mat)) / max(1, mat.shape[0]), 1e-14)
        for attempt in range(4):
            try:
                return scipy.linalg.cho_factor(
                    mat + jitter * np.eye(mat.shape[0]) if jitter else mat,
                    lower=True,
                    check_finite=False,
                )
            except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
                jitter = scale * (1e-13 if attempt == 0 else jitter / scale * 100.0)
        raise _NumericalStop("KKT matrix could not be factorized")

    def _solve_once(self, rx: np.ndarray, rp: np.ndarray):
        t = scipy.linalg.cho_solve(self.cho, rx, check_finite=False)
        if not self.k:
            return t, np.zeros(0)
        dy = scipy.linalg.cho_solve(self.schur_cho, self.emat @ t - rp, check_finite=False)
        dx = t - self.ht_et @ dy
        return dx, dy

    def solve(self, rx: np.ndarray, rp: np.ndarray):
        dx, dy = self._solve_once(rx, rp)
        # Iterative refinement keeps tight gap targets reachable despite the
        # 1/mu^2 conditioning of H near convergence.
        target = 1e-13 * max(1.0, float(np.abs(rx).max()))
        prev = np.inf
        for _ in range(4):
            res_x = rx - self.h @ dx - (self.emat.T @ dy if self.k else 0.0)
            res_p = rp - self.emat @ dx if self.k else np.zeros(0)
            rnorm = max(
                float(np.abs(res_x).max()),
                float(np.abs(res_p).max()) if self.k else 0.0,
            )
            if rnorm <= target or rnorm >= 0.5 * prev:
                break
            prev = rnorm
            cx, cy = self._solve_once(res_x, res_p)
            dx = dx + cx
            dy = dy + cy
        return dx, dy


# ---------------------------------------------------------------------------
# Public single-block interface.
# ---------------------------------------------------------------------------


def _embed_keep(op: np.ndarray, dims: tuple[int, ...], keep: tuple[int, ...]) -> np.ndarray:
    """Place ``op`` on the kept subsystems, identity elsewhere."""
    rest = tuple(i for i in range(len(dims)) if i not in keep)
    rest_side = prod(dims[i] for i in rest) if rest else 1
    full = np.kron(op, np.eye(rest_side))
    order = keep + rest
    out_dims = tuple(dims[i] for i in order)
    tens = full.reshape(out_dims * 2)
    pos = {s: i for i, s in enumerate(order)}
    n = len(dims)
    axes = [pos[s] for s in range(n)] + [n + pos[s] for s in range(n)]
    side = prod(dims)
    return tens.transpose(axes).reshape(side, side)


def _compile_problem(p: SdpProblem):
    dims = tuple(p.dims)
    side = prod(dims)
    if p.objective.side != side:
        raise ValueError("objective side does not match problem dims")
    specs = []
    for cone in p.cones:
        if cone.kind == "psd":
            specs.append(_ConeSpec(0, (), 1.0, None))
        elif cone.kind == "ppt":
            subs = tuple(sorted(cone.subs))
            if any(i < 0 or i >= len(dims) for i in subs) or len(subs) >= len(dims):
                raise ValueError(f"invalid transpose subsystems {subs} for dims {dims}")
            specs.append(_ConeSpec(0, subs, 1.0, None))
        else:  # one_minus
            specs.append(_ConeSpec(0, (), -1.0, np.eye(side, dtype=complex)))
    rows: list[tuple[list[np.ndarray | None], float]] = []
    for op, rhs in p.equalities:
        mat = op.mat if isinstance(op, HermitianOp) else np.asarray(op, dtype=complex)
        rows.append(([mat], float(rhs)))
    for keep, target in p.ptrace_equalities:
        keep = tuple(sorted(set(keep)))
        tgt = target.mat if isinstance(target, HermitianOp) else np.asarray(target, dtype=complex)
        dk = prod(dims[i] for i in keep)
        if tgt.shape[0] != dk:
            raise ValueError("partial-trace target side does not match kept subsystems")
        meta = _meta(dk)
        rhs_vec = _hvec(tgt)
        mcount = dk * dk
        for pidx in range(mcount):
            basis = _hmat(np.eye(mcount)[pidx], dk)
            rows.append(([_embed_keep(basis, dims, keep)], float(rhs_vec[pidx])))
    return dims, specs, rows


def solve(
    p: SdpProblem,
    tol_gap: float = 1e-8,
    tol_feas: float = 1e-8,
    max_iter: int = 200,
) -> SdpSolution:
    """Solve the program, returning the maximizer with certified residuals."""
    dims, specs, rows = _compile_problem(p)
    core = _solve_core([dims], [p.objective.mat], specs, rows, tol_gap, tol_feas, max_iter)
    return _package_solution(core, [DimList(dims)], [p.objective.mat], specs, rows)[0]


def _package_solution(core, dimlists, c_blocks, specs, rows):
    sols = []
    cnorm = max(float(np.abs(cb).max()) for cb in c_blocks)
    # Honest feasibility residual, recomputed from the returned maximizer.
    feas = 0.0
    for cn in specs:
        img = cn.apply(core.x_blocks[cn.block], tuple(dimlists[cn.block]))
        wmin = float(np.linalg.eigvalsh(img)[0])
        feas = max(feas, max(0.0, -wmin))
    for ops, rhs in rows:
        val = sum(
            float(np.einsum("ij,ji->", op, core.x_blocks[bi]).real)
            for bi, op in enumerate(ops)
            if op is not None
        )
        feas = max(feas, abs(val - rhs))
    gap = max(core.gap, core.dobj - core.pobj, 0.0)
    delta = gap + feas * cnorm
    for bi, dl in enumerate(dimlists):
        sols.append(
            SdpSolution(
                maximizer=HermitianOp(core.x_blocks[bi], dl),
                objective_value=core.pobj,
                dual_objective=core.pobj + gap,
                duality_gap=gap,
                feasibility_residual=feas,
                delta=delta,
                status=core.status,
                iterations=core.iterations,
            )
        )
    return sols


def _solve_blocks(
    block_dims: list[DimList],
    objectives: list[np.ndarray],
    cones: list[tuple[int, str, tuple[int, ...]]],
    eq_rows: list[tuple[list[np.ndarray | None], float]],
    tol_gap: float = 1e-8,
    tol_feas: float = 1e-8,
    max_iter: int = 200,
) -> list[SdpSolution]:
    """Multi-block entry point for internal callers (POVM subproblems).

    ``cones`` entries are (block, kind, subs); returns one solution per block
    sharing the joint objective value and certificates.
    """
    specs = []
    for bi, kind, subs in cones:
        side = prod(block_dims[bi])
        if kind == "psd":
            specs.append(_ConeSpec(bi, (), 1.0, None))
        elif kind == "ppt":
            specs.append(_ConeSpec(bi, tuple(sorted(subs)), 1.0, None))
        else:
            specs.append(_ConeSpec(bi, (), -1.0, np.eye(side, dtype=complex)))
    core = _solve_core(
        [tuple(d) for d in block_dims], objectives, specs, eq_rows, tol_gap, tol_feas, max_iter
    )
    return _package_solution(core, block_dims, objectives, specs, eq_rows)
