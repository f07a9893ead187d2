"""Primal-dual interior-point solver for small block semidefinite programs.

The problems handled here are written in inequality ("LMI") form::

    minimize    c^T x
    subject to  F_b(x) = F_b0 + sum_i x_i F_bi  >= 0     (each block b, PSD)
                a_j^T x  (<=, =, >=)  bound_j               (scalar rows)
                lower <= x <= upper                         (optional)

Scalar inequality rows and variable bounds are treated as 1x1 blocks.  The
conic dual is::

    maximize    -sum_b <F_b0, Z_b> - b^T y
    subject to  sum_b <F_bi, Z_b> - (A^T y)_i = c_i,   Z_b >= 0

The algorithm is a homogeneous self-dual embedding with Nesterov-Todd scaling
and a Mehrotra predictor-corrector step, so infeasibility and unboundedness
come out as certificates instead of stalls.  Blocks of equal size are
processed as stacked arrays; the Schur complement is assembled densely for
small variable counts and as a sparse matrix otherwise, which keeps the
entropy duals (thousands of 4x4 blocks sharing a handful of variables)
tractable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import logging

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from . import _dense_ipm
from .errors import IllPosedProblemError, SolverError

log = logging.getLogger(__name__)

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
NUMERICAL_FAILURE = "numerical-failure"

MAX_BLOCK_DIM = 8
_DENSE_LIMIT = 250
_STEP = 0.99
_REFINE = 1
_REFINE_BELOW = 1e-4
_SYM_TOL = 1e-12
_FUSE_LIMIT = 16


@dataclass
class LmiBlock:
    """One constraint ``const + sum_k x[index[k]] * coeffs[k] >= 0``.

    Only the variables with a nonzero coefficient are stored.
    """

    const: np.ndarray
    index: np.ndarray
    coeffs: np.ndarray

    @property
    def dim(self) -> int:
        return self.const.shape[0]

    def evaluate(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if len(self.index) == 0:
            return self.const.copy()
        return self.const + np.tensordot(x[self.index], self.coeffs, axes=1)


@dataclass
class LinearConstraint:
    index: np.ndarray
    coeffs: np.ndarray
    sense: str
    bound: float

    def evaluate(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(self.coeffs @ x[self.index])


def _split_terms(terms, nv):
    if isinstance(terms, Mapping):
        items = sorted(terms.items())
        index = np.array([int(k) for k, _ in items], dtype=np.int64)
        values = [v for _, v in items]
    else:
        index, values = terms
        index = np.asarray(index, dtype=np.int64)
    if index.size and (index.min() < 0 or index.max() >= nv):
        raise IllPosedProblemError(f"variable index out of range [0, {nv})")
    if len(np.unique(index)) != len(index):
        raise IllPosedProblemError("duplicate variable index in one constraint")
    return index, values


@dataclass
class SdpProblem:
    """A block SDP in LMI form; build it with :meth:`add_lmi` / :meth:`add_linear`."""

    nv: int
    objective: np.ndarray | None = None
    blocks: list[LmiBlock] = field(default_factory=list)
    linear: list[LinearConstraint] = field(default_factory=list)
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None

    def __post_init__(self):
        if self.objective is None:
            self.objective = np.zeros(self.nv)
        self.objective = np.asarray(self.objective, dtype=float).reshape(-1)
        if self.objective.shape != (self.nv,):
            raise IllPosedProblemError("objective length must equal nv")

    def add_lmi(self, const, terms=None) -> int:
        """Append the block ``const + sum x_i * terms[i] >= 0``; return its position."""
        const = np.atleast_2d(np.asarray(const, dtype=float))
        d = const.shape[0]
        if const.shape != (d, d):
            raise IllPosedProblemError("LMI constant must be square")
        if d > MAX_BLOCK_DIM:
            raise IllPosedProblemError(f"block dimension {d} exceeds {MAX_BLOCK_DIM}")
        index, values = _split_terms(terms or {}, self.nv)
        coeffs = np.asarray(values, dtype=float).reshape(len(index), d, d)
        for mat in (const, *coeffs):
            if not np.allclose(mat, mat.T, atol=_SYM_TOL, rtol=0.0):
                raise IllPosedProblemError("LMI data must be symmetric")
        self.blocks.append(LmiBlock(const, index, coeffs))
        return len(self.blocks) - 1

    def add_linear(self, terms, sense: str, bound: float) -> int:
        if sense not in ("<=", "=", ">="):
            raise IllPosedProblemError(f"unknown constraint sense {sense!r}")
        index, values = _split_terms(terms, self.nv)
        self.linear.append(
            LinearConstraint(index, np.asarray(values, dtype=float).reshape(-1), sense, float(bound))
        )
        return len(self.linear) - 1

    def residuals(self, x) -> tuple[float, float]:
        """Smallest block eigenvalue and largest equality violation at ``x``."""
        x = np.asarray(x, dtype=float)
        worst = np.inf
        for blk in self.blocks:
            worst = min(worst, float(np.linalg.eigvalsh(blk.evaluate(x))[0]))
        eq = 0.0
        for row in self.linear:
            v = row.evaluate(x) - row.bound
            if row.sense == "=":
                eq = max(eq, abs(v))
            elif row.sense == "<=":
                worst = min(worst, -v)
            else:
                worst = min(worst, v)
        if self.lower is not None:
            worst = min(worst, float(np.min(x - self.lower)))
        if self.upper is not None:
            worst = min(worst, float(np.min(self.upper - x)))
        return worst, eq


@dataclass(frozen=True)
class SolverOptions:
    gap_tol: float = 1e-9
    feas_tol: float = 1e-9
    max_iter: int = 200
    # "auto" uses the compiled single-matrix kernel whenever the problem fits;
    # "batched" forces the numpy path (kept selectable for cross-checking)
    kernel: str = "auto"


@dataclass
class SdpSolution:
    """Result of :func:`solve`.

    ``x`` and the dual variables are the last iterate, except after a
    numerical failure of the batched path, which reports the iterate with
    the smallest residuals relative to the tolerances.
    For ``infeasible`` the pair (``block_duals``, ``eq_duals``) is a
    normalized Farkas certificate, for ``unbounded`` ``ray`` is an improving
    primal direction; see :func:`verify_infeasibility_certificate`.
    """

    status: str
    x: np.ndarray
    objective: float
    dual_objective: float
    gap: float
    primal_residual: float
    dual_residual: float
    iterations: int
    block_duals: list = field(default_factory=list)
    linear_duals: np.ndarray | None = None
    lower_duals: np.ndarray | None = None
    upper_duals: np.ndarray | None = None
    ray: np.ndarray | None = None

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL


class _Cone:
    """Stacked data for all blocks of one size ``d`` (``d == 1`` is the LP part)."""

    def __init__(self, d, idx, coef, const):
        self.d = d
        self.idx = idx        # (nb, m)
        self.coef = coef      # (nb, m, d, d) or (nb, m)
        self.const = const    # (nb, d, d) or (nb,)
        self.nb = idx.shape[0]

    def amap(self, x):
        xs = x[self.idx]
        if self.d == 1:
            return np.einsum("bk,bk->b", xs, self.coef)
        return np.einsum("bk,bkij->bij", xs, self.coef)

    def aadj(self, z):
        if self.d == 1:
            return self.coef * z[:, None]
        return np.einsum("bkij,bij->bk", self.coef, z)

    def identity(self):
        if self.d == 1:
            return np.ones(self.nb)
        return np.broadcast_to(np.eye(self.d), (self.nb, self.d, self.d)).copy()

    def inner(self, a, b):
        return float(np.sum(a * b))


def _pieces(p: SdpProblem):
    """Every conic constraint as (tag, index, coeffs, const), with 1x1 rows as d=1."""
    out = []
    for j, blk in enumerate(p.blocks):
        out.append((("block", j), blk.index, blk.coeffs, blk.const))
    for j, row in enumerate(p.linear):
        if row.sense == "=":
            continue
        sign = -1.0 if row.sense == "<=" else 1.0
        out.append((("linear", j), row.index, (sign * row.coeffs)[:, None, None], np.array([[-sign * row.bound]])))
    for name, bounds, sign in (("lower", p.lower, 1.0), ("upper", p.upper, -1.0)):
        if bounds is None:
            continue
        bounds = np.broadcast_to(np.asarray(bounds, dtype=float), (p.nv,))
        for i, v in enumerate(bounds):
            if np.isfinite(v):
                out.append(((name, i), np.array([i]), np.array([[[sign]]]), np.array([[-sign * v]])))
    return out


def _stack(d, items):
    m = max(1, max(len(it[1]) for it in items))
    nb = len(items)
    idx = np.zeros((nb, m), dtype=np.int64)
    coef = np.zeros((nb, m, d, d))
    const = np.zeros((nb, d, d))
    for j, (_, ix, cf, c0) in enumerate(items):
        idx[j, : len(ix)] = ix
        coef[j, : len(ix)] = cf
        const[j] = c0
    if d == 1:
        return _Cone(1, idx, coef[:, :, 0, 0], const[:, 0, 0])
    return _Cone(d, idx, coef, const)


def _fuse(items):
    """Put all pieces on the diagonal of one matrix (cheaper for tiny problems)."""
    dims = [it[3].shape[0] for it in items]
    D = sum(dims)
    union = np.unique(np.concatenate([it[1] for it in items] + [np.zeros(0, dtype=np.int64)]))
    pos = {int(v): k for k, v in enumerate(union)}
    coef = np.zeros((1, max(1, len(union)), D, D))
    const = np.zeros((1, D, D))
    off = 0
    where = []
    for (_, ix, cf, c0), d in zip(items, dims):
        sl = slice(off, off + d)
        const[0, sl, sl] = c0
        for k, v in enumerate(ix):
            coef[0, pos[int(v)], sl, sl] = cf[k]
        where.append((0, 0, off, d))
        off += d
    idx = np.zeros((1, coef.shape[1]), dtype=np.int64)
    idx[0, : len(union)] = union
    return _Cone(D, idx, coef, const), where


def _compile(p: SdpProblem):
    nv = p.nv
    items = _pieces(p)
    total = sum(it[3].shape[0] for it in items)
    cones = []
    where = [None] * len(items)
    if items and total <= _FUSE_LIMIT and total > 1:
        cone, where = _fuse(items)
        cones.append(cone)
    else:
        by_dim: dict[int, list] = {}
        for j, it in enumerate(items):
            by_dim.setdefault(it[3].shape[0], []).append(j)
        for d, members in sorted(by_dim.items()):
            for batch, j in enumerate(members):
                where[j] = (len(cones), batch, 0, d)
            cones.append(_stack(d, [items[j] for j in members]))
    tags = {it[0]: w for it, w in zip(items, where)}

    eq_rows = [row for row in p.linear if row.sense == "="]
    me = len(eq_rows)
    if me:
        rows = np.concatenate([np.full(len(r.index), i) for i, r in enumerate(eq_rows)])
        cols = np.concatenate([r.index for r in eq_rows])
        vals = np.concatenate([r.coeffs for r in eq_rows])
        A = scipy.sparse.csr_matrix((vals, (rows, cols)), shape=(me, nv))
        b = np.array([r.bound for r in eq_rows])
    else:
        A = scipy.sparse.csr_matrix((0, nv))
        b = np.zeros(0)

    used = np.zeros(nv, dtype=bool)
    for it in items:
        if len(it[1]) == 0:
            continue
        nz = np.any(it[2].reshape(len(it[1]), -1) != 0, axis=1)
        used[it[1][nz]] = True
    if me:
        used[A.indices] = True
    if not used.all():
        missing = np.flatnonzero(~used)
        raise IllPosedProblemError(
            f"variables {missing[:8].tolist()} appear in no constraint; the problem is ill-posed"
        )
    return cones, A, b, tags


class _EqualityBasis:
    """Constant data for eliminating ``A dx = r``: nullspace basis and pseudo-inverse."""

    def __init__(self, A):
        me, nv = A.shape
        if me == 0:
            self.N = np.eye(nv)
            self.pinv = np.zeros((nv, 0))
            return
        if me > nv:
            raise IllPosedProblemError("more equality constraints than variables")
        U, S, Vt = np.linalg.svd(A, full_matrices=True)
        if S[-1] <= 1e-12 * max(1.0, S[0]):
            raise IllPosedProblemError("equality constraints are linearly dependent")
        self.N = np.ascontiguousarray(Vt[me:].T)
        self.pinv = np.ascontiguousarray((Vt[:me].T / S) @ U.T)


class _LsqKkt:
    """Solve ``G^T G dx + A^T dy = e1 + G^T t``, ``A dx = r`` by QR of ``G N``.

    Working with the scaled coefficient matrix ``G`` instead of the Schur
    complement ``M = G^T G`` halves the condition number exponent, which is
    what keeps the last few iterations accurate.
    """

    def __init__(self, G, basis):
        self.G = G
        self.basis = basis
        self.Q, self.Rq = np.linalg.qr(G @ basis.N)
        diag = np.abs(np.diag(self.Rq))
        if diag.size and not diag.min() > 1e-14 * max(1.0, diag.max()):
            raise np.linalg.LinAlgError("scaled constraint matrix is rank deficient")

    def solve(self, e1, t, r):
        G, N, pinv = self.G, self.basis.N, self.basis.pinv
        dxp = pinv @ r
        w = scipy.linalg.solve_triangular(self.Rq, N.T @ e1, trans="T", check_finite=False)
        w += self.Q.T @ (t - G @ dxp)
        dx = dxp + N @ scipy.linalg.solve_triangular(self.Rq, w, check_finite=False)
        dy = pinv.T @ (e1 + G.T @ (t - G @ dx))
        return dx, dy


class _SparseKkt:
    """Sparse LU of [[M, A^T], [A, 0]] for problems too large for dense QR."""

    def __init__(self, M, A, unscale):
        self.nv = M.shape[0]
        self.me = A.shape[0]
        self.unscale = unscale
        if self.me:
            K = scipy.sparse.bmat([[M, A.T], [A, None]], format="csc")
            self.lu = scipy.sparse.linalg.splu(K, permc_spec="MMD_AT_PLUS_A")
        else:
            # M = G^T G is positive definite: a symmetric ordering without
            # pivoting keeps the fill of the arrow structure small
            self.lu = scipy.sparse.linalg.splu(
                M.tocsc(), permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                options={"SymmetricMode": True},
            )

    def solve(self, e1, t, r):
        rx = e1 + self.unscale(t)
        rhs = np.concatenate([rx, r]) if self.me else rx
        sol = self.lu.solve(rhs)
        return sol[: self.nv], sol[self.nv:]


class _Scaling:
    """Nesterov-Todd scaling of one cone: W = R R^T with R^T z R = R^-1 s R^-T = diag(lam)."""

    def __init__(self, cone, s, z):
        self.cone = cone
        if cone.d == 1:
            self.w = np.sqrt(s / z)
            self.lam = np.sqrt(s * z)
            return
        Ls = np.linalg.cholesky(s)
        Lz = np.linalg.cholesky(z)
        _, lam, Vt = np.linalg.svd(np.swapaxes(Lz, 1, 2) @ Ls)
        V = np.swapaxes(Vt, 1, 2)
        isq = 1.0 / np.sqrt(lam)
        self.R = Ls @ (V * isq[:, None, :])
        self.Rinv = (np.sqrt(lam)[:, :, None] * Vt) @ np.linalg.inv(Ls)
        self.lam = lam

    def winv_sandwich(self, X):
        """W^-1 X W^-1."""
        if self.cone.d == 1:
            return X / self.w**2
        Ri = self.Rinv
        RiT = np.swapaxes(Ri, 1, 2)
        return RiT @ (Ri @ X @ RiT) @ Ri

    def half_scale(self, X):
        """R^-1 X R^-T, so that <X, W^-1 X W^-1> = |half_scale(X)|^2."""
        if self.cone.d == 1:
            return X / self.w
        Ri = self.Rinv
        return Ri @ X @ np.swapaxes(Ri, 1, 2)

    def half_unscale(self, Y):
        """R^-T Y R^-1."""
        if self.cone.d == 1:
            return Y / self.w
        Ri = self.Rinv
        return np.swapaxes(Ri, 1, 2) @ Y @ Ri

    def w_sandwich(self, X):
        """W X W."""
        if self.cone.d == 1:
            return X * self.w**2
        R = self.R
        RT = np.swapaxes(R, 1, 2)
        return R @ (RT @ X @ R) @ RT

    def g_rows(self):
        """Scaled coefficients R^-1 F_k R^-T flattened, shape (nb, m, d*d)."""
        cone = self.cone
        if cone.d == 1:
            return (cone.coef / self.w[:, None])[:, :, None]
        Ri = self.Rinv[:, None]
        Gt = Ri @ cone.coef @ np.swapaxes(Ri, 2, 3)
        return Gt.reshape(cone.nb, cone.idx.shape[1], -1)

    def schur_blocks(self):
        flat = self.g_rows()
        return flat @ np.swapaxes(flat, 1, 2)

    def scaled(self, ds, dz):
        """Scaled directions R^-1 ds R^-T and R^T dz R."""
        if self.cone.d == 1:
            return ds / self.w, dz * self.w
        R, Ri = self.R, self.Rinv
        return Ri @ ds @ np.swapaxes(Ri, 1, 2), np.swapaxes(R, 1, 2) @ dz @ R

    def comp_rhs(self, sigma_mu, corr):
        """Solve lam o u = sigma*mu*I - lam o lam - corr and return R u R^T."""
        lam = self.lam
        if self.cone.d == 1:
            u = (sigma_mu - lam * lam - corr) / lam
            return self.w * u
        d = self.cone.d
        v = -corr.copy() if corr is not None else np.zeros((self.cone.nb, d, d))
        diag = np.arange(d)
        v[:, diag, diag] += sigma_mu - lam * lam
        u = 2.0 * v / (lam[:, :, None] + lam[:, None, :])
        return self.R @ u @ np.swapaxes(self.R, 1, 2)

    def max_step(self, ds_t):
        """Largest alpha with lam + alpha * ds_t still in the cone (scaled coordinates)."""
        lam = self.lam
        if self.cone.d == 1:
            ratio = ds_t / lam
        else:
            isq = 1.0 / np.sqrt(lam)
            X = isq[:, :, None] * ds_t * isq[:, None, :]
            ratio = np.linalg.eigvalsh(0.5 * (X + np.swapaxes(X, 1, 2)))[:, 0]
        worst = float(np.min(ratio))
        return np.inf if worst >= 0 else -1.0 / worst


def _max_abs(r) -> float:
    parts = r if isinstance(r, list) else [r]
    return max((float(np.max(np.abs(v))) for v in parts if np.size(v)), default=0.0)


def _sym_prod(a, b, d):
    if d == 1:
        return a * b
    ab = a @ b
    return 0.5 * (ab + np.swapaxes(ab, 1, 2))


def _flatten(parts):
    return np.concatenate([np.ravel(v) for v in parts])


def _unflatten(scal, t, unscale=False):
    out = []
    off = 0
    for sc in scal:
        cone = sc.cone
        n = cone.nb * cone.d * cone.d
        v = t[off : off + n].reshape((cone.nb,) if cone.d == 1 else (cone.nb, cone.d, cone.d))
        out.append(sc.half_unscale(v) if unscale else v)
        off += n
    return out


def _assemble_g(cones, scal, nv):
    """Dense scaled constraint matrix G with G[:, i] = vec(R^-1 F_i R^-T)."""
    nrows = sum(cn.nb * cn.d * cn.d for cn in cones)
    G = np.zeros(nrows * nv)
    off = 0
    for cn, sc in zip(cones, scal):
        flat = sc.g_rows()
        nb, m, dd = flat.shape
        rows = off + np.arange(nb)[:, None, None] * dd + np.arange(dd)[None, None, :]
        lin = rows * nv + cn.idx[:, :, None]
        G += np.bincount(lin.ravel(), flat.ravel(), minlength=nrows * nv)
        off += nb * dd
    return G.reshape(nrows, nv)


def _schur_pattern(cones):
    """Row and column of every entry produced by :func:`_schur_values`."""
    rows, cols = [], []
    for cn in cones:
        m = cn.idx.shape[1]
        rows.append(np.repeat(cn.idx, m, axis=1).ravel())
        cols.append(np.tile(cn.idx, (1, m)).ravel())
    return np.concatenate(rows), np.concatenate(cols)


def _schur_values(scal):
    return np.concatenate([sc.schur_blocks().ravel() for sc in scal])


def _schur_sparse(cones, scal, nv):
    rows, cols = _schur_pattern(cones)
    return scipy.sparse.coo_matrix((_schur_values(scal), (rows, cols)), shape=(nv, nv)).tocsc()


_STATUS_NAMES = {
    _dense_ipm.STATUS_OPTIMAL: OPTIMAL,
    _dense_ipm.STATUS_INFEASIBLE: INFEASIBLE,
    _dense_ipm.STATUS_UNBOUNDED: UNBOUNDED,
    _dense_ipm.STATUS_FAILURE: NUMERICAL_FAILURE,
}


def _run_fused(cone, A, b, c, basis, opts):
    nv = c.shape[0]
    D = cone.d
    Fflat = np.zeros((nv, D * D))
    np.add.at(Fflat, cone.idx[0], cone.coef[0].reshape(-1, D * D))
    out = _dense_ipm.dense_ipm(
        np.ascontiguousarray(cone.const[0]),
        Fflat,
        np.ascontiguousarray(c, dtype=float),
        np.ascontiguousarray(A.toarray()),
        np.ascontiguousarray(b, dtype=float),
        basis.N,
        basis.pinv,
        opts.gap_tol,
        opts.feas_tol,
        opts.max_iter,
        _STEP,
        _REFINE_BELOW,
    )
    status, x, y, z, tau, kappa, it, pcost, dcost, pres, dres, gap = out
    return (_STATUS_NAMES[status], x, y, [z[None]], tau, kappa, it, pcost, dcost, pres, dres, gap)


def _solve_constant(p: SdpProblem, opts: SolverOptions) -> SdpSolution:
    """No variables: feasibility is a direct check, an offending eigenvector is the certificate."""
    duals = [np.zeros_like(blk.const) for blk in p.blocks]
    lin = np.zeros(len(p.linear))
    bad = False
    for j, blk in enumerate(p.blocks):
        lam, vec = np.linalg.eigh(blk.const)
        if lam[0] < -opts.feas_tol:
            duals[j] = np.outer(vec[:, 0], vec[:, 0])
            bad = True
            break
    if not bad:
        for j, row in enumerate(p.linear):
            # every row reads 0 (sense) bound
            if (row.sense == ">=" and row.bound > opts.feas_tol) or (row.sense == "<=" and row.bound < -opts.feas_tol):
                lin[j] = 1.0
                bad = True
                break
            if row.sense == "=" and abs(row.bound) > opts.feas_tol:
                lin[j] = np.sign(row.bound)
                bad = True
                break
    empty = np.zeros(0)
    return SdpSolution(
        INFEASIBLE if bad else OPTIMAL, empty, 0.0, 0.0, 0.0, 0.0, 0.0, 0,
        block_duals=duals, linear_duals=lin, lower_duals=empty, upper_duals=empty,
    )


def solve(p: SdpProblem, opts: SolverOptions | None = None) -> SdpSolution:
    """Solve ``p``; the returned status is one of the four module constants.

    Raises
    ------
    IllPosedProblemError
        If the data are malformed (caught while building or compiling).
    """
    opts = opts or SolverOptions()
    if p.nv == 0:
        return _solve_constant(p, opts)
    cones, A, b, tags = _compile(p)
    nv, me = p.nv, A.shape[0]
    c = p.objective
    sparse = nv + me > _DENSE_LIMIT
    deg = sum(cn.nb * cn.d for cn in cones)
    AT = A.T.tocsr()
    basis = None if sparse else _EqualityBasis(A.toarray())

    F0 = [cn.const for cn in cones]
    nrm_c = 1.0 + float(np.linalg.norm(c))
    nrm_h = 1.0 + max(float(np.linalg.norm(b)), float(np.sqrt(sum(np.sum(f * f) for f in F0))))

    def amap(v):
        return [cn.amap(v) for cn in cones]

    def aadj(zs):
        out = np.zeros(nv)
        for cn, zz in zip(cones, zs):
            out += np.bincount(cn.idx.ravel(), cn.aadj(zz).ravel(), minlength=nv)
        return out

    def dot(xs, ys):
        return sum(float(np.sum(a * b_)) for a, b_ in zip(xs, ys))

    fused = len(cones) == 1 and cones[0].nb == 1 and cones[0].d > 1 and not sparse and opts.kernel != "batched"
    if fused:
        status, x, y, z, tau, kappa, it, pcost, dcost, pres, dres, gap = _run_fused(cones[0], A, b, c, basis, opts)
    else:
        x = np.zeros(nv)
        y = np.zeros(me)
        s = [cn.identity() for cn in cones]
        z = [cn.identity() for cn in cones]
        tau = kappa = 1.0
        mu0 = (deg + 1.0) / (deg + 1)

        status = NUMERICAL_FAILURE
        it = 0
        pres = dres = gap = np.inf
        pcost = dcost = np.nan
        small_steps = 0
        best = (np.inf,)
        while True:
            Ax = amap(x)
            r1 = AT @ y - aadj(z) + c * tau
            r2 = b * tau - A @ x
            r3 = [si - axi - f0 * tau for si, axi, f0 in zip(s, Ax, F0)]
            hz = float(b @ y) + dot(F0, z)
            cx = float(c @ x)
            r4 = kappa + cx + hz
            sz = dot(s, z)
            mu = (sz + tau * kappa) / (deg + 1)

            pcost = cx / tau
            dcost = -hz / tau
            pres = max(float(np.linalg.norm(r2)), float(np.sqrt(dot(r3, r3)))) / tau / nrm_h
            dres = float(np.linalg.norm(r1)) / tau / nrm_c
            gap = sz / tau**2
            scale = 1.0 + abs(pcost) + abs(dcost)
            log.debug("it=%d pcost=%.12g dcost=%.12g pres=%.2e dres=%.2e gap=%.2e tau=%.3g kappa=%.3g",
                      it, pcost, dcost, pres, dres, gap, tau, kappa)
            if pres <= opts.feas_tol and dres <= opts.feas_tol and gap <= opts.gap_tol * scale:
                status = OPTIMAL
                break
            merit = max(pres / opts.feas_tol, dres / opts.feas_tol, gap / (opts.gap_tol * scale))
            if merit < best[0]:
                best = (merit, x, y, [zi.copy() for zi in z], tau, kappa, pcost, dcost, pres, dres, gap)
            if hz < 0:
                pinf = float(np.linalg.norm(AT @ y - aadj(z))) / (-hz) / nrm_c
                if pinf <= opts.feas_tol:
                    status = INFEASIBLE
                    break
            if cx < 0:
                hrz = [si - axi for si, axi in zip(s, Ax)]
                dinf = max(float(np.linalg.norm(A @ x)), float(np.sqrt(dot(hrz, hrz)))) / (-cx) / nrm_h
                if dinf <= opts.feas_tol:
                    status = UNBOUNDED
                    break
            if it >= opts.max_iter or small_steps >= 8 or not np.isfinite(mu):
                status = NUMERICAL_FAILURE
                break

            try:
                scal = [_Scaling(cn, si, zi) for cn, si, zi in zip(cones, s, z)]
            except np.linalg.LinAlgError:
                status = NUMERICAL_FAILURE
                break

            try:
                if sparse:
                    kkt = _SparseKkt(_schur_sparse(cones, scal, nv), A, lambda t: aadj(_unflatten(scal, t, unscale=True)))
                else:
                    kkt = _LsqKkt(_assemble_g(cones, scal, nv), basis)
            except (np.linalg.LinAlgError, RuntimeError, ValueError):
                status = NUMERICAL_FAILURE
                break

            # direction multiplying d(tau); independent of the centering parameter
            hf0 = [sc.half_scale(f0) for sc, f0 in zip(scal, F0)]
            dxb, dyb = kkt.solve(-c, -_flatten(hf0), b)
            adxb = amap(dxb)
            sb = [sc.half_scale(f0 + a_) for sc, f0, a_ in zip(scal, F0, adxb)]
            dzb = [-sc.half_unscale(v) for sc, v in zip(scal, sb)]
            # c.dxb + b.dyb + <F0, dzb> equals -|sb|^2 by skew symmetry; the
            # explicit sum cancels catastrophically once W is ill-conditioned
            denom_b = -kappa / tau - dot(sb, sb)

            def newton(q1, q2, q3, q4, rc, rct):
                te = [sc.half_scale(a_ - b_) for sc, a_, b_ in zip(scal, rc, q3)]
                dxa, dya = kkt.solve(q1, _flatten(te), -q2)
                ta = [sc.half_scale(a_) for sc, a_ in zip(scal, amap(dxa))]
                dza = [sc.half_unscale(u - v) for sc, u, v in zip(scal, te, ta)]
                # c.dxa + b.dya + <F0, dza>, rewritten through the b-system
                inner = float(q1 @ dxb) + float(q2 @ dyb) + sum(
                    float(np.sum(u * (v - 2.0 * w))) for u, v, w in zip(sb, te, ta)
                )
                num = q4 - rct / tau - inner
                dtau = num / denom_b
                dx = dxa + dtau * dxb
                dy = dya + dtau * dyb
                dz = [a_ + dtau * b_ for a_, b_ in zip(dza, dzb)]
                # taken from the linearized feasibility row so that primal
                # residuals shrink exactly; rounding lands in complementarity
                ds = [q3i + a_ + f0 * dtau for q3i, a_, f0 in zip(q3, amap(dx), F0)]
                dkappa = (rct - kappa * dtau) / tau
                return dx, dy, dz, ds, dtau, dkappa

            def linearized(dx, dy, dz, ds, dtau, dkappa):
                adx = amap(dx)
                return (
                    AT @ dy - aadj(dz) + c * dtau,
                    b * dtau - A @ dx,
                    [dsi - ai - f0 * dtau for dsi, ai, f0 in zip(ds, adx, F0)],
                    dkappa + float(c @ dx) + float(b @ dy) + dot(F0, dz),
                    [dsi + sc.w_sandwich(dzi) for sc, dsi, dzi in zip(scal, ds, dz)],
                    kappa * dtau + tau * dkappa,
                )

            def direction(sigma, corr, corr_tk):
                fac = 1.0 - sigma
                rhs = (
                    -fac * r1,
                    -fac * r2,
                    [-fac * r for r in r3],
                    -fac * r4,
                    [sc.comp_rhs(sigma * mu, cr) for sc, cr in zip(scal, corr)],
                    sigma * mu - tau * kappa - corr_tk,
                )
                sol = newton(*rhs)
                # refinement only pays off once the scaling is ill-conditioned
                for _ in range(_REFINE if mu < _REFINE_BELOW * mu0 else 0):
                    got = linearized(*sol)
                    res = (
                        rhs[0] - got[0],
                        rhs[1] - got[1],
                        [a_ - b_ for a_, b_ in zip(rhs[2], got[2])],
                        rhs[3] - got[3],
                        [a_ - b_ for a_, b_ in zip(rhs[4], got[4])],
                        rhs[5] - got[5],
                    )
                    if log.isEnabledFor(logging.DEBUG):
                        log.debug("  refine residuals %s", [_max_abs(r) for r in res])
                    fix = newton(*res)
                    sol = (
                        sol[0] + fix[0],
                        sol[1] + fix[1],
                        [a_ + b_ for a_, b_ in zip(sol[2], fix[2])],
                        [a_ + b_ for a_, b_ in zip(sol[3], fix[3])],
                        sol[4] + fix[4],
                        sol[5] + fix[5],
                    )
                return sol

            def step_to_boundary(ds, dz, dtau, dkappa):
                amax = np.inf
                scaled = []
                for sc, dsi, dzi in zip(scal, ds, dz):
                    st, zt = sc.scaled(dsi, dzi)
                    scaled.append((st, zt))
                    amax = min(amax, sc.max_step(st), sc.max_step(zt))
                if dtau < 0:
                    amax = min(amax, -tau / dtau)
                if dkappa < 0:
                    amax = min(amax, -kappa / dkappa)
                return amax, scaled

            zero_corr = [None if cn.d > 1 else 0.0 for cn in cones]
            dx, dy, dz, ds, dtau, dkappa = direction(0.0, zero_corr, 0.0)
            amax, scaled = step_to_boundary(ds, dz, dtau, dkappa)
            alpha_aff = min(1.0, amax)
            sigma = (1.0 - alpha_aff) ** 3
            corr = [_sym_prod(st, zt, cn.d) for cn, (st, zt) in zip(cones, scaled)]
            dx, dy, dz, ds, dtau, dkappa = direction(sigma, corr, dtau * dkappa)
            amax, _ = step_to_boundary(ds, dz, dtau, dkappa)
            alpha = min(1.0, _STEP * amax)
            if not np.isfinite(alpha) or alpha <= 0:
                status = NUMERICAL_FAILURE
                break
            small_steps = small_steps + 1 if alpha < 1e-8 else 0

            x = x + alpha * dx
            y = y + alpha * dy
            s = [si + alpha * dsi for si, dsi in zip(s, ds)]
            z = [zi + alpha * dzi for zi, dzi in zip(z, dz)]
            s = [si if cn.d == 1 else 0.5 * (si + np.swapaxes(si, 1, 2)) for cn, si in zip(cones, s)]
            z = [zi if cn.d == 1 else 0.5 * (zi + np.swapaxes(zi, 1, 2)) for cn, zi in zip(cones, z)]
            tau += alpha * dtau
            kappa += alpha * dkappa
            it += 1
        if status == NUMERICAL_FAILURE and len(best) > 1:
            # late iterates of degenerate problems drift once rounding dominates
            _, x, y, z, tau, kappa, pcost, dcost, pres, dres, gap = best

    ray = None
    if status == INFEASIBLE:
        scale_z = -1.0 / (float(b @ y) + dot(F0, z))
        zs = [zi * scale_z for zi in z]
        ys = y * scale_z
    elif status == UNBOUNDED:
        ray = x / (-float(c @ x))
        zs = [zi / tau for zi in z]
        ys = y / tau
    else:
        zs = [zi / tau for zi in z]
        ys = y / tau
    xs = x / tau

    def piece(tag):
        k, batch, off, d = tags[tag]
        if cones[k].d == 1:
            return np.array([[zs[k][batch]]])
        return zs[k][batch][off : off + d, off : off + d]

    block_duals = [piece(("block", j)) for j in range(len(p.blocks))]
    lin = np.zeros(len(p.linear))
    neq = 0
    for j, row in enumerate(p.linear):
        if row.sense == "=":
            lin[j] = ys[neq]
            neq += 1
        else:
            lin[j] = piece(("linear", j))[0, 0]
    bound_duals = {}
    for name in ("lower", "upper"):
        vals = np.zeros(nv)
        for i in range(nv):
            if (name, i) in tags:
                vals[i] = piece((name, i))[0, 0]
        bound_duals[name] = vals

    reported_gap = abs(gap) / (1.0 + abs(pcost) + abs(dcost)) if np.isfinite(gap) else np.inf
    return SdpSolution(
        status=status,
        x=xs,
        objective=float(pcost),
        dual_objective=float(dcost),
        gap=float(reported_gap),
        primal_residual=float(pres),
        dual_residual=float(dres),
        iterations=it,
        block_duals=block_duals,
        linear_duals=lin,
        lower_duals=bound_duals["lower"],
        upper_duals=bound_duals["upper"],
        ray=ray,
    )


def verify_infeasibility_certificate(p: SdpProblem, sol: SdpSolution, tol: float = 1e-7) -> bool:
    """Check a Farkas certificate: Z_b >= 0, y free (>= 0 on inequality rows) with
    ``sum_b <F_bi, Z_b> + sum_j y_j a_ji ~ 0`` and ``sum_b <F_b0, Z_b> + sum_j y_j c_j < 0``.

    Inequality rows are rewritten as ``const + a^T x >= 0`` before the check,
    so every inequality multiplier must be nonnegative.
    """
    if sol.status != INFEASIBLE:
        return False
    grad = np.zeros(p.nv)
    value = 0.0
    for blk, Z in zip(p.blocks, sol.block_duals):
        if np.linalg.eigvalsh(Z)[0] < -tol:
            return False
        value += float(np.sum(blk.const * Z))
        for k, i in enumerate(blk.index):
            grad[i] += float(np.sum(blk.coeffs[k] * Z))
    for row, mult in zip(p.linear, sol.linear_duals):
        if row.sense == "=":
            grad[row.index] -= mult * row.coeffs
            value -= mult * row.bound
            continue
        if mult < -tol:
            return False
        sign = -1.0 if row.sense == "<=" else 1.0
        grad[row.index] += mult * sign * row.coeffs
        value += mult * (-sign * row.bound)
    for bounds, mults, sign in ((p.lower, sol.lower_duals, 1.0), (p.upper, sol.upper_duals, -1.0)):
        if bounds is None:
            continue
        bounds = np.broadcast_to(np.asarray(bounds, dtype=float), (p.nv,))
        for i, v in enumerate(bounds):
            if not np.isfinite(v):
                continue
            if mults[i] < -tol:
                return False
            grad[i] += sign * mults[i]
            value -= sign * v * mults[i]
    return value < -tol and float(np.max(np.abs(grad), initial=0.0)) <= tol


@dataclass(frozen=True)
class FeasibilityResult:
    feasible: bool
    slack: float
    x: np.ndarray
    solution: SdpSolution

    def __bool__(self):
        return self.feasible


def phase_one(p: SdpProblem) -> SdpProblem:
    """Phase-I problem: maximize t with every inequality block shifted by ``-t I``.

    ``t`` is the last variable and is capped at 1 so the problem is bounded.
    """
    nv = p.nv + 1
    t = p.nv
    q = SdpProblem(nv, objective=np.eye(nv)[t] * -1.0)
    for blk in p.blocks:
        d = blk.dim
        index = np.append(blk.index, t)
        coeffs = np.concatenate([blk.coeffs, -np.eye(d)[None]], axis=0)
        q.blocks.append(LmiBlock(blk.const, index, coeffs))
    for row in p.linear:
        if row.sense == "=":
            q.linear.append(row)
        else:
            sign = 1.0 if row.sense == ">=" else -1.0
            # sign * (a^T x - bound) - t >= 0
            q.linear.append(
                LinearConstraint(np.append(row.index, t), np.append(sign * row.coeffs, -1.0), ">=", sign * row.bound)
            )
    for bounds, sign in ((p.lower, 1.0), (p.upper, -1.0)):
        if bounds is None:
            continue
        bounds = np.broadcast_to(np.asarray(bounds, dtype=float), (p.nv,))
        for i, v in enumerate(bounds):
            if np.isfinite(v):
                q.linear.append(LinearConstraint(np.array([i, t]), np.array([sign, -1.0]), ">=", sign * v))
    q.linear.append(LinearConstraint(np.array([t]), np.array([1.0]), "<=", 1.0))
    return q


def check_feasible(p: SdpProblem, margin: float = 1e-7, opts: SolverOptions | None = None) -> FeasibilityResult:
    """Decide feasibility of ``p`` through its phase-I problem.

    Returns a truthy :class:`FeasibilityResult` iff the optimal slack is at
    least ``-margin``.  Only the constraints of ``p`` matter; its objective
    is ignored.

    Raises
    ------
    SolverError
        When the phase-I solve ends in numerical failure.
    """
    q = phase_one(p)
    sol = solve(q, opts)
    if sol.status == INFEASIBLE:
        # only the equality rows can make phase I infeasible
        return FeasibilityResult(False, -np.inf, sol.x[:-1], sol)
    if sol.status != OPTIMAL:
        raise SolverError(f"phase-I solve failed: {sol.status}", status=sol.status, solution=sol)
    slack = float(sol.x[-1])
    return FeasibilityResult(slack >= -margin, slack, sol.x[:-1], sol)
