"""Compiled interior-point kernel for SDPs whose blocks fit in one small matrix.

Same algorithm as the batched solver in :mod:`energyqrng.sdpcore` (homogeneous
self-dual embedding, Nesterov-Todd scaling, Mehrotra predictor-corrector),
written on plain 2-D arrays so numba can compile it.  Problems with a few
variables and a 4x4 block then take well under a millisecond.
"""

import numpy as np
from numba import njit

STATUS_OPTIMAL = 0
STATUS_INFEASIBLE = 1
STATUS_UNBOUNDED = 2
STATUS_FAILURE = 3


@njit(cache=True)
def _chol(a):
    n = a.shape[0]
    L = np.zeros_like(a)
    for j in range(n):
        acc = a[j, j]
        for k in range(j):
            acc -= L[j, k] * L[j, k]
        if not acc > 0.0:
            return L, False
        L[j, j] = np.sqrt(acc)
        for i in range(j + 1, n):
            acc = a[i, j]
            for k in range(j):
                acc -= L[i, k] * L[j, k]
            L[i, j] = acc / L[j, j]
    return L, True


@njit(cache=True)
def _tri_solve(R, rhs, transpose):
    """Solve R x = rhs (or R^T x = rhs) for upper-triangular R."""
    n = R.shape[0]
    x = rhs.copy()
    if transpose:
        for i in range(n):
            for k in range(i):
                x[i] -= R[k, i] * x[k]
            x[i] /= R[i, i]
    else:
        for i in range(n - 1, -1, -1):
            for k in range(i + 1, n):
                x[i] -= R[i, k] * x[k]
            x[i] /= R[i, i]
    return x


@njit(cache=True)
def _lsq_solve(Gm, Q, Rq, N, pinv, e1, t, r):
    """Solve Gm^T Gm dx + A^T dy = e1 + Gm^T t, A dx = r."""
    dxp = pinv @ r
    w = _tri_solve(Rq, N.T @ e1, True) + Q.T @ (t - Gm @ dxp)
    dx = dxp + N @ _tri_solve(Rq, w, False)
    dy = pinv.T @ (e1 + Gm.T @ (t - Gm @ dx))
    return dx, dy


@njit(cache=True)
def _max_step(lam, dt):
    isq = 1.0 / np.sqrt(lam)
    X = np.empty_like(dt)
    n = lam.shape[0]
    for i in range(n):
        for j in range(n):
            X[i, j] = 0.5 * (dt[i, j] + dt[j, i]) * isq[i] * isq[j]
    worst = np.linalg.eigvalsh(X)[0]
    if worst >= 0.0:
        return np.inf
    return -1.0 / worst


@njit(cache=True)
def dense_ipm(F0, Fflat, c, A, b, N, pinv, gap_tol, feas_tol, max_iter, step, refine_below):
    """Solve min c.x s.t. F0 + sum_i x_i F_i >= 0, A x = b.

    ``Fflat`` holds the coefficient matrices flattened row-wise, shape (nv, D*D);
    ``N`` is a nullspace basis of ``A`` and ``pinv`` its pseudo-inverse.
    Returns (status, x, y, z, tau, kappa, iterations, pcost, dcost, pres, dres, gap).
    """
    nv = c.shape[0]
    D = F0.shape[0]
    me = b.shape[0]
    DD = D * D
    f0 = F0.ravel().copy()
    AT = A.T.copy()

    nrm_c = 1.0 + np.sqrt(np.sum(c * c))
    nrm_h = 1.0 + max(np.sqrt(np.sum(b * b)), np.sqrt(np.sum(f0 * f0)))

    x = np.zeros(nv)
    y = np.zeros(me)
    s = np.eye(D)
    z = np.eye(D)
    tau = 1.0
    kappa = 1.0
    mu0 = 1.0
    status = STATUS_FAILURE
    it = 0
    pcost = np.nan
    dcost = np.nan
    pres = np.inf
    dres = np.inf
    gap = np.inf
    small = 0

    while True:
        Ax = (x @ Fflat).reshape(D, D)
        zf = z.ravel()
        r1 = AT @ y - Fflat @ zf + c * tau
        r2 = b * tau - A @ x
        r3 = s - Ax - F0 * tau
        hz = b @ y + f0 @ zf
        cx = c @ x
        r4 = kappa + cx + hz
        sz = np.sum(s * z)
        mu = (sz + tau * kappa) / (D + 1)

        pcost = cx / tau
        dcost = -hz / tau
        pres = max(np.sqrt(np.sum(r2 * r2)), np.sqrt(np.sum(r3 * r3))) / tau / nrm_h
        dres = np.sqrt(np.sum(r1 * r1)) / tau / nrm_c
        gap = sz / (tau * tau)
        scale = 1.0 + abs(pcost) + abs(dcost)
        if pres <= feas_tol and dres <= feas_tol and gap <= gap_tol * scale:
            status = STATUS_OPTIMAL
            break
        if hz < 0.0:
            g = AT @ y - Fflat @ zf
            if np.sqrt(np.sum(g * g)) / (-hz) / nrm_c <= feas_tol:
                status = STATUS_INFEASIBLE
                break
        if cx < 0.0:
            hr = s - Ax
            ax = A @ x
            dinf = max(np.sqrt(np.sum(ax * ax)), np.sqrt(np.sum(hr * hr))) / (-cx) / nrm_h
            if dinf <= feas_tol:
                status = STATUS_UNBOUNDED
                break
        if it >= max_iter or small >= 8 or not np.isfinite(mu):
            status = STATUS_FAILURE
            break

        # Nesterov-Todd scaling W = R R^T, R^T z R = R^-1 s R^-T = diag(lam)
        Ls, ok1 = _chol(s)
        Lz, ok2 = _chol(z)
        if not (ok1 and ok2):
            status = STATUS_FAILURE
            break
        U, lam, Vt = np.linalg.svd(Lz.T @ Ls)
        V = Vt.T.copy()
        isq = 1.0 / np.sqrt(lam)
        sq = np.sqrt(lam)
        R = Ls @ (V * isq)
        Ri = (Vt * sq.reshape(D, 1)) @ np.linalg.inv(Ls)
        RiT = Ri.T.copy()
        RT = R.T.copy()

        # columns of Gm are vec(R^-1 F_i R^-T); QR of Gm N avoids forming G^T G
        Gm = np.empty((DD, nv))
        for i in range(nv):
            Gm[:, i] = (Ri @ Fflat[i].reshape(D, D) @ RiT).ravel()
        if N.shape[1] > 0:
            Q, Rq = np.linalg.qr(Gm @ N)
            Q = np.ascontiguousarray(Q)
            Rq = np.ascontiguousarray(Rq)
        else:
            Q = np.zeros((DD, 0))
            Rq = np.zeros((0, 0))
        okf = True
        dmax = 0.0
        for i in range(Rq.shape[0]):
            dmax = max(dmax, abs(Rq[i, i]))
        for i in range(Rq.shape[0]):
            if not abs(Rq[i, i]) > 1e-14 * max(1.0, dmax):
                okf = False
        if not okf:
            status = STATUS_FAILURE
            break

        hf0 = Ri @ F0 @ RiT
        dxb, dyb = _lsq_solve(Gm, Q, Rq, N, pinv, -c, -hf0.ravel(), b)
        sb = Ri @ (F0 + (dxb @ Fflat).reshape(D, D)) @ RiT
        dzb = -(RiT @ sb @ Ri)
        # c.dxb + b.dyb + <F0, dzb> collapses to -|sb|^2 by skew symmetry;
        # the explicit sum cancels catastrophically once W is ill-conditioned
        denom = -kappa / tau - np.sum(sb * sb)

        refine = 1 if mu < refine_below * mu0 else 0

        # two passes: predictor (sigma = 0) then corrector
        sigma = 0.0
        dts = np.zeros((D, D))
        dtz = np.zeros((D, D))
        dtk = 0.0
        dx = np.zeros(nv)
        dy = np.zeros(me)
        dz = np.zeros((D, D))
        ds = np.zeros((D, D))
        dtau = 0.0
        dkappa = 0.0
        for phase in range(2):
            fac = 1.0 - sigma
            q1 = -fac * r1
            q2 = -fac * r2
            q3 = -fac * r3
            q4 = -fac * r4
            v = -0.5 * (dts @ dtz + dtz @ dts)
            for i in range(D):
                v[i, i] += sigma * mu - lam[i] * lam[i]
            u = np.empty((D, D))
            for i in range(D):
                for j in range(D):
                    u[i, j] = 2.0 * v[i, j] / (lam[i] + lam[j])
            rc = R @ u @ RT
            rct = sigma * mu - tau * kappa - dtk

            # Newton solve with one optional refinement sweep
            e1 = q1.copy()
            e2 = q2.copy()
            e3 = q3.copy()
            e4 = q4
            e5 = rc.copy()
            e6 = rct
            dx[:] = 0.0
            dy[:] = 0.0
            dz[:, :] = 0.0
            ds[:, :] = 0.0
            dtau = 0.0
            dkappa = 0.0
            for sweep in range(1 + refine):
                te = Ri @ (e5 - e3) @ RiT
                dxa, dya = _lsq_solve(Gm, Q, Rq, N, pinv, e1, te.ravel(), -e2)
                ta = Ri @ (dxa @ Fflat).reshape(D, D) @ RiT
                dza = RiT @ (te - ta) @ Ri
                # c.dxa + b.dya + <F0, dza> rewritten through the b-system
                # (same skew-symmetry argument as for denom)
                num = e4 - e6 / tau - (e1 @ dxb + e2 @ dyb + np.sum(sb * (te - 2.0 * ta)))
                gt = num / denom
                fx = dxa + gt * dxb
                fy = dya + gt * dyb
                fz = dza + gt * dzb
                # from the linearized feasibility row, so primal residuals shrink exactly
                fs = e3 + (fx @ Fflat).reshape(D, D) + F0 * gt
                fk = (e6 - kappa * gt) / tau
                dx += fx
                dy += fy
                dz += fz
                ds += fs
                dtau += gt
                dkappa += fk
                if sweep < refine:
                    adx = (dx @ Fflat).reshape(D, D)
                    e1 = q1 - (AT @ dy - Fflat @ dz.ravel() + c * dtau)
                    e2 = q2 - (b * dtau - A @ dx)
                    e3 = q3 - (ds - adx - F0 * dtau)
                    e4 = q4 - (dkappa + c @ dx + b @ dy + f0 @ dz.ravel())
                    e5 = rc - (ds + R @ (RT @ dz @ R) @ RT)
                    e6 = rct - (kappa * dtau + tau * dkappa)

            st = Ri @ ds @ RiT
            zt = RT @ dz @ R
            amax = min(_max_step(lam, st), _max_step(lam, zt))
            if dtau < 0.0:
                amax = min(amax, -tau / dtau)
            if dkappa < 0.0:
                amax = min(amax, -kappa / dkappa)
            if phase == 0:
                sigma = (1.0 - min(1.0, amax)) ** 3
                dts = st
                dtz = zt
                dtk = dtau * dkappa

        alpha = min(1.0, step * amax)
        if not np.isfinite(alpha) or alpha <= 0.0:
            status = STATUS_FAILURE
            break
        if alpha < 1e-8:
            small += 1
        else:
            small = 0
        x = x + alpha * dx
        y = y + alpha * dy
        s = s + alpha * ds
        z = z + alpha * dz
        s = 0.5 * (s + s.T)
        z = 0.5 * (z + z.T)
        tau += alpha * dtau
        kappa += alpha * dkappa
        it += 1

    return status, x, y, z, tau, kappa, it, pcost, dcost, pres, dres, gap
