"""Numba-compiled inner loops (allocation dual iteration, reflected diffusion).

Kept free of Python objects so the simulators can call them millions of times.
"""
from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _eval_primal(A, C, w, inv_alpha, p, lam, load, cap):
    """Fill lam(p) and load = A lam; return the KKT residual.

    lam is clamped at a huge multiple of the feasible bound so that collapsed
    duals cannot overflow downstream linear algebra; the clamp never binds at
    a KKT point."""
    J, S = A.shape
    for i in range(S):
        pa = 0.0
        for j in range(J):
            pa += p[j] * A[j, i]
        if pa < 1e-300:
            pa = 1e-300
        v = (w[i] / pa) ** inv_alpha
        if v > cap[i]:
            v = cap[i]
        lam[i] = v
    residual = 0.0
    for j in range(J):
        acc = 0.0
        for i in range(S):
            acc += A[j, i] * lam[i]
        load[j] = acc
        excess = acc - C[j]
        if excess > residual:
            residual = excess
        comp = p[j] * excess
        if comp < 0.0:
            comp = -comp
        if comp > residual:
            residual = comp
    return residual


@njit(cache=True)
def _dual_value(A, C, w, alpha, inv_alpha, p, cap):
    """Lagrange dual objective D(p); smooth and convex on p >= 0.

    Returns +inf when any rate hits the overflow clamp: the clamped value
    understates the inner supremum there, and trusting it lets a line search
    accept steps that collapse a needed dual to zero."""
    J, S = A.shape
    val = 0.0
    for j in range(J):
        val += p[j] * C[j]
    for i in range(S):
        pa = 0.0
        for j in range(J):
            pa += p[j] * A[j, i]
        if pa < 1e-300:
            pa = 1e-300
        lam_i = (w[i] / pa) ** inv_alpha
        if lam_i >= cap[i]:
            return np.inf
        if alpha == 1.0:
            val += w[i] * np.log(lam_i) - pa * lam_i
        else:
            val += w[i] * lam_i ** (1.0 - alpha) / (1.0 - alpha) - pa * lam_i
    return val


@njit(cache=True)
def _projected_newton(A, C, w, alpha, inv_alpha, p, lam, load, cap, tol, max_steps):
    """Projected Newton on the dual: minimizes D(p) over p >= 0.

    Gradient is C - load; Hessian A diag(lam/(alpha*pa)) A' restricted to the
    free set.  Projection onto the orthant yields exact zero duals for slack
    constraints, which the multiplicative phase only reaches asymptotically.
    """
    J, S = A.shape
    residual = _eval_primal(A, C, w, inv_alpha, p, lam, load, cap)
    dval = _dual_value(A, C, w, alpha, inv_alpha, p, cap)
    best_res = residual
    best_p = p.copy()
    p_try = np.empty(J)
    for _ in range(max_steps):
        if residual < tol:
            break
        pmax = 0.0
        for j in range(J):
            if p[j] > pmax:
                pmax = p[j]
        eps_fix = 1e-12 * (1.0 + pmax)
        # epsilon-active set: duals at (or vanishing toward) the bound with
        # positive gradient are pinned to zero and left out of the solve,
        # otherwise the projected direction miscompensates across constraints
        free = np.zeros(J, dtype=np.bool_)
        nf = 0
        dirty = False
        for j in range(J):
            g = C[j] - load[j]
            if p[j] > eps_fix or g < 0.0:
                free[j] = True
                nf += 1
            elif p[j] != 0.0:
                p[j] = 0.0
                dirty = True
        if dirty:
            residual = _eval_primal(A, C, w, inv_alpha, p, lam, load, cap)
            if residual < best_res:
                best_res = residual
                for j in range(J):
                    best_p[j] = p[j]
            if residual < tol:
                break
        if nf == 0:
            break
        idx = np.empty(nf, dtype=np.int64)
        k = 0
        for j in range(J):
            if free[j]:
                idx[k] = j
                k += 1
        gf = np.empty(nf)
        H = np.zeros((nf, nf))
        for a in range(nf):
            gf[a] = C[idx[a]] - load[idx[a]]
        for i in range(S):
            if lam[i] >= cap[i]:
                continue  # clamped: dlam/dp = 0 there
            pa = 0.0
            for j in range(J):
                pa += p[j] * A[j, i]
            if pa < 1e-300:
                pa = 1e-300
            c_i = inv_alpha * lam[i] / pa
            for a in range(nf):
                Aai = A[idx[a], i]
                if Aai != 0.0:
                    for b in range(nf):
                        H[a, b] += Aai * c_i * A[idx[b], i]
        d = np.linalg.lstsq(H, -gf)[0]
        lam_t = np.empty(S)
        load_t = np.empty(J)
        # duplicated constraint rows on the support make H singular and the
        # min-norm direction cannot separate their duals; the gradient part
        # in null(H) leaves the loads unchanged while D falls linearly, so
        # ride it to the orthant boundary before the Newton step
        gn = H @ d + gf
        nrm_gn = 0.0
        nrm_gf = 0.0
        for a in range(nf):
            nrm_gn += gn[a] * gn[a]
            nrm_gf += gf[a] * gf[a]
        if nrm_gn > 1e-24 * (1.0 + nrm_gf):
            t_star = np.inf
            for a in range(nf):
                if gn[a] > 0.0:
                    t = p[idx[a]] / gn[a]
                    if t < t_star:
                        t_star = t
            if np.isfinite(t_star) and t_star > 0.0:
                for j in range(J):
                    p_try[j] = p[j]
                for a in range(nf):
                    v = p[idx[a]] - t_star * gn[a]
                    p_try[idx[a]] = v if v > 0.0 else 0.0
                d_try = _dual_value(A, C, w, alpha, inv_alpha, p_try, cap)
                r_try = _eval_primal(A, C, w, inv_alpha, p_try, lam_t, load_t, cap)
                if d_try < dval - 1e-14 * (1.0 + np.abs(dval)) or r_try < residual:
                    for j in range(J):
                        p[j] = p_try[j]
                    if np.isfinite(d_try):
                        dval = d_try
                    residual = _eval_primal(A, C, w, inv_alpha, p, lam, load, cap)
                    if residual < best_res:
                        best_res = residual
                        for j in range(J):
                            best_p[j] = p[j]
                    continue
        # backtracking along the projection arc; near the optimum D-decrease
        # falls below float noise, so residual decrease also accepts a step
        accepted = False
        scale = 1.0
        for _bt in range(25):
            for j in range(J):
                p_try[j] = p[j]
            for a in range(nf):
                j = idx[a]
                v = p[j] + scale * d[a]
                p_try[j] = v if v > 0.0 else 0.0
            d_try = _dual_value(A, C, w, alpha, inv_alpha, p_try, cap)
            r_try = _eval_primal(A, C, w, inv_alpha, p_try, lam_t, load_t, cap)
            if d_try < dval - 1e-14 * (1.0 + np.abs(dval)) or r_try < residual:
                accepted = True
                break
            scale *= 0.5
        if not accepted:
            break
        for j in range(J):
            p[j] = p_try[j]
        if np.isfinite(d_try):
            dval = d_try
        residual = _eval_primal(A, C, w, inv_alpha, p, lam, load, cap)
        if residual < best_res:
            best_res = residual
            for j in range(J):
                best_p[j] = p[j]
    if residual > best_res:
        for j in range(J):
            p[j] = best_p[j]
        residual = _eval_primal(A, C, w, inv_alpha, p, lam, load, cap)
    return residual


@njit(cache=True)
def dual_iteration(A, C, w, inv_alpha, p, cap, tau0, tol, max_iter):
    """Multiplicative dual updates for the weighted alpha-fair KKT system.

    A is the (active resources) x (supported routes) submatrix, w_i = kappa_i
    n_i^alpha, and the primal is recovered as Lam_i = (w_i/(p'A)_i)^(1/alpha).
    Updates p_j <- p_j * ((A Lam)_j / C_j)^tau drive binding loads to C_j and
    slack duals to zero; tau is halved when consecutive update directions
    oppose each other; a projected-Newton finisher takes over near the
    optimum.  Returns (Lam, p, iterations, residual).
    """
    J, S = A.shape
    alpha = 1.0 / inv_alpha
    lam = np.zeros(S)
    load = np.zeros(J)
    prev_lr = np.zeros(J)
    p_snap = np.empty(J)
    best_p = p.copy()
    best_res = np.inf
    tau = tau0
    trigger = 1e-5
    residual = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        residual = _eval_primal(A, C, w, inv_alpha, p, lam, load, cap)
        if residual < best_res:
            best_res = residual
            for j in range(J):
                best_p[j] = p[j]
        if residual < tol:
            # drop dangling near-zero duals on slack constraints so callers
            # never see subnormal prices in the stationarity relation
            pmax = 0.0
            for j in range(J):
                if p[j] > pmax:
                    pmax = p[j]
            dirty = False
            for j in range(J):
                if 0.0 < p[j] <= 1e-12 * (1.0 + pmax) and load[j] <= C[j]:
                    p[j] = 0.0
                    dirty = True
            if dirty:
                residual = _eval_primal(A, C, w, inv_alpha, p, lam, load, cap)
            if residual < tol:
                break
        if residual < trigger or it >= 500:
            # transactional: a polish that did not improve is rolled back so
            # a bad Newton excursion can never corrupt the outer iterate
            snap_res = residual
            for j in range(J):
                p_snap[j] = p[j]
            residual = _projected_newton(A, C, w, alpha, inv_alpha, p, lam, load, cap, tol, 100)
            if residual >= snap_res:
                for j in range(J):
                    p[j] = p_snap[j]
                residual = _eval_primal(A, C, w, inv_alpha, p, lam, load, cap)
            elif residual < best_res:
                best_res = residual
                for j in range(J):
                    best_p[j] = p[j]
            if residual < tol:
                break
            trigger = residual * 0.01
        osc = 0.0
        for j in range(J):
            lr = np.log(load[j] / C[j])
            osc += lr * prev_lr[j]
            prev_lr[j] = lr
        if osc < 0.0 and tau > 1e-4:
            tau *= 0.5
        for j in range(J):
            step = tau * prev_lr[j]
            if step > 2.0:
                step = 2.0
            elif step < -2.0:
                step = -2.0
            p[j] *= np.exp(step)
    if residual > best_res:
        for j in range(J):
            p[j] = best_p[j]
        residual = _eval_primal(A, C, w, inv_alpha, p, lam, load, cap)
    return lam, p, it, residual
