"""Weighted alpha-fair allocation: primal bandwidths plus Lagrange duals.

For a state n the allocation maximizes sum_i kappa_i n_i^alpha
Lam_i^(1-alpha)/(1-alpha) (log for alpha=1) over A Lam <= C, Lam >= 0,
restricted to the positive support of n.  The optimizer is characterized by
Lam_i = n_i (kappa_i/(p'A)_i)^(1/alpha) with complementary duals p.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._kernels import dual_iteration
from .errors import SolverDiverged
from .model import NetworkSpec

DEFAULT_TOL = 1e-10
MAX_ITER = 10_000


@dataclass(frozen=True)
class AllocationResult:
    lam: np.ndarray
    p: np.ndarray
    kkt_residual: float
    iterations: int


def allocate(spec: NetworkSpec, n, p0=None, tol: float = DEFAULT_TOL,
             max_iter: int = MAX_ITER) -> AllocationResult:
    """Solve the allocation problem at state n.

    Routes with n_i = 0 get Lam_i = 0 exactly; resources used by no supported
    route get p_j = 0.  Raises SolverDiverged if the KKT residual stays above
    tol after max_iter dual updates.  p0 optionally warm-starts the dual.
    """
    n = np.asarray(n, dtype=float)
    if n.shape != (spec.I,):
        raise ValueError(f"n has shape {n.shape}, expected ({spec.I},)")
    if np.any(n < 0):
        raise ValueError("n must be nonnegative")
    support = n > 0
    lam = np.zeros(spec.I)
    p = np.zeros(spec.J)
    if not support.any():
        return AllocationResult(lam, p, 0.0, 0)
    As = np.ascontiguousarray(spec.A[:, support])
    used = As.sum(axis=1) > 0
    Au = np.ascontiguousarray(As[used])
    Cu = np.ascontiguousarray(spec.C[used])
    w = spec.kappa[support] * n[support] ** spec.alpha
    # the dual system is scale-equivariant in w (p scales with w, Lam is
    # unchanged), so solve at canonical scale max(w) = 1 where the kernel's
    # pinning and cleanup thresholds are meaningful, then scale p back
    wmax = float(w.max())
    ws = w / wmax
    if p0 is not None:
        pu = np.maximum(np.asarray(p0, dtype=float)[used] / wmax, 1e-12).copy()
    else:
        pu = (Au @ ws) / Cu
    # overflow guard for collapsed duals; never binds at a KKT point
    with np.errstate(divide="ignore"):
        cap = 1e15 * np.min(np.where(Au > 0, Cu[:, None] / np.where(Au > 0, Au, 1.0),
                                     np.inf), axis=0)
    # complementarity in original units is wmax times the scaled value
    tol_kernel = max(tol / max(1.0, wmax), 1e-15)
    lam_s, pu, iters, _ = dual_iteration(Au, Cu, ws, 1.0 / spec.alpha, pu, cap,
                                         0.5, tol_kernel, max_iter)
    lam[support] = lam_s
    p[used] = pu * wmax
    residual = kkt_residual(spec, n, lam, p)
    if residual >= tol:
        raise SolverDiverged(f"residual {residual:.3e} after {iters} iterations")
    return AllocationResult(lam, p, float(residual), int(iters))


def utility(spec: NetworkSpec, n, lam) -> float:
    """Objective G_n(Lam) on the support of n; -inf when alpha >= 1 and a
    supported route has zero bandwidth."""
    n = np.asarray(n, dtype=float)
    lam = np.asarray(lam, dtype=float)
    support = n > 0
    ls, ns, ks = lam[support], n[support], spec.kappa[support]
    a = spec.alpha
    if a >= 1.0 and np.any(ls <= 0.0):
        return float("-inf")
    if a == 1.0:
        return float(np.sum(ks * ns * np.log(ls)))
    with np.errstate(divide="ignore"):
        terms = ks * ns ** a * ls ** (1.0 - a) / (1.0 - a)
    return float(np.sum(terms))


def kkt_residual(spec: NetworkSpec, n, lam, p) -> float:
    """Max violation among primal feasibility, dual sign, complementary
    slackness, and the stationarity relation on the support."""
    n = np.asarray(n, dtype=float)
    lam = np.asarray(lam, dtype=float)
    p = np.asarray(p, dtype=float)
    load = spec.A @ lam
    primal = float(np.max(np.maximum(load - spec.C, 0.0), initial=0.0))
    dual = float(np.max(np.maximum(-p, 0.0), initial=0.0))
    comp = float(np.max(np.abs(p * (spec.C - load)), initial=0.0))
    support = n > 0
    stat = 0.0
    if support.any():
        pa = (p @ spec.A)[support]
        if np.any(pa <= 0.0):
            stat = float("inf")
        else:
            target = n[support] * (spec.kappa[support] / pa) ** (1.0 / spec.alpha)
            stat = float(np.max(np.abs(lam[support] - target)))
    return max(primal, dual, comp, stat)
