"""Fluid-scale dynamics: ODE integration, Lyapunov function, lifting map.

The fluid model moves each positive component with drift nu_i - mu_i
Lam_i(n) and freezes components at zero.  The lifting map Delta(w) returns
the minimizer of the Lyapunov function F over states whose workload
dominates w; its image is the invariant manifold of the ODE.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .alloc import allocate
from .errors import (
    NotApplicable,
    NotCriticallyLoaded,
    NotInCone,
    SolverDiverged,
    StepTooLarge,
)
from .model import NetworkSpec, workload

LIFT_TOL = 1e-10
LIFT_MAX_SWEEPS = 500


@dataclass(frozen=True)
class FluidTrajectory:
    times: np.ndarray
    states: np.ndarray
    F_values: np.ndarray
    manifold_proxy: np.ndarray


@dataclass(frozen=True)
class InvariantState:
    n: np.ndarray
    q: np.ndarray


def lyapunov_F(spec: NetworkSpec, n) -> float:
    """Convex Lyapunov function of the fluid model; zero only at n = 0."""
    n = np.asarray(n, dtype=float)
    a = spec.alpha
    terms = spec.nu * spec.kappa * spec.mu ** (a - 1.0) * (n / spec.nu) ** (a + 1.0)
    return float(np.sum(terms) / (a + 1.0))


def _state_from_q(spec: NetworkSpec, q: np.ndarray) -> np.ndarray:
    qa = q @ spec.A
    return spec.rho * (np.maximum(qa, 0.0) / spec.kappa) ** (1.0 / spec.alpha)


def lift_delta(spec: NetworkSpec, w, return_q: bool = False, tol: float = 1e-9,
               max_sweeps: int = LIFT_MAX_SWEEPS):
    """Minimize F over states whose workload dominates w.

    Solves the complementarity system on the workload multipliers q:
    q >= 0, workload(n(q)) >= w, q_j (workload_j - w_j) = 0, where
    n(q)_i = rho_i ((q'A)_i / kappa_i)^(1/alpha).  Workload is componentwise
    nondecreasing in q, so projected Gauss-Seidel sweeps converge; alpha = 1
    makes each one-dimensional solve linear, otherwise it is a monotone
    root find.
    """
    w = np.asarray(w, dtype=float)
    if w.shape != (spec.J,):
        raise ValueError(f"w has shape {w.shape}, expected ({spec.J},)")
    if np.any(w < 0):
        raise ValueError("w must be nonnegative")
    inv_alpha = 1.0 / spec.alpha
    # n(q)_i / mu_i = b_i * (q'A)_i^(1/alpha)
    b = spec.rho / (spec.mu * spec.kappa ** inv_alpha)

    def wl(q):
        qa = np.maximum(q @ spec.A, 0.0)
        return spec.A @ (b * qa ** inv_alpha)

    # linear per-component update for alpha = 1
    diag = np.array([float(spec.A[j] ** 2 @ b) for j in range(spec.J)])
    q = np.zeros(spec.J)
    target = 0.1 * max(tol, LIFT_TOL)
    for _ in range(max_sweeps):
        for j in range(spec.J):
            if spec.alpha == 1.0:
                gap = w[j] - float(spec.A[j] @ (b * np.maximum(q @ spec.A, 0.0)))
                q[j] = max(0.0, q[j] + gap / diag[j])
            else:
                def fj(t, j=j):
                    qt = q.copy()
                    qt[j] = t
                    return float(wl(qt)[j]) - w[j]

                if fj(0.0) >= 0.0:
                    q[j] = 0.0
                    continue
                hi = max(1.0, 2.0 * q[j])
                while fj(hi) < 0.0:
                    hi *= 2.0
                    if hi > 1e18:
                        raise SolverDiverged("workload multiplier bracket exploded")
                q[j] = brentq(fj, 0.0, hi, xtol=1e-14, rtol=8.9e-16)
        loads = wl(q)
        residual = max(float(np.max(w - loads, initial=0.0)),
                       float(np.max(np.abs(q * (loads - w)), initial=0.0)))
        if residual < target:
            break
    else:
        raise SolverDiverged(
            f"lifting map residual {residual:.3e} after {max_sweeps} sweeps")
    q = _newton_polish(spec, w, q, b, inv_alpha)
    n = _state_from_q(spec, q)
    return (n, q) if return_q else n


def _newton_polish(spec, w, q0, b, inv_alpha, tol=1e-13, max_steps=60):
    """Active-set Newton refinement of the workload multipliers.

    Near a cone face the sweep stops with q-error of order sqrt(residual)
    because the complementarity product is quadratically small there; solving
    the active equalities exactly removes that error.  Falls back to the
    sweep solution if the refined point fails the complementarity check.
    """
    A = spec.A
    q = q0.copy()
    act = q > 1e-4 * (1.0 + float(q.max(initial=0.0)))
    q[~act] = 0.0
    wmax = 1.0 + float(np.max(np.abs(w), initial=0.0))
    for _ in range(max_steps):
        if not act.any():
            break
        qa = np.maximum(q @ A, 0.0)
        wl = A @ (b * qa ** inv_alpha)
        r = wl[act] - w[act]
        if float(np.max(np.abs(r))) < tol * wmax:
            break
        with np.errstate(divide="ignore", invalid="ignore"):
            c = np.where(qa > 0.0, inv_alpha * b * qa ** (inv_alpha - 1.0), 0.0)
        Jg = (A[act] * c) @ A[act].T
        try:
            dq = np.linalg.solve(Jg, -r)
        except np.linalg.LinAlgError:
            dq = np.linalg.lstsq(Jg, -r, rcond=None)[0]
        idx = np.flatnonzero(act)
        # truncate at the first component hitting zero; it leaves the set
        # (ratio test keeps q feasible without a line search)
        t = 1.0
        for a, j in enumerate(idx):
            if dq[a] < 0.0:
                t = min(t, -q[j] / dq[a])
        q[idx] = np.maximum(q[idx] + t * dq, 0.0)
        hit = q[idx] == 0.0
        if hit.any():
            act[idx[hit]] = False
    qa = np.maximum(q @ A, 0.0)
    wl = A @ (b * qa ** inv_alpha)
    ok = bool(np.all(wl >= w - 1e-9)
              and float(np.max(np.abs(q * (wl - w)), initial=0.0)) < 1e-9)
    return q if ok else q0


def lift_delta_pf(spec: NetworkSpec, w) -> np.ndarray:
    """Closed-form lifting map for alpha = 1 on its workload cone."""
    if spec.alpha != 1.0:
        raise NotApplicable("closed-form lifting map requires alpha = 1")
    w = np.asarray(w, dtype=float)
    if w.shape != (spec.J,):
        raise ValueError(f"w has shape {w.shape}, expected ({spec.J},)")
    B = spec.nu / (spec.mu ** 2 * spec.kappa)
    G = (spec.A * B) @ spec.A.T
    q = np.linalg.solve(G, w)
    if np.any(q < -1e-9):
        raise NotInCone(f"workload multipliers {q} have a negative component")
    return _state_from_q(spec, np.maximum(q, 0.0))


def invariant_from_q(spec: NetworkSpec, q) -> InvariantState:
    """Construct the invariant state charged by workload multipliers q."""
    q = np.asarray(q, dtype=float)
    if q.shape != (spec.J,):
        raise ValueError(f"q has shape {q.shape}, expected ({spec.J},)")
    if np.any(q < 0):
        raise ValueError("q must be nonnegative")
    n = _state_from_q(spec, q)
    if np.any(n > 0):
        lam = allocate(spec, n).lam
        sup = n > 0
        if float(np.max(np.abs(lam[sup] - spec.rho[sup]))) > 1e-7:
            raise NotCriticallyLoaded(
                "allocation at the constructed state does not equal rho; "
                "the spec is not critically loaded where q charges it")
    return InvariantState(n=n, q=q)


def manifold_proxy(spec: NetworkSpec, n) -> float:
    """|n - Delta(workload(n))|; vanishes exactly on the invariant manifold."""
    n = np.asarray(n, dtype=float)
    return float(np.linalg.norm(n - lift_delta(spec, workload(spec, n))))


def integrate_fluid(spec: NetworkSpec, n0, horizon: float, step: float | None = None,
                    record_every: int | None = None) -> FluidTrajectory:
    """Clamped explicit Euler for the fluid ODE.

    Components at zero (below 1e-9 relative threshold) are frozen with zero
    derivative.  Raises StepTooLarge when a step would overshoot past
    -0.1 * step * max-rate, which signals a too-coarse step rather than an
    ordinary boundary hit.
    """
    n0 = np.asarray(n0, dtype=float)
    if n0.shape != (spec.I,):
        raise ValueError(f"n0 has shape {n0.shape}, expected ({spec.I},)")
    if np.any(n0 < 0):
        raise ValueError("n0 must be nonnegative")
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    if step is None:
        step = 1e-3 / float(spec.mu.max())
    if step <= 0:
        raise ValueError("step must be positive")
    n_steps = int(np.ceil(horizon / step - 1e-12))
    if record_every is None:
        record_every = max(1, -(-n_steps // 512))
    thr = 1e-9 * (1.0 + float(np.linalg.norm(n0)))
    lam_cap = np.min(np.where(spec.A > 0, spec.C[:, None] / np.where(spec.A > 0, spec.A, 1.0),
                              np.inf), axis=0)
    max_rate = float(np.max(spec.nu + spec.mu * lam_cap))
    floor = -0.1 * step * max_rate
    n = n0.copy()
    p_warm = None
    times = [0.0]
    states = [n.copy()]
    for k in range(1, n_steps + 1):
        active = n > thr
        if active.any():
            res = allocate(spec, np.where(active, n, 0.0), p0=p_warm)
            p_warm = res.p
            lam = res.lam
        else:
            lam = np.zeros(spec.I)
        cand = np.where(active, n + step * (spec.nu - spec.mu * lam), n)
        if np.any(cand < floor):
            worst = int(np.argmin(cand))
            raise StepTooLarge(
                f"component {worst} would reach {cand[worst]:.3e} in one step "
                f"(floor {floor:.3e}); reduce step below {step:g}")
        n = np.maximum(cand, 0.0)
        if k % record_every == 0 or k == n_steps:
            times.append(k * step)
            states.append(n.copy())
    states_arr = np.array(states)
    times_arr = np.array(times)
    F_values = np.array([lyapunov_F(spec, s) for s in states_arr])
    proxy = np.array([manifold_proxy(spec, s) for s in states_arr])
    return FluidTrajectory(times=times_arr, states=states_arr,
                           F_values=F_values, manifold_proxy=proxy)
