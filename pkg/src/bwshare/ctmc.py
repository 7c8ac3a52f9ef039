"""Event-driven simulation of the flow-level Markov chain.

In state n, route i sees Poisson arrivals at rate nu_i and departures at
rate mu_i Lam_i(n); with exponential document sizes the process is Markov
and every clock is exponential, so the simulator advances by sampling the
race winner exactly, with no time discretization.  Also provides fluid and
diffusion rescaling of sampled paths, the state-space-collapse statistic,
time-weighted stationary estimates, and the closed-form stationary laws
(exact for the linear network, exponential-dual approximation in general).
"""
from __future__ import annotations

from dataclasses import dataclass
from math import exp, gcd, lgamma, log, log1p
from functools import reduce

import numpy as np
from scipy import stats

from .alloc import allocate
from .errors import (
    HorizonTooShort,
    NotSubcritical,
    StabilityViolated,
    TooFewBatches,
)
from .fluid import lift_delta
from .model import NetworkSpec

RNG_BUFFER = 1 << 16


@dataclass(frozen=True)
class PathSample:
    """Piecewise-constant sample path of the flow count process.

    Row k of states is the state on [event_times[k], event_times[k+1]) and
    the path holds its last state through the simulated horizon.
    cumulative_T accumulates allocated bandwidth, so it is piecewise linear
    with slope allocations[k] between events.  truncated marks paths cut
    short by an event budget; horizon is the covered time either way.
    """

    event_times: np.ndarray
    states: np.ndarray
    allocations: np.ndarray
    cumulative_T: np.ndarray
    seed: int
    r: float
    spec: NetworkSpec
    horizon: float
    truncated: bool = False


@dataclass(frozen=True)
class ScaledPath:
    """A path resampled on a uniform grid in rescaled time."""

    times: np.ndarray
    N: np.ndarray
    W: np.ndarray | None
    r: float
    mode: str
    dt: float


@dataclass(frozen=True)
class StationaryEstimate:
    mean: np.ndarray
    variance: np.ndarray
    histograms: tuple
    correlation: np.ndarray
    half_widths: np.ndarray
    burn_in: float
    batches: int


def simulate(spec: NetworkSpec, n0, horizon: float, seed: int, r: float = 1.0,
             max_events: int | None = None) -> PathSample:
    """Exact event-driven simulation, deterministic given seed.

    The allocation is recomputed only when the state changes, and cached on
    the direction of the state (allocations are invariant under scaling of
    n, so integer states are reduced by their gcd before lookup).
    """
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    n0 = np.asarray(n0)
    if n0.shape != (spec.I,):
        raise ValueError(f"n0 has shape {n0.shape}, expected ({spec.I},)")
    if np.any(n0 < 0) or np.any(n0 != np.floor(n0)):
        raise ValueError("n0 must be nonnegative integers")
    I = spec.I
    nu = [float(x) for x in spec.nu]
    mu = [float(x) for x in spec.mu]
    total_nu = sum(nu)
    zeros = (0.0,) * I

    cache: dict = {}

    def alloc_of(state):
        g = reduce(gcd, state)
        if g == 0:
            return zeros
        key = tuple(v // g for v in state)
        lam = cache.get(key)
        if lam is None:
            lam = tuple(float(x) for x in allocate(spec, np.array(key, dtype=float)).lam)
            cache[key] = lam
        return lam

    rng = np.random.default_rng(int(seed))
    buf = rng.random(RNG_BUFFER)
    ptr = 0

    state = [int(v) for v in n0]
    lam = alloc_of(state)
    t = 0.0
    cum = zeros
    times = [0.0]
    states = [tuple(state)]
    allocs = [lam]
    cums = [cum]
    covered = float(horizon)
    truncated = False
    while True:
        if ptr >= RNG_BUFFER - 1:
            buf = rng.random(RNG_BUFFER)
            ptr = 0
        total = total_nu
        for i in range(I):
            total += mu[i] * lam[i]
        dt = -log1p(-buf[ptr]) / total
        if t + dt > horizon:
            break
        t += dt
        pick = buf[ptr + 1] * total
        ptr += 2
        event = -1
        for i in range(I):
            pick -= nu[i]
            if pick < 0.0:
                event = i
                break
        if event < 0:
            for i in range(I):
                pick -= mu[i] * lam[i]
                if pick < 0.0:
                    event = I + i
                    break
        if event < 0:
            # float tail: fall back to the last event with positive rate
            event = I + max(i for i in range(I) if lam[i] > 0.0) if any(lam) else I - 1
        if event < I:
            state[event] += 1
        else:
            state[event - I] -= 1
        cum = tuple(c + l * dt for c, l in zip(cum, lam))
        lam = alloc_of(state)
        times.append(t)
        states.append(tuple(state))
        allocs.append(lam)
        cums.append(cum)
        if max_events is not None and len(times) - 1 >= max_events:
            covered = t
            truncated = True
            break
    return PathSample(
        event_times=np.array(times),
        states=np.array(states, dtype=np.int64),
        allocations=np.array(allocs),
        cumulative_T=np.array(cums),
        seed=int(seed),
        r=float(r),
        spec=spec,
        horizon=covered,
        truncated=truncated,
    )


def _states_at(path: PathSample, t: np.ndarray) -> np.ndarray:
    idx = np.searchsorted(path.event_times, t, side="right") - 1
    return path.states[np.clip(idx, 0, len(path.event_times) - 1)]


def scale_path(path: PathSample, r: float, mode: str, T: float | None = None,
               dt: float = 0.01) -> ScaledPath:
    """Resample a path on a uniform grid in fluid or diffusion scaling.

    Fluid: N(r t)/r on [0, horizon/r].  Diffusion: N(r^2 t)/r on
    [0, horizon/r^2], plus the scaled workload W = A diag(1/mu) N.
    """
    if mode not in ("fluid", "diffusion"):
        raise ValueError(f"mode must be 'fluid' or 'diffusion', got {mode!r}")
    if r <= 0 or dt <= 0:
        raise ValueError("r and dt must be positive")
    factor = r * r if mode == "diffusion" else r
    max_T = path.horizon / factor
    if T is None:
        T = max_T
    elif T > max_T * (1 + 1e-12):
        raise HorizonTooShort(
            f"need horizon {factor * T:g} for T={T:g} at r={r:g}, path covers {path.horizon:g}")
    npts = int(np.floor(T / dt + 1e-9)) + 1
    times = np.arange(npts) * dt
    N = _states_at(path, factor * times) / r
    W = None
    if mode == "diffusion":
        W = N @ (path.spec.A / path.spec.mu).T
    return ScaledPath(times=times, N=N, W=W, r=float(r), mode=mode, dt=float(dt))


def ssc_statistic(spec: NetworkSpec, path: PathSample, r: float, T: float,
                  grid_dt: float) -> float:
    """Relative sup-distance of the diffusion-scaled path from the manifold.

    sup_t |N_hat(t) - Delta(W_hat(t))| / (sup_t |N_hat(t)| or 1), with the
    sup taken over the resampling grid on [0, T] and Delta the workload
    lifting map of spec.
    """
    sp = scale_path(path, r, "diffusion", T=T, dt=grid_dt)
    dev = 0.0
    mag = 0.0
    for k in range(len(sp.times)):
        n_hat = sp.N[k]
        delta = lift_delta(spec, np.maximum(sp.W[k], 0.0))
        dev = max(dev, float(np.linalg.norm(n_hat - delta)))
        mag = max(mag, float(np.linalg.norm(n_hat)))
    return dev / max(mag, 1.0)


def _segment_weights(path: PathSample, t0: float, t1: float):
    times = path.event_times
    ends = np.append(times[1:], path.horizon)
    dur = np.minimum(ends, t1) - np.maximum(times, t0)
    keep = dur > 0
    return path.states[keep], dur[keep]


def stationary_estimate(path: PathSample, burn_in: float = 0.2,
                        batches: int = 20) -> StationaryEstimate:
    """Time-weighted stationary statistics over the post-burn-in window.

    Means, variances, per-route marginal histograms and pairwise
    correlations are time averages on [burn_in*T, T]; half-widths are 95%
    batch-means intervals from the requested batch count.
    """
    if not 0 <= burn_in < 1:
        raise ValueError("burn_in must be in [0, 1)")
    if batches < 2:
        raise ValueError("need at least 2 batches")
    T = path.horizon
    t0 = burn_in * T
    n_events = int(np.sum(path.event_times > t0))
    # a path with no events at all is genuinely constant and allowed; once
    # the chain moves, too few post-burn-in events mean the horizon is too
    # short to batch
    if len(path.event_times) > 1 and n_events < batches:
        raise TooFewBatches(
            f"{n_events} events after burn-in, need at least {batches}")
    s, d = _segment_weights(path, t0, T)
    D = d.sum()
    sf = s.astype(float)
    mean = (d @ sf) / D
    second = (d @ sf ** 2) / D
    variance = np.maximum(second - mean ** 2, 0.0)
    cov = (sf - mean).T @ ((sf - mean) * d[:, None]) / D
    sd = np.sqrt(np.diag(cov))
    with np.errstate(invalid="ignore", divide="ignore"):
        correlation = cov / np.outer(sd, sd)
    np.fill_diagonal(correlation, 1.0)
    histograms = []
    counts = np.rint(s).astype(np.int64)
    for i in range(path.states.shape[1]):
        masses = np.bincount(counts[:, i], weights=d) / D
        histograms.append(masses)
    edges = t0 + (T - t0) * np.arange(batches + 1) / batches
    bmeans = np.empty((batches, path.states.shape[1]))
    for b in range(batches):
        sb, db = _segment_weights(path, edges[b], edges[b + 1])
        bmeans[b] = (db @ sb.astype(float)) / db.sum()
    tcrit = stats.t.ppf(0.975, batches - 1)
    half = tcrit * bmeans.std(axis=0, ddof=1) / np.sqrt(batches)
    return StationaryEstimate(mean=mean, variance=variance, histograms=tuple(histograms),
                              correlation=correlation, half_widths=half,
                              burn_in=float(burn_in), batches=int(batches))


@dataclass(frozen=True)
class ExactLinearLaw:
    """Stationary law of the linear network with unit capacities.

    Route 0 runs through every resource, route j uses resource j alone.
    The joint pmf is an explicit product-and-binomial formula; the local
    routes are independent geometrics after marginalizing route 0.
    """

    rho0: float
    rho: np.ndarray

    def joint_pmf(self, n) -> float:
        n = np.asarray(n)
        J = len(self.rho)
        if n.shape != (J + 1,):
            raise ValueError(f"state has shape {n.shape}, expected ({J + 1},)")
        if np.any(n < 0) or np.any(n != np.floor(n)):
            return 0.0
        n0 = int(n[0])
        if self.rho0 == 0.0 and n0 > 0:
            return 0.0
        total = int(n.sum())
        logp = lgamma(total + 1) - lgamma(n0 + 1) - lgamma(total - n0 + 1)
        if n0 > 0:
            logp += n0 * log(self.rho0)
        for j in range(J):
            nj = int(n[j + 1])
            if nj > 0:
                if self.rho[j] == 0.0:
                    return 0.0
                logp += nj * log(self.rho[j])
            logp += log(1.0 - self.rho0 - self.rho[j])
        logp -= (J - 1) * log(1.0 - self.rho0)
        return exp(logp)

    def marginal_pmf(self, i: int, n) -> float:
        """Geometric marginal of local route i (1-based; route 0 excluded)."""
        if not 1 <= i <= len(self.rho):
            raise ValueError("marginal pmf is geometric only for local routes 1..J")
        n = int(n)
        if n < 0:
            return 0.0
        g = self.rho[i - 1] / (1.0 - self.rho0)
        return float((1.0 - g) * g ** n)

    def marginal_mean(self, i: int) -> float:
        J = len(self.rho)
        if i == 0:
            # route 0 given the rest is negative binomial, so its mean
            # follows from the local means
            locals_ = sum(self.marginal_mean(j) for j in range(1, J + 1))
            return float(self.rho0 / (1.0 - self.rho0) * (1.0 + locals_))
        if not 1 <= i <= J:
            raise ValueError(f"route index {i} out of range 0..{J}")
        return float(self.rho[i - 1] / (1.0 - self.rho0 - self.rho[i - 1]))


def exact_linear_law(J: int, rho0: float, rho) -> ExactLinearLaw:
    """Closed-form stationary law for the J-resource linear network.

    Requires unit capacities, alpha = 1, unit weights, and stability
    rho0 + rho_j < 1 for every local route j.
    """
    rho = np.asarray(rho, dtype=float)
    if rho.shape != (J,):
        raise ValueError(f"rho has shape {rho.shape}, expected ({J},)")
    if rho0 < 0 or np.any(rho < 0):
        raise ValueError("traffic intensities must be nonnegative")
    worst = rho0 + np.max(rho) if J else rho0
    if worst >= 1.0:
        raise StabilityViolated(f"rho_0 + rho_j = {worst:g} >= 1")
    return ExactLinearLaw(rho0=float(rho0), rho=rho)


@dataclass(frozen=True)
class ApproxStationary:
    """Exponential-dual approximation of the stationary flow counts.

    Each resource carries an independent exponential dual with rate equal
    to its capacity slack; route counts are rho_i times the summed duals
    of the resources they use.
    """

    mean: np.ndarray
    dual_rates: np.ndarray
    spec: NetworkSpec

    def sample(self, rng, size: int | None = None) -> np.ndarray:
        one = size is None
        m = 1 if one else int(size)
        Q = rng.exponential(scale=1.0 / self.dual_rates, size=(m, len(self.dual_rates)))
        N = (Q @ self.spec.A) * self.spec.rho
        return N[0] if one else N


def stationary_approx(spec: NetworkSpec) -> ApproxStationary:
    """Approximate stationary means via per-resource exponential duals."""
    slack = spec.C - spec.A @ spec.rho
    if np.any(slack <= 0):
        j = int(np.argmin(slack))
        raise NotSubcritical(f"resource {j} has capacity slack {slack[j]:.3e}")
    mean = spec.rho * (spec.A.T @ (1.0 / slack))
    return ApproxStationary(mean=mean, dual_rates=slack, spec=spec)
