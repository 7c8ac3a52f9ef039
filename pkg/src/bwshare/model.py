"""Network model: specs, workload map, heavy-traffic sequences, mixture splitting.

A network is a resource/route matrix A (J resources, I routes) with capacities
C, Poisson arrival rates nu, inverse mean document sizes mu, policy weights
kappa, and fairness parameter alpha.  The traffic intensity rho_i = nu_i/mu_i
is always derived, never stored.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import (
    EmptyRoute,
    NonPositiveParameter,
    NotCriticallyLoaded,
    RankDeficient,
    RatePositivityViolated,
)

RANK_TOL = 1e-10
CRITICAL_TOL = 1e-10
MIXTURE_TOL = 1e-12


def _frozen(a, dtype=float) -> np.ndarray:
    out = np.array(a, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class NetworkSpec:
    """Immutable bandwidth-sharing network description."""

    A: np.ndarray
    C: np.ndarray
    nu: np.ndarray
    mu: np.ndarray
    kappa: np.ndarray
    alpha: float

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        object.__setattr__(self, "A", _frozen(A))
        for name in ("C", "nu", "mu", "kappa"):
            object.__setattr__(self, name, _frozen(np.atleast_1d(getattr(self, name))))
        object.__setattr__(self, "alpha", float(self.alpha))
        J, I = self.A.shape
        if self.C.shape != (J,):
            raise ValueError(f"C has shape {self.C.shape}, expected ({J},)")
        for name in ("nu", "mu", "kappa"):
            if getattr(self, name).shape != (I,):
                raise ValueError(f"{name} has shape {getattr(self, name).shape}, expected ({I},)")

    @property
    def I(self) -> int:
        return self.A.shape[1]

    @property
    def J(self) -> int:
        return self.A.shape[0]

    @property
    def rho(self) -> np.ndarray:
        return self.nu / self.mu

    def with_rates(self, nu, mu) -> "NetworkSpec":
        """Copy of this spec with replaced arrival/service rates."""
        return NetworkSpec(self.A, self.C, nu, mu, self.kappa, self.alpha)


@dataclass(frozen=True)
class HeavyTrafficSequence:
    """Family of networks indexed by r with r(A rho^r - C) = theta exactly."""

    base: NetworkSpec
    theta: np.ndarray
    r_values: tuple
    specs: tuple  # one NetworkSpec per r

    def __post_init__(self):
        object.__setattr__(self, "theta", _frozen(np.atleast_1d(self.theta)))
        object.__setattr__(self, "r_values", tuple(float(r) for r in self.r_values))
        object.__setattr__(self, "specs", tuple(self.specs))


def validate_network(spec: NetworkSpec) -> NetworkSpec:
    """Check all NetworkSpec invariants, returning the spec unchanged.

    Raises NonPositiveParameter, EmptyRoute, or RankDeficient.
    """
    if spec.alpha <= 0:
        raise NonPositiveParameter("alpha must be positive")
    for name in ("C", "nu", "mu", "kappa"):
        v = getattr(spec, name)
        if not np.all(np.isfinite(v)) or np.any(v <= 0):
            raise NonPositiveParameter(f"{name} must be strictly positive")
    if np.any(spec.A < 0) or not np.all(np.isfinite(spec.A)):
        raise NonPositiveParameter("A must be nonnegative and finite")
    J = spec.J
    if J > spec.I:
        raise RankDeficient("more resources than routes")
    # pivoted QR of A'; row rank of A = number of significant pivots
    R = scipy.linalg.qr(spec.A.T, mode="r", pivoting=True)[0]
    diag = np.abs(np.diag(R))
    scale = max(1.0, diag[0]) if diag.size else 1.0
    if np.sum(diag > RANK_TOL * scale) < J:
        raise RankDeficient("A does not have full row rank")
    if np.any(np.all(spec.A == 0, axis=0)):
        raise EmptyRoute("some route uses no resource")
    return spec


def workload(spec: NetworkSpec, n) -> np.ndarray:
    """Workload w_j = sum_i A_ji n_i / mu_i, linear and monotone in n."""
    n = np.asarray(n, dtype=float)
    if n.shape != (spec.I,):
        raise ValueError(f"n has shape {n.shape}, expected ({spec.I},)")
    return spec.A @ (n / spec.mu)


def build_ht_sequence(base: NetworkSpec, theta, r_values) -> HeavyTrafficSequence:
    """Construct a heavy-traffic family around a critically loaded base network.

    mu is held fixed and nu^r = nu + diag(mu) delta / r, where delta is the
    minimum-norm solution of A delta = theta.  This makes r(A rho^r - C) equal
    to theta exactly at every r.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if theta.shape != (base.J,):
        raise ValueError(f"theta has shape {theta.shape}, expected ({base.J},)")
    gap = base.A @ base.rho - base.C
    if np.max(np.abs(gap)) > CRITICAL_TOL:
        raise NotCriticallyLoaded(f"A rho - C = {gap} exceeds tolerance {CRITICAL_TOL}")
    A = base.A
    delta = A.T @ np.linalg.solve(A @ A.T, theta)
    specs = []
    for r in r_values:
        r = float(r)
        if r <= 0:
            raise ValueError("r values must be positive")
        nu_r = base.nu + base.mu * delta / r
        if np.any(nu_r <= 0):
            raise RatePositivityViolated(f"nu^r has a nonpositive entry at r={r}")
        specs.append(base.with_rates(nu_r, base.mu))
    return HeavyTrafficSequence(base, theta, tuple(r_values), tuple(specs))


def extend_mixture(spec: NetworkSpec, mixtures) -> NetworkSpec:
    """Split each route into copies realizing a mixture-of-exponentials size law.

    mixtures[i] is a list of (weight_fraction, component_rate) pairs for route
    i.  Copies share route i's A-column and weight kappa_i; copy arrival rates
    are fraction * nu_i and copy service rates are the component rates.
    """
    if len(mixtures) != spec.I:
        raise ValueError(f"need one mixture per route, got {len(mixtures)} for I={spec.I}")
    cols, nu_e, mu_e, kap_e = [], [], [], []
    for i, mix in enumerate(mixtures):
        fracs = np.array([f for f, _ in mix], dtype=float)
        rates = np.array([m for _, m in mix], dtype=float)
        if len(mix) == 0 or np.any(fracs <= 0):
            raise NonPositiveParameter(f"route {i}: mixture fractions must be positive")
        if abs(fracs.sum() - 1.0) > MIXTURE_TOL:
            raise NonPositiveParameter(f"route {i}: fractions sum to {fracs.sum()}, not 1")
        if np.any(rates <= 0):
            raise NonPositiveParameter(f"route {i}: component rates must be positive")
        for f, m in zip(fracs, rates):
            cols.append(spec.A[:, i])
            nu_e.append(f * spec.nu[i])
            mu_e.append(m)
            kap_e.append(spec.kappa[i])
    return NetworkSpec(np.column_stack(cols), spec.C, nu_e, mu_e, kap_e, spec.alpha)


def mixture_groups(mixtures) -> list:
    """Index groups of the extended spec's routes, one group per original route."""
    groups, k = [], 0
    for mix in mixtures:
        groups.append(list(range(k, k + len(mix))))
        k += len(mix)
    return groups


def collapse_mixture(ext: NetworkSpec, groups):
    """Recover (nu, mu) of the exponential analog from an extended spec.

    nu_i is the summed copy arrival rate and 1/mu_i the nu-weighted mean of
    the copy mean sizes.
    """
    nu = np.array([ext.nu[g].sum() for g in groups])
    mean_size = np.array([np.sum((ext.nu[g] / ext.nu[g].sum()) / ext.mu[g]) for g in groups])
    return nu, 1.0 / mean_size


def spec_to_json(spec: NetworkSpec) -> str:
    """Serialize a spec to JSON, preserving full double precision."""
    doc = {
        "A": [[float(x) for x in row] for row in spec.A],
        "C": [float(x) for x in spec.C],
        "nu": [float(x) for x in spec.nu],
        "mu": [float(x) for x in spec.mu],
        "kappa": [float(x) for x in spec.kappa],
        "alpha": float(spec.alpha),
    }
    return json.dumps(doc, indent=2)


def spec_from_json(text: str) -> NetworkSpec:
    doc = json.loads(text)
    return NetworkSpec(doc["A"], doc["C"], doc["nu"], doc["mu"], doc["kappa"], doc["alpha"])


def load_spec(path) -> NetworkSpec:
    with open(path, "r", encoding="utf-8") as fh:
        return spec_from_json(fh.read())


def save_spec(spec: NetworkSpec, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(spec_to_json(spec) + "\n")
