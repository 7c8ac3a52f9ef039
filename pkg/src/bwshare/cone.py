"""Workload-cone geometry for proportionally fair networks.

At alpha = 1 the invariant manifold of the fluid model projects to a
polyhedral cone of workload vectors, {A B A' q : q >= 0} with B a diagonal
matrix of traffic data.  This module builds that cone (matrices, inward face
normals), measures distances to its faces, tests the completely-S condition
required of reflection matrices, evaluates the skew-symmetry residual that
decides whether the limiting diffusion has an exponential product-form
stationary density, and returns the closed-form wedge slopes for the
two-resource linear topology at any fairness parameter.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy.optimize import linprog

from .errors import (
    DimensionTooLarge,
    NotApplicable,
    NotInCone,
    SingularG,
    SolverDiverged,
    TopologyMismatch,
)
from .model import NetworkSpec

# slack allowed on inward-normal products before a point is ruled outside
CONE_TOL = 1e-9
MAX_S_DIM = 12


@dataclass(frozen=True)
class ConeGeometry:
    """Cone and diffusion data for a critically loaded alpha = 1 network.

    normals holds the inward face normals as rows (the rows of G_inv): w
    lies in the cone iff normals @ w >= 0.  v is the exponent of the
    candidate stationary density exp(v . w); it is the true exponent only
    when all policy weights equal one, recorded in kappa_uniform.
    """

    B: np.ndarray
    G: np.ndarray
    G_inv: np.ndarray
    normals: np.ndarray
    Gamma: np.ndarray
    theta: np.ndarray
    v: np.ndarray
    kappa_uniform: bool


def build_geometry(spec: NetworkSpec, theta) -> ConeGeometry:
    """Assemble the workload cone and diffusion matrices for alpha = 1.

    B_ii = nu_i / (mu_i^2 kappa_i), G = A B A', and the diffusion
    covariance is Gamma = 2 A diag(nu / mu^2) A'.  With unit weights
    2 G = Gamma exactly.
    """
    if spec.alpha != 1.0:
        raise NotApplicable(f"workload cone is polyhedral only at alpha=1, got {spec.alpha}")
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if theta.shape != (spec.J,):
        raise ValueError(f"theta has shape {theta.shape}, expected ({spec.J},)")
    b = spec.nu / (spec.mu ** 2 * spec.kappa)
    B = np.diag(b)
    G = (spec.A * b) @ spec.A.T
    Gamma = 2.0 * (spec.A * (spec.nu / spec.mu ** 2)) @ spec.A.T
    assert np.max(np.abs(G - G.T)) <= 1e-14 * max(1.0, np.max(np.abs(G)))
    evals = np.linalg.eigvalsh(G)
    if evals[0] <= 0.0 or evals[-1] / evals[0] > 1e12:
        raise SingularG(f"A B A' is numerically singular: eigenvalue range [{evals[0]:.3e}, {evals[-1]:.3e}]")
    try:
        G_inv = np.linalg.inv(G)
    except np.linalg.LinAlgError as exc:
        raise SingularG(f"A B A' could not be inverted: {exc}") from None
    ident = np.max(np.abs(G @ G_inv - np.eye(spec.J)))
    if ident > 1e-12:
        raise SingularG(f"A B A' is too ill conditioned to invert: |G G_inv - I| = {ident:.3e}")
    kappa_uniform = bool(np.all(spec.kappa == 1.0))
    if kappa_uniform:
        assert np.max(np.abs(2.0 * G - Gamma)) < 1e-12 * max(1.0, np.max(np.abs(Gamma)))
    v = 2.0 * np.linalg.solve(Gamma, theta)
    return ConeGeometry(B=B, G=G, G_inv=G_inv, normals=G_inv.copy(), Gamma=Gamma,
                        theta=theta, v=v, kappa_uniform=kappa_uniform)


def _require_in_cone(geom: ConeGeometry, w: np.ndarray) -> None:
    products = geom.normals @ w
    if np.min(products) < -CONE_TOL:
        j = int(np.argmin(products))
        raise NotInCone(f"normal product {products[j]:.3e} on face {j}")


def face_distance(geom: ConeGeometry, w, j: int) -> float:
    """Euclidean distance from w to the hyperplane carrying cone face j."""
    w = np.asarray(w, dtype=float)
    J = geom.normals.shape[0]
    if w.shape != (J,):
        raise ValueError(f"w has shape {w.shape}, expected ({J},)")
    if not 0 <= j < J:
        raise ValueError(f"face index {j} out of range for {J} faces")
    _require_in_cone(geom, w)
    n = geom.normals[j]
    return float(n @ w / np.linalg.norm(n))


def _admits_positive_image(D: np.ndarray) -> bool:
    # exists x >= 0 with D x > 0; homogeneity lets us demand D x >= 1
    d = D.shape[0]
    res = linprog(c=np.zeros(d), A_ub=-D, b_ub=-np.ones(d), bounds=(0, None))
    if res.status == 0:
        return True
    if res.status == 2:
        return False
    raise SolverDiverged(f"feasibility solve failed: {res.message}")


def completely_s_check(M):
    """Test whether M is completely-S.

    A square matrix is completely-S when every principal submatrix D admits
    some x >= 0 with D x > 0 componentwise; reflection matrices of the
    workload diffusion must satisfy this.  Returns (True, None) or
    (False, witness) with witness the 0-based index tuple of a violating
    principal submatrix.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape[0] != M.shape[1]:
        raise ValueError(f"matrix has shape {M.shape}, expected square")
    d = M.shape[0]
    if d > MAX_S_DIM:
        raise DimensionTooLarge(f"dimension {d} exceeds completely-S limit {MAX_S_DIM}")
    for size in range(1, d + 1):
        for idx in combinations(range(d), size):
            if not _admits_positive_image(M[np.ix_(idx, idx)]):
                return False, idx
    return True, None


def skew_symmetry_report(geom: ConeGeometry):
    """Residual of the skew-symmetry condition for the reflected diffusion.

    The workload diffusion is transformed to identity covariance by z = V w,
    where Gamma = L' D L is the (ascending) eigendecomposition and
    V = D^(-1/2) L.  Theta collects the unit inward normals of the
    transformed cone as rows, and R the transformed reflection directions as
    columns, scaled so each has unit component along its own face normal;
    the scaling matrix H is diagonal with H_jj = (Theta V)_jj.  With
    Xi' = R - Theta', the returned residual Theta Xi' + Xi Theta' vanishes
    exactly when the stationary density is exponential; unit policy weights
    force it to zero, unequal weights generally do not.

    Returns (residual_matrix, frobenius_norm).
    """
    evals, evecs = np.linalg.eigh(geom.Gamma)
    if evals[0] <= 0.0:
        raise SingularG(f"covariance has a nonpositive eigenvalue {evals[0]:.3e}")
    root = np.sqrt(evals)
    V = evecs.T / root[:, None]
    # unnormalized transformed normals G^(-1) L' D^(1/2); rows scaled to unit length
    K = (geom.G_inv @ evecs) * root[None, :]
    Theta = K / np.linalg.norm(K, axis=1)[:, None]
    h = np.diag(Theta @ V)
    R = V / h[None, :]
    Xi_t = R - Theta.T
    residual = Theta @ Xi_t + Xi_t.T @ Theta.T
    return residual, float(np.linalg.norm(residual))


def product_form_density(geom: ConeGeometry, w) -> float:
    """Unnormalized stationary density exp(v . w) of the workload diffusion.

    Valid only for unit policy weights.  The density integrates over the
    cone iff every drift component theta_j is negative.
    """
    if not geom.kappa_uniform:
        raise NotApplicable("product-form density requires all policy weights equal to one")
    w = np.asarray(w, dtype=float)
    if w.shape != geom.theta.shape:
        raise ValueError(f"w has shape {w.shape}, expected {geom.theta.shape}")
    _require_in_cone(geom, w)
    return float(np.exp(geom.v @ w))


def wedge_slopes(spec: NetworkSpec, alpha: float | None = None):
    """Boundary slopes of the two-resource linear network's workload wedge.

    The wedge's upper face is w_2 = beta_up * w_1 and its lower face is
    w_1 = beta_low * w_2.  The topology must be exactly: one route through
    resource 1 alone, one through resource 2 alone, one through both.
    Weight ratios enter through the exponent 1/alpha, so equal weights make
    the slopes alpha-independent and alpha -> infinity recovers the
    equal-weight wedge.
    """
    if alpha is None:
        alpha = spec.alpha
    alpha = float(alpha)
    if alpha <= 0.0:
        raise ValueError("alpha must be positive")
    if spec.J != 2 or spec.I != 3:
        raise TopologyMismatch(f"need 2 resources and 3 routes, got J={spec.J}, I={spec.I}")
    if not np.all(np.isin(spec.A, (0.0, 1.0))):
        raise TopologyMismatch("routing matrix entries must be 0 or 1")
    cols = [tuple(spec.A[:, i]) for i in range(3)]
    try:
        i1 = cols.index((1.0, 0.0))
        i2 = cols.index((0.0, 1.0))
        i3 = cols.index((1.0, 1.0))
    except ValueError:
        raise TopologyMismatch("expected one route per resource plus one through both") from None
    nu, mu, kap = spec.nu, spec.mu, spec.kappa
    beta_up = 1.0 + (nu[i2] * mu[i3] ** 2) / (nu[i3] * mu[i2] ** 2) * (kap[i3] / kap[i2]) ** (1.0 / alpha)
    beta_low = 1.0 + (nu[i1] * mu[i3] ** 2) / (nu[i3] * mu[i1] ** 2) * (kap[i3] / kap[i1]) ** (1.0 / alpha)
    return float(beta_up), float(beta_low)
