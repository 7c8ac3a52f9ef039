from __future__ import annotations

import numpy as np
import pytest

from bwshare.model import NetworkSpec, validate_network

A_LINEAR = np.array([[1.0, 0.0, 1.0], [0.0, 1.0, 1.0]])


def linear_network(nu=(0.5, 0.5, 0.5), mu=(1.0, 1.0, 1.0), kappa=(1.0, 1.0, 1.0),
                   C=(1.0, 1.0), alpha=1.0) -> NetworkSpec:
    """Two-resource linear network: one route per resource plus one through both."""
    return validate_network(NetworkSpec(A_LINEAR, C, nu, mu, kappa, alpha))


def star_network(J=3, alpha=1.0) -> NetworkSpec:
    """J single-resource routes plus one route through every resource, critical load."""
    A = np.hstack([np.eye(J), np.ones((J, 1))])
    nu = np.full(J + 1, 0.5)
    return validate_network(NetworkSpec(A, np.ones(J), nu, np.ones(J + 1), np.ones(J + 1), alpha))


def random_network(rng, J=None, I=None, alpha=1.0, critical=False, kappa_one=False) -> NetworkSpec:
    """Random dense-ish network with full row rank and no empty route."""
    J = J if J is not None else int(rng.integers(1, 5))
    I = I if I is not None else J + int(rng.integers(1, 4))
    while True:
        A = np.where(rng.random((J, I)) < 0.6, rng.uniform(0.2, 1.5, (J, I)), 0.0)
        A[np.arange(J), rng.permutation(I)[:J]] = rng.uniform(0.5, 1.5, J)
        if np.any(np.all(A == 0, axis=0)):
            continue
        if np.linalg.matrix_rank(A, tol=1e-8) == J:
            break
    mu = rng.uniform(0.5, 2.0, I)
    kappa = np.ones(I) if kappa_one else rng.uniform(0.5, 2.0, I)
    if critical:
        # pick a strictly positive allocation x and set C = A x, nu = mu * x
        x = rng.uniform(0.3, 1.0, I)
        C = A @ x
        nu = mu * x
    else:
        nu = rng.uniform(0.2, 0.8, I)
        C = A @ (nu / mu) + rng.uniform(0.3, 1.0, J)
    return validate_network(NetworkSpec(A, C, nu, mu, kappa, alpha))


@pytest.fixture
def linear():
    return linear_network()


@pytest.fixture
def rng():
    return np.random.default_rng(20260823)
