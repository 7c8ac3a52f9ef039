from __future__ import annotations

import numpy as np
import pytest

from bwshare.errors import (
    EmptyRoute,
    NonPositiveParameter,
    NotCriticallyLoaded,
    RankDeficient,
    RatePositivityViolated,
)
from bwshare.model import (
    NetworkSpec,
    build_ht_sequence,
    collapse_mixture,
    extend_mixture,
    mixture_groups,
    spec_from_json,
    spec_to_json,
    validate_network,
    workload,
)

from conftest import A_LINEAR, linear_network, random_network


def test_linear_network_accepted(linear):
    assert linear.I == 3 and linear.J == 2
    np.testing.assert_allclose(linear.rho, [0.5, 0.5, 0.5])


def test_rank_deficient_rejected():
    spec = NetworkSpec([[1.0, 0.0, 1.0], [1.0, 0.0, 1.0]], (1, 1), (1, 1, 1), (1, 1, 1), (1, 1, 1), 1.0)
    with pytest.raises(RankDeficient):
        validate_network(spec)


def test_empty_route_rejected():
    A = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    spec = NetworkSpec(A, (1, 1), (1, 1, 1), (1, 1, 1), (1, 1, 1), 1.0)
    with pytest.raises(EmptyRoute):
        validate_network(spec)


@pytest.mark.parametrize("field,value", [
    ("C", (1.0, 0.0)),
    ("nu", (1.0, -1.0, 1.0)),
    ("mu", (0.0, 1.0, 1.0)),
    ("kappa", (1.0, 1.0, 0.0)),
    ("alpha", 0.0),
])
def test_nonpositive_parameter_rejected(field, value):
    kw = dict(A=A_LINEAR, C=(1.0, 1.0), nu=(1, 1, 1), mu=(1, 1, 1), kappa=(1, 1, 1), alpha=1.0)
    kw[field] = value
    with pytest.raises(NonPositiveParameter):
        validate_network(NetworkSpec(**kw))


def test_spec_immutable(linear):
    with pytest.raises(ValueError):
        linear.A[0, 0] = 5.0


def test_workload_hand_values(linear):
    np.testing.assert_allclose(workload(linear, (1 / 3, 1 / 3, 2 / 3)), [1.0, 1.0])
    np.testing.assert_allclose(workload(linear, np.zeros(3)), [0.0, 0.0])
    spec2 = linear_network(mu=(2.0, 2.0, 2.0), nu=(1.0, 1.0, 1.0), C=(1.0, 1.0))
    np.testing.assert_allclose(workload(spec2, (2, 0, 0)), [1.0, 0.0])


def test_workload_linear_property(rng, linear):
    for _ in range(25):
        n, m = rng.uniform(0, 3, 3), rng.uniform(0, 3, 3)
        a, b = rng.uniform(0, 2, 2)
        lhs = workload(linear, a * n + b * m)
        rhs = a * workload(linear, n) + b * workload(linear, m)
        np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_ht_sequence_hand_example(linear):
    seq = build_ht_sequence(linear, (-1.0, -1.0), [10.0])
    np.testing.assert_allclose(seq.specs[0].nu, [0.5 - 1 / 30, 0.5 - 1 / 30, 0.5 - 1 / 15], atol=1e-12)
    np.testing.assert_allclose(seq.specs[0].mu, linear.mu)


def test_ht_sequence_exact_theta(linear, rng):
    for _ in range(10):
        theta = rng.normal(0, 1, 2)
        r_values = [5.0, 10.0, 20.0, 100.0]
        seq = build_ht_sequence(linear, theta, r_values)
        for r, s in zip(seq.r_values, seq.specs):
            gap = r * (s.A @ s.rho - s.C)
            np.testing.assert_allclose(gap, theta, atol=1e-12)


def test_ht_sequence_zero_theta(linear):
    seq = build_ht_sequence(linear, (0.0, 0.0), [3.0, 7.0])
    for s in seq.specs:
        np.testing.assert_allclose(s.nu, linear.nu)


def test_ht_sequence_nu_monotone_in_inv_r(linear):
    # nu^r - nu is proportional to 1/r, hence monotone in 1/r componentwise
    seq = build_ht_sequence(linear, (-1.0, -3.0), [5.0, 10.0, 20.0])
    devs = np.array([s.nu - linear.nu for s in seq.specs])
    assert np.all(np.abs(devs[1]) < np.abs(devs[0]))
    assert np.all(np.abs(devs[2]) < np.abs(devs[1]))


def test_ht_sequence_requires_critical_load():
    sub = linear_network(nu=(0.4, 0.4, 0.4))
    with pytest.raises(NotCriticallyLoaded):
        build_ht_sequence(sub, (-1.0, -1.0), [10.0])


def test_ht_sequence_rate_positivity(linear):
    with pytest.raises(RatePositivityViolated):
        build_ht_sequence(linear, (-100.0, -100.0), [1.0])


def test_ht_sequence_random_critical(rng):
    for _ in range(5):
        spec = random_network(rng, critical=True)
        theta = rng.normal(0, 0.5, spec.J)
        seq = build_ht_sequence(spec, theta, [50.0, 200.0])
        for r, s in zip(seq.r_values, seq.specs):
            np.testing.assert_allclose(r * (s.A @ s.rho - s.C), theta, atol=1e-11)


def test_extend_mixture_identity_split(linear):
    ext = extend_mixture(linear, [[(1.0, linear.mu[i])] for i in range(3)])
    np.testing.assert_allclose(ext.A, linear.A)
    np.testing.assert_allclose(ext.nu, linear.nu)
    np.testing.assert_allclose(ext.mu, linear.mu)


def test_extend_mixture_two_components():
    spec = linear_network(nu=(1.0, 0.5, 0.5), mu=(2.0, 1.0, 1.0))
    mixtures = [[(0.5, 1.0), (0.5, 2.0)], [(1.0, 1.0)], [(1.0, 1.0)]]
    ext = extend_mixture(spec, mixtures)
    assert ext.I == 4
    np.testing.assert_allclose(ext.nu[:2], [0.5, 0.5])
    np.testing.assert_allclose(ext.mu[:2], [1.0, 2.0])
    # copies share the original A-column and kappa
    np.testing.assert_allclose(ext.A[:, 0], ext.A[:, 1])
    # collapsed mean size: 0.5*1 + 0.5*0.5 = 0.75
    nu_c, mu_c = collapse_mixture(ext, mixture_groups(mixtures))
    np.testing.assert_allclose(nu_c, spec.nu, atol=1e-15)
    np.testing.assert_allclose(1.0 / mu_c[0], 0.75, atol=1e-15)


def _mean_matched_mixture(rng, mu_i, k):
    """Random k-component mixture whose mean size equals 1/mu_i exactly."""
    f = rng.uniform(0.2, 1.0, k)
    f /= f.sum()
    g = rng.uniform(0.5, 3.0, k)
    rates = g * (np.sum(f / g) * mu_i)  # rescale so sum f_k/rate_k = 1/mu_i
    return list(zip(f, rates))


def test_extend_mixture_nominal_loads_match(rng):
    spec = linear_network(nu=(0.5, 0.5, 0.5), mu=(1.0, 2.0, 0.5), C=(1.5, 1.25))
    for _ in range(10):
        mixtures = [_mean_matched_mixture(rng, spec.mu[i], int(rng.integers(1, 4)))
                    for i in range(3)]
        ext = extend_mixture(spec, mixtures)
        np.testing.assert_allclose(ext.A @ ext.rho, spec.A @ spec.rho, atol=1e-12)
        # collapse is the identity on (nu, mean size) for mean-matched mixtures
        nu_c, mu_c = collapse_mixture(ext, mixture_groups(mixtures))
        np.testing.assert_allclose(nu_c, spec.nu, atol=1e-12)
        np.testing.assert_allclose(1.0 / mu_c, 1.0 / spec.mu, atol=1e-12)


def test_extend_mixture_bad_fractions(linear):
    with pytest.raises(NonPositiveParameter):
        extend_mixture(linear, [[(0.5, 1.0), (0.4, 2.0)], [(1.0, 1.0)], [(1.0, 1.0)]])
    with pytest.raises(NonPositiveParameter):
        extend_mixture(linear, [[(1.0, -2.0)], [(1.0, 1.0)], [(1.0, 1.0)]])


def test_json_roundtrip(linear):
    text = spec_to_json(linear)
    back = spec_from_json(text)
    assert back.A.tolist() == linear.A.tolist()
    assert back.C.tolist() == linear.C.tolist()
    assert back.alpha == linear.alpha
    # full double precision survives the round trip
    odd = linear_network(nu=(1 / 3, 0.1, 0.123456789012345678))
    back2 = spec_from_json(spec_to_json(odd))
    assert back2.nu.tolist() == odd.nu.tolist()
