from __future__ import annotations

import numpy as np
import pytest

from bwshare.cone import (
    build_geometry,
    completely_s_check,
    face_distance,
    product_form_density,
    skew_symmetry_report,
    wedge_slopes,
)
from bwshare.errors import (
    DimensionTooLarge,
    NotApplicable,
    NotInCone,
    SingularG,
    TopologyMismatch,
)
from bwshare.model import NetworkSpec, validate_network

from conftest import A_LINEAR, linear_network, random_network, star_network


def linear_geometry(theta=(-1.0, -1.0), kappa=(1.0, 1.0, 1.0)):
    return build_geometry(linear_network(kappa=kappa), theta)


def test_build_geometry_hand_matrices():
    geom = linear_geometry()
    np.testing.assert_allclose(geom.B, np.diag([0.5, 0.5, 0.5]), atol=1e-15)
    np.testing.assert_allclose(geom.G, [[1.0, 0.5], [0.5, 1.0]], atol=1e-15)
    np.testing.assert_allclose(geom.G_inv, [[4 / 3, -2 / 3], [-2 / 3, 4 / 3]], atol=1e-14)
    np.testing.assert_allclose(geom.Gamma, [[2.0, 1.0], [1.0, 2.0]], atol=1e-15)
    np.testing.assert_allclose(geom.normals, geom.G_inv, atol=0)
    np.testing.assert_allclose(geom.v, [-2 / 3, -2 / 3], atol=1e-14)
    assert geom.kappa_uniform


def test_build_geometry_one_dimensional():
    spec = validate_network(NetworkSpec([[1.0]], [1.0], [1.0], [1.0], [1.0], 1.0))
    geom = build_geometry(spec, [-0.5])
    np.testing.assert_allclose(geom.G, [[1.0]])
    np.testing.assert_allclose(geom.Gamma, [[2.0]])
    # cone is the nonnegative half-line
    assert face_distance(geom, [3.0], 0) == pytest.approx(3.0)
    with pytest.raises(NotInCone):
        face_distance(geom, [-1.0], 0)


def test_build_geometry_requires_alpha_one():
    with pytest.raises(NotApplicable):
        build_geometry(linear_network(alpha=2.0), [-1.0, -1.0])


def test_build_geometry_theta_shape():
    with pytest.raises(ValueError):
        build_geometry(linear_network(), [-1.0, -1.0, -1.0])


def test_build_geometry_singular():
    A = [[1.0, 0.0], [1.0, 1e-7]]
    spec = validate_network(NetworkSpec(A, [1.0, 1.0], [0.5, 0.5], [1.0, 1.0], [1.0, 1.0], 1.0))
    with pytest.raises(SingularG):
        build_geometry(spec, [-1.0, -1.0])


@pytest.mark.parametrize("critical", [False, True])
def test_geometry_invariants_random(rng, critical):
    for _ in range(10):
        spec = random_network(rng, critical=critical)
        geom = build_geometry(spec, -rng.uniform(0.5, 2.0, spec.J))
        J = spec.J
        assert np.max(np.abs(geom.G - geom.G.T)) < 1e-14 * max(1.0, np.max(np.abs(geom.G)))
        assert np.max(np.abs(geom.G @ geom.G_inv - np.eye(J))) < 1e-12
        assert np.all(np.linalg.eigvalsh(geom.G) > 0)


def test_two_g_equals_gamma_when_kappa_one(rng):
    for _ in range(10):
        spec = random_network(rng, kappa_one=True)
        geom = build_geometry(spec, -np.ones(spec.J))
        assert np.max(np.abs(2.0 * geom.G - geom.Gamma)) < 1e-12


def test_cone_membership_round_trip(rng):
    # w = G q with q >= 0 iff every normal product is nonnegative
    for _ in range(10):
        spec = random_network(rng, critical=True)
        geom = build_geometry(spec, -np.ones(spec.J))
        q = rng.uniform(0.0, 2.0, spec.J)
        w = geom.G @ q
        assert np.min(geom.normals @ w) > -1e-12
        np.testing.assert_allclose(geom.normals @ w, q, atol=1e-10)


def test_face_distance_on_face_is_zero(rng):
    spec = random_network(rng, critical=True, J=3, I=5)
    geom = build_geometry(spec, -np.ones(3))
    q = rng.uniform(0.5, 1.5, 3)
    q[1] = 0.0
    w = geom.G @ q
    assert face_distance(geom, w, 1) == pytest.approx(0.0, abs=1e-10)
    assert face_distance(geom, w, 0) > 1e-3


def test_face_distance_hand_value():
    geom = linear_geometry()
    d = face_distance(geom, [1.0, 1.0], 0)
    assert d == pytest.approx(1.0 / np.sqrt(5.0), rel=1e-12)
    assert face_distance(geom, [1.0, 1.0], 1) == pytest.approx(d, rel=1e-12)


def test_face_distance_scales_linearly():
    geom = linear_geometry()
    w = np.array([0.7, 1.1])
    assert face_distance(geom, 2 * w, 0) == pytest.approx(2 * face_distance(geom, w, 0), rel=1e-12)


def test_face_distance_outside_cone():
    geom = linear_geometry()
    with pytest.raises(NotInCone):
        face_distance(geom, [1.0, -1.0], 0)


def test_face_distance_bad_index():
    geom = linear_geometry()
    with pytest.raises(ValueError):
        face_distance(geom, [1.0, 1.0], 2)


def test_completely_s_negative_scalar():
    ok, witness = completely_s_check([[-1.0]])
    assert not ok
    assert witness == (0,)


def test_completely_s_identity():
    ok, witness = completely_s_check(np.eye(3))
    assert ok
    assert witness is None


def test_completely_s_pairwise_violation():
    # each diagonal entry is fine alone, the full matrix is not
    ok, witness = completely_s_check([[1.0, -2.0], [-2.0, 1.0]])
    assert not ok
    assert witness == (0, 1)


def test_completely_s_geometry_inverse(rng):
    geom = linear_geometry()
    assert completely_s_check(geom.G_inv) == (True, None)
    for _ in range(5):
        spec = random_network(rng, critical=True)
        geom = build_geometry(spec, -np.ones(spec.J))
        assert completely_s_check(geom.G_inv)[0]


def test_completely_s_dimension_limit():
    with pytest.raises(DimensionTooLarge):
        completely_s_check(np.eye(13))


def test_completely_s_not_square():
    with pytest.raises(ValueError):
        completely_s_check(np.ones((2, 3)))


def test_skew_residual_vanishes_for_unit_weights():
    residual, norm = skew_symmetry_report(linear_geometry())
    assert norm < 1e-10
    np.testing.assert_allclose(residual, 0.0, atol=1e-10)


def test_skew_residual_one_dimensional():
    spec = validate_network(NetworkSpec([[1.0]], [1.0], [1.0], [1.0], [1.0], 1.0))
    _, norm = skew_symmetry_report(build_geometry(spec, [-1.0]))
    assert norm < 1e-14


def test_skew_residual_star_network():
    _, norm = skew_symmetry_report(build_geometry(star_network(), -np.ones(3)))
    assert norm < 1e-10


def test_skew_residual_random_unit_weights(rng):
    for _ in range(10):
        spec = random_network(rng, critical=True, kappa_one=True)
        _, norm = skew_symmetry_report(build_geometry(spec, -np.ones(spec.J)))
        assert norm < 1e-10


def test_skew_residual_nonzero_for_unequal_weights():
    residual, norm = skew_symmetry_report(linear_geometry(kappa=(1.0, 1.0, 4.0)))
    assert norm > 1e-3
    # the defect is still a symmetric matrix
    np.testing.assert_allclose(residual, residual.T, atol=1e-12)


def test_product_form_density_hand_values():
    geom = linear_geometry()
    assert product_form_density(geom, [0.0, 0.0]) == pytest.approx(1.0)
    assert product_form_density(geom, [1.0, 1.0]) == pytest.approx(np.exp(-4.0 / 3.0), rel=1e-12)


def test_product_form_density_outside_cone():
    with pytest.raises(NotInCone):
        product_form_density(linear_geometry(), [1.0, -1.0])


def test_product_form_density_requires_unit_weights():
    with pytest.raises(NotApplicable):
        product_form_density(linear_geometry(kappa=(1.0, 1.0, 4.0)), [1.0, 1.0])


def test_product_form_density_matches_exp_theta_q(rng):
    # with unit weights w = G q gives v . w = theta . q exactly
    for _ in range(5):
        spec = random_network(rng, critical=True, kappa_one=True)
        theta = -rng.uniform(0.5, 2.0, spec.J)
        geom = build_geometry(spec, theta)
        q = rng.uniform(0.0, 1.5, spec.J)
        dens = product_form_density(geom, geom.G @ q)
        assert dens == pytest.approx(float(np.exp(theta @ q)), rel=1e-10)


def test_wedge_slopes_all_ones():
    spec = linear_network(nu=(1 / 3, 1 / 3, 1 / 3), C=(2 / 3, 2 / 3))
    assert wedge_slopes(spec) == pytest.approx((2.0, 2.0))
    # the fixture's nu=(.5,.5,.5) is also symmetric across routes
    assert wedge_slopes(linear_network()) == pytest.approx((2.0, 2.0))


def test_wedge_slopes_equal_weights_alpha_independent():
    spec = linear_network(nu=(0.3, 0.4, 0.3), mu=(1.5, 2.0, 1.0), kappa=(2.0, 2.0, 2.0))
    base = wedge_slopes(spec, 1.0)
    for alpha in (0.3, 0.5, 2.0, 7.0):
        assert wedge_slopes(spec, alpha) == pytest.approx(base, rel=1e-12)


def test_wedge_slopes_alpha_limit_recovers_equal_weights():
    kap = (3.0, 0.5, 2.0)
    spec = linear_network(nu=(0.3, 0.4, 0.3), mu=(1.5, 2.0, 1.0), kappa=kap)
    equal = wedge_slopes(linear_network(nu=(0.3, 0.4, 0.3), mu=(1.5, 2.0, 1.0)), 1.0)
    far = wedge_slopes(spec, 1e6)
    assert far == pytest.approx(equal, rel=1e-4)
    assert wedge_slopes(spec, 1.0) != pytest.approx(equal, rel=1e-4)


def test_wedge_slopes_match_face_normals():
    # at alpha=1 the wedge faces are the cone faces q_1 = 0 and q_2 = 0
    for kappa in ((1.0, 1.0, 1.0), (1.0, 1.0, 4.0), (2.0, 0.5, 1.0)):
        spec = linear_network(nu=(0.3, 0.4, 0.3), mu=(1.5, 2.0, 1.0), kappa=kappa)
        geom = build_geometry(spec, (-1.0, -1.0))
        beta_up, beta_low = wedge_slopes(spec, 1.0)
        n1, n2 = geom.normals
        assert beta_up == pytest.approx(-n1[0] / n1[1], rel=1e-10)
        assert beta_low == pytest.approx(-n2[1] / n2[0], rel=1e-10)


def test_wedge_slopes_permuted_routes():
    # shared route listed first; formulas must follow the columns, not positions
    A = np.array([[1.0, 1.0, 0.0], [1.0, 0.0, 1.0]])
    nu, mu, kap = (0.3, 0.3, 0.4), (1.0, 1.5, 2.0), (4.0, 1.0, 1.0)
    perm = validate_network(NetworkSpec(A, (1.0, 1.0), nu, mu, kap, 1.0))
    ref = linear_network(nu=(0.3, 0.4, 0.3), mu=(1.5, 2.0, 1.0), kappa=(1.0, 1.0, 4.0))
    assert wedge_slopes(perm, 1.3) == pytest.approx(wedge_slopes(ref, 1.3), rel=1e-12)


def test_wedge_slopes_topology_mismatch():
    with pytest.raises(TopologyMismatch):
        wedge_slopes(star_network())
    frac = validate_network(NetworkSpec([[1.0, 0.0, 0.5], [0.0, 1.0, 1.0]],
                                        (1.0, 1.0), (0.5,) * 3, (1.0,) * 3, (1.0,) * 3, 1.0))
    with pytest.raises(TopologyMismatch):
        wedge_slopes(frac)
    twin = validate_network(NetworkSpec([[1.0, 1.0, 1.0], [0.0, 1.0, 1.0]],
                                        (1.0, 1.0), (0.5,) * 3, (1.0,) * 3, (1.0,) * 3, 1.0))
    with pytest.raises(TopologyMismatch):
        wedge_slopes(twin)


def test_wedge_slopes_bad_alpha():
    with pytest.raises(ValueError):
        wedge_slopes(linear_network(), 0.0)
