import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nvortex import VortexSystem, make_domain
from nvortex.errors import CollisionError, OutsideDomainError
from nvortex.model import (
    center_of_vorticity,
    domain_energy,
    f_gradient_identity_check,
    h0_energy,
    h0_gradient,
    h0_hessian,
    hr_energy,
    rotation,
    vector_field,
)
from nvortex.equilibria import regular_polygon


def fd_gradient(f, z, h=1e-6):
    g = np.zeros_like(z)
    for i in range(len(z)):
        e = np.zeros_like(z)
        e[i] = h
        g[i] = (f(z + e) - f(z - e)) / (2 * h)
    return g


def rel_err(a, b):
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))


def spread_cloud(rng, n, scale=1.0, min_gap=0.2):
    while True:
        pts = rng.uniform(-scale, scale, size=(n, 2))
        d = np.linalg.norm(pts[:, None] - pts[None], axis=-1) + np.eye(n) * 10
        if d.min() > min_gap:
            return pts.ravel()


def disc_cloud(rng, n, radius=0.7, min_gap=0.15):
    while True:
        ang = rng.uniform(0, 2 * math.pi, n)
        rad = radius * np.sqrt(rng.uniform(0, 1, n))
        pts = np.column_stack([rad * np.cos(ang), rad * np.sin(ang)])
        d = np.linalg.norm(pts[:, None] - pts[None], axis=-1) + np.eye(n) * 10
        if d.min() > min_gap:
            return pts.ravel()


strengths = st.lists(
    st.floats(0.3, 3.0).flatmap(lambda m: st.sampled_from([m, -m])), min_size=2, max_size=6
)


def test_pair_energy_value():
    sys = VortexSystem([1.0, 1.0])
    assert h0_energy(sys, [1, 0, -1, 0]) == pytest.approx(-math.log(2) / math.pi, rel=1e-15)


def test_pair_gradient_value():
    sys = VortexSystem([1.0, 1.0])
    g = h0_gradient(sys, [1, 0, -1, 0])
    np.testing.assert_allclose(g, np.array([-1, 0, 1, 0]) / (2 * math.pi), atol=1e-15)


def test_triangle_energy_matches_extended_precision_sum():
    import mpmath

    mpmath.mp.dps = 40
    gam = [1, 2, 3]
    z = regular_polygon(3, 1 / math.sqrt(3)).reshape(3, 2)
    total = mpmath.mpf(0)
    for j in range(3):
        for k in range(3):
            if j != k:
                d = mpmath.sqrt((z[j, 0] - z[k, 0]) ** 2 + (z[j, 1] - z[k, 1]) ** 2)
                total += gam[j] * gam[k] * mpmath.log(d)
    oracle = float(-total / (2 * mpmath.pi))
    assert h0_energy(VortexSystem(gam), z.ravel()) == pytest.approx(oracle, rel=1e-13, abs=1e-15)


@pytest.mark.parametrize("n", range(3, 9))
def test_thomson_gradient(n):
    z = regular_polygon(n)
    g = h0_gradient(VortexSystem(np.ones(n)), z)
    np.testing.assert_allclose(g, -(n - 1) / (2 * math.pi) * z, atol=1e-13)


def test_collision_is_rejected():
    sys = VortexSystem([1.0, 1.0])
    with pytest.raises(CollisionError):
        h0_energy(sys, [0.0, 0.0, 0.0, 1e-13])


def test_gradient_against_finite_differences_100_configurations(rng):
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(2, 7))
        sys = VortexSystem(rng.uniform(0.3, 2.0, n) * rng.choice([-1, 1], n))
        z = spread_cloud(rng, n)
        worst = max(worst, rel_err(h0_gradient(sys, z), fd_gradient(lambda w: h0_energy(sys, w), z)))
    assert worst <= 1e-6


def test_domain_gradient_against_finite_differences(rng):
    sys = VortexSystem([1.0, -0.5, 2.0], make_domain("unit_disc"))
    for _ in range(20):
        z = disc_cloud(rng, 3)
        rep = domain_energy(sys, z)
        fd = fd_gradient(lambda w: domain_energy(sys, w).value, z)
        assert rel_err(rep.gradient, fd) <= 1e-6


def test_hessian_against_finite_differences(rng):
    for _ in range(20):
        n = int(rng.integers(2, 6))
        sys = VortexSystem(rng.uniform(0.5, 2.0, n))
        z = spread_cloud(rng, n)
        H = h0_hessian(sys, z)
        fd = np.column_stack([fd_gradient(lambda w: h0_gradient(sys, w)[i], z) for i in range(2 * n)]).T
        assert rel_err(H, fd) <= 1e-5


def test_disc_hessian_against_finite_differences(rng):
    sys = VortexSystem([1.0, 2.0], make_domain("unit_disc"))
    z = disc_cloud(rng, 2)
    H = domain_energy(sys, z, hessian=True).hessian
    fd = np.column_stack([fd_gradient(lambda w: domain_energy(sys, w).gradient[i], z) for i in range(4)]).T
    assert rel_err(H, fd) <= 1e-5


def test_pair_hessian_closed_form():
    # for Γ=(1,1) at (±1,0) the Hessian is -(1/2π)·∂²log|z1-z2|² per block
    sys = VortexSystem([1.0, 1.0])
    H = h0_hessian(sys, [1, 0, -1, 0])
    d = np.array([2.0, 0.0])
    B = -(1 / math.pi) * (np.eye(2) / 4 - 2 * np.outer(d, d) / 16)
    oracle = np.block([[B, -B], [-B, B]])
    np.testing.assert_allclose(H, oracle, atol=1e-14)


@given(strengths, st.integers(0, 2**32 - 1), st.floats(-5, 5), st.floats(-5, 5), st.floats(0, 2 * math.pi))
def test_translation_and_rotation_invariance(gam, seed, ax, ay, theta):
    n = len(gam)
    sys = VortexSystem(gam)
    z = spread_cloud(np.random.default_rng(seed), n)
    base = h0_energy(sys, z)
    scale = max(abs(base), 1.0)
    assert abs(h0_energy(sys, z + np.tile([ax, ay], n)) - base) <= 1e-12 * scale * 10
    assert abs(h0_energy(sys, rotation(theta, n) @ z) - base) <= 1e-12 * scale * 10


@given(strengths, st.integers(0, 2**32 - 1))
def test_hessian_symmetric_and_kills_translations(gam, seed):
    n = len(gam)
    sys = VortexSystem(gam)
    z = spread_cloud(np.random.default_rng(seed), n)
    H = h0_hessian(sys, z)
    scale = max(1.0, float(np.max(np.abs(H))))
    assert np.max(np.abs(H - H.T)) <= 1e-10 * scale
    for a in ([1.0, 0.0], [0.0, 1.0]):
        assert np.max(np.abs(H @ np.tile(a, n))) <= 1e-9 * scale
    g = h0_gradient(sys, z).reshape(n, 2)
    assert np.max(np.abs(g.sum(axis=0))) <= 1e-12 * max(1.0, float(np.max(np.abs(g))))


def test_plane_domain_energy_is_bitwise_h0(rng):
    sys = VortexSystem([1.0, 2.0, -1.0])
    z = spread_cloud(rng, 3)
    rep = domain_energy(sys, z)
    assert rep.value == h0_energy(sys, z)
    assert np.array_equal(rep.gradient, h0_gradient(sys, z))


def test_single_vortex_in_disc_is_pure_self_interaction():
    sys = VortexSystem([1.7], make_domain("unit_disc"))
    a = np.array([0.3, -0.4])
    h = -math.log(1 - a @ a) / (2 * math.pi)
    assert domain_energy(sys, a).value == pytest.approx(-1.7**2 * h, rel=1e-14)


def test_disc_pair_energy_direct_formula():
    disc = make_domain("unit_disc")
    p = 0.4
    z = np.array([p, 0, -p, 0])
    sys = VortexSystem([1.0, 1.0], disc)
    g_cross = disc.g(np.array([p, 0.0]), np.array([-p, 0.0]))
    g_self = -math.log(1 - p * p) / (2 * math.pi)
    oracle = -(1 / math.pi) * math.log(2 * p) - (2 * g_self + 2 * g_cross)
    assert domain_energy(sys, z).value == pytest.approx(oracle, rel=1e-13)


def test_outside_domain_is_rejected():
    sys = VortexSystem([1.0, 1.0], make_domain("unit_disc"))
    with pytest.raises(OutsideDomainError):
        domain_energy(sys, [0.2, 0, 1.2, 0])


def test_scaled_energy_tends_to_h0():
    sys = VortexSystem([1.0, 2.0], make_domain("unit_disc"))
    u = np.array([0.8, 0.1, -0.4, -0.05])
    diffs = [abs(hr_energy(sys, r, u).value - h0_energy(sys, u)) for r in (0.1, 0.05, 0.025, 0.0125)]
    ratios = [a / b for a, b in zip(diffs, diffs[1:])]
    # F is smooth with ∇h(0)=0, so the gap is O(r²) here; O(r) is all that is required
    assert all(ratio > 1.9 for ratio in ratios)
    assert diffs[-1] < 1e-3


def test_scaled_energy_in_plane_is_h0(rng):
    sys = VortexSystem([1.0, 2.0, 3.0])
    u = spread_cloud(rng, 3)
    for r in (1e-3, 0.5, 7.0):
        assert hr_energy(sys, r, u).value == pytest.approx(h0_energy(sys, u), rel=1e-14)


def test_scaled_energy_composition_oracle():
    disc = make_domain("unit_disc")
    sys = VortexSystem([1.0, 1.0], disc)
    u = regular_polygon(2)
    r = 0.1
    gam = sys.strengths
    cross = sum(gam[j] * gam[k] for j in range(2) for k in range(2) if j != k)
    F0 = gam.sum() ** 2 * disc.robin(np.zeros(2))
    oracle = domain_energy(sys, r * u).value + cross * math.log(r) / (2 * math.pi) + F0
    assert hr_energy(sys, r, u).value == pytest.approx(oracle, rel=1e-13)


def test_scaling_identity(rng):
    disc = make_domain("unit_disc")
    a0 = np.array([0.1, -0.2])
    for _ in range(20):
        gam = rng.uniform(0.5, 2.0, 3)
        sys = VortexSystem(gam, disc)
        plane = VortexSystem(gam)
        u = spread_cloud(rng, 3)
        r = float(rng.uniform(0.01, 0.2))
        F = lambda z: h0_energy(plane, z) - domain_energy(sys, z).value  # noqa: E731
        Fr = F(np.tile(a0, 3) + r * u)
        F0 = gam.sum() ** 2 * disc.robin(a0)
        val = hr_energy(sys, r, u, a0).value - h0_energy(sys, u) + Fr - F0
        assert abs(val) <= 1e-12 * max(1.0, abs(h0_energy(sys, u)))


def test_scaled_gradient_against_finite_differences(rng):
    sys = VortexSystem([1.0, -0.6, 2.0], make_domain("unit_disc"))
    for _ in range(10):
        u = spread_cloud(rng, 3)
        r = 0.15
        rep = hr_energy(sys, r, u)
        fd = fd_gradient(lambda w: hr_energy(sys, r, w).value, u)
        assert rel_err(rep.gradient, fd) <= 1e-6


def test_pair_velocities_are_tangent_and_opposite():
    sys = VortexSystem([1.0, 1.0])
    v = vector_field(sys, [1, 0, -1, 0]).reshape(2, 2)
    assert v[0] @ np.array([1, 0]) == pytest.approx(0, abs=1e-15)
    np.testing.assert_allclose(v[0], -v[1], atol=1e-15)
    assert np.linalg.norm(v[0]) == pytest.approx(1 / (2 * math.pi), rel=1e-14)


def test_energy_is_conserved_by_the_field(rng):
    sys = VortexSystem([1.0, -2.0, 0.7, 1.3])
    z = spread_cloud(rng, 4)
    zdot = vector_field(sys, z)
    assert abs(h0_gradient(sys, z) @ zdot) <= 1e-13


def test_equilibrium_pair_satisfies_corotating_relation():
    from nvortex import two_vortex_equilibrium

    sys, eq = two_vortex_equilibrium(2.0, -1.0, 1.0)
    J = np.kron(np.eye(2), [[0, 1], [-1, 0]])
    np.testing.assert_allclose(vector_field(sys, eq.z), -eq.omega * J @ eq.z, atol=1e-12)


@pytest.mark.parametrize(
    "gam,c",
    [([1.0, 2.0], [0.0, 0.0]), ([1.0, 2.0], [0.3, 0.1]), ([1.0, -1.0], [0.3, 0.1]), ([1.0, 2.0, -0.5], [-0.2, 0.5])],
)
def test_interaction_gradient_identity(gam, c):
    sys = VortexSystem(gam, make_domain("unit_disc"))
    assert f_gradient_identity_check(sys, c) <= 1e-9


def test_center_of_vorticity():
    sys = VortexSystem([1.0, 3.0])
    np.testing.assert_allclose(center_of_vorticity(sys, [1, 0, 0, 1]), [1, 3])
