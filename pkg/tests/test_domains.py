import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nvortex import brouwer_index, find_critical_points, make_domain, winding_number
from nvortex.domains import UnitDisc
from nvortex.errors import ConfigError, InfeasibleProblem, OutsideDomainError, ZeroOnContour

DISC = make_domain("unit_disc")
HALF = make_domain("half_plane")


def disc_point(rng, rmax=0.85):
    ang = rng.uniform(0, 2 * math.pi)
    rad = rmax * math.sqrt(rng.uniform())
    return np.array([rad * math.cos(ang), rad * math.sin(ang)])


def half_point(rng):
    return np.array([rng.uniform(-2, 2), rng.uniform(0.1, 2)])


@pytest.mark.parametrize("dom,sample", [(DISC, disc_point), (HALF, half_point)])
def test_regular_part_is_symmetric(dom, sample, rng):
    for _ in range(50):
        x, y = sample(rng), sample(rng)
        assert abs(dom.g(x, y) - dom.g(y, x)) <= 1e-10


@pytest.mark.parametrize("dom,sample", [(DISC, disc_point), (HALF, half_point)])
def test_regular_part_is_harmonic(dom, sample, rng):
    h = 1e-3
    for _ in range(20):
        x, y = sample(rng), sample(rng)
        if dom.boundary_distance(x) < 0.05:
            continue
        lap = sum(dom.g(x + d, y) for d in ([h, 0], [-h, 0], [0, h], [0, -h])) - 4 * dom.g(x, y)
        assert abs(lap / h**2) <= 1e-6 * max(1.0, abs(dom.g(x, y)))


def test_disc_boundary_collocation(rng):
    t = np.linspace(0, 2 * math.pi, 64, endpoint=False)
    boundary = np.column_stack([np.cos(t), np.sin(t)])
    for _ in range(10):
        y = disc_point(rng)
        vals = [DISC.g(b, y) + math.log(np.linalg.norm(b - y)) / (2 * math.pi) for b in boundary]
        assert np.ptp(vals) <= 1e-8


def test_half_plane_boundary_collocation(rng):
    xs = np.linspace(-3, 3, 64)
    for _ in range(10):
        y = half_point(rng)
        vals = [HALF.g(np.array([x, 0.0]), y) + math.log(math.hypot(x - y[0], y[1])) / (2 * math.pi) for x in xs]
        assert np.ptp(vals) <= 1e-8


def test_disc_robin_matches_closed_form(rng):
    for _ in range(20):
        a = disc_point(rng)
        assert DISC.robin(a) == pytest.approx(-math.log(1 - a @ a) / (2 * math.pi), rel=1e-13, abs=1e-15)


def test_disc_robin_blows_up_at_the_wall():
    values = [DISC.robin(np.array([r, 0.0])) for r in (0.9, 0.99, 0.999, 0.9999)]
    assert all(b > a for a, b in zip(values, values[1:]))
    assert values[-1] > 1.0


def test_disc_centre_is_a_strict_minimum():
    assert np.linalg.norm(DISC.robin_gradient(np.zeros(2))) == 0.0
    assert np.all(np.linalg.eigvalsh(DISC.robin_hessian(np.zeros(2))) > 0)


@given(st.floats(0.0, 0.95), st.floats(0, 2 * math.pi))
def test_disc_robin_is_radial(radius, theta):
    a = np.array([radius, 0.0])
    b = radius * np.array([math.cos(theta), math.sin(theta)])
    assert abs(DISC.robin(a) - DISC.robin(b)) <= 1e-10


@pytest.mark.parametrize("dom,sample", [(DISC, disc_point), (HALF, half_point)])
def test_robin_derivatives_against_finite_differences(dom, sample, rng):
    h = 1e-6
    for _ in range(10):
        a = sample(rng)
        e = np.eye(2) * h
        fd = np.array([(dom.robin(a + e[i]) - dom.robin(a - e[i])) / (2 * h) for i in range(2)])
        np.testing.assert_allclose(dom.robin_gradient(a), fd, rtol=1e-6, atol=1e-9)
        fdh = np.array([(dom.robin_gradient(a + e[i]) - dom.robin_gradient(a - e[i])) / (2 * h) for i in range(2)])
        np.testing.assert_allclose(dom.robin_hessian(a), fdh, rtol=1e-5, atol=1e-7)


def test_half_plane_gradient_never_vanishes(rng):
    for _ in range(100):
        assert np.linalg.norm(HALF.robin_gradient(half_point(rng))) > 0


def test_critical_points():
    (report,) = find_critical_points(DISC)
    np.testing.assert_allclose(report.location, 0.0, atol=1e-12)
    assert report.brouwer_index == 1 and report.stable and report.nondegenerate
    assert find_critical_points(make_domain("plane")) == []
    assert find_critical_points(HALF, search_box=((-1, 1), (0.1, 2))) == []


@pytest.mark.parametrize("eps", [0.05, 0.1, 0.2])
def test_disc_index_is_independent_of_radius(eps):
    assert brouwer_index(DISC, [0.0, 0.0], eps) == 1


def test_saddle_field_has_index_minus_one():
    assert winding_number(lambda p: np.array([p[0], -p[1]]), [0, 0], 0.3) == -1


def test_large_circle_sums_enclosed_indices():
    # the disc has a single zero, so the index over a big circle equals its index
    assert brouwer_index(DISC, [0.0, 0.0], 0.9) == brouwer_index(DISC, [0.0, 0.0], 0.05)
    assert brouwer_index(DISC, [0.4, 0.2], 0.1) == 0


def test_index_contour_errors():
    with pytest.raises(ZeroOnContour):
        winding_number(lambda p: np.array([p[0] - 0.3, p[1]]), [0, 0], 0.3)
    with pytest.raises(OutsideDomainError):
        brouwer_index(DISC, [0.9, 0.0], 0.2)
    with pytest.raises(InfeasibleProblem):
        brouwer_index(make_domain("plane"), [0.0, 0.0], 0.1)


def test_robin_outside_domain_is_rejected():
    with pytest.raises(OutsideDomainError):
        DISC.robin(np.array([1.1, 0.0]))
    with pytest.raises(OutsideDomainError):
        HALF.robin(np.array([0.0, -0.5]))


def test_annulus_requires_opt_in():
    with pytest.raises(ConfigError):
        make_domain("annulus", rho=0.3)
    ann = make_domain("annulus", experimental=True, rho=0.3)
    x, y = np.array([0.5, 0.1]), np.array([-0.2, 0.6])
    assert abs(ann.g(x, y) - ann.g(y, x)) <= 1e-8


def test_unknown_domain():
    with pytest.raises(ConfigError):
        make_domain("square")


def test_domain_description_round_trips():
    assert DISC.to_dict()["kind"] == "unit_disc"
    assert isinstance(DISC, UnitDisc)
