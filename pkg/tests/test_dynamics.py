import math

import numpy as np
import pytest

from nvortex import IntegratorConfig, Trajectory, VortexSystem, integrate, invariant_drift, make_domain
from nvortex.equilibria import regular_polygon
from nvortex.errors import CollisionEvent, ConfigError

TIGHT = IntegratorConfig(method="dop853", abs_tol=1e-13, rel_tol=1e-12)


@pytest.mark.parametrize("s", [0.5, 1.0, 2.0])
def test_pair_returns_after_one_period(s):
    sys = VortexSystem([1.0, 1.0])
    z0 = np.array([s / 2, 0, -s / 2, 0])
    period = 2 * math.pi / (2.0 / (math.pi * s * s))
    traj = integrate(sys, z0, period, TIGHT)
    assert np.max(np.abs(traj.final - z0)) <= 1e-6


def test_single_vortex_stays_put():
    traj = integrate(VortexSystem([2.5]), [0.3, -1.2], 10.0)
    assert np.all(traj.states == np.array([0.3, -1.2]))


def test_thomson_pentagon_rotates_rigidly():
    n = 5
    sys = VortexSystem(np.ones(n))
    z0 = regular_polygon(n)
    omega = (n - 1) / (2 * math.pi)
    period = 2 * math.pi / omega
    t = np.linspace(0, period, 41)
    traj = integrate(sys, z0, period, TIGHT, t_eval=t)
    rotated = []
    for ti in t:
        c, s = math.cos(omega * ti), math.sin(omega * ti)
        # e^{-ωJt} rotates counterclockwise for J = [[0,1],[-1,0]]
        R = np.array([[c, -s], [s, c]])
        rotated.append((z0.reshape(n, 2) @ R.T).ravel())
    assert np.max(np.abs(traj.states - np.array(rotated))) <= 1e-6


def test_drift_over_ten_periods():
    sys = VortexSystem([1.0, 1.0])
    z0 = np.array([0.5, 0, -0.5, 0])
    period = 2 * math.pi * math.pi / 2.0
    traj = integrate(sys, z0, 10 * period, IntegratorConfig(rel_tol=1e-10, abs_tol=1e-12))
    assert max(traj.invariant_drift.values()) <= 1e-8
    assert set(traj.invariant_drift) == {"H", "Q", "I"}


def test_constant_trajectory_has_zero_drift():
    sys = VortexSystem([1.0, 1.0])
    z = np.array([0.5, 0, -0.5, 0])
    traj = Trajectory(np.array([0.0, 1.0, 2.0]), np.tile(z, (3, 1)))
    assert invariant_drift(sys, traj) == {"H": 0.0, "Q": 0.0, "I": 0.0}


def test_drift_does_not_grow_when_tolerance_tightens(rng):
    sys = VortexSystem([1.0, -0.7, 1.4, 0.9])
    z0 = rng.uniform(-1, 1, 8)
    loose = integrate(sys, z0, 0.5, IntegratorConfig(rel_tol=1e-8, abs_tol=1e-10)).invariant_drift
    tight = integrate(sys, z0, 0.5, IntegratorConfig(rel_tol=0.5e-8, abs_tol=0.5e-10)).invariant_drift
    for key in loose:
        assert tight[key] <= max(loose[key], 1e-13) * 1.5


def test_forward_backward_returns_to_start(rng):
    sys = VortexSystem([1.0, 2.0, -0.5])
    z0 = rng.uniform(-1, 1, 6)
    cfg = IntegratorConfig(rel_tol=1e-10, abs_tol=1e-12)
    there = integrate(sys, z0, 0.3, cfg).final
    # reversing all strengths reverses time
    back = integrate(VortexSystem(-sys.strengths), there, 0.3, cfg).final
    assert np.max(np.abs(back - z0)) <= 10 * 1e-10 * max(1.0, np.max(np.abs(z0)))


def test_implicit_midpoint_conserves_energy():
    sys = VortexSystem([1.0, 1.0, 1.0])
    z0 = regular_polygon(3) + np.array([0.01, 0, 0, 0, 0, 0])
    traj = integrate(sys, z0, 5.0, IntegratorConfig(method="implicit_midpoint", step=1e-2))
    assert traj.invariant_drift["H"] <= 1e-8


def test_wall_approach_raises_with_partial_trajectory():
    sys = VortexSystem([-1.0, 1.0], make_domain("half_plane"))
    with pytest.raises(CollisionEvent) as info:
        integrate(sys, [-0.5, 5, 0.5, 5], 200.0, IntegratorConfig(collision_floor=0.8))
    partial = info.value.trajectory
    assert 0 < partial.times[-1] < 200.0
    assert partial.final[1] == pytest.approx(0.8, abs=1e-6)


def test_disc_energy_is_conserved():
    sys = VortexSystem([1.0, 0.5], make_domain("unit_disc"))
    traj = integrate(sys, [0.3, 0, -0.2, 0.1], 2.0, TIGHT)
    assert traj.invariant_drift["H"] <= 1e-9
    assert set(traj.invariant_drift) == {"H"}


def test_csv_and_jsonl_round_trip(tmp_path):
    sys = VortexSystem([1.0, 1.0])
    traj = integrate(sys, [0.5, 0, -0.5, 0], 1.0)
    traj.to_csv(tmp_path / "t.csv")
    back = Trajectory.from_csv(tmp_path / "t.csv")
    assert np.array_equal(back.times, traj.times)
    assert np.array_equal(back.states, traj.states)
    assert (tmp_path / "t.csv").read_text().splitlines()[0] == "t,x1,y1,x2,y2"
    traj.to_jsonl(tmp_path / "t.jsonl")
    assert len((tmp_path / "t.jsonl").read_text().splitlines()) == len(traj)


def test_bad_integrator_settings():
    with pytest.raises(ConfigError):
        IntegratorConfig(method="euler")
    with pytest.raises(ConfigError):
        IntegratorConfig(rel_tol=0.0)
