import json
import math

import numpy as np
import pytest

from nvortex import (
    FourierLoop,
    StepConfig,
    VortexSystem,
    branch_smoothness_check,
    closure_error,
    continue_branch,
    make_domain,
    seed_branch,
)
from nvortex.continuation import (
    BOUNDARY_APPROACH,
    REACHED_TARGET,
    SINGULAR_LIMIT_ANOMALY,
    UNBOUNDED,
    Branch,
    BranchPoint,
    diagnose,
)
from nvortex.domains import UnitDisc
from nvortex.errors import ConfigError, NotApplicable, SeedRejected

ORIGIN = (0.0, 0.0)
R_FOLD = 1.194490160866665


def pair_frequency(p):
    """Angular velocity of the symmetric equal pair at radius p in the unit disc."""
    return 1 / (2 * math.pi * p * p) + 2 * p * p / (math.pi * (1 - p**4))


def physical_radius(point):
    n = point.u.n
    return point.r * float(np.linalg.norm(point.u.coefficients[n + 1, 0]))


def test_seed_is_local(disc_seed):
    assert disc_seed.residual <= 1e-10
    assert disc_seed.translation_size <= 1e-3
    assert disc_seed.margin > 0


def test_seed_off_the_critical_point_is_rejected(disc_pair):
    system, Z = disc_pair
    with pytest.raises(SeedRejected):
        seed_branch(system, (0.5, 0.0), Z, 0.02, n=16)


def test_seed_needs_nonzero_total_vorticity():
    system = VortexSystem([1.0, -1.0], make_domain("unit_disc"))
    Z = FourierLoop.mode(1, [0.5, 0.0, -0.5, 0.0], 8)
    with pytest.raises(SeedRejected):
        seed_branch(system, ORIGIN, Z, 0.02, n=8)


def test_plane_branch_is_the_reference_loop(disc_pair):
    _, Z = disc_pair
    plane = VortexSystem([1.0, 1.0])
    for r in (0.01, 0.3, 2.0):
        assert (seed_branch(plane, ORIGIN, Z, r, n=16).u - Z).x_norm() <= 1e-12
    seed = seed_branch(plane, ORIGIN, Z, 0.1, n=16)
    branch = continue_branch(seed, plane, 0.5, StepConfig(step=0.1), a0=ORIGIN, Z=Z)
    assert branch.termination.kind == REACHED_TARGET
    assert all((p.u - Z).x_norm() <= 1e-12 for p in branch.points)
    report = branch_smoothness_check(branch)
    assert report.passed and report.trivial


def test_upward_branch_follows_the_closed_form(disc_branch_up):
    assert disc_branch_up.termination.kind == REACHED_TARGET
    radii = disc_branch_up.radii
    assert np.all(np.diff(radii) > 0)
    for point in disc_branch_up.points:
        assert point.residual <= 1e-10
        assert abs(point.r - pair_frequency(physical_radius(point)) ** -0.5) <= 1e-9


def test_branch_points_close_up(disc_pair, disc_branch_up):
    system, _ = disc_pair
    for point in disc_branch_up.points[::6]:
        assert closure_error(system, point, ORIGIN) <= 1e-6


def test_downward_branch_approaches_the_orbit(disc_branch_down):
    dist = [p.orbit_distance for p in disc_branch_down.points]
    assert np.all(np.diff(disc_branch_down.radii) < 0)
    assert all(b < a for a, b in zip(dist, dist[1:]))
    assert dist[-1] <= 1e-4


def test_natural_continuation_stops_at_the_fold(disc_pair):
    system, Z = disc_pair
    seed = seed_branch(system, ORIGIN, Z, 1.1, n=16)
    branch = continue_branch(seed, system, 1.5, StepConfig(step=0.02), a0=ORIGIN, Z=Z)
    assert branch.termination.kind == "SolverFailure"
    assert branch.radii[-1] <= R_FOLD
    assert R_FOLD - branch.radii[-1] < 0.02


def test_arclength_passes_and_flags_the_fold(disc_pair):
    system, Z = disc_pair
    seed = seed_branch(system, ORIGIN, Z, 1.1, n=16)
    cfg = StepConfig(step=0.02, pseudo_arclength=True, max_points=30)
    branch = continue_branch(seed, system, 2.0, cfg, a0=ORIGIN, Z=Z)
    folds = [p.r for p in branch.points if p.fold]
    assert len(folds) == 1
    assert abs(folds[0] - R_FOLD) <= 1e-3
    assert max(branch.radii) == pytest.approx(R_FOLD, abs=1e-4)
    for point in branch.points:
        assert abs(point.r - pair_frequency(physical_radius(point)) ** -0.5) <= 1e-9


def test_caps_classify_termination(disc_pair, disc_seed):
    system, Z = disc_pair
    unbounded = continue_branch(disc_seed, system, 0.5, StepConfig(step=0.02, r_cap=0.05), a0=ORIGIN, Z=Z)
    assert unbounded.termination.kind == UNBOUNDED
    near_wall = continue_branch(
        disc_seed, system, 0.5, StepConfig(step=0.02, boundary_factor=0.9), a0=ORIGIN, Z=Z
    )
    assert near_wall.termination.kind == BOUNDARY_APPROACH
    anomaly = continue_branch(disc_seed, system, 0.01, StepConfig(step=0.005, locality=1e-12), a0=ORIGIN, Z=Z)
    assert anomaly.termination.kind == SINGULAR_LIMIT_ANOMALY


def test_kinked_branch_fails_the_smoothness_check(disc_pair, disc_seed):
    system, Z = disc_pair
    fine = continue_branch(disc_seed, system, 0.02 + 4e-4, StepConfig(step=1e-4), a0=ORIGIN, Z=Z)
    assert branch_smoothness_check(fine).passed
    kinked = Branch(system, np.zeros(2), fine.reference, list(fine.points), fine.termination)
    last = kinked.points[-1]
    bent = last.u + FourierLoop.constant(np.tile([0.0, 1e-3], 2), last.u.n)
    kinked.points[-1] = diagnose(system, last.r, bent, Z, ORIGIN)
    assert not branch_smoothness_check(kinked).passed


def test_smoothness_needs_a_nondegenerate_anchor(disc_branch_up):
    class FlatDisc(UnitDisc):
        def robin_hessian(self, a):
            return np.zeros((2, 2))

    flat = VortexSystem([1.0, 1.0], FlatDisc())
    branch = Branch(flat, np.zeros(2), disc_branch_up.reference, disc_branch_up.points, disc_branch_up.termination)
    with pytest.raises(NotApplicable):
        branch_smoothness_check(branch)


def test_branch_is_deterministic(disc_pair, disc_seed, tmp_path):
    system, Z = disc_pair
    texts = []
    for name in ("a", "b"):
        seed = seed_branch(system, ORIGIN, Z, 0.02, n=16)
        branch = continue_branch(seed, system, 0.1, StepConfig(step=0.02), a0=ORIGIN, Z=Z)
        branch.to_jsonl(tmp_path / f"{name}.jsonl")
        texts.append((tmp_path / f"{name}.jsonl").read_bytes())
    assert texts[0] == texts[1]


def test_branch_export(disc_branch_up, tmp_path):
    disc_branch_up.to_jsonl(tmp_path / "b.jsonl")
    lines = (tmp_path / "b.jsonl").read_text().splitlines()
    assert len(lines) == len(disc_branch_up.points)
    back = BranchPoint.from_dict(json.loads(lines[3]))
    orig = disc_branch_up.points[3]
    assert back.r == orig.r and np.array_equal(back.u.coefficients, orig.u.coefficients)
    disc_branch_up.to_csv(tmp_path / "b.csv")
    header = (tmp_path / "b.csv").read_text().splitlines()[0].split(",")
    assert {"r", "residual", "orbit_distance", "translation_size"} <= set(header)
    summary = disc_branch_up.summary()
    assert summary["termination"]["kind"] == REACHED_TARGET


def test_step_configuration_is_validated():
    with pytest.raises(ConfigError):
        StepConfig(step=-0.1)
    with pytest.raises(ConfigError):
        StepConfig(min_step=0.0)
