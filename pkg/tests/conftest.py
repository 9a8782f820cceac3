import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from nvortex import (
    FixOmega,
    FourierLoop,
    StepConfig,
    VortexSystem,
    continue_branch,
    make_domain,
    seed_branch,
    solve_equilibrium,
)
from nvortex.equilibria import regular_polygon

settings.register_profile(
    "nvortex",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
    derandomize=True,
)
settings.load_profile("nvortex")

ORIGIN = (0.0, 0.0)
VERDICTS: list[str] = []


@pytest.fixture
def verdict():
    """Print and remember one PASS/FAIL line per acceptance criterion."""

    def emit(label: str, ok: bool, detail: str) -> bool:
        line = f"{'PASS' if ok else 'FAIL'} {label}: {detail}"
        print(line)
        VERDICTS.append(line)
        return ok

    return emit


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance verdicts")
        for line in VERDICTS:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def disc_pair():
    """Equal pair in the unit disc anchored at the centre, with its reference loop."""
    system = VortexSystem([1.0, 1.0], make_domain("unit_disc"))
    eq = solve_equilibrium(VortexSystem([1.0, 1.0]), regular_polygon(2), FixOmega(1.0))
    Z = FourierLoop.relative_equilibrium(eq, 16)
    return system, Z


@pytest.fixture(scope="session")
def disc_seed(disc_pair):
    system, Z = disc_pair
    return seed_branch(system, ORIGIN, Z, 0.02, n=16)


@pytest.fixture(scope="session")
def disc_branch_up(disc_pair, disc_seed):
    system, Z = disc_pair
    return continue_branch(disc_seed, system, 0.5, StepConfig(step=0.02), a0=ORIGIN, Z=Z)


@pytest.fixture(scope="session")
def disc_branch_down(disc_pair, disc_seed):
    system, Z = disc_pair
    return continue_branch(disc_seed, system, 2.5e-3, StepConfig(step=2.5e-3), a0=ORIGIN, Z=Z)
