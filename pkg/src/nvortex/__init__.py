"""Point-vortex systems, relative equilibria and periodic solutions near
critical points of the Robin function."""

__version__ = "0.1.0"

from .continuation import (
    Branch,
    BranchPoint,
    StepConfig,
    branch_smoothness_check,
    closure_error,
    continue_branch,
    seed_branch,
)
from .degree import (
    DegreeVector,
    IsotypicalMap,
    degree_certificate,
    galerkin_degree,
    linear_degree,
    multiply_degrees,
    orbit_degree_magnitude,
    proposition_5_1_product,
)
from .domains import (
    CriticalPointReport,
    DomainModel,
    brouwer_index,
    find_critical_points,
    make_domain,
    winding_number,
)
from .dynamics import IntegratorConfig, Trajectory, integrate, invariant_drift
from .equilibria import (
    FixOmega,
    FixScale,
    RelativeEquilibrium,
    SpectralReport,
    SymmetryElement,
    equilibrium_residual,
    gamma_periodic_count,
    nondegeneracy,
    periodic_solution_count,
    solve_equilibrium,
    stability_matrix,
    thomson_equilibrium,
    two_vortex_equilibrium,
)
from .errors import ConfigError, InfeasibleProblem, NumericalFailure, NVortexError
from .loopspace import (
    FourierLoop,
    PhaseCondition,
    SymmetrySubspace,
    action,
    l_operator,
    newton_periodic,
    orbit_distance,
    phi_gradient,
    project_symmetry,
    reconstruct,
)
from .model import (
    Configuration,
    EnergyReport,
    VortexSystem,
    domain_energy,
    f_gradient_identity_check,
    h0_energy,
    h0_gradient,
    h0_hessian,
    hr_energy,
    vector_field,
)
