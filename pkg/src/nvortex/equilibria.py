"""Relative equilibria of the planar vortex problem and their spectra.

A relative equilibrium ``Z(t) = e^{-ωJ_N t} z`` (center of vorticity at 0)
is characterized by ``∇H₀(z) + ω M_Γ z = 0``.  Its linearization in the
corotating frame is ``ẇ = A w`` with ``A = J_N (M_Γ⁻¹ H₀''(z) + ω I)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConfigError,
    InfeasibleProblem,
    NoConvergence,
    SingularJacobian,
    StrengthMismatch,
    ToleranceAmbiguity,
)
from .model import VortexSystem, check_admissible, h0_gradient, h0_hessian

ACCEPT_RESIDUAL = 1e-10


@dataclass(frozen=True)
class FixOmega:
    omega: float


@dataclass(frozen=True)
class FixScale:
    """Fix ``ρ² = Σ|Γ_k||z_k|² / Σ|Γ_k|`` about the center of vorticity."""

    rho: float


def scale_of(sys: VortexSystem, z) -> float:
    w = np.abs(sys.strengths)
    p = np.asarray(z, dtype=float).reshape(-1, 2)
    return math.sqrt(float(w @ np.einsum("ki,ki->k", p, p)) / w.sum())


@dataclass
class RelativeEquilibrium:
    z: np.ndarray
    omega: float
    residual_norm: float
    iterations: int = 0

    def loop_configuration(self) -> np.ndarray:
        """Configuration rescaled to ``|ω| = 1`` (``z ↦ √|ω| z``)."""
        return math.sqrt(abs(self.omega)) * self.z

    def to_dict(self) -> dict:
        return {
            "z": self.z.tolist(),
            "omega": self.omega,
            "residual_norm": self.residual_norm,
            "iterations": self.iterations,
        }


@dataclass
class SpectralReport:
    eigenvalues: np.ndarray
    periodic_dimension: int
    nondegenerate: bool
    gamma_periodic_dimension: int | None = None

    def to_dict(self) -> dict:
        ev = sorted(self.eigenvalues, key=lambda c: (round(c.imag, 12), round(c.real, 12)))
        return {
            "eigenvalues": [[float(c.real), float(c.imag)] for c in ev],
            "periodic_dimension": self.periodic_dimension,
            "gamma_periodic_dimension": self.gamma_periodic_dimension,
            "nondegenerate": self.nondegenerate,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


@dataclass(frozen=True)
class SymmetryElement:
    """``γ = (σ, θ)``; ``sigma[k]`` is the image of vortex ``k`` (0-based)."""

    sigma: tuple[int, ...]
    theta: float = 0.0

    def __post_init__(self):
        sigma = tuple(int(s) for s in self.sigma)
        if sorted(sigma) != list(range(len(sigma))):
            raise ConfigError("sigma must be a permutation of 0..N-1")
        object.__setattr__(self, "sigma", sigma)
        q = self.order
        k = self.theta * q / (2 * math.pi)
        if abs(k - round(k)) > 1e-9:
            raise ConfigError("theta must be a multiple of 2π / ord(sigma)")

    @classmethod
    def identity(cls, n: int) -> "SymmetryElement":
        return cls(tuple(range(n)), 0.0)

    @classmethod
    def cyclic(cls, n: int) -> "SymmetryElement":
        """``((1 2 … N), 2π/N)``."""
        return cls(tuple((k + 1) % n for k in range(n)), 2 * math.pi / n)

    @property
    def order(self) -> int:
        seen, q = set(), 1
        for start in range(len(self.sigma)):
            if start in seen:
                continue
            length, k = 0, start
            while k not in seen:
                seen.add(k)
                k = self.sigma[k]
                length += 1
            q = q * length // math.gcd(q, length)
        return q

    def check_strengths(self, sys: VortexSystem) -> None:
        g = sys.strengths
        if any(g[self.sigma[k]] != g[k] for k in range(sys.N)):
            raise StrengthMismatch("sigma does not preserve the vortex strengths")

    def inverse_sigma(self) -> np.ndarray:
        inv = np.empty(len(self.sigma), dtype=int)
        inv[list(self.sigma)] = np.arange(len(self.sigma))
        return inv


def equilibrium_residual(sys: VortexSystem, z, omega: float) -> np.ndarray:
    """``∇H₀(z) + ω M_Γ z``."""
    z = np.asarray(z, dtype=float).ravel()
    return h0_gradient(sys, z) + omega * sys.gamma2 * z


def _constraints(sys: VortexSystem, z, omega, pin_index, pin_ref, norm):
    p = z.reshape(-1, 2)
    cov = sys.strengths @ p
    # no rotation of the pinned vortex relative to its starting direction
    pin = pin_ref[0] * p[pin_index, 1] - pin_ref[1] * p[pin_index, 0]
    if isinstance(norm, FixOmega):
        nrm = omega - norm.omega
    else:
        nrm = scale_of(sys, z) ** 2 - norm.rho**2
    return np.concatenate([cov, [pin, nrm]])


def solve_equilibrium(
    sys: VortexSystem,
    z_guess,
    normalization: FixOmega | FixScale,
    omega_guess: float | None = None,
    tol: float = ACCEPT_RESIDUAL,
    max_iter: int = 50,
) -> RelativeEquilibrium:
    """Gauss-Newton on the residual with center, rotation and scale pins.

    The augmented system has ``2N + 4`` equations of which three are implied
    by the symmetries, so least-squares steps are exact Newton steps on a
    consistent system.
    """
    if abs(sys.total_vorticity()) < 1e-14:
        raise InfeasibleProblem("total vorticity must be nonzero")
    z = np.asarray(z_guess, dtype=float).ravel().copy()
    check_admissible(sys, z)
    n2 = z.size
    gamma = sys.strengths
    p = z.reshape(-1, 2)
    p -= (gamma @ p) / gamma.sum()
    if isinstance(normalization, FixScale):
        z *= normalization.rho / scale_of(sys, z)
    if omega_guess is None:
        if isinstance(normalization, FixOmega):
            omega_guess = normalization.omega
        else:
            # least-squares ω for the current shape
            mz = sys.gamma2 * z
            omega_guess = -float(h0_gradient(sys, z) @ mz / (mz @ mz))
    if isinstance(normalization, FixOmega) and normalization.omega != 0:
        # rescale the guess so the expected frequency matches
        base = -float(h0_gradient(sys, z) @ (sys.gamma2 * z)) / float((sys.gamma2 * z) @ (sys.gamma2 * z))
        if base * normalization.omega > 0:
            z *= math.sqrt(base / normalization.omega)
    omega = float(omega_guess)
    p = z.reshape(-1, 2)
    pin_index = int(np.argmax(np.einsum("ki,ki->k", p, p)))
    pin_ref = p[pin_index].copy()

    def system(zz, om):
        res = equilibrium_residual(sys, zz, om)
        return np.concatenate([res, _constraints(sys, zz, om, pin_index, pin_ref, normalization)])

    it = 0
    for it in range(max_iter + 1):
        res = equilibrium_residual(sys, z, omega)
        rnorm = float(np.linalg.norm(res))
        cons = _constraints(sys, z, omega, pin_index, pin_ref, normalization)
        if rnorm <= tol and np.linalg.norm(cons) <= tol:
            return RelativeEquilibrium(z, omega, rnorm, it)
        if it == max_iter:
            break
        jac = np.zeros((n2 + 4, n2 + 1))
        jac[:n2, :n2] = h0_hessian(sys, z) + omega * np.diag(sys.gamma2)
        jac[:n2, n2] = sys.gamma2 * z
        pp = z.reshape(-1, 2)
        jac[n2, 0:n2:2] = gamma
        jac[n2 + 1, 1:n2:2] = gamma
        jac[n2 + 2, 2 * pin_index] = -pin_ref[1]
        jac[n2 + 2, 2 * pin_index + 1] = pin_ref[0]
        if isinstance(normalization, FixOmega):
            jac[n2 + 3, n2] = 1.0
        else:
            w = np.repeat(np.abs(gamma), 2) / np.abs(gamma).sum()
            jac[n2 + 3, :n2] = 2.0 * w * pp.ravel()
        sv = np.linalg.svd(jac, compute_uv=False)
        small = int(np.sum(sv <= 1e-12 * sv[0]))
        if small:
            raise SingularJacobian("equilibrium Jacobian is singular beyond the pinned symmetries", small)
        step, *_ = np.linalg.lstsq(jac, -system(z, omega), rcond=None)
        lam = 1.0
        while True:
            z_new = z + lam * step[:n2]
            try:
                check_admissible(sys, z_new)
                break
            except InfeasibleProblem:
                lam *= 0.5
                if lam < 1e-6:
                    raise NoConvergence("Newton steps keep colliding vortices")
        z = z_new
        omega = omega + lam * step[n2]
    raise NoConvergence(f"equilibrium Newton stalled (residual {rnorm:.3e})")


def stability_matrix(sys: VortexSystem, eq: RelativeEquilibrium) -> np.ndarray:
    """``A = J_N (M_Γ⁻¹ H₀''(z) + ω I)``."""
    hess = h0_hessian(sys, eq.z)
    inner = hess / sys.gamma2[:, None] + eq.omega * np.eye(eq.z.size)
    return sys.symplectic() @ inner


def _cluster(values: np.ndarray, radius: float) -> list[list[int]]:
    clusters: list[list[int]] = []
    for i, v in enumerate(values):
        for c in clusters:
            if abs(values[c[0]] - v) <= radius:
                c.append(i)
                break
        else:
            clusters.append([i])
    return clusters


def periodic_solution_count(A, omega: float, tol: float = 1e-8) -> int:
    """Real dimension of the ``2π/|ω|``-periodic solutions of ``ẇ = A w``.

    Eigenvalues are grouped into clusters (defective eigenvalues split by
    ``O(√ε)`` under rounding; the cluster mean is accurate) and a cluster on
    the lattice ``i|ω|ℤ`` contributes the nullity of ``A - iκ I`` at its
    lattice point ``iκ``.  Clusters between ``tol`` and ``10 tol`` from the
    lattice raise :class:`ToleranceAmbiguity`.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] % 2:
        raise ConfigError("A must be a square matrix of even size")
    w = abs(omega)
    if w == 0:
        raise ConfigError("omega must be nonzero")
    scale = max(1.0, float(np.linalg.norm(A, 2)))
    eig = np.linalg.eigvals(A)
    lattice_points = set()
    for c in _cluster(eig, 1e-5 * scale):
        mean = eig[c].mean()
        k = round(mean.imag / w)
        dist = abs(mean - 1j * k * w)
        if dist <= tol:
            lattice_points.add(k)
        elif dist <= 10 * tol:
            raise ToleranceAmbiguity(f"eigenvalue {mean:.3e} is {dist:.2e} from the lattice")
    count = 0
    n = A.shape[0]
    for k in lattice_points:
        sv = np.linalg.svd(A - 1j * k * w * np.eye(n), compute_uv=False)
        count += int(np.sum(sv <= 1e-8 * scale))
    return count


def nondegeneracy(sys: VortexSystem, eq: RelativeEquilibrium, tol: float = 1e-8) -> SpectralReport:
    A = stability_matrix(sys, eq)
    count = periodic_solution_count(A, eq.omega, tol)
    return SpectralReport(np.linalg.eigvals(A), count, count == 3)


def gamma_periodic_count(
    sys: VortexSystem,
    eq: RelativeEquilibrium,
    gamma: SymmetryElement | None = None,
    n: int = 16,
    tol: float = 1e-8,
) -> int:
    """Dimension of γ-symmetric periodic solutions of the linearized system.

    Computed as the kernel dimension of the Galerkin linearization of the
    loop-space gradient at the normalized equilibrium loop, restricted to
    ``X^γ``, at truncations ``n`` and ``2n``.
    """
    from .errors import TruncationUnstable
    from .loopspace import FourierLoop, SymmetrySubspace, kernel_dimension

    gamma = gamma or SymmetryElement.identity(sys.N)
    gamma.check_strengths(sys)
    base = VortexSystem(sys.strengths)
    counts = []
    for nn in (n, 2 * n):
        loop = FourierLoop.relative_equilibrium(eq, nn)
        space = SymmetrySubspace(gamma, sys.N, nn)
        space.require_fixed(loop)
        counts.append(kernel_dimension(base, loop, space, tol=tol))
    if counts[0] != counts[1]:
        raise TruncationUnstable(f"kernel dimension {counts[0]} at n={n} but {counts[1]} at n={2 * n}")
    return counts[0]


# -- standard configurations --------------------------------------------------

def regular_polygon(n: int, radius: float = 1.0, phase: float = 0.0) -> np.ndarray:
    t = phase + 2 * math.pi * np.arange(n) / n
    return (radius * np.stack([np.cos(t), np.sin(t)], axis=1)).ravel()


def thomson_equilibrium(n: int, radius: float = 1.0) -> tuple[VortexSystem, RelativeEquilibrium]:
    """Thomson's N-gon with unit strengths; ``ω = (N-1) / (2π radius²)``."""
    sys = VortexSystem(np.ones(n))
    z = regular_polygon(n, radius)
    omega = (n - 1) / (2 * math.pi * radius**2)
    return sys, RelativeEquilibrium(z, omega, float(np.linalg.norm(equilibrium_residual(sys, z, omega))))


def two_vortex_equilibrium(g1: float, g2: float, separation: float) -> tuple[VortexSystem, RelativeEquilibrium]:
    """Centered pair on the x-axis; ``ω = (Γ₁+Γ₂) / (π s²)``."""
    sys = VortexSystem([g1, g2])
    tot = g1 + g2
    z = np.array([g2 * separation / tot, 0.0, -g1 * separation / tot, 0.0])
    omega = tot / (math.pi * separation**2)
    return sys, RelativeEquilibrium(z, omega, float(np.linalg.norm(equilibrium_residual(sys, z, omega))))


def equilateral_triangle(strengths, side: float) -> tuple[VortexSystem, RelativeEquilibrium]:
    """Equilateral triangle centered at its center of vorticity."""
    sys = VortexSystem(strengths)
    p = regular_polygon(3, side / math.sqrt(3)).reshape(3, 2)
    p -= (sys.strengths @ p) / sys.total_vorticity()
    z = p.ravel()
    mz = sys.gamma2 * z
    omega = -float(h0_gradient(sys, z) @ mz / (mz @ mz))
    return sys, RelativeEquilibrium(z, omega, float(np.linalg.norm(equilibrium_residual(sys, z, omega))))
