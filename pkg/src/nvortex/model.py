"""Vortex systems and their Hamiltonians.

Coordinates are flat and interleaved, ``z = (x₁, y₁, …, x_N, y_N)``.  All pair
sums run over ordered pairs ``j ≠ k``, so every unordered pair is counted
twice in ``H₀``.  ``J = [[0, 1], [-1, 0]]`` acts blockwise.

The private ``_h0_batch`` / ``_f_batch`` helpers accept point arrays of shape
``(B, N, 2)`` so that loop collocation can evaluate many configurations at
once; the public functions wrap them for a single configuration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .domains import DomainModel, Plane
from .errors import CollisionError, ConfigError, OutsideDomainError

TWO_PI = 2.0 * math.pi
J2 = np.array([[0.0, 1.0], [-1.0, 0.0]])
DEFAULT_COLLISION_EPS = 1e-12


def symplectic_matrix(n: int) -> np.ndarray:
    """``J_N = E_N ⊗ J``."""
    return np.kron(np.eye(n), J2)


@dataclass(frozen=True)
class VortexSystem:
    strengths: np.ndarray
    domain: DomainModel = field(default_factory=Plane)
    collision_eps: float = DEFAULT_COLLISION_EPS

    def __post_init__(self):
        gamma = np.asarray(self.strengths, dtype=float).ravel()
        if gamma.size < 1:
            raise ConfigError("at least one vortex is required")
        if np.any(gamma == 0.0) or not np.all(np.isfinite(gamma)):
            raise ConfigError("vortex strengths must be finite and nonzero")
        gamma.setflags(write=False)
        object.__setattr__(self, "strengths", gamma)

    @property
    def N(self) -> int:
        return self.strengths.size

    def total_vorticity(self) -> float:
        return float(self.strengths.sum())

    @property
    def gamma2(self) -> np.ndarray:
        """Strengths repeated per coordinate (the diagonal of ``M_Γ``)."""
        return np.repeat(self.strengths, 2)

    def vorticity_matrix(self) -> np.ndarray:
        return np.diag(self.gamma2)

    def apply_vorticity(self, z) -> np.ndarray:
        return self.gamma2 * np.asarray(z, dtype=float)

    def symplectic(self) -> np.ndarray:
        return symplectic_matrix(self.N)

    def with_domain(self, domain: DomainModel) -> "VortexSystem":
        return VortexSystem(self.strengths, domain, self.collision_eps)


@dataclass(frozen=True)
class Configuration:
    """A point of ``ℝ^{2N}`` with an optional scale context ``r`` (0: plane)."""

    z: np.ndarray
    r: float = 0.0

    def __post_init__(self):
        z = np.array(self.z, dtype=float).ravel()
        if z.size % 2:
            raise ConfigError("configuration needs an even number of coordinates")
        z.setflags(write=False)
        object.__setattr__(self, "z", z)

    @property
    def points(self) -> np.ndarray:
        return self.z.reshape(-1, 2)

    def min_distance(self) -> float:
        return min_pair_distance(self.z)

    def is_admissible(self, sys: VortexSystem, a0=None) -> bool:
        try:
            check_admissible(sys, self.z, self.r, a0)
        except (CollisionError, OutsideDomainError):
            return False
        return True


@dataclass
class EnergyReport:
    value: float
    gradient: np.ndarray
    hessian: np.ndarray | None = None


def _points(z) -> np.ndarray:
    z = np.asarray(getattr(z, "z", z), dtype=float)
    return z.reshape(-1, 2)


def min_pair_distance(z) -> float:
    p = _points(z)
    if len(p) < 2:
        return math.inf
    d = np.linalg.norm(p[:, None, :] - p[None, :, :], axis=-1)
    d[np.diag_indices(len(p))] = np.inf
    return float(d.min())


def center_of_vorticity(sys: VortexSystem, z) -> np.ndarray:
    """``Σ Γ_k z_k`` (not divided by the total vorticity)."""
    return sys.strengths @ _points(z)


def angular_impulse(sys: VortexSystem, z) -> float:
    p = _points(z)
    return float(sys.strengths @ np.einsum("ki,ki->k", p, p))


def check_admissible(sys: VortexSystem, z, r: float | None = None, a0=None) -> None:
    """Raise unless points are distinct and (for ``r``) ``a0 + r z_k ∈ Ω``."""
    p = _points(z)
    if min_pair_distance(p) < sys.collision_eps:
        raise CollisionError("vortices collide")
    if sys.domain.is_plane:
        return
    phys = p if r is None else _anchor(a0) + r * p
    if r is not None and r == 0.0:
        return
    if not np.all(sys.domain.contains(phys)):
        raise OutsideDomainError("vortex outside the domain")


def _anchor(a0) -> np.ndarray:
    return np.zeros(2) if a0 is None else np.asarray(a0, dtype=float).reshape(2)


def _blocks_to_matrix(blocks: np.ndarray) -> np.ndarray:
    """``(..., N, N, 2, 2)`` blocks to ``(..., 2N, 2N)`` matrices."""
    *lead, n, _, _, _ = blocks.shape
    return np.swapaxes(blocks, -3, -2).reshape(*lead, 2 * n, 2 * n)


# -- Kirchhoff-Onsager part --------------------------------------------------

def _h0_batch(gamma: np.ndarray, pts: np.ndarray, order: int = 1, eps: float = 0.0):
    """Value, gradient ``(B, 2N)`` and optionally Hessian ``(B, 2N, 2N)`` of H₀."""
    n = gamma.size
    d = pts[..., :, None, :] - pts[..., None, :, :]
    r2 = np.einsum("...i,...i->...", d, d)
    off = ~np.eye(n, dtype=bool)
    if n > 1 and np.min(r2[..., off]) < eps**2:
        raise CollisionError("vortices collide")
    r2 = np.where(off, r2, 1.0)
    gg = np.outer(gamma, gamma) * off
    value = -np.einsum("jk,...jk->...", gg, np.log(r2)) / (2.0 * TWO_PI)
    grad = -np.einsum("jk,...jki->...ji", gg / math.pi, d / r2[..., None])
    grad = grad.reshape(*pts.shape[:-2], 2 * n)
    if order < 2:
        return value, grad, None
    kern = (r2[..., None, None] * np.eye(2) - 2.0 * d[..., :, None] * d[..., None, :]) / (
        r2[..., None, None] ** 2
    )
    c = -(gg / math.pi)[..., None, None] * kern
    blocks = -c
    diag = c.sum(axis=-3)
    idx = np.arange(n)
    blocks[..., idx, idx, :, :] = diag
    return value, grad, _blocks_to_matrix(blocks)


# -- boundary interaction F(z) = Σ_{j,k} Γ_j Γ_k g(z_j, z_k) --------------------

def _f_batch(gamma: np.ndarray, dom: DomainModel, pts: np.ndarray, order: int = 1):
    n = gamma.size
    lead = pts.shape[:-2]
    if dom.is_plane:
        zero_h = np.zeros(lead + (2 * n, 2 * n)) if order >= 2 else None
        return np.zeros(lead), np.zeros(lead + (2 * n,)), zero_h
    x = np.broadcast_to(pts[..., :, None, :], lead + (n, n, 2))
    y = np.broadcast_to(pts[..., None, :, :], lead + (n, n, 2))
    gg = np.outer(gamma, gamma)
    value = np.einsum("jk,...jk->...", gg, dom.g(x, y))
    grad = 2.0 * np.einsum("jk,...jki->...ji", gg, dom.gx(x, y)).reshape(lead + (2 * n,))
    if order < 2:
        return value, grad, None
    blocks = 2.0 * gg[..., None, None] * dom.gxy(x, y)
    diag = 2.0 * np.einsum("jk,...jkab->...jab", gg, dom.gxx(x, y))
    idx = np.arange(n)
    blocks[..., idx, idx, :, :] += diag
    return value, grad, _blocks_to_matrix(blocks)


def interaction_energy(sys: VortexSystem, z, hessian: bool = False) -> EnergyReport:
    """``F`` and its derivatives; smooth on ``Ω^N``, collisions allowed."""
    p = _points(z)
    if not np.all(sys.domain.contains(p)):
        raise OutsideDomainError("vortex outside the domain")
    v, g, h = _f_batch(sys.strengths, sys.domain, p, 2 if hessian else 1)
    return EnergyReport(float(v), g, h)


def f_gradient_identity_check(sys: VortexSystem, c) -> float:
    """Discrepancy in ``∇_j F(ĉ) = Γ_j ΣΓ ∇h(c)`` and its ``P_D`` projection.

    ``ĉ = (c, …, c)`` is the diagonal configuration; ``P_D`` averages the
    per-vortex components.  Returns the larger max-norm residual.
    """
    c = np.asarray(c, dtype=float).reshape(2)
    if sys.domain.is_plane:
        return 0.0
    grad_f = interaction_energy(sys, np.tile(c, sys.N)).gradient.reshape(-1, 2)
    grad_h = sys.domain.robin_gradient(c)
    total = sys.total_vorticity()
    per_vortex = np.max(np.abs(grad_f - np.outer(sys.strengths, total * grad_h)))
    projected = np.max(np.abs(grad_f.mean(axis=0) - total**2 / sys.N * grad_h))
    return float(max(per_vortex, projected))


# -- public energy API -------------------------------------------------------

def h0_energy(sys: VortexSystem, z) -> float:
    v, _, _ = _h0_batch(sys.strengths, _points(z), 1, sys.collision_eps)
    return float(v)


def h0_gradient(sys: VortexSystem, z) -> np.ndarray:
    _, g, _ = _h0_batch(sys.strengths, _points(z), 1, sys.collision_eps)
    return g


def h0_hessian(sys: VortexSystem, z) -> np.ndarray:
    _, _, h = _h0_batch(sys.strengths, _points(z), 2, sys.collision_eps)
    return h


def domain_energy(sys: VortexSystem, z, hessian: bool = False) -> EnergyReport:
    """``H_Ω = H₀ - F`` with value, gradient and (optionally) Hessian."""
    p = _points(z)
    order = 2 if hessian else 1
    v0, g0, h0 = _h0_batch(sys.strengths, p, order, sys.collision_eps)
    if sys.domain.is_plane:
        return EnergyReport(float(v0), g0, h0)
    if not np.all(sys.domain.contains(p)):
        raise OutsideDomainError("vortex outside the domain")
    vf, gf, hf = _f_batch(sys.strengths, sys.domain, p, order)
    return EnergyReport(float(v0 - vf), g0 - gf, None if h0 is None else h0 - hf)


def _hr_batch(sys: VortexSystem, r: float, pts: np.ndarray, a0=None, order: int = 1):
    """Scaled Hamiltonian ``H_r(u) = H₀(u) - F(a0 + r u) + F(a0)`` on a batch."""
    v0, g0, h0 = _h0_batch(sys.strengths, pts, order, sys.collision_eps)
    if sys.domain.is_plane or r == 0.0:
        return v0, g0, h0
    a = _anchor(a0)
    phys = a + r * pts
    if not np.all(sys.domain.contains(phys)):
        raise OutsideDomainError("scaled configuration leaves the domain")
    vf, gf, hf = _f_batch(sys.strengths, sys.domain, phys, order)
    f_anchor, _, _ = _f_batch(sys.strengths, sys.domain, np.broadcast_to(a, (sys.N, 2)), 0)
    value = v0 - vf + f_anchor
    grad = g0 - r * gf
    hess = None if h0 is None else h0 - r * r * hf
    return value, grad, hess


def hr_energy(sys: VortexSystem, r: float, u, a0=None, hessian: bool = False) -> EnergyReport:
    """Scaled Hamiltonian about the anchor ``a0`` (origin by default)."""
    if r < 0:
        raise ConfigError("scale r must be nonnegative")
    v, g, h = _hr_batch(sys, r, _points(u), a0, 2 if hessian else 1)
    return EnergyReport(float(v), g, h)


def vector_field(sys: VortexSystem, z, r: float | None = None, a0=None) -> np.ndarray:
    """``ż_k = Γ_k⁻¹ J ∇_{z_k} H``.

    ``r=None`` uses the physical Hamiltonian (``H_Ω``, or ``H₀`` in the plane);
    a numeric ``r`` uses ``H_r`` in scaled coordinates.
    """
    if r is None:
        grad = domain_energy(sys, z).gradient
    else:
        grad = hr_energy(sys, r, z, a0).gradient
    g = grad.reshape(-1, 2) / sys.strengths[:, None]
    return (g @ J2.T).ravel()


def vector_field_jacobian(sys: VortexSystem, z, r: float | None = None, a0=None) -> np.ndarray:
    """Derivative of :func:`vector_field`: ``M_Γ⁻¹ J_N H''``."""
    if r is None:
        hess = domain_energy(sys, z, hessian=True).hessian
    else:
        hess = hr_energy(sys, r, z, a0, hessian=True).hessian
    return (sys.symplectic() @ hess) / sys.gamma2[:, None]


def rotation(theta: float, n: int) -> np.ndarray:
    """``e^{-θ J_N}``: counterclockwise rotation of every point by ``θ``."""
    c, s = math.cos(theta), math.sin(theta)
    return np.kron(np.eye(n), np.array([[c, -s], [s, c]]))
