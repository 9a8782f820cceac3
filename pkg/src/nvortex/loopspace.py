"""Truncated Fourier loops and the periodic problem for the scaled system.

A loop ``u: ℝ/2πℤ → ℝ^{2N}`` is stored as ``u(t) = Σ_{|k|≤n} e^{-kJ_N t} α_k``.
Identifying each point with a complex number ``x + iy``, ``e^{-kJt}`` is
multiplication by ``e^{ikt}``, so ``α_k`` is the ordinary complex Fourier
coefficient of every vortex track.  Coefficients are kept as a real array
of shape ``(2n+1, N, 2)`` in the order ``k = -n, …, n``.

The Hilbert space ``X = H¹`` carries ``⟨u, v⟩_X = ∫ ⟨u, v⟩ + ⟨u̇, v̇⟩ dt``,
i.e. ``2π Σ_k (1 + k²) ⟨α_k, β_k⟩``.  The nonlinear part of the action is
integrated with the trapezoid rule on ``m = 4n + 4`` nodes, and
:func:`phi_gradient` is the exact ``X``-gradient of that discretized action.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .equilibria import RelativeEquilibrium, SymmetryElement
from .errors import (
    CollisionError,
    CollisionOnLoop,
    ConfigError,
    JacobianSingular,
    LoopLeftDomain,
    NoConvergence,
    NotSymmetric,
    OutsideDomainError,
    OutsideDomainOnLoop,
)
from .model import VortexSystem, _anchor, _hr_batch

TWO_PI = 2.0 * math.pi
ACCEPT_RESIDUAL = 1e-10


def default_nodes(n: int) -> int:
    return 4 * n + 4


class FourierLoop:
    """Immutable truncated Fourier loop in ``ℝ^{2N}``."""

    __slots__ = ("_coef",)

    def __init__(self, coefficients):
        c = np.array(coefficients, dtype=float)
        if c.ndim != 3 or c.shape[2] != 2 or c.shape[0] % 2 != 1:
            raise ConfigError("coefficients must have shape (2n+1, N, 2)")
        c.setflags(write=False)
        self._coef = c

    # construction ----------------------------------------------------------
    @classmethod
    def zeros(cls, n: int, N: int) -> "FourierLoop":
        return cls(np.zeros((2 * n + 1, N, 2)))

    @classmethod
    def constant(cls, z, n: int) -> "FourierLoop":
        p = np.asarray(z, dtype=float).reshape(-1, 2)
        c = np.zeros((2 * n + 1, len(p), 2))
        c[n] = p
        return cls(c)

    @classmethod
    def mode(cls, k: int, alpha, n: int) -> "FourierLoop":
        """Single mode ``e^{-kJ_N t} α``."""
        if abs(k) > n:
            raise ConfigError("mode outside the truncation")
        p = np.asarray(alpha, dtype=float).reshape(-1, 2)
        c = np.zeros((2 * n + 1, len(p), 2))
        c[n + k] = p
        return cls(c)

    @classmethod
    def relative_equilibrium(cls, eq: RelativeEquilibrium, n: int) -> "FourierLoop":
        """The ``2π``-periodic loop ``e^{∓J_N t} √|ω| z`` (sign of ``ω``)."""
        k = 1 if eq.omega > 0 else -1
        return cls.mode(k, math.sqrt(abs(eq.omega)) * eq.z, n)

    @classmethod
    def from_nodes(cls, values, n: int) -> "FourierLoop":
        """Project nodal values ``(m, N, 2)`` at ``t_l = 2πl/m`` onto ``|k| ≤ n``."""
        v = np.asarray(values, dtype=float)
        m = v.shape[0]
        if m < 2 * n + 1:
            raise ConfigError("need at least 2n+1 nodes")
        freq = np.fft.fft(v[..., 0] + 1j * v[..., 1], axis=0) / m
        ks = np.arange(-n, n + 1)
        a = freq[ks % m]
        return cls(np.stack([a.real, a.imag], axis=-1))

    @classmethod
    def from_vector(cls, vec, n: int, N: int) -> "FourierLoop":
        return cls(np.asarray(vec, dtype=float).reshape(2 * n + 1, N, 2))

    # properties ------------------------------------------------------------
    @property
    def coefficients(self) -> np.ndarray:
        return self._coef

    @property
    def n(self) -> int:
        return (self._coef.shape[0] - 1) // 2

    @property
    def N(self) -> int:
        return self._coef.shape[1]

    @property
    def modes(self) -> np.ndarray:
        return np.arange(-self.n, self.n + 1)

    @property
    def vector(self) -> np.ndarray:
        return self._coef.ravel()

    def complex_coefficients(self) -> np.ndarray:
        return self._coef[..., 0] + 1j * self._coef[..., 1]

    def __repr__(self) -> str:
        return f"FourierLoop(n={self.n}, N={self.N})"

    # arithmetic --------------------------------------------------------------
    def __add__(self, other: "FourierLoop") -> "FourierLoop":
        return FourierLoop(self._coef + other._coef)

    def __sub__(self, other: "FourierLoop") -> "FourierLoop":
        return FourierLoop(self._coef - other._coef)

    def __mul__(self, s: float) -> "FourierLoop":
        return FourierLoop(self._coef * s)

    __rmul__ = __mul__

    def resize(self, n: int) -> "FourierLoop":
        out = np.zeros((2 * n + 1, self.N, 2))
        k = min(n, self.n)
        out[n - k : n + k + 1] = self._coef[self.n - k : self.n + k + 1]
        return FourierLoop(out)

    # evaluation ------------------------------------------------------------
    def nodes(self, m: int | None = None) -> np.ndarray:
        """Values at ``t_l = 2πl/m`` as an array ``(m, N, 2)``."""
        m = m or default_nodes(self.n)
        if m < 2 * self.n + 1:
            raise ConfigError("need at least 2n+1 nodes")
        freq = np.zeros((m, self.N), dtype=complex)
        freq[self.modes % m] = self.complex_coefficients()
        w = np.fft.ifft(freq, axis=0) * m
        return np.stack([w.real, w.imag], axis=-1)

    def __call__(self, t) -> np.ndarray:
        """Evaluate at arbitrary times; returns ``(..., 2N)``."""
        t = np.asarray(t, dtype=float)
        phase = np.exp(1j * np.multiply.outer(t, self.modes))
        w = phase @ self.complex_coefficients()
        return np.stack([w.real, w.imag], axis=-1).reshape(*t.shape, 2 * self.N)

    def derivative(self) -> "FourierLoop":
        """``u̇``: ``α_k ↦ -k J α_k``."""
        c = self._coef
        out = np.empty_like(c)
        k = self.modes[:, None]
        out[..., 0] = -k * c[..., 1]
        out[..., 1] = k * c[..., 0]
        return FourierLoop(out)

    def shift(self, theta: float) -> "FourierLoop":
        """``θ * u (t) = u(t + θ)``: ``α_k ↦ e^{-kJθ} α_k``."""
        a = self.complex_coefficients() * np.exp(1j * self.modes * theta)[:, None]
        return FourierLoop(np.stack([a.real, a.imag], axis=-1))

    def translation_part(self) -> np.ndarray:
        """``b`` with ``P_D u = (b, …, b)``."""
        return self._coef[self.n].mean(axis=0)

    def project_translation(self) -> "FourierLoop":
        c = np.zeros_like(self._coef)
        c[self.n] = self.translation_part()
        return FourierLoop(c)

    # norms -----------------------------------------------------------------
    def weights(self) -> np.ndarray:
        """Per-coefficient ``X`` weights ``2π(1 + k²)``."""
        return np.repeat(TWO_PI * (1.0 + self.modes.astype(float) ** 2), 2 * self.N)

    def x_inner(self, other: "FourierLoop") -> float:
        return float(np.sum(self.weights() * self.vector * other.vector))

    def x_norm(self) -> float:
        return math.sqrt(self.x_inner(self))

    def l2_inner(self, other: "FourierLoop") -> float:
        return TWO_PI * float(self.vector @ other.vector)

    def tail_fraction(self) -> float:
        """Share of ``‖u‖²_X`` carried by modes ``|k| > n/2``."""
        w = self.weights() * self.vector**2
        tail = np.abs(np.repeat(self.modes, 2 * self.N)) > self.n / 2
        total = w.sum()
        return float(w[tail].sum() / total) if total > 0 else 0.0

    # serialization -----------------------------------------------------------
    def to_dict(self) -> dict:
        return {"n": self.n, "N": self.N, "coefficients": self._coef.tolist()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "FourierLoop":
        loop = cls(d["coefficients"])
        if loop.n != d["n"] or loop.N != d["N"]:
            raise ConfigError("loop header does not match coefficients")
        return loop

    @classmethod
    def from_json(cls, s: str) -> "FourierLoop":
        return cls.from_dict(json.loads(s))


# -- the operator L and the action -----------------------------------------

def l_operator(sys: VortexSystem, u: FourierLoop) -> FourierLoop:
    """``L(e^{-kJt} α) = -(k / (1+k²)) M_Γ e^{-kJt} α``."""
    k = u.modes.astype(float)
    factor = -(k / (1.0 + k**2))[:, None, None]
    return FourierLoop(factor * sys.strengths[None, :, None] * u.coefficients)


def _loop_nodes(sys, r, u, a0, m):
    m = m or default_nodes(u.n)
    pts = u.nodes(m)
    check_loop(sys, r, pts, a0)
    return pts, m


def check_loop(sys: VortexSystem, r: float, pts: np.ndarray, a0=None) -> None:
    """Admissibility of nodal values ``(m, N, 2)`` in ``𝒪_r``."""
    n = sys.N
    d = np.linalg.norm(pts[:, :, None, :] - pts[:, None, :, :], axis=-1)
    if n > 1 and np.min(d[:, ~np.eye(n, dtype=bool)]) < sys.collision_eps:
        raise CollisionOnLoop("vortices collide on the loop")
    if not sys.domain.is_plane and r > 0:
        if not np.all(sys.domain.contains(_anchor(a0) + r * pts)):
            raise LoopLeftDomain("scaled loop leaves the domain")


def action(sys: VortexSystem, r: float, u: FourierLoop, a0=None, m: int | None = None) -> float:
    """``½∫⟨M_Γ u̇, J_N u⟩ - ∫ H_r(u)``, trapezoid rule for the second term."""
    pts, m = _loop_nodes(sys, r, u, a0, m)
    quad = quadratic_form(sys, u)
    values, _, _ = _hr_batch(sys, r, pts, a0, 0)
    return quad - TWO_PI * float(np.mean(values))


def quadratic_form(sys: VortexSystem, u: FourierLoop) -> float:
    """``½∫⟨M_Γ u̇, J_N u⟩ dt = -π Σ_k k Σ_j Γ_j |α_{k,j}|²``."""
    a2 = np.sum(u.coefficients**2, axis=2)
    return -math.pi * float(u.modes @ (a2 @ sys.strengths))


def psi_gradient(sys, r, u, a0=None, m=None) -> FourierLoop:
    """``(id - Δ)⁻¹ ∇H_r(u)`` projected to ``|k| ≤ n``."""
    pts, m = _loop_nodes(sys, r, u, a0, m)
    _, grad, _ = _hr_batch(sys, r, pts, a0, 1)
    g = FourierLoop.from_nodes(grad.reshape(m, sys.N, 2), u.n)
    k = u.modes.astype(float)
    return FourierLoop(g.coefficients / (1.0 + k**2)[:, None, None])


def phi_gradient(sys: VortexSystem, r: float, u: FourierLoop, a0=None, m=None) -> FourierLoop:
    """``Φ_r(u) = L u - Ψ_r(u)``, the ``X``-gradient of :func:`action`."""
    return l_operator(sys, u) - psi_gradient(sys, r, u, a0, m)


def synthesis_matrix(n: int, N: int, m: int) -> np.ndarray:
    """Real matrix ``(m·2N, D)`` mapping coefficients to nodal values."""
    t = TWO_PI * np.arange(m) / m
    ks = np.arange(-n, n + 1)
    c, s = np.cos(np.outer(t, ks)), np.sin(np.outer(t, ks))
    rot = np.empty((m, 2 * n + 1, 2, 2))
    rot[..., 0, 0], rot[..., 0, 1] = c, -s
    rot[..., 1, 0], rot[..., 1, 1] = s, c
    E = np.zeros((m, N, 2, 2 * n + 1, N, 2))
    for j in range(N):
        E[:, j, :, :, j, :] = np.transpose(rot, (0, 2, 1, 3))
    return E.reshape(m * 2 * N, (2 * n + 1) * 2 * N)


def action_hessian(sys: VortexSystem, r: float, u: FourierLoop, a0=None, m=None) -> np.ndarray:
    """Symmetric Hessian ``S`` of the discretized action in coefficient space.

    The Jacobian of :func:`phi_gradient` is ``W⁻¹ S`` with ``W`` the diagonal
    of :meth:`FourierLoop.weights`.
    """
    pts, m = _loop_nodes(sys, r, u, a0, m)
    _, _, hess = _hr_batch(sys, r, pts, a0, 2)
    E = synthesis_matrix(u.n, u.N, m)
    n2 = 2 * sys.N
    HE = np.einsum("lab,lbd->lad", hess, E.reshape(m, n2, -1)).reshape(m * n2, -1)
    S = -(TWO_PI / m) * (E.T @ HE)
    quad = -TWO_PI * np.repeat(u.modes.astype(float), n2) * np.tile(sys.gamma2, 2 * u.n + 1)
    S[np.diag_indices_from(S)] += quad
    return 0.5 * (S + S.T)


def phi_jacobian(sys, r, u, a0=None, m=None) -> np.ndarray:
    return action_hessian(sys, r, u, a0, m) / u.weights()[:, None]


# -- symmetry ----------------------------------------------------------------

class SymmetrySubspace:
    """Fixed-point space ``X^γ`` of ``γ = (σ, θ)`` acting by permute-and-shift."""

    def __init__(self, gamma: SymmetryElement, N: int, n: int):
        if len(gamma.sigma) != N:
            raise ConfigError("symmetry element has the wrong number of vortices")
        self.gamma, self.N, self.n = gamma, N, n
        D = (2 * n + 1) * 2 * N
        act = np.column_stack([self.act(FourierLoop.from_vector(e, n, N)).vector for e in np.eye(D)])
        q = gamma.order
        P = np.zeros((D, D))
        power = np.eye(D)
        for _ in range(q):
            P += power
            power = act @ power
        self.projector = P / q
        vals, vecs = np.linalg.eigh(0.5 * (self.projector + self.projector.T))
        self.basis = vecs[:, vals > 0.5]

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    def act(self, u: FourierLoop) -> FourierLoop:
        """``(γ*u)_j(t) = u_{σ⁻¹(j)}(t + θ)``."""
        shifted = u.shift(self.gamma.theta).coefficients
        return FourierLoop(shifted[:, self.gamma.inverse_sigma(), :])

    def project(self, u: FourierLoop) -> FourierLoop:
        return FourierLoop.from_vector(self.projector @ u.vector, u.n, u.N)

    def contains(self, u: FourierLoop, tol: float = 1e-10) -> bool:
        return (self.act(u) - u).x_norm() <= tol * max(1.0, u.x_norm())

    def require_fixed(self, u: FourierLoop, tol: float = 1e-10) -> None:
        if not self.contains(u, tol):
            raise NotSymmetric("loop is not fixed by the symmetry element")


def project_symmetry(u: FourierLoop, space: SymmetrySubspace, sys: VortexSystem | None = None) -> FourierLoop:
    if sys is not None:
        space.gamma.check_strengths(sys)
    return space.project(u)


def kernel_dimension(
    sys: VortexSystem,
    u: FourierLoop,
    space: SymmetrySubspace | None = None,
    r: float = 0.0,
    a0=None,
    tol: float = 1e-8,
) -> int:
    """Number of eigenvalues of ``DΦ_r(u)`` (self-adjoint in ``X``) with ``|λ| ≤ tol``."""
    spectrum = linearized_spectrum(sys, u, space, r, a0)
    return int(np.sum(np.abs(spectrum) <= tol))


def linearized_spectrum(sys, u, space=None, r=0.0, a0=None) -> np.ndarray:
    S = action_hessian(sys, r, u, a0)
    w = 1.0 / np.sqrt(u.weights())
    sym = w[:, None] * S * w[None, :]
    if space is not None:
        sym = space.basis.T @ sym @ space.basis
    return np.linalg.eigvalsh(sym)


# -- phase ---------------------------------------------------------------------

@dataclass(frozen=True)
class PhaseCondition:
    """``u ↦ ⟨u - u_ref, u̇_ref⟩_{L²} / ‖u̇_ref‖_{L²}``."""

    reference: FourierLoop

    @property
    def direction(self) -> np.ndarray:
        d = self.reference.derivative().vector
        nrm = np.linalg.norm(d)
        return d / nrm if nrm > 0 else d

    def __call__(self, u: FourierLoop) -> float:
        return float((u.vector - self.reference.vector) @ self.direction)


def align_phase(u: FourierLoop, ref: FourierLoop, samples: int = 64) -> tuple[float, FourierLoop]:
    """Shift ``θ`` minimizing ``‖θ*u - ref‖_X``; returns ``(θ, θ*u)``."""
    ua, ra = u.complex_coefficients(), ref.complex_coefficients()
    k = u.modes
    cross = np.sum((1.0 + k**2)[:, None] * ua * np.conj(ra), axis=1)

    def neg_overlap(theta):
        return -float(np.real(np.exp(1j * k * theta) @ cross))

    grid = np.linspace(0.0, TWO_PI, samples, endpoint=False)
    theta = float(grid[np.argmin([neg_overlap(t) for t in grid])])
    # Newton on the derivative: a flat minimum only pins θ to √eps otherwise
    for _ in range(50):
        rot = np.exp(1j * k * theta) * cross
        slope = -float(np.real(1j * k @ rot))
        curv = float(np.real(k**2 @ rot))
        if curv <= 0:
            break
        step = slope / curv
        theta -= step
        if abs(step) < 1e-15:
            break
    theta %= TWO_PI
    return theta, u.shift(theta)


def orbit_distance(u: FourierLoop, ref: FourierLoop) -> float:
    """``min_θ ‖θ*u - ref‖_X``."""
    ref = ref.resize(u.n)
    _, shifted = align_phase(u, ref)
    return (shifted - ref).x_norm()


# -- Newton solver ---------------------------------------------------------------

@dataclass
class PeriodicSolution:
    loop: FourierLoop
    r: float
    residual: float
    iterations: int
    tail_fraction: float


def newton_periodic(
    sys: VortexSystem,
    r: float,
    u_guess: FourierLoop,
    phase: PhaseCondition | None = None,
    space: SymmetrySubspace | None = None,
    a0=None,
    tol: float = ACCEPT_RESIDUAL,
    max_iter: int = 30,
    pin_translation: bool | None = None,
) -> PeriodicSolution:
    """Solve ``Φ_r(u) = 0`` (within ``X^γ`` when ``space`` is given).

    Gauss-Newton on ``{Φ_r(u) = 0, phase(u) = 0}`` with residuals weighted
    in the ``X`` norm.  When ``H_r`` is translation invariant (the plane, or
    ``r = 0``) the mean position ``P_D u`` is pinned as well.
    """
    if space is not None:
        space.gamma.check_strengths(sys)
        space.require_fixed(u_guess, 1e-8)
    check_loop(sys, r, u_guess.nodes(), a0)
    phase = phase or PhaseCondition(u_guess)
    if pin_translation is None:
        pin_translation = sys.domain.is_plane or r == 0.0
    n, N = u_guess.n, u_guess.N
    basis = space.basis if space is not None else None
    sqrt_w = np.sqrt(u_guess.weights())
    ref_mean = u_guess.translation_part()
    D = u_guess.vector.size

    pin_rows = np.zeros((2, D))
    for j in range(N):
        pin_rows[0, (n * N + j) * 2] = 1.0 / N
        pin_rows[1, (n * N + j) * 2 + 1] = 1.0 / N

    def residuals(u: FourierLoop) -> np.ndarray:
        phi = phi_gradient(sys, r, u, a0)
        parts = [sqrt_w * phi.vector, [phase(u)]]
        if pin_translation:
            parts.append(u.translation_part() - ref_mean)
        return np.concatenate(parts)

    u = u_guess
    res = residuals(u)
    for it in range(max_iter + 1):
        phi_norm = float(np.linalg.norm(res[:D]))
        if phi_norm <= tol and abs(res[D]) <= tol:
            return PeriodicSolution(u, r, phi_norm, it, u.tail_fraction())
        if it == max_iter:
            break
        S = action_hessian(sys, r, u, a0)
        rows = [S / sqrt_w[:, None], phase.direction[None, :]]
        if pin_translation:
            rows.append(pin_rows)
        jac = np.vstack(rows)
        if basis is not None:
            jac = jac @ basis
        sv = np.linalg.svd(jac, compute_uv=False)
        small = int(np.sum(sv <= 1e-12 * sv[0]))
        if small:
            raise JacobianSingular("periodic Jacobian singular beyond the phase pin", small)
        step, *_ = np.linalg.lstsq(jac, -res, rcond=None)
        if basis is not None:
            step = basis @ step
        lam = 1.0
        while True:
            trial = FourierLoop.from_vector(u.vector + lam * step, n, N)
            try:
                trial_res = residuals(trial)
                break
            except (CollisionError, OutsideDomainError):
                lam *= 0.5
                if lam < 1e-6:
                    raise NoConvergence("Newton steps keep leaving the admissible set")
        u, res = trial, trial_res
        if not np.all(np.isfinite(res)):
            raise NoConvergence("non-finite residual")
    raise NoConvergence(f"periodic Newton did not converge (‖Φ‖ = {phi_norm:.3e})")


def reconstruct(u: FourierLoop, r: float, a0=None):
    """Physical trajectory ``z(t) = â₀ + r u(t / r²)`` as a callable."""
    a = np.tile(_anchor(a0), u.N)

    def z(t):
        return a + r * u(np.asarray(t, dtype=float) / r**2)

    return z


__all__ = [
    "FourierLoop",
    "PhaseCondition",
    "PeriodicSolution",
    "SymmetrySubspace",
    "action",
    "action_hessian",
    "align_phase",
    "kernel_dimension",
    "l_operator",
    "linearized_spectrum",
    "newton_periodic",
    "orbit_distance",
    "phi_gradient",
    "phi_jacobian",
    "project_symmetry",
    "quadratic_form",
    "reconstruct",
]

