"""S¹-equivariant gradient degree for linear and linearizable problems.

An S¹-representation splits into isotypical components ``V_0`` (fixed
vectors) and ``V_k ≅ ℝ²[k]^m`` on which ``θ`` rotates by ``kθ``.  A symmetric
equivariant isomorphism preserves each ``V_k`` and its degree is the vector

    d_0 = sign det L_0,    d_k = ½ · d_0 · μ_k  (k ≥ 1, V_k ≠ 0),

with ``μ_k`` the Morse index of the block ``L_k``.  Degrees of products
combine by ``c_0 = a_0 b_0``, ``c_k = a_k b_0 + a_0 b_k``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .domains import brouwer_index
from .errors import (
    ConfigError,
    DegenerateOrbit,
    InfeasibleProblem,
    SingularBlock,
    TruncationUnstable,
)
from .loopspace import FourierLoop, SymmetrySubspace, action_hessian, synthesis_matrix
from .model import J2, VortexSystem

INVERTIBLE = 1e-10
SYMMETRY_TOL = 1e-12


def standard_structure(dim: int) -> np.ndarray:
    """Complex structure ``kron(I, J)`` on ``ℝ^dim`` (``dim`` even)."""
    if dim % 2:
        raise ConfigError("an ℝ²[k] block must be even-dimensional")
    return np.kron(np.eye(dim // 2), J2)


@dataclass
class IsotypicalBlock:
    k: int
    matrix: np.ndarray
    structure: np.ndarray | None = None

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def morse_index(self) -> int:
        return int(np.sum(np.linalg.eigvalsh(self.matrix) < 0))


class IsotypicalMap:
    """Symmetric S¹-equivariant linear map given block by block.

    ``blocks`` holds ``(k, L_k)`` or ``(k, L_k, structure)``; ``structure``
    is the complex structure generating the rotation on ``V_k`` (default
    ``kron(I, J)``).  Blocks with the same ``k`` are joined as a direct sum.
    """

    def __init__(self, blocks, tol: float = SYMMETRY_TOL):
        merged: dict[int, IsotypicalBlock] = {}
        for entry in blocks:
            k, mat, *rest = entry
            k = int(k)
            if k < 0:
                raise ConfigError("isotypical index must be nonnegative")
            mat = np.atleast_2d(np.asarray(mat, dtype=float))
            if mat.size == 0:
                continue
            if mat.shape[0] != mat.shape[1]:
                raise ConfigError("isotypical blocks must be square")
            struct = None
            if k > 0:
                struct = np.asarray(rest[0], dtype=float) if rest and rest[0] is not None else standard_structure(mat.shape[0])
            _validate(k, mat, struct, tol)
            if k in merged:
                old = merged[k]
                mat = _block_diag(old.matrix, mat)
                struct = None if k == 0 else _block_diag(old.structure, struct)
            merged[k] = IsotypicalBlock(k, mat, struct)
        self.blocks = dict(sorted(merged.items()))

    def __repr__(self) -> str:
        dims = {k: b.dim for k, b in self.blocks.items()}
        return f"IsotypicalMap(dims={dims})"

    def block(self, k: int) -> IsotypicalBlock | None:
        return self.blocks.get(k)

    def direct_sum(self, other: "IsotypicalMap") -> "IsotypicalMap":
        entries = [(b.k, b.matrix, b.structure) for b in self.blocks.values()]
        entries += [(b.k, b.matrix, b.structure) for b in other.blocks.values()]
        return IsotypicalMap(entries)

    def morse_indices(self) -> dict[int, int]:
        return {k: b.morse_index() for k, b in self.blocks.items()}


def _block_diag(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.zeros((a.shape[0] + b.shape[0],) * 2)
    out[: a.shape[0], : a.shape[0]] = a
    out[a.shape[0]:, a.shape[0]:] = b
    return out


def _validate(k, mat, struct, tol):
    scale = max(1.0, float(np.max(np.abs(mat))))
    if np.max(np.abs(mat - mat.T)) > tol * scale:
        raise ConfigError(f"block {k} is not symmetric")
    if k == 0:
        return
    if struct.shape != mat.shape:
        raise ConfigError(f"complex structure of block {k} has the wrong shape")
    n = mat.shape[0]
    if np.max(np.abs(struct @ struct + np.eye(n))) > tol or np.max(np.abs(struct + struct.T)) > tol:
        raise ConfigError(f"structure of block {k} is not an orthogonal complex structure")
    if np.max(np.abs(mat @ struct - struct @ mat)) > tol * scale:
        raise ConfigError(f"block {k} does not commute with the rotation action")
    # near-zero eigenvalues are left to the invertibility check
    if int(np.sum(np.linalg.eigvalsh(mat) < -INVERTIBLE)) % 2:
        raise ConfigError(f"block {k} has an odd Morse index")


class DegreeVector:
    """Finitely supported integer sequence ``(d_k)``, stored sparsely."""

    __slots__ = ("_d",)

    def __init__(self, entries=None):
        d = {}
        for k, v in dict(entries or {}).items():
            k, v = int(k), int(v)
            if k < 0:
                raise ConfigError("degree index must be nonnegative")
            if v:
                d[k] = v
        self._d = dict(sorted(d.items()))

    @classmethod
    def from_sequence(cls, seq) -> "DegreeVector":
        return cls(dict(enumerate(seq)))

    @classmethod
    def unit(cls) -> "DegreeVector":
        return cls({0: 1})

    def __getitem__(self, k: int) -> int:
        return self._d.get(int(k), 0)

    def __eq__(self, other) -> bool:
        return isinstance(other, DegreeVector) and self._d == other._d

    def __hash__(self) -> int:
        return hash(tuple(self._d.items()))

    def __mul__(self, other: "DegreeVector") -> "DegreeVector":
        return multiply_degrees(self, other)

    def __repr__(self) -> str:
        return f"DegreeVector({self._d})"

    @property
    def support(self) -> list[int]:
        return list(self._d)

    def as_sequence(self, length: int | None = None) -> list[int]:
        length = length if length is not None else (max(self._d, default=-1) + 1)
        return [self[k] for k in range(length)]

    def to_dict(self) -> dict[str, int]:
        return {str(k): v for k, v in self._d.items()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, s: str) -> "DegreeVector":
        return cls(json.loads(s))


def linear_degree(L: IsotypicalMap) -> DegreeVector:
    for b in L.blocks.values():
        if np.min(np.abs(np.linalg.eigvalsh(b.matrix))) <= INVERTIBLE:
            raise SingularBlock(f"block {b.k} is not invertible")
    base = L.block(0)
    d0 = 1 if base is None else int(np.sign(np.prod(np.sign(np.linalg.eigvalsh(base.matrix)))))
    out = {0: d0}
    for k, b in L.blocks.items():
        if k > 0:
            out[k] = d0 * b.morse_index() // 2
    return DegreeVector(out)


def multiply_degrees(a: DegreeVector, b: DegreeVector) -> DegreeVector:
    out = {0: a[0] * b[0]}
    for k in set(a.support) | set(b.support):
        if k > 0:
            out[k] = a[k] * b[0] + a[0] * b[k]
    return DegreeVector(out)


# -- orbits -------------------------------------------------------------------------

def orbit_degree_magnitude(jacobian_on_normal_slice, isotropy_k: int = 1) -> int:
    """``|d_k|`` of a non-degenerate orbit with isotropy ``ℤ_k``: always 1."""
    if int(isotropy_k) < 1:
        raise ConfigError("isotropy order must be a positive integer")
    jac = np.atleast_2d(np.asarray(jacobian_on_normal_slice, dtype=float))
    if jac.size and np.min(np.linalg.svd(jac, compute_uv=False)) <= INVERTIBLE:
        raise DegenerateOrbit("Jacobian on the normal slice is singular")
    return 1


def isotropy_order(u: FourierLoop, tol: float = 1e-12) -> int:
    """Order of the isotropy group of ``u``: gcd of the active modes."""
    norms = np.linalg.norm(u.coefficients.reshape(2 * u.n + 1, -1), axis=1)
    active = [abs(int(k)) for k, v in zip(u.modes, norms) if v > tol * max(1.0, norms.max()) and k != 0]
    if not active:
        raise ConfigError("a constant loop is fixed by the whole circle")
    return math.gcd(*active)


def normal_slice_jacobian(sys: VortexSystem, Z: FourierLoop, space: SymmetrySubspace | None = None) -> np.ndarray:
    """Linearization of ``Φ_0`` at ``Z`` on ``(D ⊕ ℝŻ)^⊥`` in ``X``-orthonormal coordinates."""
    plane = VortexSystem(sys.strengths, collision_eps=sys.collision_eps)
    root_w = np.sqrt(Z.weights())
    sym = action_hessian(plane, 0.0, Z) / np.outer(root_w, root_w)
    basis = np.eye(sym.shape[0]) if space is None else space.basis
    forced = [Z.derivative().vector]
    for e in np.eye(2):
        forced.append(FourierLoop.constant(np.tile(e, Z.N), Z.n).vector)
    # forced directions in orthonormal coordinates, restricted to the space
    F = basis.T @ (root_w[:, None] * np.column_stack(forced))
    q, s, _ = np.linalg.svd(F, full_matrices=True)
    rank = int(np.sum(s > 1e-10 * s[0]))
    complement = basis @ q[:, rank:]
    return complement.T @ sym @ complement


def degree_certificate(
    sys: VortexSystem,
    a0,
    Z: FourierLoop,
    eps: float = 0.1,
    space: SymmetrySubspace | None = None,
) -> int:
    """Degree certificate ``|d_k(Φ_0 on D^⊥)| · deg(∇h, B_ε(a0))``.

    A nonzero value guarantees a continuum of periodic orbits emanating
    from ``(a0, Z)`` as ``r`` leaves 0.
    """
    if sys.domain.is_plane:
        raise InfeasibleProblem("the plane has no Robin function to anchor at")
    if abs(sys.total_vorticity()) < 1e-12:
        raise InfeasibleProblem("total vorticity vanishes")
    magnitude = orbit_degree_magnitude(normal_slice_jacobian(sys, Z, space), isotropy_order(Z))
    return magnitude * brouwer_index(sys.domain, a0, eps)


proposition_5_1_product = degree_certificate  # interface name kept for callers


# -- Galerkin degree of a linearizable problem ---------------------------------------

def isotypical_map(sym: np.ndarray, n: int, N: int, tol: float = 1e-9) -> IsotypicalMap:
    """Split an ``X``-symmetric matrix on truncated loops into ``V_0, V_1, …``.

    ``V_k`` (``k ≥ 1``) collects modes ``±k``; the circle acts on mode ``k`` by
    ``e^{-kJθ}`` and on mode ``-k`` by ``e^{kJθ}``, so its structure is
    ``diag(-J_N, J_N)``.
    """
    dim = 2 * N
    idx = {k: np.arange((k + n) * dim, (k + n + 1) * dim) for k in range(-n, n + 1)}
    groups = {0: idx[0]}
    for k in range(1, n + 1):
        groups[k] = np.concatenate([idx[k], idx[-k]])
    scale = max(1.0, float(np.max(np.abs(sym))))
    for k, rows in groups.items():
        rest = np.setdiff1d(np.arange(sym.shape[0]), rows)
        if rest.size and np.max(np.abs(sym[np.ix_(rows, rest)])) > tol * scale:
            raise ConfigError("matrix is not S¹-equivariant: modes of different order couple")
    JN = np.kron(np.eye(N), J2)
    blocks = [(0, sym[np.ix_(groups[0], groups[0])])]
    structure = _block_diag(-JN, JN)
    for k in range(1, n + 1):
        b = sym[np.ix_(groups[k], groups[k])]
        blocks.append((k, 0.5 * (b + b.T), structure))
    return IsotypicalMap(blocks, tol=tol)


def truncated_linearization(strengths, hessian, n: int) -> IsotypicalMap:
    """``L - P_n (id-Δ)⁻¹ K`` on ``X_n`` for a constant symmetric ``K``."""
    gamma = np.asarray(strengths, dtype=float)
    N = gamma.size
    K = np.asarray(hessian, dtype=float)
    if K.shape != (2 * N, 2 * N):
        raise ConfigError("Hessian must be (2N, 2N)")
    m = 4 * n + 4
    E = synthesis_matrix(n, N, m)
    kron_K = np.kron(np.eye(m), K)
    S = -(2.0 * math.pi / m) * (E.T @ kron_K @ E)
    modes = np.arange(-n, n + 1, dtype=float)
    S[np.diag_indices_from(S)] += -2.0 * math.pi * np.repeat(modes, 2 * N) * np.tile(np.repeat(gamma, 2), 2 * n + 1)
    w = np.repeat(2.0 * math.pi * (1.0 + modes**2), 2 * N)
    sym = S / np.sqrt(np.outer(w, w))
    return isotypical_map(0.5 * (sym + sym.T), n, N)


def galerkin_degree(strengths, hessian, n: int = 8) -> DegreeVector:
    """Stabilized degree of ``Φ(u) = Lu - (id-Δ)⁻¹ K u`` on a small ball.

    ``d_k = d_k(T_n) - d_0 · d_k(L + P_0, X_n)`` with ``d_k(L + P_0) = N``,
    required to agree at truncations ``n`` and ``2n``.
    """
    N = len(strengths)

    def corrected(m):
        raw = linear_degree(truncated_linearization(strengths, hessian, m))
        out = {0: raw[0]}
        for k in range(1, m + 1):
            out[k] = raw[k] - raw[0] * N
        return DegreeVector(out)

    low, high = corrected(n), corrected(2 * n)
    if low != high:
        raise TruncationUnstable(f"degree changes between n={n} and n={2 * n}: {low} vs {high}")
    return low


__all__ = [
    "DegreeVector",
    "IsotypicalBlock",
    "IsotypicalMap",
    "degree_certificate",
    "galerkin_degree",
    "isotropy_order",
    "isotypical_map",
    "linear_degree",
    "multiply_degrees",
    "normal_slice_jacobian",
    "orbit_degree_magnitude",
    "proposition_5_1_product",
    "standard_structure",
    "truncated_linearization",
]
