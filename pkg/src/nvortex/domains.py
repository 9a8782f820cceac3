"""Planar domains with explicit Green's-function regular parts.

The regular part ``g`` is normalized so that the Dirichlet Green's function
of ``-Δ`` reads ``G(x, y) = -log|x - y| / 2π - g(x, y)``.  With this sign the
Robin function ``h(a) = g(a, a)`` tends to ``+∞`` at the boundary of a
bounded domain.

All evaluators broadcast over leading axes: ``x`` and ``y`` have shape
``(..., 2)``; ``g`` returns ``(...)``, ``gx`` returns ``(..., 2)`` and the
second-derivative blocks return ``(..., 2, 2)``.  ``gxy[..., i, j]`` is
``∂²g / ∂x_i ∂y_j``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .errors import (
    AmbiguousWinding,
    ConfigError,
    InfeasibleProblem,
    OutsideDomainError,
    ZeroOnContour,
)

TWO_PI = 2.0 * math.pi
_I2 = np.eye(2)


def _pair_kernel(d: np.ndarray) -> np.ndarray:
    """Hessian of ``log|d|``: ``(|d|² I - 2 d dᵀ) / |d|⁴``."""
    r2 = np.einsum("...i,...i->...", d, d)[..., None, None]
    return (r2 * _I2 - 2.0 * d[..., :, None] * d[..., None, :]) / r2**2


class DomainModel:
    """Base class; concrete domains override the ``g*`` evaluators."""

    kind = "abstract"

    def params(self) -> dict[str, Any]:
        return {}

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, **self.params()}

    @property
    def is_plane(self) -> bool:
        return False

    # geometry -------------------------------------------------------------
    def boundary_distance(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def contains(self, x: np.ndarray) -> np.ndarray:
        return self.boundary_distance(x) > 0.0

    @property
    def inradius(self) -> float:
        raise NotImplementedError

    # regular part ---------------------------------------------------------
    def g(self, x, y):
        raise NotImplementedError

    def gx(self, x, y):
        raise NotImplementedError

    def gxx(self, x, y):
        raise NotImplementedError

    def gxy(self, x, y):
        raise NotImplementedError

    def _require_inside(self, a: np.ndarray) -> None:
        if not np.all(self.contains(a)):
            raise OutsideDomainError(f"point(s) outside {self.kind}: {np.asarray(a).tolist()}")

    # Robin function h(a) = g(a, a) ----------------------------------------
    def robin(self, a) -> float:
        a = np.asarray(a, dtype=float)
        self._require_inside(a)
        return self.g(a, a)

    def robin_gradient(self, a) -> np.ndarray:
        a = np.asarray(a, dtype=float)
        self._require_inside(a)
        return 2.0 * self.gx(a, a)

    def robin_hessian(self, a) -> np.ndarray:
        a = np.asarray(a, dtype=float)
        self._require_inside(a)
        gxy = self.gxy(a, a)
        return 2.0 * self.gxx(a, a) + gxy + np.swapaxes(gxy, -1, -2)


class Plane(DomainModel):
    kind = "plane"

    @property
    def is_plane(self) -> bool:
        return True

    def boundary_distance(self, x):
        x = np.asarray(x, dtype=float)
        return np.full(x.shape[:-1], np.inf)

    @property
    def inradius(self) -> float:
        return math.inf

    def g(self, x, y):
        return np.zeros(np.broadcast_shapes(np.shape(x), np.shape(y))[:-1])

    def gx(self, x, y):
        return np.zeros(np.broadcast_shapes(np.shape(x), np.shape(y)))

    def gxx(self, x, y):
        return np.zeros(np.broadcast_shapes(np.shape(x), np.shape(y)) + (2,))

    gxy = gxx


class UnitDisc(DomainModel):
    """Unit disc, regular part built from the image point ``y / |y|²``.

    ``g(x, y) = -log(1 - 2 x·y + |x|²|y|²) / 4π`` and
    ``h(a) = -log(1 - |a|²) / 2π``.
    """

    kind = "unit_disc"

    def boundary_distance(self, x):
        return 1.0 - np.linalg.norm(np.asarray(x, dtype=float), axis=-1)

    @property
    def inradius(self) -> float:
        return 1.0

    @staticmethod
    def _q(x, y):
        xy = np.einsum("...i,...i->...", x, y)
        xx = np.einsum("...i,...i->...", x, x)
        yy = np.einsum("...i,...i->...", y, y)
        return 1.0 - 2.0 * xy + xx * yy, xx, yy

    def g(self, x, y):
        x, y = np.asarray(x, float), np.asarray(y, float)
        q, _, _ = self._q(x, y)
        return -np.log(q) / (2.0 * TWO_PI)

    def gx(self, x, y):
        x, y = np.asarray(x, float), np.asarray(y, float)
        q, _, yy = self._q(x, y)
        dq = -2.0 * y + 2.0 * yy[..., None] * x
        return -dq / q[..., None] / (2.0 * TWO_PI)

    def gxx(self, x, y):
        x, y = np.asarray(x, float), np.asarray(y, float)
        q, _, yy = self._q(x, y)
        dq = -2.0 * y + 2.0 * yy[..., None] * x
        q = q[..., None, None]
        d2q = 2.0 * yy[..., None, None] * _I2
        return -(d2q / q - dq[..., :, None] * dq[..., None, :] / q**2) / (2.0 * TWO_PI)

    def gxy(self, x, y):
        x, y = np.asarray(x, float), np.asarray(y, float)
        q, xx, yy = self._q(x, y)
        dqx = -2.0 * y + 2.0 * yy[..., None] * x
        dqy = -2.0 * x + 2.0 * xx[..., None] * y
        q = q[..., None, None]
        dxy = -2.0 * _I2 + 4.0 * x[..., :, None] * y[..., None, :]
        return -(dxy / q - dqx[..., :, None] * dqy[..., None, :] / q**2) / (2.0 * TWO_PI)


class HalfPlane(DomainModel):
    """Upper half plane ``{y > 0}``; image point is the mirror ``(y₁, -y₂)``."""

    kind = "half_plane"
    _R = np.diag([-1.0, 1.0])

    def boundary_distance(self, x):
        return np.asarray(x, dtype=float)[..., 1]

    @property
    def inradius(self) -> float:
        return math.inf

    @staticmethod
    def _d(x, y):
        x, y = np.asarray(x, float), np.asarray(y, float)
        return x - y * np.array([1.0, -1.0])

    def g(self, x, y):
        d = self._d(x, y)
        return -np.log(np.linalg.norm(d, axis=-1)) / TWO_PI

    def gx(self, x, y):
        d = self._d(x, y)
        return -d / np.einsum("...i,...i->...", d, d)[..., None] / TWO_PI

    def gxx(self, x, y):
        return -_pair_kernel(self._d(x, y)) / TWO_PI

    def gxy(self, x, y):
        return -_pair_kernel(self._d(x, y)) @ self._R / TWO_PI


@dataclass(frozen=True)
class Annulus(DomainModel):
    """Annulus ``rho < |x| < 1`` (experimental).

    The regular part comes from the annulus prime function
    ``P(ζ) = (1 - ζ) Π (1 - q^n ζ)(1 - q^n / ζ)``, ``q = rho²``, truncated
    after ``terms`` factors.  Derivatives are central differences.
    """

    rho: float = 0.5
    terms: int = 40
    fd_step: float = 1e-5
    kind: str = field(default="annulus", init=False)

    def __post_init__(self):
        if not 0.0 < self.rho < 1.0:
            raise ConfigError("annulus inner radius must lie in (0, 1)")

    def params(self):
        return {"rho": self.rho}

    def boundary_distance(self, x):
        r = np.linalg.norm(np.asarray(x, dtype=float), axis=-1)
        return np.minimum(r - self.rho, 1.0 - r)

    @property
    def inradius(self) -> float:
        return 0.5 * (1.0 - self.rho)

    def _log_abs_prime(self, zeta):
        q = self.rho**2
        out = np.log(np.abs(1.0 - zeta))
        for n in range(1, self.terms + 1):
            qn = q**n
            out = out + np.log(np.abs(1.0 - qn * zeta)) + np.log(np.abs(1.0 - qn / zeta))
        return out

    def g(self, x, y):
        x, y = np.asarray(x, float), np.asarray(y, float)
        z = x[..., 0] + 1j * x[..., 1]
        w = y[..., 0] + 1j * y[..., 1]
        lw = np.log(np.abs(w))
        green = -(
            self._log_abs_prime(z / w)
            - self._log_abs_prime(z * np.conj(w))
            + lw
            - lw * np.log(np.abs(z)) / math.log(self.rho)
        ) / TWO_PI
        return -np.log(np.abs(z - w)) / TWO_PI - green

    def _shift(self, v, i, s):
        e = np.zeros(2)
        e[i] = s
        return v + e

    def gx(self, x, y):
        x, y = np.asarray(x, float), np.asarray(y, float)
        h = self.fd_step
        cols = [(self.g(self._shift(x, i, h), y) - self.g(self._shift(x, i, -h), y)) / (2 * h)
                for i in range(2)]
        return np.stack(cols, axis=-1)

    def gxx(self, x, y):
        x, y = np.asarray(x, float), np.asarray(y, float)
        h = self.fd_step
        cols = [(self.gx(self._shift(x, j, h), y) - self.gx(self._shift(x, j, -h), y)) / (2 * h)
                for j in range(2)]
        return np.stack(cols, axis=-1)

    def gxy(self, x, y):
        x, y = np.asarray(x, float), np.asarray(y, float)
        h = self.fd_step
        cols = [(self.gx(x, self._shift(y, j, h)) - self.gx(x, self._shift(y, j, -h))) / (2 * h)
                for j in range(2)]
        return np.stack(cols, axis=-1)


def make_domain(kind: str = "plane", *, experimental: bool = False, **params) -> DomainModel:
    """Build a domain by name; the annulus needs ``experimental=True``."""
    if kind in ("plane", "whole_plane"):
        return Plane()
    if kind in ("unit_disc", "disc"):
        return UnitDisc()
    if kind == "half_plane":
        return HalfPlane()
    if kind == "annulus":
        if not experimental:
            raise ConfigError("annulus domain is experimental; enable it explicitly")
        return Annulus(rho=float(params.get("rho", 0.5)))
    raise ConfigError(f"unknown domain kind {kind!r}")


# -- critical points of the Robin function ---------------------------------

@dataclass
class CriticalPointReport:
    location: np.ndarray
    gradient_norm: float
    hessian: np.ndarray
    brouwer_index: int
    stable: bool
    nondegenerate: bool

    def to_dict(self) -> dict[str, Any]:
        return {
            "location": self.location.tolist(),
            "gradient_norm": self.gradient_norm,
            "hessian": self.hessian.tolist(),
            "brouwer_index": self.brouwer_index,
            "stable": self.stable,
            "nondegenerate": self.nondegenerate,
        }


def winding_number(field, center, radius: float, samples: int = 512) -> int:
    """Winding number of a planar vector field around a circle.

    Angle increments of ``field`` are accumulated over ``samples`` points
    (at least 256); the total is rounded and rejected when it is more than
    0.1 away from an integer.
    """
    samples = max(int(samples), 256)
    center = np.asarray(center, dtype=float)
    t = np.linspace(0.0, TWO_PI, samples, endpoint=False)
    pts = center + radius * np.stack([np.cos(t), np.sin(t)], axis=-1)
    vals = np.array([np.asarray(field(p), dtype=float) for p in pts])
    norms = np.linalg.norm(vals, axis=1)
    if np.min(norms) <= 1e-14 * max(1.0, float(np.max(norms))):
        raise ZeroOnContour("vector field vanishes on the contour")
    ang = np.arctan2(vals[:, 1], vals[:, 0])
    steps = np.diff(np.append(ang, ang[0]))
    steps = (steps + math.pi) % TWO_PI - math.pi
    total = steps.sum() / TWO_PI
    k = int(round(total))
    if abs(total - k) > 0.1:
        raise AmbiguousWinding(f"winding {total:.3f} not close to an integer")
    return k


def brouwer_index(dom: DomainModel, a0, eps: float = 0.1, samples: int = 512) -> int:
    """Index of the zero ``a0`` of ``∇h``: winding of ``∇h`` on ``|a - a0| = eps``."""
    a0 = np.asarray(a0, dtype=float)
    if dom.is_plane:
        raise InfeasibleProblem("Robin function of the plane vanishes identically")
    if float(dom.boundary_distance(a0)) <= eps:
        raise OutsideDomainError("index circle leaves the domain")
    return winding_number(dom.robin_gradient, a0, eps, samples)


def find_critical_points(
    dom: DomainModel,
    search_box=((-0.9, 0.9), (-0.9, 0.9)),
    grid_n: int = 7,
    tol: float = 1e-10,
    max_iter: int = 50,
    index_eps: float | None = None,
) -> list[CriticalPointReport]:
    """Newton on ``∇h`` from a grid of seeds; deduplicated, classified roots.

    Roots must land within the search box padded by 10% per side.
    """
    if dom.is_plane:
        return []
    (x0, x1), (y0, y1) = search_box
    seeds = [np.array([x, y]) for x in np.linspace(x0, x1, grid_n) for y in np.linspace(y0, y1, grid_n)]
    pad_x, pad_y = 0.1 * (x1 - x0), 0.1 * (y1 - y0)
    roots: list[np.ndarray] = []
    for a in seeds:
        if not dom.contains(a):
            continue
        for _ in range(max_iter):
            grad = dom.robin_gradient(a)
            if np.linalg.norm(grad) <= tol:
                break
            hess = dom.robin_hessian(a)
            step, *_ = np.linalg.lstsq(hess, -grad, rcond=1e-12)
            a_new = a + step
            shrink = 0
            while not dom.contains(a_new) and shrink < 30:
                step *= 0.5
                a_new = a + step
                shrink += 1
            if not dom.contains(a_new):
                break
            a = a_new
        else:
            continue
        # |∇h| can decay at infinity (half-plane); such escapes are not roots
        inside_box = x0 - pad_x <= a[0] <= x1 + pad_x and y0 - pad_y <= a[1] <= y1 + pad_y
        if inside_box and dom.contains(a) and np.linalg.norm(dom.robin_gradient(a)) <= tol:
            if all(np.linalg.norm(a - b) > 1e-6 for b in roots):
                roots.append(a)

    reports = []
    for a in roots:
        hess = dom.robin_hessian(a)
        nondeg = abs(np.linalg.det(hess)) > 1e-10 * max(1.0, np.linalg.norm(hess) ** 2)
        # the circle must stay inside Ω and away from other roots
        others = [np.linalg.norm(a - b) for b in roots if b is not a]
        eps = index_eps or 0.25 * min([float(dom.boundary_distance(a))] + others)
        idx = brouwer_index(dom, a, eps)
        reports.append(
            CriticalPointReport(
                location=a,
                gradient_norm=float(np.linalg.norm(dom.robin_gradient(a))),
                hessian=hess,
                brouwer_index=idx,
                stable=idx != 0,
                nondegenerate=bool(nondeg),
            )
        )
    return reports
