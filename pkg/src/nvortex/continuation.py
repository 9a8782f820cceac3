"""Tracing the branch of scaled periodic solutions ``(r, u)`` in ``r``.

A branch starts near the singular limit ``r → 0`` from the loop ``Z`` of a
relative equilibrium (normalized to ``|ω| = 1``) anchored at a critical point
``a0`` of the Robin function, and is continued by a secant predictor and the
periodic Newton corrector.  Pseudo-arclength continuation is available for
passing folds.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .dynamics import IntegratorConfig, integrate
from .equilibria import RelativeEquilibrium
from .errors import (
    ConfigError,
    InfeasibleProblem,
    JacobianSingular,
    NoConvergence,
    NotApplicable,
    NumericalFailure,
    SeedRejected,
)
from .loopspace import (
    TWO_PI,
    FourierLoop,
    PhaseCondition,
    SymmetrySubspace,
    action_hessian,
    align_phase,
    check_loop,
    kernel_dimension,
    newton_periodic,
    orbit_distance,
    phi_gradient,
)
from .model import VortexSystem, _anchor

REACHED_TARGET = "ReachedTarget"
UNBOUNDED = "Unbounded"
BOUNDARY_APPROACH = "BoundaryApproach"
SINGULAR_LIMIT_ANOMALY = "SingularLimitAnomaly"
SOLVER_FAILURE = "SolverFailure"

# r|P_D u| below this is roundoff, not a translation
NOISE_FLOOR = 1e-12


@dataclass(frozen=True)
class StepConfig:
    step: float = 1e-2
    min_step: float = 1e-6
    max_step: float = 0.1
    max_points: int = 200
    max_halvings: int = 8
    growth: float = 1.0
    pseudo_arclength: bool = False
    # termination thresholds
    boundary_factor: float = 1e-3
    r_cap: float = 1e3
    norm_cap: float = 1e3
    locality: float = 0.5

    def __post_init__(self):
        if min(self.step, self.min_step, self.max_step, self.boundary_factor, self.locality) <= 0:
            raise ConfigError("continuation step sizes and thresholds must be positive")
        if self.growth < 1.0:
            raise ConfigError("step growth factor must be at least 1")


@dataclass
class BranchPoint:
    r: float
    u: FourierLoop
    residual: float
    min_pair_distance: float
    boundary_distance: float
    translation_size: float  # r ‖P_D u‖_X
    orbit_distance: float  # dist(u - P_D u, S¹*Z) in X
    iterations: int = 0
    fold: bool = False

    @property
    def margin(self) -> float:
        return min(self.min_pair_distance, self.boundary_distance)

    def to_dict(self) -> dict:
        return {
            "r": self.r,
            "residual": self.residual,
            "min_pair_distance": self.min_pair_distance,
            "boundary_distance": _finite(self.boundary_distance),
            "translation_size": self.translation_size,
            "orbit_distance": self.orbit_distance,
            "iterations": self.iterations,
            "fold": self.fold,
            "loop": self.u.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BranchPoint":
        bd = d["boundary_distance"]
        return cls(
            r=d["r"],
            u=FourierLoop.from_dict(d["loop"]),
            residual=d["residual"],
            min_pair_distance=d["min_pair_distance"],
            boundary_distance=math.inf if bd is None else bd,
            translation_size=d["translation_size"],
            orbit_distance=d["orbit_distance"],
            iterations=d.get("iterations", 0),
            fold=d.get("fold", False),
        )


def _finite(x: float):
    return x if math.isfinite(x) else None


@dataclass
class Termination:
    kind: str
    detail: str = ""

    def to_dict(self) -> dict:
        return {"kind": self.kind, "detail": self.detail}


@dataclass
class Branch:
    sys: VortexSystem
    a0: np.ndarray
    reference: FourierLoop
    points: list[BranchPoint] = field(default_factory=list)
    termination: Termination | None = None
    space: SymmetrySubspace | None = None

    def __len__(self) -> int:
        return len(self.points)

    @property
    def radii(self) -> np.ndarray:
        return np.array([p.r for p in self.points])

    def to_jsonl(self, path) -> None:
        with open(path, "w") as fh:
            for p in self.points:
                fh.write(json.dumps(p.to_dict()) + "\n")

    def to_csv(self, path) -> None:
        cols = ["r", "residual", "min_pair_distance", "boundary_distance",
                "translation_size", "orbit_distance", "iterations", "fold"]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(cols)
            for p in self.points:
                row = p.to_dict()
                w.writerow([_csv_value(row[c]) for c in cols])

    def summary(self) -> dict:
        return {
            "points": len(self.points),
            "r_min": float(self.radii.min()) if self.points else None,
            "r_max": float(self.radii.max()) if self.points else None,
            "termination": self.termination.to_dict() if self.termination else None,
        }


def _csv_value(v):
    if v is None:
        return "inf"
    if isinstance(v, float):
        return repr(v)
    return str(v)


# -- seeding ---------------------------------------------------------------------

def reference_loop(Z, n: int = 32) -> FourierLoop:
    """``Z`` as a ``2π``-periodic loop, from a relative equilibrium or a loop."""
    if isinstance(Z, FourierLoop):
        return Z
    if isinstance(Z, RelativeEquilibrium):
        return FourierLoop.relative_equilibrium(Z, n)
    raise ConfigError("Z must be a RelativeEquilibrium or a FourierLoop")


def default_start(sys: VortexSystem, Z: FourierLoop) -> float:
    """``10⁻²`` × inradius / configuration diameter."""
    pts = Z.nodes().reshape(-1, 2)
    diam = float(np.max(np.linalg.norm(pts[:, None] - pts[None], axis=-1)))
    inr = sys.domain.inradius
    if not math.isfinite(inr):
        inr = 1.0
    return 1e-2 * inr / max(diam, 1e-12)


def diagnose(sys, r, u, Z, a0=None, residual=0.0, iterations=0) -> BranchPoint:
    pts = u.nodes()
    phys = _anchor(a0) + r * pts
    n = sys.N
    if n > 1:
        d = np.linalg.norm(phys[:, :, None] - phys[:, None, :], axis=-1)
        pair = float(np.min(d[:, ~np.eye(n, dtype=bool)]))
    else:
        pair = math.inf
    bdist = math.inf if sys.domain.is_plane else float(np.min(sys.domain.boundary_distance(phys.reshape(-1, 2))))
    trans = u.project_translation()
    return BranchPoint(
        r=float(r),
        u=u,
        residual=float(residual),
        min_pair_distance=pair,
        boundary_distance=bdist,
        translation_size=r * trans.x_norm(),
        orbit_distance=orbit_distance(u - trans, Z.resize(u.n)),
        iterations=iterations,
    )


def seed_branch(
    sys: VortexSystem,
    a0,
    Z,
    r_start: float | None = None,
    *,
    n: int = 32,
    space: SymmetrySubspace | None = None,
    locality: float = 0.5,
) -> BranchPoint:
    """First branch point: Newton from ``u = Z`` at ``r_start``.

    Rejected when the total vorticity vanishes, when ``Z`` is degenerate
    (kernel of the linearization at ``r = 0`` larger than the three forced
    directions, or one inside ``X^γ``), when Newton fails, or when the
    corrected loop is farther than ``locality · ‖Z‖_X`` from ``S¹*Z``.
    """
    Z = reference_loop(Z, n)
    if abs(sys.total_vorticity()) < 1e-12:
        raise SeedRejected("total vorticity vanishes")
    plane = VortexSystem(sys.strengths, collision_eps=sys.collision_eps)
    kernel = kernel_dimension(plane, Z, space)
    expected = 3 if space is None else _forced_in_space(space, Z)
    if kernel != expected:
        raise SeedRejected(f"Z is degenerate (kernel dimension {kernel}, expected {expected})")
    r = default_start(sys, Z) if r_start is None else float(r_start)
    if r <= 0:
        raise ConfigError("r_start must be positive")
    try:
        sol = newton_periodic(sys, r, Z, phase=PhaseCondition(Z), space=space, a0=a0)
    except (NumericalFailure, InfeasibleProblem) as exc:
        raise SeedRejected(f"Newton from Z failed at r={r:g}: {exc}") from exc
    dist = orbit_distance(sol.loop, Z)
    if dist > locality * Z.x_norm():
        raise SeedRejected(f"corrected loop left the neighborhood of S¹*Z (distance {dist:.3g})")
    return diagnose(sys, r, sol.loop, Z, a0, sol.residual, sol.iterations)


def _forced_in_space(space: SymmetrySubspace, Z: FourierLoop) -> int:
    """Forced kernel directions fixed by ``γ``: phase plus invariant translations."""
    probes = [Z.derivative()]
    for e in np.eye(2):
        probes.append(FourierLoop.constant(np.tile(e, Z.N), Z.n))
    proj = np.column_stack([space.project(p).vector for p in probes])
    return int(np.linalg.matrix_rank(proj, tol=1e-10))


# -- continuation ------------------------------------------------------------------

def continue_branch(
    seed: BranchPoint,
    sys: VortexSystem,
    r_target: float,
    step_cfg: StepConfig | None = None,
    *,
    a0=None,
    Z=None,
    space: SymmetrySubspace | None = None,
) -> Branch:
    """Continue ``seed`` toward ``r_target`` and classify how the trace ends.

    ``Z`` defaults to the seed loop itself; it is only used for the orbit
    distance diagnostic and the singular-limit classifier.
    """
    cfg = step_cfg or StepConfig()
    ref = reference_loop(Z, seed.u.n) if Z is not None else seed.u
    branch = Branch(sys, _anchor(a0), ref, [seed], space=space)
    if r_target == seed.r:
        branch.termination = Termination(REACHED_TARGET)
        return branch
    if cfg.pseudo_arclength:
        return _arclength(branch, r_target, cfg)
    return _natural(branch, r_target, cfg)


def _natural(branch: Branch, r_target: float, cfg: StepConfig) -> Branch:
    sys, a0, ref = branch.sys, branch.a0, branch.reference
    direction = 1.0 if r_target > branch.points[0].r else -1.0
    h = cfg.step
    while len(branch.points) < cfg.max_points:
        cur = branch.points[-1]
        halvings = 0
        while True:
            r_new = cur.r + direction * h
            # snap so accumulated roundoff cannot leave a sliver step at the end
            if direction * (r_new - r_target) > -1e-9 * h:
                r_new = r_target
            guess = _secant(branch.points, r_new)
            try:
                check_loop(sys, r_new, guess.nodes(), a0)
                sol = newton_periodic(sys, r_new, guess, phase=PhaseCondition(cur.u),
                                      space=branch.space, a0=a0)
                break
            except (NumericalFailure, InfeasibleProblem) as exc:
                halvings += 1
                h *= 0.5
                if halvings > cfg.max_halvings or h < cfg.min_step:
                    branch.termination = Termination(SOLVER_FAILURE, f"r={r_new:.6g}: {exc}")
                    return branch
        point = diagnose(sys, r_new, sol.loop, ref, a0, sol.residual, sol.iterations)
        branch.points.append(point)
        verdict = _classify(branch, point, direction, cfg)
        if verdict is not None:
            branch.termination = verdict
            return branch
        if r_new == r_target:
            branch.termination = Termination(REACHED_TARGET)
            return branch
        if halvings == 0:
            h = min(h * cfg.growth, cfg.max_step)
    branch.termination = Termination(SOLVER_FAILURE, "maximal number of points reached")
    return branch


def _secant(points: list[BranchPoint], r_new: float) -> FourierLoop:
    cur = points[-1]
    if len(points) < 2:
        return cur.u
    prev = points[-2]
    _, prev_u = align_phase(prev.u, cur.u)
    t = (r_new - cur.r) / (cur.r - prev.r)
    return cur.u + (cur.u - prev_u) * t


def _classify(branch: Branch, point: BranchPoint, direction: float, cfg: StepConfig):
    sys = branch.sys
    inr = sys.domain.inradius
    scale = inr if math.isfinite(inr) else 1.0
    if point.margin < cfg.boundary_factor * scale:
        return Termination(BOUNDARY_APPROACH, f"margin {point.margin:.3g} at r={point.r:.6g}")
    if point.r > cfg.r_cap or point.u.x_norm() > cfg.norm_cap:
        return Termination(UNBOUNDED, f"r={point.r:.6g}, |u|={point.u.x_norm():.3g}")
    if direction < 0:
        limit = cfg.locality * branch.reference.x_norm()
        if point.orbit_distance > limit or point.translation_size > limit:
            return Termination(
                SINGULAR_LIMIT_ANOMALY,
                f"no decay toward S¹*Z at r={point.r:.6g} "
                f"(distance {point.orbit_distance:.3g}, r|P_D u| {point.translation_size:.3g})",
            )
    return None


# -- pseudo-arclength --------------------------------------------------------------

def _phi_dr(sys, r, u, a0, h=1e-6):
    """Central difference of ``Φ_r(u)`` in ``r`` (one-sided near ``r = 0``)."""
    step = h * max(1.0, r)
    if r - step <= 0:
        return (phi_gradient(sys, r + step, u, a0).vector - phi_gradient(sys, r, u, a0).vector) / step
    up = phi_gradient(sys, r + step, u, a0).vector
    down = phi_gradient(sys, r - step, u, a0).vector
    return (up - down) / (2 * step)


def _arclength_correct(branch, x_pred, tangent, phase, tol=1e-10, max_iter=30):
    sys, a0 = branch.sys, branch.a0
    ref = branch.points[-1].u
    n, N = ref.n, ref.N
    D = ref.vector.size
    sqrt_w = np.sqrt(ref.weights())
    wt = np.append(ref.weights() * tangent[:D], tangent[D])
    pin = sys.domain.is_plane
    x = x_pred.copy()

    def unpack(x):
        return FourierLoop.from_vector(x[:D], n, N), float(x[D])

    for it in range(max_iter + 1):
        u, r = unpack(x)
        if r <= 0:
            raise NoConvergence("arclength corrector reached r <= 0")
        phi = phi_gradient(sys, r, u, a0).vector
        res = [sqrt_w * phi, [phase(u)], [wt @ (x - x_pred)]]
        if pin:
            res.append(u.translation_part() - ref.translation_part())
        res = np.concatenate(res)
        if np.linalg.norm(sqrt_w * phi) <= tol and abs(res[D]) <= tol:
            return u, r, float(np.linalg.norm(sqrt_w * phi)), it
        if it == max_iter:
            break
        S = action_hessian(sys, r, u, a0)
        top = np.hstack([S / sqrt_w[:, None], (sqrt_w * _phi_dr(sys, r, u, a0))[:, None]])
        rows = [top, np.append(phase.direction, 0.0)[None, :], wt[None, :]]
        if pin:
            p = np.zeros((2, D + 1))
            for j in range(N):
                p[0, (n * N + j) * 2] = p[1, (n * N + j) * 2 + 1] = 1.0 / N
            rows.append(p)
        jac = np.vstack(rows)
        sv = np.linalg.svd(jac, compute_uv=False)
        small = int(np.sum(sv <= 1e-12 * sv[0]))
        if small:
            raise JacobianSingular("arclength Jacobian singular", small)
        step, *_ = np.linalg.lstsq(jac, -res, rcond=None)
        x = x + step
    raise NoConvergence("arclength corrector did not converge")


def _arclength(branch: Branch, r_target: float, cfg: StepConfig) -> Branch:
    sys, a0, ref = branch.sys, branch.a0, branch.reference
    direction = 1.0 if r_target > branch.points[0].r else -1.0
    # one natural step provides the first secant
    first = _natural(branch, branch.points[0].r + direction * cfg.step,
                     replace(cfg, max_points=2, pseudo_arclength=False))
    if first.termination.kind != REACHED_TARGET:
        return first
    first.termination = None
    weights = branch.points[0].u.weights()
    ds = cfg.step
    while len(branch.points) < cfg.max_points:
        cur, prev = branch.points[-1], branch.points[-2]
        _, prev_u = align_phase(prev.u, cur.u)
        diff = np.append(cur.u.vector - prev_u.vector, cur.r - prev.r)
        length = math.sqrt(float(np.sum(weights * diff[:-1] ** 2) + diff[-1] ** 2))
        tangent = diff / length
        halvings = 0
        while True:
            x_pred = np.append(cur.u.vector, cur.r) + ds * tangent
            try:
                u, r, res, its = _arclength_correct(branch, x_pred, tangent, PhaseCondition(cur.u))
                check_loop(sys, r, u.nodes(), a0)
                break
            except (NumericalFailure, InfeasibleProblem) as exc:
                halvings += 1
                ds *= 0.5
                if halvings > cfg.max_halvings or ds < cfg.min_step:
                    branch.termination = Termination(SOLVER_FAILURE, f"near r={cur.r:.6g}: {exc}")
                    return branch
        point = diagnose(sys, r, u, ref, a0, res, its)
        point.fold = (r - cur.r) * (cur.r - prev.r) < 0
        branch.points.append(point)
        verdict = _classify(branch, point, direction, cfg)
        if verdict is not None:
            branch.termination = verdict
            return branch
        if direction * (r - r_target) >= 0:
            branch.termination = Termination(REACHED_TARGET)
            return branch
        if halvings == 0:
            ds = min(ds * cfg.growth, cfg.max_step)
    branch.termination = Termination(SOLVER_FAILURE, "maximal number of points reached")
    return branch


# -- verification ------------------------------------------------------------------

def closure_error(sys: VortexSystem, point: BranchPoint, a0=None, cfg: IntegratorConfig | None = None) -> float:
    """Integrate the physical equations from ``z(0) = a0 + r u(0)`` over ``2πr²``.

    Returns ``max_k |z_k(T) - z_k(0)| / r``, i.e. the closure defect in the
    scaled units of the loop.
    """
    cfg = cfg or IntegratorConfig(method="dop853", abs_tol=1e-13, rel_tol=1e-12)
    r = point.r
    z0 = np.tile(_anchor(a0), sys.N) + r * point.u(0.0)
    period = TWO_PI * r * r
    traj = integrate(sys, z0, period, cfg)
    gap = (traj.final - z0).reshape(-1, 2)
    return float(np.max(np.linalg.norm(gap, axis=1))) / r


# -- smoothness --------------------------------------------------------------------

@dataclass
class SmoothnessReport:
    ratios: list[float]
    anchors: list[float]
    passed: bool
    trivial: bool = False
    band: tuple[float, float] = (1.8, 2.2)

    def to_dict(self) -> dict:
        return {
            "ratios": self.ratios,
            "anchors": self.anchors,
            "passed": self.passed,
            "trivial": self.trivial,
            "band": list(self.band),
        }


def branch_smoothness_check(
    branch: Branch,
    band: tuple[float, float] = (1.8, 2.2),
    rel_tol: float = 1e-6,
) -> SmoothnessReport:
    """Richardson test on secant slopes of ``r ↦ u(r)``.

    For every anchor ``r_i`` whose successors include ``r_i + h``,
    ``r_i + 2h`` and ``r_i + 4h`` the ratio
    ``|s(4h) - s(2h)| / |s(2h) - s(h)|`` of secant-slope differences is
    formed; a ``C¹`` (indeed ``C²``) branch gives ratios near 2.  Loops are
    phase-aligned to the reference before differencing.
    """
    sys = branch.sys
    if not sys.domain.is_plane:
        hess = sys.domain.robin_hessian(branch.a0)
        if abs(np.linalg.det(hess)) <= 1e-10 * max(1.0, np.linalg.norm(hess) ** 2):
            raise NotApplicable("anchor is a degenerate critical point of the Robin function")
    pts = sorted(branch.points, key=lambda p: p.r)
    if len(pts) < 4:
        raise NotApplicable("need at least four branch points")
    ref = branch.reference.resize(pts[0].u.n)
    radii = np.array([p.r for p in pts])
    loops = [align_phase(p.u, ref)[1].vector for p in pts]
    weights = np.sqrt(pts[0].u.weights())
    scale = max(1.0, float(np.max(np.abs(loops))))

    ratios, anchors, trivial_all = [], [], True
    for i, r0 in enumerate(radii):
        for j in range(i + 1, len(radii)):
            h = radii[j] - r0
            k2 = _match(radii, r0 + 2 * h, h)
            k4 = _match(radii, r0 + 4 * h, h)
            if k2 is None or k4 is None:
                continue
            slopes = [(loops[k] - loops[i]) / (radii[k] - r0) for k in (j, k2, k4)]
            near = np.linalg.norm(weights * (slopes[1] - slopes[0]))
            far = np.linalg.norm(weights * (slopes[2] - slopes[1]))
            floor = rel_tol * scale
            if near <= floor and far <= floor:
                continue
            trivial_all = False
            ratios.append(float(far / near) if near > 0 else math.inf)
            anchors.append(float(r0))
            break
    if not ratios:
        return SmoothnessReport([], [], passed=trivial_all, trivial=trivial_all, band=band)
    ok = all(band[0] <= q <= band[1] for q in ratios)
    return SmoothnessReport(ratios, anchors, passed=ok, band=band)


def _match(radii: np.ndarray, target: float, h: float):
    k = int(np.argmin(np.abs(radii - target)))
    return k if abs(radii[k] - target) <= 1e-9 * max(abs(h), 1e-300) + 1e-12 else None


__all__ = [
    "BOUNDARY_APPROACH",
    "REACHED_TARGET",
    "SINGULAR_LIMIT_ANOMALY",
    "SOLVER_FAILURE",
    "UNBOUNDED",
    "Branch",
    "BranchPoint",
    "SmoothnessReport",
    "StepConfig",
    "Termination",
    "branch_smoothness_check",
    "closure_error",
    "continue_branch",
    "default_start",
    "diagnose",
    "reference_loop",
    "seed_branch",
]
