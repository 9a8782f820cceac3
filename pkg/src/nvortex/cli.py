"""Command-line driver: ``nvortex <command> --config run.json``.

Every command reads one JSON configuration, writes data artifacts (JSON,
JSON-lines, CSV) plus a ``manifest.json`` into the output directory, and
optionally PNG figures.  Exit status: 0 success, 2 configuration error,
3 numerical failure, 4 infeasible problem.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import platform
import sys as _sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import __version__
from .continuation import (
    StepConfig,
    branch_smoothness_check,
    closure_error,
    continue_branch,
    seed_branch,
)
from .degree import (
    IsotypicalMap,
    linear_degree,
    normal_slice_jacobian,
    orbit_degree_magnitude,
    isotropy_order,
)
from .domains import brouwer_index, find_critical_points, make_domain
from .dynamics import IntegratorConfig, integrate
from .equilibria import (
    FixOmega,
    FixScale,
    RelativeEquilibrium,
    SymmetryElement,
    gamma_periodic_count,
    nondegeneracy,
    regular_polygon,
    solve_equilibrium,
    stability_matrix,
)
from .errors import ConfigError, NVortexError
from .loopspace import FourierLoop, PhaseCondition, SymmetrySubspace, newton_periodic, reconstruct
from .model import VortexSystem

OUTPUT_ENV = "NVORTEX_OUTPUT_DIR"


@dataclass(frozen=True)
class Key:
    default: Any
    kind: str  # float, posfloat, int, posint, bool, str, vector, matrix, any
    unit: str
    help: str


# section -> key -> Key
SCHEMA: dict[str, dict[str, Key]] = {
    "system": {
        "strengths": Key(None, "vector", "circulation", "vortex strengths Γ_k, all nonzero"),
        "collision_eps": Key(1e-12, "posfloat", "length", "minimal admissible vortex separation"),
    },
    "domain": {
        "kind": Key("plane", "str", "-", "plane | unit_disc | half_plane | annulus"),
        "rho": Key(0.5, "posfloat", "length", "inner radius of the annulus"),
        "experimental": Key(False, "bool", "-", "allow the experimental annulus"),
    },
    "simulate": {
        "z0": Key(None, "vector", "length", "initial positions x1,y1,...,xN,yN (default: equilibrium guess)"),
        "t_end": Key(1.0, "posfloat", "time", "integration horizon"),
        "samples": Key(201, "posint", "-", "number of output samples"),
        "method": Key("rk45", "str", "-", "rk45 | dop853 | implicit_midpoint"),
        "abs_tol": Key(1e-12, "posfloat", "-", "absolute tolerance"),
        "rel_tol": Key(1e-10, "posfloat", "-", "relative tolerance"),
        "max_step": Key(math.inf, "posfloat", "time", "largest step of the adaptive methods"),
        "step": Key(1e-3, "posfloat", "time", "fixed step of implicit midpoint"),
        "collision_floor": Key(1e-8, "posfloat", "length", "stop when vortices come this close"),
    },
    "equilibrium": {
        "guess": Key("polygon", "str", "-", "polygon | collinear | explicit"),
        "z": Key(None, "vector", "length", "explicit guess x1,y1,... (guess = explicit)"),
        "radius": Key(1.0, "posfloat", "length", "radius or half-width of the generated guess"),
        "noise": Key(0.0, "float", "relative", "Gaussian perturbation of the guess"),
        "seed": Key(0, "int", "-", "random seed for the perturbation"),
        "fix": Key("omega", "str", "-", "normalization: omega | scale"),
        "value": Key(1.0, "float", "1/time or length", "target ω or |Γ|-weighted RMS radius"),
        "tol": Key(1e-10, "posfloat", "-", "Newton residual tolerance"),
        "max_iter": Key(50, "posint", "-", "Newton iteration cap"),
    },
    "spectrum": {
        "tol": Key(1e-8, "posfloat", "1/time", "distance to i|ω|ℤ counted as resonant"),
        "symmetry": Key(None, "any", "-", "null | \"cyclic\" | {sigma: [...], theta: rad}"),
        "truncation": Key(16, "posint", "modes", "Fourier truncation for the symmetric count"),
    },
    "robin": {
        "search_box": Key([[-0.9, 0.9], [-0.9, 0.9]], "matrix", "length", "[[xmin,xmax],[ymin,ymax]] seed box"),
        "grid_n": Key(7, "posint", "-", "seeds per axis"),
        "tol": Key(1e-10, "posfloat", "-", "gradient tolerance"),
    },
    "periodic": {
        "r": Key(0.05, "posfloat", "length", "scale parameter r"),
        "a0": Key([0.0, 0.0], "vector", "length", "anchor point (critical point of h)"),
        "truncation": Key(32, "posint", "modes", "Fourier truncation n"),
        "tol": Key(1e-10, "posfloat", "-", "accepted ‖Φ_r(u)‖_X"),
        "max_iter": Key(30, "posint", "-", "Newton iteration cap"),
        "symmetry": Key(None, "any", "-", "null | \"cyclic\" | {sigma, theta}"),
    },
    "continuation": {
        "r_start": Key(0.02, "posfloat", "length", "seed scale"),
        "r_target": Key(0.5, "posfloat", "length", "continue toward this scale"),
        "step": Key(0.02, "posfloat", "length", "initial step in r (or arclength)"),
        "min_step": Key(1e-6, "posfloat", "length", "give up below this step"),
        "max_step": Key(0.1, "posfloat", "length", "cap on the step"),
        "growth": Key(1.0, "float", "-", "step growth after a clean step (≥ 1)"),
        "max_points": Key(200, "posint", "-", "cap on branch points"),
        "max_halvings": Key(8, "posint", "-", "step halvings before failure"),
        "pseudo_arclength": Key(False, "bool", "-", "pass folds by arclength continuation"),
        "boundary_factor": Key(1e-3, "posfloat", "-", "boundary approach margin / inradius"),
        "locality": Key(0.5, "posfloat", "-", "allowed distance to S¹Z relative to |Z|_X"),
        "verify": Key(True, "bool", "-", "integrate every point over one period"),
        "smoothness": Key(False, "bool", "-", "run the Richardson smoothness check"),
    },
    "degree": {
        "mode": Key("certificate", "str", "-", "certificate | linear"),
        "eps": Key([0.05, 0.1, 0.2], "vector", "length", "index circle radii"),
        "blocks": Key(None, "any", "-", "linear mode: [{k: int, matrix: [[...]]}, ...]"),
    },
    "output": {
        "dir": Key("nvortex-out", "str", "path", "artifact directory (NVORTEX_OUTPUT_DIR overrides)"),
        "figures": Key(True, "bool", "-", "render PNG figures"),
    },
}


def help_epilog() -> str:
    lines = ["configuration keys (section.key [unit] default: description):"]
    for section, keys in SCHEMA.items():
        for name, key in keys.items():
            default = "required" if (section, name) == ("system", "strengths") else json.dumps(key.default)
            lines.append(f"  {section}.{name} [{key.unit}] {default}: {key.help}")
    return "\n".join(lines)


# -- config ------------------------------------------------------------------------

def _check(section: str, name: str, key: Key, value):
    where = f"{section}.{name}"
    if value is None:
        return None
    if key.kind in ("float", "posfloat"):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where} must be a number")
        value = float(value)
        if key.kind == "posfloat" and not value > 0:
            raise ConfigError(f"{where} must be positive")
    elif key.kind in ("int", "posint"):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where} must be an integer")
        if key.kind == "posint" and value <= 0:
            raise ConfigError(f"{where} must be positive")
    elif key.kind == "bool":
        if not isinstance(value, bool):
            raise ConfigError(f"{where} must be true or false")
    elif key.kind == "str":
        if not isinstance(value, str):
            raise ConfigError(f"{where} must be a string")
    elif key.kind == "vector":
        if not isinstance(value, list) or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
            raise ConfigError(f"{where} must be a list of numbers")
        value = [float(v) for v in value]
    elif key.kind == "matrix":
        if not isinstance(value, list) or not all(isinstance(row, list) for row in value):
            raise ConfigError(f"{where} must be a list of lists")
    return value


def load_config(path) -> dict[str, dict[str, Any]]:
    """Parse and validate a configuration file, filling defaults."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return validate_config(raw)


def validate_config(raw) -> dict[str, dict[str, Any]]:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = sorted(set(raw) - set(SCHEMA))
    if unknown:
        raise ConfigError(f"unknown config section(s): {', '.join(unknown)}")
    cfg: dict[str, dict[str, Any]] = {}
    for section, keys in SCHEMA.items():
        given = raw.get(section, {})
        if not isinstance(given, dict):
            raise ConfigError(f"section {section} must be an object")
        bad = sorted(set(given) - set(keys))
        if bad:
            raise ConfigError(f"unknown key(s) in {section}: {', '.join(bad)}")
        cfg[section] = {name: _check(section, name, key, given.get(name, key.default)) for name, key in keys.items()}
    if cfg["system"]["strengths"] is None:
        raise ConfigError("system.strengths is required")
    if cfg["continuation"]["growth"] < 1.0:
        raise ConfigError("continuation.growth must be at least 1")
    return cfg


def config_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# -- builders ----------------------------------------------------------------------

def build_system(cfg) -> VortexSystem:
    d = cfg["domain"]
    params = {"rho": d["rho"]} if d["kind"] == "annulus" else {}
    domain = make_domain(d["kind"], experimental=d["experimental"], **params)
    return VortexSystem(cfg["system"]["strengths"], domain, collision_eps=cfg["system"]["collision_eps"])


def initial_guess(cfg, n: int) -> np.ndarray:
    e = cfg["equilibrium"]
    if e["guess"] == "polygon":
        z = regular_polygon(n, e["radius"])
    elif e["guess"] == "collinear":
        xs = np.linspace(-e["radius"], e["radius"], n)
        z = np.column_stack([xs, np.zeros(n)]).ravel()
    elif e["guess"] == "explicit":
        if e["z"] is None or len(e["z"]) != 2 * n:
            raise ConfigError("equilibrium.z must hold 2N coordinates")
        z = np.array(e["z"])
    else:
        raise ConfigError(f"unknown equilibrium.guess {e['guess']!r}")
    if e["noise"]:
        rng = np.random.default_rng(e["seed"])
        z = z + e["noise"] * e["radius"] * rng.standard_normal(z.shape)
    return z


def solve_configured_equilibrium(cfg, system: VortexSystem) -> RelativeEquilibrium:
    e = cfg["equilibrium"]
    plane = VortexSystem(system.strengths, collision_eps=system.collision_eps)
    if e["fix"] == "omega":
        norm = FixOmega(e["value"])
    elif e["fix"] == "scale":
        norm = FixScale(e["value"])
    else:
        raise ConfigError("equilibrium.fix must be omega or scale")
    return solve_equilibrium(plane, initial_guess(cfg, system.N), norm, tol=e["tol"], max_iter=e["max_iter"])


def symmetry_element(value, n: int) -> SymmetryElement | None:
    if value is None:
        return None
    if value == "cyclic":
        return SymmetryElement.cyclic(n)
    if isinstance(value, dict) and set(value) == {"sigma", "theta"}:
        return SymmetryElement(tuple(int(s) for s in value["sigma"]), float(value["theta"]))
    raise ConfigError('symmetry must be null, "cyclic" or {sigma, theta}')


# -- output helpers ----------------------------------------------------------------

class Run:
    def __init__(self, out: Path, figures: bool):
        self.out = out
        self.figures = figures
        self.artifacts: list[str] = []
        out.mkdir(parents=True, exist_ok=True)

    def path(self, name: str) -> Path:
        self.artifacts.append(name)
        return self.out / name

    def json(self, name: str, payload) -> None:
        self.path(name).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")

    def figure(self, name: str, draw: Callable[[Path], Any]) -> None:
        if self.figures:
            draw(self.path(name))


def _eq_payload(eq: RelativeEquilibrium, report) -> dict:
    return {"equilibrium": eq.to_dict(), "spectral_report": report.to_dict()}


# -- commands ----------------------------------------------------------------------

def cmd_simulate(cfg, run: Run):
    from .plotting import plot_trajectory

    system = build_system(cfg)
    s = cfg["simulate"]
    z0 = np.array(s["z0"]) if s["z0"] is not None else initial_guess(cfg, system.N)
    icfg = IntegratorConfig(
        method=s["method"], abs_tol=s["abs_tol"], rel_tol=s["rel_tol"], max_step=s["max_step"],
        collision_floor=s["collision_floor"], step=s["step"],
    )
    t_eval = np.linspace(0.0, s["t_end"], s["samples"]) if s["method"] != "implicit_midpoint" else None
    traj = integrate(system, z0, s["t_end"], icfg, t_eval=t_eval)
    traj.to_csv(run.path("trajectory.csv"))
    run.json("drift.json", traj.invariant_drift)
    run.figure("trajectory.png", lambda p: plot_trajectory(traj, p, system.domain))
    return {"samples": len(traj), "drift": traj.invariant_drift}


def cmd_equilibrium(cfg, run: Run):
    system = build_system(cfg)
    eq = solve_configured_equilibrium(cfg, system)
    plane = VortexSystem(system.strengths, collision_eps=system.collision_eps)
    report = nondegeneracy(plane, eq, cfg["spectrum"]["tol"])
    run.json("equilibrium.json", _eq_payload(eq, report))
    return {"omega": eq.omega, "nondegenerate": report.nondegenerate}


def cmd_spectrum(cfg, run: Run):
    from .plotting import plot_spectrum

    system = build_system(cfg)
    eq = solve_configured_equilibrium(cfg, system)
    plane = VortexSystem(system.strengths, collision_eps=system.collision_eps)
    sp = cfg["spectrum"]
    report = nondegeneracy(plane, eq, sp["tol"])
    gamma = symmetry_element(sp["symmetry"], system.N)
    if gamma is not None:
        report.gamma_periodic_dimension = gamma_periodic_count(plane, eq, gamma, n=sp["truncation"], tol=sp["tol"])
        report.nondegenerate = report.gamma_periodic_dimension == 3
    A = stability_matrix(plane, eq)
    with open(run.path("eigenvalues.csv"), "w") as fh:
        fh.write("re,im\n")
        for lam in report.eigenvalues:
            fh.write(f"{float(lam.real)!r},{float(lam.imag)!r}\n")
    payload = _eq_payload(eq, report)
    payload["stability_matrix"] = A.tolist()
    run.json("spectrum.json", payload)
    run.figure("spectrum.png", lambda p: plot_spectrum(report.eigenvalues, eq.omega, p))
    return {"periodic_dimension": report.periodic_dimension,
            "gamma_periodic_dimension": report.gamma_periodic_dimension,
            "nondegenerate": report.nondegenerate}


def cmd_robin(cfg, run: Run):
    from .plotting import plot_robin

    system = build_system(cfg)
    rb = cfg["robin"]
    reports = find_critical_points(system.domain, rb["search_box"], rb["grid_n"], rb["tol"])
    run.json("critical_points.json", [r.to_dict() for r in reports])
    if not system.domain.is_plane:
        run.figure("robin.png", lambda p: plot_robin(system.domain, reports, p))
    return {"critical_points": len(reports)}


def _periodic_setup(cfg, system):
    pc = cfg["periodic"]
    eq = solve_configured_equilibrium(cfg, system)
    Z = FourierLoop.relative_equilibrium(eq, pc["truncation"])
    gamma = symmetry_element(pc["symmetry"], system.N)
    space = SymmetrySubspace(gamma, system.N, pc["truncation"]) if gamma else None
    return eq, Z, space


def cmd_solve_periodic(cfg, run: Run):
    from .plotting import plot_loop

    system = build_system(cfg)
    pc = cfg["periodic"]
    _, Z, space = _periodic_setup(cfg, system)
    sol = newton_periodic(system, pc["r"], Z, PhaseCondition(Z), space, pc["a0"], tol=pc["tol"], max_iter=pc["max_iter"])
    run.json("loop.json", {"r": sol.r, "residual": sol.residual, "iterations": sol.iterations,
                           "tail_fraction": sol.tail_fraction, "loop": sol.loop.to_dict()})
    z = reconstruct(sol.loop, pc["r"], pc["a0"])
    t = np.linspace(0.0, 2 * math.pi * pc["r"] ** 2, 201)
    states = z(t)
    with open(run.path("orbit.csv"), "w") as fh:
        fh.write(",".join(["t"] + [f"{c}{k}" for k in range(1, system.N + 1) for c in "xy"]) + "\n")
        for ti, zi in zip(t, states):
            fh.write(",".join(repr(float(v)) for v in (ti, *zi)) + "\n")
    run.figure("loop.png", lambda p: plot_loop(sol.loop, p, pc["r"], pc["a0"], system.domain))
    return {"residual": sol.residual, "iterations": sol.iterations}


def cmd_continue(cfg, run: Run):
    from .plotting import plot_branch

    system = build_system(cfg)
    pc, cc = cfg["periodic"], cfg["continuation"]
    _, Z, space = _periodic_setup(cfg, system)
    seed = seed_branch(system, pc["a0"], Z, cc["r_start"], n=pc["truncation"], space=space, locality=cc["locality"])
    step = StepConfig(
        step=cc["step"], min_step=cc["min_step"], max_step=cc["max_step"], max_points=cc["max_points"],
        max_halvings=cc["max_halvings"], growth=cc["growth"], pseudo_arclength=cc["pseudo_arclength"],
        boundary_factor=cc["boundary_factor"], locality=cc["locality"],
    )
    branch = continue_branch(seed, system, cc["r_target"], step, a0=pc["a0"], Z=Z, space=space)
    branch.to_jsonl(run.path("branch.jsonl"))
    branch.to_csv(run.path("branch.csv"))
    summary = branch.summary()
    if cc["verify"]:
        errors = [closure_error(system, p, pc["a0"]) for p in branch.points]
        with open(run.path("closure.csv"), "w") as fh:
            fh.write("r,closure_error\n")
            for p, err in zip(branch.points, errors):
                fh.write(f"{p.r!r},{err!r}\n")
        summary["max_closure_error"] = max(errors)
    if cc["smoothness"]:
        summary["smoothness"] = branch_smoothness_check(branch).to_dict()
    run.json("branch_summary.json", summary)
    run.figure("branch.png", lambda p: plot_branch(branch, p))
    return summary


def cmd_degree(cfg, run: Run):
    dg = cfg["degree"]
    if dg["mode"] == "linear":
        if not isinstance(dg["blocks"], list):
            raise ConfigError("degree.blocks must be a list of {k, matrix}")
        try:
            entries = [(int(b["k"]), np.array(b["matrix"], dtype=float)) for b in dg["blocks"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed degree block: {exc}") from exc
        deg = linear_degree(IsotypicalMap(entries))
        run.json("degree.json", {"degree": deg.to_dict()})
        return {"degree": deg.to_dict()}
    if dg["mode"] != "certificate":
        raise ConfigError("degree.mode must be certificate or linear")
    system = build_system(cfg)
    pc = cfg["periodic"]
    _, Z, space = _periodic_setup(cfg, system)
    if system.domain.is_plane:
        raise ConfigError("the degree certificate needs a bounded or half-plane domain")
    indices = {repr(e): brouwer_index(system.domain, pc["a0"], e) for e in dg["eps"]}
    magnitude = orbit_degree_magnitude(normal_slice_jacobian(system, Z, space), isotropy_order(Z))
    index = indices[repr(dg["eps"][0])]
    payload = {"orbit_degree_magnitude": magnitude, "brouwer_index": indices,
               "product": magnitude * index, "certified": magnitude * index != 0}
    run.json("degree.json", payload)
    return payload


COMMANDS: dict[str, Callable] = {
    "simulate": cmd_simulate,
    "equilibrium": cmd_equilibrium,
    "spectrum": cmd_spectrum,
    "robin": cmd_robin,
    "solve-periodic": cmd_solve_periodic,
    "continue": cmd_continue,
    "degree": cmd_degree,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nvortex",
        description="Point-vortex dynamics, relative equilibria and periodic solutions near Robin critical points.",
        epilog=help_epilog(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"nvortex {__version__}")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="JSON configuration file")
    parser.add_argument("--output-dir", help="override output.dir")
    parser.add_argument("--no-figures", action="store_true", help="skip PNG figures")
    return parser


def run(command: str, config_path, output_dir=None, figures: bool | None = None) -> int:
    """Execute one command; returns the process exit code."""
    started = time.time()
    try:
        cfg = load_config(config_path)
        out = Path(output_dir or os.environ.get(OUTPUT_ENV) or cfg["output"]["dir"])
        want_figures = cfg["output"]["figures"] if figures is None else figures
        job = Run(out, want_figures)
        result = COMMANDS[command](cfg, job)
    except NVortexError as exc:
        print(f"nvortex {command}: {type(exc).__name__}: {exc}", file=_sys.stderr)
        return exc.exit_code
    manifest = {
        "command": command,
        "config_sha256": config_digest(config_path),
        "artifacts": job.artifacts,
        "versions": {
            "nvortex": __version__,
            "numpy": np.__version__,
            "scipy": _scipy_version(),
            "python": platform.python_version(),
        },
        "wall_time_s": time.time() - started,
        "result": _jsonable(result),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    print(json.dumps(_jsonable(result), sort_keys=True))
    return 0


def _scipy_version() -> str:
    import scipy

    return scipy.__version__


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, (np.integer, np.bool_)):
        return obj.item()
    return obj


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return run(args.command, args.config, args.output_dir, False if args.no_figures else None)


if __name__ == "__main__":
    raise SystemExit(main())
