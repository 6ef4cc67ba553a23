"""Experiment pipelines behind the command-line subcommands.

Every runner takes an :class:`ExperimentConfig` and returns plain result
objects; writing files is left to the caller.
"""

import dataclasses
import re
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial.distance import cdist

from . import bem, krylov, osrc
from .mesh import (
    build_edge_topology,
    estimate_curvature,
    load_mesh,
    mesh_stats,
    sphere_frequency_for_h,
    sphere_mesh,
)
from .oracle import E_PLANE, H_PLANE, mie_bistatic_rcs
from .pade import compute_pade
from .sparse_ops import assemble_sparse_set, build_damped_wavenumber, mixed_mass_matrix
from .spaces import build_space

SPECTRUM_MAX_DOFS = 500


class ConfigError(ValueError):
    """Invalid experiment configuration (usage error)."""


class NumericalFailure(RuntimeError):
    """A solve did not converge or a factorization broke down."""


@dataclass
class ExperimentConfig:
    mesh: str | None = None
    sphere_frequency: int | None = None
    h: float | None = None
    radius: float = 1.0
    kappa: float = np.pi
    preconditioner: str = "osrc-a(2)"
    damping: str = "auto"
    tol: float = 1e-5
    maxit: int = 1000
    alpha: float = np.pi / 2
    tau: float = 0.1
    n_angles: int = 181
    plane: str = E_PLANE
    regular_order: int = 4
    near_order: int = 8
    singular_order: int = 5
    output_dir: str = "."
    dump_matrices: bool = False
    threads: int | None = None
    kappas: list = field(default_factory=list)
    frequencies: list = field(default_factory=list)
    preconditioners: list = field(default_factory=list)
    n_terms: list = field(default_factory=list)

    def __post_init__(self):
        self.validate()

    def validate(self):
        if not self.kappa > 0:
            raise ConfigError("kappa must be positive")
        if not self.radius > 0:
            raise ConfigError("radius must be positive")
        if not 0 < self.tol < 1:
            raise ConfigError("tol must lie in (0, 1)")
        if self.maxit < 1:
            raise ConfigError("maxit must be positive")
        if self.plane not in (E_PLANE, H_PLANE):
            raise ConfigError("plane must be E or H")
        if self.n_angles < 2:
            raise ConfigError("n_angles must be at least 2")
        if not 0 <= self.tau <= 1:
            raise ConfigError("tau must lie in [0, 1]")
        parse_preconditioner(self.preconditioner)
        for p in self.preconditioners:
            parse_preconditioner(p)
        parse_damping(self.damping)
        if any(k <= 0 for k in self.kappas):
            raise ConfigError("kappa values must be positive")
        if any(int(f) < 1 for f in self.frequencies):
            raise ConfigError("sphere frequencies must be positive integers")
        if any(int(n) < 1 for n in self.n_terms):
            raise ConfigError("Padé term counts must be positive")

    def quadrature(self):
        return bem.QuadratureOptions(self.regular_order, self.near_order, self.singular_order)


_PRECOND_RE = re.compile(r"^(none|osrc-b|osrc-a\((\d+)\))$")


def parse_preconditioner(text):
    """'none' -> (None, 0); 'osrc-a(N)' -> ('A', N); 'osrc-b' -> ('B', 0)."""
    m = _PRECOND_RE.match(str(text).strip().lower())
    if not m:
        raise ConfigError(f"unknown preconditioner {text!r} (none, osrc-a(N), osrc-b)")
    if m.group(1) == "none":
        return None, 0
    if m.group(1) == "osrc-b":
        return osrc.VARIANT_B, 0
    n = int(m.group(2))
    if n < 1:
        raise ConfigError("osrc-a needs at least one Padé term")
    return osrc.VARIANT_A, n


def parse_damping(text):
    """'auto' -> None (curvature estimate); a number -> global radius override."""
    if str(text).strip().lower() in ("auto", "auto-curvature"):
        return None
    try:
        r = float(text)
    except ValueError:
        raise ConfigError(f"damping must be 'auto' or a curvature radius, got {text!r}") from None
    if not r > 0:
        raise ConfigError("damping radius must be positive")
    return r


# --- config files ---------------------------------------------------------------

_LIST_KEYS = {"kappas": float, "frequencies": int, "preconditioners": str, "n_terms": int}


def _coerce(name, raw):
    ftype = {f.name: f.type for f in dataclasses.fields(ExperimentConfig)}[name]
    raw = raw.strip()
    if name in _LIST_KEYS:
        return [_LIST_KEYS[name](x) for x in re.split(r"[,\s]+", raw) if x]
    if raw.lower() in ("none", "") and "None" in str(ftype):
        return None
    if "bool" in str(ftype):
        if raw.lower() not in ("1", "0", "true", "false", "yes", "no"):
            raise ConfigError(f"{name}: expected a boolean, got {raw!r}")
        return raw.lower() in ("1", "true", "yes")
    if "int" in str(ftype):
        return int(raw)
    if "float" in str(ftype):
        return float(raw)
    return raw


def read_config(path):
    """Parse a flat ``key = value`` file; ``#`` starts a comment."""
    names = {f.name for f in dataclasses.fields(ExperimentConfig)}
    values = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, raw = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in names:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            values[key] = _coerce(key, raw)
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: {exc}") from None
    return values


def make_config(file_values=None, overrides=None):
    """Config from defaults, then file values, then explicit overrides."""
    merged = dict(file_values or {})
    merged.update({k: v for k, v in (overrides or {}).items() if v is not None})
    try:
        return ExperimentConfig(**merged)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


# --- shared pipeline --------------------------------------------------------------


@dataclass
class Problem:
    mesh: object
    topo: object
    rwg: object
    snc: object
    stats: object
    curvature: object


def build_problem(cfg, frequency=None):
    if cfg.mesh and frequency is None:
        mesh = load_mesh(cfg.mesh)
    else:
        n = frequency or cfg.sphere_frequency
        if n is None:
            n = sphere_frequency_for_h(cfg.h, cfg.radius) if cfg.h else 4
        mesh = sphere_mesh(cfg.radius, int(n))
    topo = build_edge_topology(mesh)
    rwg = build_space(mesh, topo, "RWG")
    snc = build_space(mesh, topo, "SNC")
    override = parse_damping(cfg.damping)
    curvature = estimate_curvature(mesh, override=override, topo=topo)
    return Problem(mesh, topo, rwg, snc, mesh_stats(mesh, topo), curvature)


def resolution_warning(kappa, h):
    """Message when edges exceed a quarter wavelength, else None."""
    if kappa * h > np.pi / 2:
        return (
            f"kappa*h = {kappa * h:.3g} exceeds pi/2: fewer than one edge per "
            "quarter wavelength, results are under-resolved"
        )
    return None


def sparse_operators(problem, kappa):
    kw = build_damped_wavenumber(kappa, problem.curvature)
    p1 = build_space(problem.mesh, problem.topo, "P1")
    return assemble_sparse_set(problem.mesh, problem.topo, problem.snc, p1, kw)


def make_preconditioner(problem, kappa, name, alpha=np.pi / 2, ops=None):
    """Returns (preconditioner or None, setup seconds)."""
    variant, n_terms = parse_preconditioner(name)
    if variant is None:
        return None, 0.0
    start = time.perf_counter()
    ops = ops if ops is not None else sparse_operators(problem, kappa)
    pade = compute_pade(n_terms, alpha) if variant == osrc.VARIANT_A else None
    try:
        pre = osrc.build_preconditioner(ops, pade, variant)
    except osrc.FactorizationError as exc:
        raise NumericalFailure(str(exc)) from exc
    pre.setup_time = time.perf_counter() - start
    return pre, pre.setup_time


def plane_wave(kappa):
    return bem.PlaneWave(np.array([0.0, 0.0, 1.0]), np.array([1.0, 0.0, 0.0]), kappa)


def scattering_directions(n_angles, plane=E_PLANE):
    """Angles in [0, pi] from forward, in the plane containing the
    incidence direction x and the polarisation z (E) or y (H)."""
    theta = np.linspace(0.0, np.pi, n_angles)
    side = np.array([0.0, 0.0, 1.0]) if plane == E_PLANE else np.array([0.0, 1.0, 0.0])
    dirs = np.cos(theta)[:, None] * np.array([1.0, 0.0, 0.0]) + np.sin(theta)[:, None] * side
    return theta, dirs


@dataclass
class Assembled:
    S: object
    rhs: object
    mfie_time: float


def assemble_system(problem, kappa, quad, keep_mfie=False):
    """EFIE matrix and right-hand side; the MFIE matrix is dropped after use
    unless ``keep_mfie``."""
    C = bem.assemble_mfie(problem.mesh, problem.rwg, problem.snc, kappa, quad)
    M = mixed_mass_matrix(problem.mesh, problem.topo, problem.rwg)
    rhs = bem.assemble_rhs(problem.mesh, problem.snc, plane_wave(kappa), C, M, problem.rwg)
    t_c = C.assembly_time
    if keep_mfie:
        rhs.info["mfie"] = C
    del C
    S = bem.assemble_efie(problem.mesh, problem.rwg, problem.snc, kappa, quad)
    return Assembled(S, rhs, t_c)


# --- validate --------------------------------------------------------------------------


@dataclass
class SolveResult:
    label: str
    solution: np.ndarray
    report: object
    setup_time: float


@dataclass
class ValidationResult:
    theta: np.ndarray
    mie: np.ndarray
    curves: dict
    solves: list
    summary: dict
    problem: Problem
    assembled: Assembled
    warnings: list


def relative_l2(a, b):
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


def max_db_error(a, b):
    return float(np.max(np.abs(10 * np.log10(a) - 10 * np.log10(b))))


def run_validate(cfg, problem=None):
    problem = problem or build_problem(cfg)
    notes = []
    msg = resolution_warning(cfg.kappa, problem.stats.h)
    if msg:
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
        notes.append(msg)
    system = assemble_system(problem, cfg.kappa, cfg.quadrature(), keep_mfie=cfg.dump_matrices)
    theta, dirs = scattering_directions(cfg.n_angles, cfg.plane)
    mie, _ = mie_bistatic_rcs(cfg.kappa, cfg.radius, theta, cfg.plane)
    wave = plane_wave(cfg.kappa)

    solves = []
    labels = ["none"]
    if parse_preconditioner(cfg.preconditioner)[0] is not None:
        labels.append(cfg.preconditioner.lower())
    for label in labels:
        pre, setup = make_preconditioner(problem, cfg.kappa, label, cfg.alpha)
        x, rep = krylov.gmres(system.S, system.rhs.values, tol=cfg.tol, maxit=cfg.maxit, precond=pre)
        solves.append(SolveResult(label, x, rep, setup))

    curves = {}
    summary = {"n_dofs": problem.rwg.n_dofs, "h": problem.stats.h, "kappa": cfg.kappa}
    for s in solves:
        F = bem.far_field(problem.mesh, problem.rwg, cfg.kappa, s.solution, dirs,
                          magnetic=system.rhs.trace_coefficients)
        rcs = bem.bistatic_rcs(F, wave.polarization)
        name = "efie-direct" if s.label == "none" else f"efie-{s.label}"
        curves[name] = rcs
        summary[f"{name}_rel_l2"] = relative_l2(rcs, mie)
        summary[f"{name}_max_db"] = max_db_error(rcs, mie)
        summary[f"{name}_iterations"] = s.report.iterations
        summary[f"{name}_converged"] = bool(s.report.converged)
    if len(solves) > 1:
        ref = solves[0].solution
        summary["solution_rel_diff"] = relative_l2(solves[1].solution, ref)
    return ValidationResult(theta, mie, curves, solves, summary, problem, system, notes)


# --- bench ----------------------------------------------------------------------------------

BENCH_COLUMNS = [
    "formulation", "kappa", "h", "n_dofs", "iterations", "assembly_s",
    "precond_setup_s", "solve_s", "setup_ratio", "solve_ratio", "status",
]


def run_bench(cfg, progress=None):
    """Iteration counts and time ratios over (kappa, sphere frequency) x preconditioners.

    Ratios are relative to the unpreconditioned EFIE on the same grid point:
    setup_ratio = (assembly + setup) / assembly, solve_ratio = solve / solve(none).
    """
    kappas = cfg.kappas or ([cfg.kappa] if cfg.frequencies else [])
    formulations = cfg.preconditioners or ["none", "osrc-a(1)", "osrc-a(2)", "osrc-b"]
    if "none" not in [f.lower() for f in formulations]:
        formulations = ["none"] + list(formulations)
    rows = []
    for kappa in kappas:
        for freq in cfg.frequencies:
            problem = build_problem(cfg, frequency=int(freq))
            system = assemble_system(problem, kappa, cfg.quadrature())
            t_asm = system.S.assembly_time
            ops = None
            base_solve = None
            for form in formulations:
                row = {"formulation": form.lower(), "kappa": kappa, "h": problem.stats.h,
                       "n_dofs": problem.rwg.n_dofs, "assembly_s": t_asm}
                try:
                    if form.lower() != "none" and ops is None:
                        t0 = time.perf_counter()
                        ops = sparse_operators(problem, kappa)
                        ops_time = time.perf_counter() - t0
                    pre, setup = make_preconditioner(problem, kappa, form, cfg.alpha, ops)
                    if pre is not None:
                        setup += ops_time
                    _, rep = krylov.gmres(system.S, system.rhs.values, tol=cfg.tol,
                                          maxit=cfg.maxit, precond=pre)
                    if form.lower() == "none":
                        base_solve = rep.wall_time
                    row.update(
                        iterations=rep.iterations, precond_setup_s=setup, solve_s=rep.wall_time,
                        setup_ratio=(t_asm + setup) / t_asm,
                        solve_ratio=rep.wall_time / base_solve if base_solve else np.nan,
                        status="ok" if rep.converged else "not_converged",
                    )
                except (NumericalFailure, osrc.FactorizationError, np.linalg.LinAlgError) as exc:
                    row.update(iterations=-1, precond_setup_s=np.nan, solve_s=np.nan,
                               setup_ratio=np.nan, solve_ratio=np.nan,
                               status=f"failed: {exc}".replace(",", ";"))
                rows.append(row)
                if progress:
                    progress(row)
            del system
    return rows


# --- spectrum -----------------------------------------------------------------------------


def relative_spread(ev):
    ev = np.asarray(ev)
    return float(np.std(ev) / abs(np.mean(ev)))


def hausdorff(a, b):
    D = cdist(np.column_stack([a.real, a.imag]), np.column_stack([b.real, b.imag]))
    return float(max(D.min(axis=0).max(), D.min(axis=1).max()))


@dataclass
class SpectrumResult:
    eigenvalues: dict  # label -> eigenvalues
    spread: dict
    distance_to_exact: dict
    n_dofs: int


def run_spectrum(cfg, problem=None):
    problem = problem or build_problem(cfg)
    n = problem.rwg.n_dofs
    if n > SPECTRUM_MAX_DOFS:
        raise ConfigError(f"spectrum needs at most {SPECTRUM_MAX_DOFS} edge dofs, mesh has {n}")
    n_terms = cfg.n_terms or [1, 5, 9]
    S = bem.assemble_efie(problem.mesh, problem.rwg, problem.snc, cfg.kappa, cfg.quadrature())
    ops = sparse_operators(problem, cfg.kappa)
    eig = {"efie": krylov.dense_spectrum(S.matrix, SPECTRUM_MAX_DOFS)}
    for npade in n_terms:
        pre = osrc.build_preconditioner(ops, compute_pade(npade, cfg.alpha), osrc.VARIANT_A)
        eig[f"osrc-a({npade})"] = krylov.dense_spectrum(krylov.compose(pre, S), SPECTRUM_MAX_DOFS)
    pre_b = osrc.build_preconditioner(ops, None, osrc.VARIANT_B)
    eig["osrc-b"] = krylov.dense_spectrum(krylov.compose(pre_b, S), SPECTRUM_MAX_DOFS)
    exact = osrc.exact_osrc_matrix(ops) @ S.matrix
    eig["exact"] = krylov.dense_spectrum(exact, SPECTRUM_MAX_DOFS)
    spread = {k: relative_spread(v) for k, v in eig.items()}
    dist = {k: hausdorff(v, eig["exact"]) for k, v in eig.items()}
    return SpectrumResult(eig, spread, dist, n)
