"""Command-line driver: validate, bench, spectrum, pade-dump, mesh-info.

Exit codes: 0 success, 1 usage error, 2 numerical failure.
"""

import argparse
import csv
import sys
import warnings
from pathlib import Path

import numpy as np
import scipy.io

from . import __version__, bem, osrc
from .experiments import (
    BENCH_COLUMNS,
    ConfigError,
    NumericalFailure,
    build_problem,
    make_config,
    read_config,
    run_bench,
    run_spectrum,
    run_validate,
    sparse_operators,
)
from .mesh import MeshError
from .pade import compute_pade, dominant_set

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICAL = 2
SCHEMA_VERSION = 1


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def write_csv(path, schema, header, rows):
    """CSV with a leading ``# osrc-efie <schema> v<N>`` comment line."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(f"# osrc-efie {schema} v{SCHEMA_VERSION} (package {__version__})\n")
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def write_residuals(path, report):
    return write_csv(path, "residuals", ["iteration", "residual"], enumerate(report.residual_history))


def dump_sparse(outdir, ops):
    for name in ("G", "N_eps", "K_eps", "L"):
        scipy.io.mmwrite(str(Path(outdir) / f"{name}.mtx"), getattr(ops, name))


# --- argument handling ----------------------------------------------------------------


def _common(p, sphere=True):
    p.add_argument("--config", help="flat key=value file; flags override it")
    p.add_argument("--threads", type=int, help="worker threads for dense assembly")
    p.add_argument("--output-dir", dest="output_dir", help="directory for CSV output")
    if sphere:
        p.add_argument("--mesh", help="Gmsh v2 ASCII (.msh) or OFF surface mesh")
        p.add_argument("--sphere-frequency", dest="sphere_frequency", type=int,
                       help="built-in geodesic sphere, 30*f^2 edges")
        p.add_argument("--h", type=float, help="target edge length for the built-in sphere")
        p.add_argument("--radius", type=float)
        p.add_argument("--kappa", type=float, help="wavenumber")
        p.add_argument("--damping", help="'auto' (curvature estimate) or a curvature radius")
        p.add_argument("--alpha", type=float, help="Padé branch rotation angle")
        p.add_argument("--tol", type=float)
        p.add_argument("--maxit", type=int)
        p.add_argument("--regular-order", dest="regular_order", type=int)
        p.add_argument("--near-order", dest="near_order", type=int)
        p.add_argument("--singular-order", dest="singular_order", type=int)


def build_parser():
    parser = _Parser(prog="osrc-efie", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("validate", help="bistatic RCS against the Mie series")
    _common(p)
    p.add_argument("--preconditioner", help="none, osrc-a(N) or osrc-b")
    p.add_argument("--n-angles", dest="n_angles", type=int)
    p.add_argument("--plane", choices=["E", "H"])
    p.add_argument("--dump-matrices", dest="dump_matrices", action="store_true", default=None,
                   help="write G, N_eps, K_eps, L (Matrix Market) and S, C (raw binary)")

    p = sub.add_parser("bench", help="iteration counts and time ratios over a grid")
    _common(p)
    p.add_argument("--kappas", type=_float_list, help="comma-separated wavenumbers")
    p.add_argument("--frequencies", type=_int_list, help="comma-separated sphere frequencies")
    p.add_argument("--preconditioners", type=_str_list,
                   help="semicolon-separated, e.g. 'none;osrc-a(2);osrc-b'")

    p = sub.add_parser("spectrum", help="eigenvalues of the preconditioned EFIE")
    _common(p)
    p.add_argument("--n-terms", dest="n_terms", type=_int_list, help="Padé term counts")

    p = sub.add_parser("pade-dump", help="Padé coefficients as CSV")
    _common(p, sphere=False)
    p.add_argument("--n-terms", dest="n_terms", type=_int_list, help="Padé term count")
    p.add_argument("--alpha", type=float)
    p.add_argument("--tau", type=float, help="dominance threshold")

    p = sub.add_parser("mesh-info", help="mesh statistics")
    _common(p)
    return parser


def _float_list(s):
    return [float(x) for x in s.replace(";", ",").split(",") if x.strip()]


def _int_list(s):
    return [int(x) for x in s.replace(";", ",").split(",") if x.strip()]


def _str_list(s):
    return [x.strip() for x in s.split(";") if x.strip()]


def _config_from_args(args):
    file_values = read_config(args.config) if getattr(args, "config", None) else {}
    skip = {"command", "config"}
    overrides = {k: v for k, v in vars(args).items() if k not in skip}
    return make_config(file_values, overrides)


def _set_threads(n):
    if n is None:
        return
    import numba

    if not 1 <= n <= numba.config.NUMBA_NUM_THREADS:
        raise UsageError(f"--threads must lie in [1, {numba.config.NUMBA_NUM_THREADS}]")
    numba.set_num_threads(n)


# --- subcommands ----------------------------------------------------------------------------


def cmd_validate(cfg, out):
    res = run_validate(cfg)
    theta_deg = np.degrees(res.theta)
    header = ["theta_deg", "mie_rcs", "mie_db"]
    cols = [res.mie, 10 * np.log10(res.mie)]
    for name, rcs in res.curves.items():
        header += [f"{name}_rcs", f"{name}_db"]
        cols += [rcs, 10 * np.log10(rcs)]
    write_csv(out / "rcs.csv", "rcs", header, zip(theta_deg, *cols))
    for s in res.solves:
        write_residuals(out / f"residuals_{_slug(s.label)}.csv", s.report)
    write_csv(out / "summary.csv", "validate-summary", ["key", "value"], res.summary.items())
    if cfg.dump_matrices:
        dump_sparse(out, sparse_operators(res.problem, cfg.kappa))
        bem.write_dense(out / "S.bin", res.assembled.S.matrix)
        bem.write_dense(out / "C.bin", res.assembled.rhs.info["mfie"].matrix)
    for k, v in res.summary.items():
        print(f"{k} = {v}")
    if not all(s.report.converged for s in res.solves):
        print("error: GMRES did not converge", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def _slug(label):
    return label.replace("(", "").replace(")", "").replace("-", "_")


def cmd_bench(cfg, out):
    def progress(row):
        print(f"{row['formulation']:>10} kappa={row['kappa']:.4g} n={row['n_dofs']} "
              f"iterations={row['iterations']} status={row['status']}", flush=True)

    rows = run_bench(cfg, progress)
    write_csv(out / "bench.csv", "bench", BENCH_COLUMNS, ([r[c] for c in BENCH_COLUMNS] for r in rows))
    if any(r["status"] != "ok" for r in rows):
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_spectrum(cfg, out):
    res = run_spectrum(cfg)
    rows = []
    for label, ev in res.eigenvalues.items():
        rows += [(label, i, z.real, z.imag) for i, z in enumerate(ev)]
    write_csv(out / "spectrum.csv", "spectrum", ["variant", "index", "real", "imag"], rows)
    summ = [(k, res.spread[k], res.distance_to_exact[k]) for k in res.eigenvalues]
    write_csv(out / "spectrum_summary.csv", "spectrum-summary",
              ["variant", "relative_spread", "hausdorff_to_exact"], summ)
    for row in summ:
        print("%-12s spread=%.4g hausdorff=%.4g" % row)
    return EXIT_OK


def cmd_pade_dump(cfg, out):
    n_terms = cfg.n_terms[0] if cfg.n_terms else 50
    c = compute_pade(n_terms, cfg.alpha)
    dom = set(dominant_set(c, cfg.tau).indices.tolist())
    rows = [
        (j + 1, c.a[j], c.b[j], c.A[j].real, c.A[j].imag, c.B[j].real, c.B[j].imag,
         abs(c.beta[j]), int(j in dom))
        for j in range(n_terms)
    ]
    header = ["j", "a_j", "b_j", "A_re", "A_im", "B_re", "B_im", "abs_beta", "dominant"]
    write_csv(out / "pade.csv", "pade", header, rows)
    print(f"N_p = {n_terms}, R0 = {c.R0:.12g}, C0 = {c.C0:.12g}, dominant = {len(dom)}")
    return EXIT_OK


def cmd_mesh_info(cfg, out):
    prob = build_problem(cfg)
    st = prob.stats
    r = prob.curvature.radius_per_vertex
    print(f"vertices = {st.n_vertices}")
    print(f"edges = {st.n_edges}")
    print(f"triangles = {st.n_triangles}")
    print(f"edge_dofs = {prob.rwg.n_dofs}")
    print(f"h = {st.h:.6g}")
    print(f"h_mean = {st.extra['h_mean']:.6g}")
    print(f"area = {st.total_area:.6g}")
    print(f"closed = {st.extra['closed']}")
    print(f"curvature_radius_min = {r.min():.6g}")
    print(f"curvature_radius_max = {r.max():.6g}")
    print(f"kappa_h = {cfg.kappa * st.h:.6g}")
    return EXIT_OK


COMMANDS = {
    "validate": cmd_validate,
    "bench": cmd_bench,
    "spectrum": cmd_spectrum,
    "pade-dump": cmd_pade_dump,
    "mesh-info": cmd_mesh_info,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _config_from_args(args)
        _set_threads(cfg.threads)
        out = Path(cfg.output_dir)
        with warnings.catch_warnings():
            warnings.simplefilter("always", RuntimeWarning)
            warnings.filterwarnings("ignore", message=".*TBB threading layer")
            warnings.showwarning = lambda m, *a, **k: print(f"warning: {m}", file=sys.stderr)
            return COMMANDS[args.command](cfg, out)
    except (UsageError, ConfigError, MeshError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalFailure, osrc.FactorizationError, ZeroDivisionError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
