"""Command-line driver: ``speigen {solve,features,report,validate,collapse}``.

Exit status: 0 on success, 2 when some state failed to converge (or was
flagged unreliable by ``validate``), 1 on usage or configuration errors.
"""

from __future__ import annotations

import argparse
import logging
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import tables
from .errors import SpEigenError
from .features import extract_features, find_extrema, velocity_curve
from .fits import build_heuristic_report
from .io import ArchiveNotFound, StateCache, write_csv, write_json
from .solver import MAX_N, SolverConfig, solve_stationary_state, validate_resolution
from .universality import DEFAULT_VELOCITY_WINDOW, collapse_summary, rescale_velocity

log = logging.getLogger("speigen")

EXIT_OK, EXIT_USAGE, EXIT_PARTIAL = 0, 1, 2

# flag name -> (SolverConfig field, type)
SOLVER_FLAGS = {
    "tol_inner": ("inner_tol", float),
    "tol_outer": ("outer_tol", float),
    "growth": ("domain_growth_factor", float),
    "mixing": ("mixing", float),
    "grid_points": ("grid_points", int),
    "initial_domain": ("initial_domain", float),
    "max_inner": ("max_inner_iters", int),
    "max_outer": ("max_outer_iters", int),
    "integrator": ("integrator", str),
    "quadrature": ("quadrature", str),
}
RUN_FLAGS = {"n": str, "out": str, "cache": str, "jobs": int, "format": str, "threshold": float, "window": str}

FORMATS_HELP = """\
output files (all CSVs have one header row, floats as %.12e):
  features: nodes_nNNN.csv (i,z), nodal_distances_nNNN.csv (i,right_node,distance),
            extrema_nNNN.csv (i,r,f), velocity_extrema_nNNN.csv (i,r,v),
            rescaled_nodes_nNNN.csv (i,Z,D); with --format json one features_nNNN.json
  report:   report.json, support_law.csv (n,r_hat_n), outer_nodes.csv (n,z_n,d_n_minus_1),
            amplitude.csv (n,i,r_hat,abs_f,included), exponents.csv (n,a,b,r_min,monotone),
            plateau.csv (n,sigma,q,r_lo,r_hi), outer_velocity.csv (n,r_2n,v_2n),
            rescaled_velocity.csv (n,R,V), nodal_collapse.csv (n_a,n_b,metric)
  collapse: collapse.json, rescaled_velocity.csv, nodal_collapse.csv
  validate: validation.json
"""


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def parse_n_list(text: str) -> list[int]:
    """Parse ``"0..8"``, ``"10..40:5"``, ``"3,5,8"`` or a mix like ``"0..3,8"``."""
    out: set[int] = set()
    for part in str(text).replace(" ", "").split(","):
        if not part:
            continue
        m = re.fullmatch(r"(\d+)\.\.(\d+)(?::(\d+))?", part)
        if m:
            a, b, s = int(m[1]), int(m[2]), int(m[3] or 1)
            if b < a or s < 1:
                raise UsageError(f"bad range {part!r}")
            out.update(range(a, b + 1, s))
        elif part.isdigit():
            out.add(int(part))
        else:
            raise UsageError(f"cannot parse excitation list element {part!r}")
    if not out:
        raise UsageError("empty excitation list")
    bad = [n for n in out if n > MAX_N]
    if bad:
        raise UsageError(f"excitation indices above {MAX_N} are not supported: {sorted(bad)}")
    return sorted(out)


def read_config_file(path) -> dict:
    """``key = value`` lines; keys are flag names with ``-`` or ``_``; ``#`` comments."""
    values = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.lstrip("-").replace("-", "_")
        if key not in SOLVER_FLAGS and key not in RUN_FLAGS:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = value
    return values


@dataclass
class RunConfig:
    n_values: list[int]
    solver_overrides: dict = field(default_factory=dict)
    out: Path = Path("speigen-out")
    cache: Path | None = None
    jobs: int = 1
    format: str = "csv"
    threshold: float = 1e-4
    window: tuple[float, float] = DEFAULT_VELOCITY_WINDOW

    def solver_config(self, n: int) -> SolverConfig:
        return SolverConfig(n=n, **self.solver_overrides)


def build_run_config(args) -> RunConfig:
    merged = read_config_file(args.config) if getattr(args, "config", None) else {}
    for key in list(SOLVER_FLAGS) + list(RUN_FLAGS):
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    if "n" not in merged:
        raise UsageError("no excitation indices given (use --n or a config file)")
    overrides = {}
    for key, (fname, typ) in SOLVER_FLAGS.items():
        if key in merged:
            try:
                overrides[fname] = typ(merged[key])
            except ValueError as exc:
                raise UsageError(f"bad value for {key}: {merged[key]!r}") from exc
    rc = RunConfig(n_values=parse_n_list(merged["n"]), solver_overrides=overrides)
    if "out" in merged:
        rc.out = Path(merged["out"])
    if "cache" in merged:
        rc.cache = Path(merged["cache"])
    if "jobs" in merged:
        rc.jobs = max(1, int(merged["jobs"]))
    if "format" in merged:
        if merged["format"] not in ("csv", "json"):
            raise UsageError("--format must be csv or json")
        rc.format = merged["format"]
    if "threshold" in merged:
        rc.threshold = float(merged["threshold"])
    if "window" in merged:
        try:
            lo, hi = (float(x) for x in str(merged["window"]).split(","))
        except ValueError as exc:
            raise UsageError("--window expects LO,HI") from exc
        rc.window = (lo, hi)
    try:
        for n in rc.n_values:
            rc.solver_config(n)
    except (SpEigenError, TypeError) as exc:
        raise UsageError(f"invalid solver configuration: {exc}") from exc
    return rc


def _solve_one(config: SolverConfig):
    try:
        return solve_stationary_state(config), None
    except SpEigenError as exc:
        return None, f"{type(exc).__name__}: {exc}"


def _summary_line(state) -> str:
    try:
        support = f"{find_extrema(state.f)[0][-1]:.6g}"
    except SpEigenError:
        support = "?"
    flag = "yes" if state.converged else "NO"
    return (
        f"n={state.n:3d}  eps={state.epsilon:.10e}  r_hat_n={support:>10}  "
        f"norm_res={state.norm_residual:.1e}  eq_res={state.eq_residual:.1e}  "
        f"iters={state.iterations[0]}/{state.iterations[1]}  converged={flag}"
    )


def cmd_solve(rc: RunConfig, out=None) -> int:
    """Solve every requested state not already in the cache."""
    out = out or sys.stdout
    cache = StateCache(rc.cache)
    todo, hits = [], 0
    for n in rc.n_values:
        cfg = rc.solver_config(n)
        if cache.has(cfg):
            hits += 1
        else:
            todo.append(cfg)
    failures = {}
    if rc.jobs > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=rc.jobs) as pool:
            results = list(pool.map(_solve_one, todo))
    else:
        results = [_solve_one(cfg) for cfg in todo]
    status = EXIT_OK
    for cfg, (state, err) in zip(todo, results):
        if state is None:
            failures[cfg.n] = err
            status = EXIT_PARTIAL
            continue
        cache.put(state)
        if not state.converged:
            status = EXIT_PARTIAL
    print(f"solved {len(todo) - len(failures)}, cache hits {hits}, failures {len(failures)}", file=out)
    for n in rc.n_values:
        if n in failures:
            print(f"n={n:3d}  FAILED  {failures[n]}", file=out)
            continue
        state = cache.get(rc.solver_config(n))
        print(_summary_line(state), file=out)
        if not state.converged:
            print(f"       {state.message}", file=out)
    return status


def load_states(rc: RunConfig):
    cache = StateCache(rc.cache)
    return [cache.get(rc.solver_config(n)) for n in rc.n_values]


def cmd_features(rc: RunConfig, out=None) -> int:
    """Export per-state nodes, distances, extrema and rescaled patterns."""
    out = out or sys.stdout
    rc.out.mkdir(parents=True, exist_ok=True)
    for state in load_states(rc):
        n = state.n
        feats = extract_features(state)
        curve = velocity_curve(state, feats)
        blocks = {
            "nodes": tables.node_table(feats),
            "nodal_distances": tables.nodal_distance_table(feats),
            "extrema": tables.extrema_table(feats),
            "velocity_extrema": tables.velocity_extrema_table(curve),
            "rescaled_nodes": tables.rescaled_nodal_table(feats),
        }
        if rc.format == "json":
            payload = {k: {"columns": h, "rows": [list(r) for r in rows]} for k, (h, rows) in blocks.items()}
            payload["n"] = n
            write_json(rc.out / f"features_n{n:03d}.json", payload)
        else:
            for name, (header, rows) in blocks.items():
                write_csv(rc.out / f"{name}_n{n:03d}.csv", header, rows)
        print(f"n={n:3d}: {feats.nodes.size} nodes, {feats.extrema_r.size} extrema, "
              f"{curve.extrema_r.size} velocity extrema", file=out)
    return EXIT_OK


def _analyse(states):
    feats, curves = {}, {}
    for st in states:
        if not st.converged:
            continue
        try:
            feats[st.n] = extract_features(st)
            curves[st.n] = velocity_curve(st, feats[st.n])
        except SpEigenError:
            feats.pop(st.n, None)
    return feats, curves


def cmd_report(rc: RunConfig, out=None) -> int:
    """Fit every scaling law over the batch and write the figure datasets."""
    out = out or sys.stdout
    states = load_states(rc)
    cfg_hash = rc.solver_config(rc.n_values[0]).config_hash()
    report = build_heuristic_report(states, config_hash=cfg_hash)
    feats, curves = _analyse(states)
    feats = {n: f for n, f in feats.items() if n in report.states}
    curves = {n: c for n, c in curves.items() if n in report.states}
    collapse = collapse_summary(curves, feats, rc.window)
    payload = report.to_dict()
    payload["collapse"] = collapse
    rc.out.mkdir(parents=True, exist_ok=True)
    write_json(rc.out / "report.json", payload)
    write_csv(rc.out / "support_law.csv", *tables.support_table(report))
    write_csv(rc.out / "outer_nodes.csv", *tables.outer_node_table(report))
    write_csv(rc.out / "amplitude.csv", *tables.amplitude_table(report, feats))
    write_csv(rc.out / "exponents.csv", *tables.exponent_table(report))
    write_csv(rc.out / "plateau.csv", *tables.plateau_table(report, curves))
    write_csv(rc.out / "outer_velocity.csv", *tables.outer_velocity_table(report))
    write_csv(rc.out / "rescaled_velocity.csv", *tables.rescaled_velocity_table([rescale_velocity(c) for c in curves.values()]))
    write_csv(rc.out / "nodal_collapse.csv", *tables.nodal_collapse_table(collapse.get("nodal_pairs", [])))
    for name in report.present_laws():
        fit = getattr(report, name, None)
        if fit is not None:
            coeffs = ", ".join(f"{c:.6g}" for c in fit.coefficients)
            print(f"{name:20s} {fit.kind:14s} ({coeffs})  R2={fit.r_squared:.6f}  points={fit.n_points}", file=out)
        else:
            print(f"{name:20s} per-state", file=out)
    for name, why in sorted(report.omitted.items()):
        print(f"{name:20s} omitted: {why}", file=out)
    for n, why in sorted(report.excluded.items()):
        print(f"n={n} excluded: {why}", file=out)
    if "velocity_metric" in collapse:
        print(f"velocity collapse {collapse['velocity_metric']:.4f} (baseline {collapse['baseline_metric']:.4f}) "
              f"on R in {list(rc.window)}", file=out)
    return EXIT_PARTIAL if report.excluded else EXIT_OK


def cmd_validate(rc: RunConfig, out=None) -> int:
    """Re-solve each cached state at twice the resolution and compare."""
    out = out or sys.stdout
    reports = []
    status = EXIT_OK
    for state in load_states(rc):
        rep = validate_resolution(state, rc.threshold)
        reports.append(rep.as_dict())
        flag = "ok" if rep.reliable else "UNRELIABLE"
        print(
            f"n={rep.n:3d}  d_eps={rep.eps_change:.2e}  d_nodes={rep.node_change:.2e}  "
            f"d_extrema_r={rep.extremum_radius_change:.2e}  d_amp={rep.amplitude_change:.2e}  "
            f"ppw={rep.points_per_wavelength:.0f}  {flag}",
            file=out,
        )
        if not rep.reliable:
            status = EXIT_PARTIAL
    rc.out.mkdir(parents=True, exist_ok=True)
    write_json(rc.out / "validation.json", {"threshold": rc.threshold, "states": reports})
    return status


def cmd_collapse(rc: RunConfig, out=None) -> int:
    """Universality metrics of the rescaled rotation curves and nodal patterns."""
    out = out or sys.stdout
    feats, curves = _analyse(load_states(rc))
    summary = collapse_summary(curves, feats, rc.window)
    rc.out.mkdir(parents=True, exist_ok=True)
    write_json(rc.out / "collapse.json", summary)
    write_csv(rc.out / "rescaled_velocity.csv", *tables.rescaled_velocity_table([rescale_velocity(c) for c in curves.values()]))
    write_csv(rc.out / "nodal_collapse.csv", *tables.nodal_collapse_table(summary.get("nodal_pairs", [])))
    if "velocity_metric" in summary:
        print(f"velocity collapse {summary['velocity_metric']:.4f}  baseline {summary['baseline_metric']:.4f}", file=out)
    for a, b, m in summary.get("nodal_pairs", []):
        print(f"nodal n={a}/{b}: {m:.4f}", file=out)
    return EXIT_OK


COMMANDS = {
    "solve": cmd_solve,
    "features": cmd_features,
    "report": cmd_report,
    "validate": cmd_validate,
    "collapse": cmd_collapse,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--n", help="excitation indices: 0..8, 10..40:5, 3,5,8")
    common.add_argument("--config", help="key = value file mirroring the flags (flags win)")
    common.add_argument("--cache", help="state cache directory (default $SP_EIGEN_CACHE or ./.speigen-cache)")
    common.add_argument("--out", help="output directory (default ./speigen-out)")
    common.add_argument("--jobs", type=int, help="parallel solver processes")
    common.add_argument("--format", choices=("csv", "json"), help="table format for features")
    common.add_argument("--tol-inner", dest="tol_inner", type=float, help="relative eps tolerance, inner loop")
    common.add_argument("--tol-outer", dest="tol_outer", type=float, help="relative eps tolerance, domain growth")
    common.add_argument("--growth", type=float, help="domain growth factor (> 1)")
    common.add_argument("--mixing", type=float, help="potential mixing in [0, 1]")
    common.add_argument("--grid-points", dest="grid_points", type=int, help="points on the initial domain")
    common.add_argument("--initial-domain", dest="initial_domain", type=float, help="initial r_max")
    common.add_argument("--max-inner", dest="max_inner", type=int, help="inner iteration cap")
    common.add_argument("--max-outer", dest="max_outer", type=int, help="domain growth cap")
    common.add_argument("--integrator", choices=("numerov", "rk4"))
    common.add_argument("--quadrature", choices=("trapezoid", "simpson"))
    common.add_argument("--threshold", type=float, help="validate: relative change threshold")
    common.add_argument("--window", help="collapse window LO,HI in rescaled radius (default 0.1,1)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(
        prog="speigen",
        description="Excited Schrödinger-Poisson stationary states, their features and scaling laws.",
        epilog=FORMATS_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, fn in COMMANDS.items():
        sub.add_parser(
            name, parents=[common], help=fn.__doc__.splitlines()[0],
            epilog=FORMATS_HELP, formatter_class=argparse.RawDescriptionHelpFormatter,
        )
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        rc = build_run_config(args)
        return COMMANDS[args.command](rc)
    except UsageError as exc:
        print(f"speigen: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ArchiveNotFound as exc:
        print(f"speigen: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, SpEigenError) as exc:
        print(f"speigen: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
