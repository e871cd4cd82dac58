"""Command line: verification suites and CSV/JSON data export.

Subcommands
-----------
``verify``          run the structure-equation suites on a chart
``fibrate-so3``     trace SO(3) x Id_2 fibres, one file per value of ``F``
``fibrate-sp1``     integrate Sp(1) x Id_1 fibres, one file per launch point
``phase-portrait``  sample the vector field on a grid, plus the critical curves
``moment-map``      tabulate one of the multi-moment maps

Exit codes: 0 success, 1 computational failure (including a failed suite or
an unwritable output path), 2 usage error or out-of-domain parameter.

Numbers are written with ``%.17g`` (CSV) or Python's shortest round-trip
``repr`` (JSON), so equal inputs give byte-identical files.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import so3, sp1
from .errors import DomainError
from .geometry import multi_moment_fibre
from .suites import DEFAULT_TOLERANCES, ROW_COLUMNS, run_suites

OUTPUT_ENV = "BSCAYLEY_OUTPUT_DIR"

SCHEMAS = {
    "verify": ROW_COLUMNS,
    "fibrate-so3": ("alpha", "u", "F", "eta_residual"),
    "fibrate-sp1": ("alpha", "r", "eta_residual", "event_tags"),
    "phase-portrait": ("alpha", "r", "f1", "f2"),
    "critical-curve": ("alpha", "r"),
    "moment-map-fibre": ("r", "nu"),
    "moment-map-so3": ("alpha", "u", "nu"),
    "moment-map-sp1": ("alpha", "r", "nu"),
}


class UsageError(Exception):
    """Bad command-line input that argparse itself cannot catch."""


# formatting -------------------------------------------------------------------------------


def _cell(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return "%.17g" % float(x)


def _json_value(x):
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_, int, np.integer)):
        return int(x)
    x = float(x)
    return x if math.isfinite(x) else None


def render(columns, rows, fmt: str) -> str:
    if fmt == "json":
        payload = {"columns": list(columns), "rows": [[_json_value(v) for v in row] for row in rows]}
        return json.dumps(payload, indent=None, separators=(",", ":")) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        if len(row) != len(columns):
            raise RuntimeError(f"row has {len(row)} fields, schema has {len(columns)}")
        writer.writerow([_cell(v) for v in row])
    return buf.getvalue()


def _tag(x: float) -> str:
    """Compact, filename-safe rendering of a parameter value."""
    return format(float(x), "g").replace("-", "m").replace("+", "")


class Collector:
    """Single writer for all output files of one run."""

    def __init__(self, directory: Path, fmt: str):
        self.directory = directory
        self.fmt = fmt
        self.written: list[Path] = []

    def write(self, stem: str, schema: str, rows) -> Path:
        path = self.directory / f"{stem}.{self.fmt}"
        text = render(SCHEMAS[schema], rows, self.fmt)
        self.directory.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
        self.written.append(path)
        return path


def _map(fn, items, workers: int):
    """Ordered map; a process pool only when it can help."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))


# argument types -----------------------------------------------------------------------------


def _nonneg(text: str) -> float:
    try:
        x = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not math.isfinite(x) or x < 0:
        raise argparse.ArgumentTypeError(f"must be a finite number >= 0, got {text}")
    return x


def _positive(text: str) -> float:
    x = _nonneg(text)
    if x == 0:
        raise argparse.ArgumentTypeError("must be > 0")
    return x


def _posint(text: str) -> int:
    try:
        n = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if n < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return n


def _float_list(text: str) -> list[float]:
    try:
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not vals or not all(math.isfinite(v) for v in vals):
        raise argparse.ArgumentTypeError(f"expected finite numbers, got {text!r}")
    return vals


def _pair(text: str) -> tuple[float, float]:
    vals = _float_list(text)
    if len(vals) != 2:
        raise argparse.ArgumentTypeError(f"expected two numbers ALPHA,R, got {text!r}")
    return vals[0], vals[1]


def _grid(text: str) -> tuple[int, int]:
    parts = text.lower().split("x")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"grid must look like 200x200, got {text!r}")
    return _posint(parts[0]), _posint(parts[1])


# subcommands ----------------------------------------------------------------------------------


def cmd_verify(args, out: Collector) -> int:
    charts = ("so3", "sp1") if args.chart == "all" else (args.chart,)
    tolerances = {k: getattr(args, "tol_" + k) for k in DEFAULT_TOLERANCES}
    results = []
    for chart in charts:
        results += run_suites(chart, args.c, n_points=args.points, fd_step=args.fd_step, seed=args.seed,
                              tolerances=tolerances)
    rows = [r.row() for r in results]
    sys.stdout.write(render(ROW_COLUMNS, rows, args.format))
    if args.report:
        out.write(args.report, "verify", rows)
    failed = [r for r in results if not r.passed]
    for r in failed:
        print(f"FAIL {r.chart}/{r.suite}: {r.max_residual:.3e} >= {r.tolerance:.1e}", file=sys.stderr)
    return 1 if failed else 0


def _so3_task(job):
    beta0, delta0, v, F, c, n = job
    params = so3.SO3FibreParams(beta0, delta0, v, F, c)
    curve = so3.trace_level_set(params, n=n)
    so3.curve_eta_residuals(curve)
    return curve.topology, curve.alpha_end, curve.rows()


def cmd_fibrate_so3(args, out: Collector) -> int:
    if any(F <= 0 for F in args.F):
        raise DomainError("every F must be > 0")
    jobs = [(args.beta0, args.delta0, args.v, F, args.c, args.samples) for F in args.F]
    status = 0
    for F, (topology, alpha_end, rows) in zip(args.F, _map(_so3_task, jobs, args.workers)):
        path = out.write(f"so3_c{_tag(args.c)}_v{_tag(args.v)}_F{_tag(F)}", "fibrate-so3", rows)
        eta = max((r[3] for r in rows if math.isfinite(r[3])), default=math.nan)
        print(f"{path}\tF={F:g}\ttopology={topology}\talpha_end={alpha_end:.12g}\tmax_eta={eta:.2e}")
        if not eta < args.eta_tol:
            status = 1
    return status


def _sp1_task(job):
    alpha, r, c, green, stride = job
    launch = sp1.green_launch(c) if green else sp1.Sp1PhaseState(alpha, r, c)
    curve = sp1.integrate_fibre(launch)
    sp1.verify_cayley_sp1(curve, stride=stride)
    return curve.topology, curve.ends, curve.rows()


def cmd_fibrate_sp1(args, out: Collector) -> int:
    launches = list(args.launch or [])
    if not launches:
        launches = [(-1.2, 0.2), (-1.2, 1.0), (sp1.ALPHA_INF, 1.0), (0.5, 1.0)]
    jobs = [(a, r, args.c, False, args.stride) for a, r in launches]
    if args.green:
        if args.c == 0:
            raise DomainError("the green fibre exists only for c > 0")
        jobs.append((math.nan, math.nan, args.c, True, args.stride))
    for a, r, *_ in jobs:
        if math.isfinite(r) and (r < 0 or not -math.pi / 2 <= a <= math.pi / 2):
            raise DomainError(f"launch ({a}, {r}) is outside -pi/2 <= alpha <= pi/2, r >= 0")
    status = 0
    for k, (job, (topology, ends, rows)) in enumerate(zip(jobs, _map(_sp1_task, jobs, args.workers))):
        stem = f"sp1_c{_tag(args.c)}_green" if job[3] else f"sp1_c{_tag(args.c)}_{k:02d}"
        path = out.write(stem, "fibrate-sp1", rows)
        eta = max((r[2] for r in rows if math.isfinite(r[2])), default=math.nan)
        print(f"{path}\ttopology={topology}\tbackward={ends.get('backward')}\tforward={ends.get('forward')}"
              f"\tmax_eta={eta:.2e}")
        if math.isfinite(eta) and not eta < args.eta_tol:
            status = 1
    return status


def cmd_phase_portrait(args, out: Collector) -> int:
    na, nr = args.grid
    alpha = np.linspace(-math.pi / 2, math.pi / 2, na)
    r = np.linspace(0.0, args.r_max, nr)
    A, R = np.meshgrid(alpha, r, indexing="ij")
    f1, f2 = sp1.f1_f2(A, R, args.c)
    rows = zip(A.ravel(), R.ravel(), f1.ravel(), f2.ravel())
    paths = [out.write(f"phase_c{_tag(args.c)}_grid", "phase-portrait", rows)]
    rc = r[r > 0] if args.c == 0 else r
    paths.append(out.write(f"phase_c{_tag(args.c)}_alpha_c", "critical-curve", zip(sp1.alpha_c(rc, args.c), rc)))
    paths.append(out.write(f"phase_c{_tag(args.c)}_beta_c", "critical-curve", zip(sp1.beta_c(rc, args.c), rc)))
    for p in paths:
        print(p)
    return 0


def cmd_moment_map(args, out: Collector) -> int:
    c = args.c
    if args.action == "fibre":
        r = np.asarray(args.r if args.r is not None else np.linspace(0.0, args.r_max, args.grid[1]))
        rows = [(x, multi_moment_fibre(float(x), c)) for x in r]
        path = out.write(f"moment_fibre_c{_tag(c)}", "moment-map-fibre", rows)
    elif args.action == "so3":
        na, nu = args.grid
        alpha = np.linspace(0.0, math.pi / 2, na)
        u = np.linspace(0.0, args.r_max, nu)
        A, U = np.meshgrid(alpha, u, indexing="ij")
        nu_vals = so3.multi_moment_so3(A, U, args.v, c)
        path = out.write(f"moment_so3_c{_tag(c)}_v{_tag(args.v)}", "moment-map-so3",
                         zip(A.ravel(), U.ravel(), nu_vals.ravel()))
    else:
        na, nr = args.grid
        alpha = np.linspace(-math.pi / 2, math.pi / 2, na)
        r = np.linspace(0.0, args.r_max, nr)
        A, R = np.meshgrid(alpha, r, indexing="ij")
        nu_vals = sp1.multi_moment_sp1(A, R, c)
        path = out.write(f"moment_sp1_c{_tag(c)}", "moment-map-sp1", zip(A.ravel(), R.ravel(), nu_vals.ravel()))
    print(path)
    return 0


# parser -------------------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--c", type=_nonneg, default=1.0, help="size of the zero section, c >= 0 (default 1)")
    common.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    common.add_argument("--format", choices=("csv", "json"), default="csv", help="output format (default csv)")
    common.add_argument("--output-dir", default=None,
                        help=f"directory for output files (default ${OUTPUT_ENV}, else the current directory)")
    common.add_argument("--workers", type=_posint, default=os.cpu_count() or 1,
                        help="worker processes for parameter sweeps (default: number of CPUs)")

    parser = argparse.ArgumentParser(prog="bscayley", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", parents=[common], help="run the structure-equation suites",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--chart", choices=("so3", "sp1", "all"), default="all")
    p.add_argument("--points", type=_posint, default=200, help="random sample points per chart")
    p.add_argument("--fd-step", type=_positive, default=1e-5, help="finite-difference step for d(Phi)")
    p.add_argument("--report", default=None, help="also write the report to OUTPUT_DIR/REPORT.{csv,json}")
    for name, tol in DEFAULT_TOLERANCES.items():
        p.add_argument("--tol-" + name.replace("_", "-"), dest="tol_" + name, type=_positive, default=tol,
                       help=f"tolerance for the {name.replace('_', ' ')} suite")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("fibrate-so3", parents=[common], help="trace SO(3) x Id_2 fibres",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--v", type=_positive, default=1.0, help="conserved ratio v = s/t")
    p.add_argument("--F", type=_float_list, default=[0.2, 0.5, 1.0, 2.0], help="comma-separated values of F")
    p.add_argument("--beta0", type=float, default=0.0)
    p.add_argument("--delta0", type=float, default=0.0)
    p.add_argument("--samples", type=_posint, default=401, help="samples per fibre")
    p.add_argument("--eta-tol", type=_positive, default=1e-6, help="Cayley residual tolerance")
    p.set_defaults(func=cmd_fibrate_so3)

    p = sub.add_parser("fibrate-sp1", parents=[common], help="integrate Sp(1) x Id_1 fibres",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--launch", type=_pair, action="append", metavar="ALPHA,R",
                   help="launch point; repeat for several fibres (write --launch=-1,0.5 for negative alpha;"
                        " a small default set is used if omitted)")
    p.add_argument("--green", action="store_true", help="also integrate the fibre through the equilibrium")
    p.add_argument("--stride", type=_posint, default=1, help="check the Cayley residual at every k-th sample")
    p.add_argument("--eta-tol", type=_positive, default=1e-6, help="Cayley residual tolerance")
    p.set_defaults(func=cmd_fibrate_sp1)

    p = sub.add_parser("phase-portrait", parents=[common], help="vector field grid and critical curves",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--grid", type=_grid, default=(200, 200), help="ALPHAxR resolution")
    p.add_argument("--r-max", type=_positive, default=3.0)
    p.set_defaults(func=cmd_phase_portrait)

    p = sub.add_parser("moment-map", parents=[common], help="tabulate a multi-moment map",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--action", choices=("fibre", "so3", "sp1"), required=True)
    p.add_argument("--r", type=_float_list, default=None,
                   help="explicit radii for --action fibre (otherwise a grid up to --r-max)")
    p.add_argument("--v", type=_positive, default=1.0, help="v for --action so3")
    p.add_argument("--grid", type=_grid, default=(200, 200), help="ALPHAxRADIUS resolution")
    p.add_argument("--r-max", type=_positive, default=3.0, help="largest r (or u for --action so3)")
    p.set_defaults(func=cmd_moment_map)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse reports usage errors with code 2 and --help with 0
        return int(exc.code or 0)
    directory = Path(args.output_dir or os.environ.get(OUTPUT_ENV) or ".")
    out = Collector(directory, args.format)
    try:
        return args.func(args, out)
    except (DomainError, UsageError) as exc:
        print(f"bscayley {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"bscayley {args.command}: cannot write output: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # computational failure, reported rather than raised
        print(f"bscayley {args.command}: computation failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
