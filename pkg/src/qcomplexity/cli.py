"""Command-line driver: sweep, regions, fit, check."""

from __future__ import annotations

import argparse
import csv
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import densities
from .densities import GPConvergenceError
from .measures import (
    SWEEP_COLUMNS,
    BoundViolation,
    MeasureRecord,
    Sweep,
    log_fit,
    measure_pair,
)
from .podi import (
    Trend,
    TrendError,
    boundary_lines,
    closed_shell_filter,
    fit_podi,
    gamma_curve,
    region_map,
)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3

MODELS = ("gaussian", "ho", "atom", "gp", "file")
PLOT_COLUMNS = (("S", "s"), ("S_max", "s_max"), ("C", "c"), ("D", "d"))


class CLIError(Exception):
    def __init__(self, message, code=EXIT_VALIDATION):
        super().__init__(message)
        self.code = code


def fmt(x):
    """Ten significant digits, the precision of every numeric output file."""
    if isinstance(x, (int,)) and not isinstance(x, bool):
        return str(x)
    return f"{x:.10g}"


def parse_n_list(text):
    """``"2,8,20"`` or ranges like ``"1-10,18"``."""
    values = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            values.extend(range(int(lo), int(hi) + 1))
        else:
            values.append(int(part))
    return values


@dataclass
class RunConfig:
    model: str = "ho"
    n_values: list = field(default_factory=list)
    length_scale: float = 1.0
    coupling: float = 0.1
    position_file: str | None = None
    momentum_file: str | None = None
    alpha_max: float = 20.0
    beta_max: float = 20.0
    mesh: float = 0.01
    out: Path = Path(".")
    threads: int = field(default_factory=lambda: os.cpu_count() or 1)
    shells: list | None = None
    skip_invalid: bool = False

    def validate(self, need_n=True):
        if self.model not in MODELS:
            raise CLIError(f"unknown model {self.model!r}; choose from {', '.join(MODELS)}")
        if need_n:
            if not self.n_values:
                raise CLIError("N list is empty")
            if any(b <= a for a, b in zip(self.n_values, self.n_values[1:])):
                raise CLIError("N list must be strictly increasing")
        if self.mesh <= 0:
            raise CLIError("--mesh must be positive")
        if self.alpha_max < 0 or self.beta_max < 0:
            raise CLIError("--alpha-max and --beta-max must be nonnegative")
        if self.threads < 1:
            raise CLIError("--threads must be >= 1")
        if self.model == "file" and not (self.position_file and self.momentum_file):
            raise CLIError("model 'file' needs --position-file and --momentum-file")
        return self


def build_pair(config, n):
    model = config.model
    if model == "gaussian":
        pair = densities.gaussian_pair(config.length_scale)
        return densities.DensityPair(pair.rho, pair.nk, n, "gaussian", pair.orbitals, pair.params)
    if model == "ho":
        return densities.ho_shell_pair(n, config.length_scale)
    if model == "atom":
        return densities.hydrogenic_atom_pair(n)
    if model == "gp":
        return densities.gp_ground_state_pair(n, config.coupling)
    pos = config.position_file.format(N=n)
    mom = config.momentum_file.format(N=n)
    return densities.load_tabulated_pair(pos, mom, n)


def _measure_one(config, n):
    try:
        return n, measure_pair(build_pair(config, n)), None
    except (BoundViolation, GPConvergenceError) as exc:
        return n, None, CLIError(f"N={n}: {exc}", EXIT_NUMERICAL)
    except (ValueError, OSError) as exc:
        return n, None, CLIError(f"N={n}: {exc}", EXIT_VALIDATION)


def run_sweep(config, log=None):
    """Measure every N of the config; returns a :class:`Sweep`."""
    log = log or sys.stderr
    with ThreadPoolExecutor(max_workers=config.threads) as pool:
        results = list(pool.map(lambda n: _measure_one(config, n), config.n_values))
    records = []
    for n, rec, err in results:
        if err is None:
            records.append(rec)
            continue
        if err.code == EXIT_VALIDATION and config.skip_invalid:
            print(f"skipping {err}", file=log)
            continue
        raise err
    if not records:
        raise CLIError("no valid N values")
    sweep = Sweep(config.model, records)
    if len(sweep) >= 3:
        sweep.s_fit = log_fit(sweep, "S")
        sweep.s_max_fit = log_fit(sweep, "S_max")
    return sweep


def write_sweep_csv(sweep, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(SWEEP_COLUMNS) + "\n")
        for rec in sweep.records:
            fh.write(",".join(fmt(v) if not isinstance(v, str) else v
                              for v in rec.as_row(sweep.system)) + "\n")


def read_sweep_csv(path):
    path = Path(path)
    if not path.exists():
        raise CLIError(f"{path}: no such file")
    with path.open(encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in SWEEP_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise CLIError(f"{path}: missing columns {', '.join(missing)}")
        records, system = [], None
        for lineno, row in enumerate(reader, start=2):
            try:
                vals = [float(row[c]) for c in SWEEP_COLUMNS[2:]]
                n = int(row["N"])
            except (TypeError, ValueError):
                raise CLIError(f"{path}: line {lineno}: malformed row") from None
            system = system or row["system"]
            records.append(MeasureRecord(n, *vals))
    try:
        return Sweep(system or "unknown", records)
    except ValueError as exc:
        raise CLIError(f"{path}: {exc}") from None


def write_keyvalue(path, items):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for k, v in items.items():
            fh.write(f"{k}={v}\n")


def write_columns(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("# " + " ".join(header) + "\n")
        for row in rows:
            fh.write(" ".join(fmt(v) for v in row) + "\n")


def cmd_sweep(config, out=None, log=None):
    out = out or sys.stdout
    log = log or sys.stderr
    config.validate()
    sweep = run_sweep(config, log)
    outdir = Path(config.out)
    outdir.mkdir(parents=True, exist_ok=True)
    write_sweep_csv(sweep, outdir / "sweep.csv")
    for label, attr in PLOT_COLUMNS:
        write_columns(outdir / f"{label}.dat", ("N", label),
                      zip(sweep.n_values, sweep.column(attr)))
    fits = {}
    for name, fit in (("S", sweep.s_fit), ("S_max", sweep.s_max_fit)):
        if fit is not None:
            fits[f"{name}_a"] = fmt(fit.a)
            fits[f"{name}_b"] = fmt(fit.b)
            fits[f"{name}_r"] = fmt(fit.r)
    if fits:
        write_keyvalue(outdir / "logfit.txt", fits)
    print(f"wrote {len(sweep)} rows to {outdir / 'sweep.csv'}", file=out)
    for k, v in fits.items():
        print(f"{k}={v}", file=out)
    return sweep


def _load_for_fit(path, config):
    sweep = read_sweep_csv(path)
    if config.shells:
        try:
            sweep = closed_shell_filter(sweep, config.shells)
        except ValueError as exc:
            raise CLIError(str(exc)) from None
    if len(sweep) < 3:
        raise CLIError(f"too few points: {len(sweep)} rows, need at least 3")
    deltas = sweep.column("delta")
    bad = [n for n, d in zip(sweep.n_values, deltas) if not 0 < d < 1]
    if bad:
        raise CLIError("Delta must lie strictly inside (0, 1); offending N: "
                       + ", ".join(str(n) for n in bad))
    return sweep


def cmd_regions(path, config, out=None, log=None):
    out = out or sys.stdout
    log = log or sys.stderr
    config.validate(need_n=False)
    sweep = _load_for_fit(path, config)
    t0 = time.perf_counter()
    rmap = region_map(sweep.column("delta"), config.alpha_max, config.beta_max,
                      config.mesh, config.threads)
    elapsed = time.perf_counter() - t0
    counts = rmap.counts()
    if rmap.present() <= {Trend.IRREGULAR}:
        raise CLIError("degenerate trend everywhere: Gamma(N) is flat for every (alpha, beta)")
    outdir = Path(config.out)
    outdir.mkdir(parents=True, exist_ok=True)
    rmap.write_csv(outdir / "regions.csv")
    summary = {
        "alpha_max": fmt(config.alpha_max),
        "beta_max": fmt(config.beta_max),
        "mesh": fmt(config.mesh),
        "points": str(rmap.labels.size),
        "decreasing": str(counts[0]),
        "convex": str(counts[1]),
        "increasing": str(counts[2]),
        "irregular": str(counts[3]),
    }
    try:
        lines = boundary_lines(rmap)
    except ValueError as exc:
        print(f"WARN: no boundary lines: {exc}", file=log)
    else:
        summary.update({
            "decreasing_slope": fmt(lines.decreasing.slope),
            "decreasing_correlation": fmt(lines.decreasing.correlation),
            "increasing_slope": fmt(lines.increasing.slope),
            "increasing_correlation": fmt(lines.increasing.correlation),
        })
        summary.update({f"{k}_region": v for k, v in lines.table_row().items()})
    write_keyvalue(outdir / "regions_summary.txt", summary)
    for k, v in summary.items():
        print(f"{k}={v}", file=out)
    print(f"region map: {rmap.labels.size} points in {elapsed:.2f} s "
          f"({config.threads} threads)", file=log)
    return rmap


def cmd_fit(path, config, out=None, log=None):
    out = out or sys.stdout
    log = log or sys.stderr
    config.validate(need_n=False)
    sweep = _load_for_fit(path, config)
    deltas = sweep.column("delta")
    c = sweep.column("c")
    rmap = region_map(deltas, config.alpha_max, config.beta_max, config.mesh, config.threads)
    result = fit_podi(c, deltas, rmap, config.threads)
    outdir = Path(config.out)
    outdir.mkdir(parents=True, exist_ok=True)
    record = result.as_dict()
    write_keyvalue(outdir / "podi.txt", record)
    gamma = gamma_curve(deltas, result.alpha, result.beta)
    write_columns(outdir / "gamma_fit.dat", ("N", "C", "Gamma"),
                  zip(sweep.n_values, c, gamma))
    for k, v in record.items():
        print(f"{k}={v}", file=out)
    if result.on_boundary:
        print(f"WARN: optimum (alpha={fmt(result.alpha)}, beta={fmt(result.beta)}) lies on "
              "the search-range boundary; extend --alpha-max/--beta-max", file=log)
    return result


def cmd_check(path, out=None):
    out = out or sys.stdout
    sweep = read_sweep_csv(path)
    failures = 0
    for rec in sweep.records:
        try:
            # 10-digit CSV values: allow rounding in S = S_r + S_k
            rec.check(tol=1e-6, sum_tol=1e-8)
            print(f"N={rec.n_particles}: ok", file=out)
        except BoundViolation as exc:
            failures += 1
            print(f"N={rec.n_particles}: FAIL {exc}", file=out)
    if failures:
        raise CLIError(f"{failures} row(s) violate the record invariants", EXIT_NUMERICAL)
    return sweep


def build_parser():
    parser = argparse.ArgumentParser(
        prog="qcomplexity",
        description="LMC/SDL complexity sweeps and order-disorder index fits.")
    sub = parser.add_subparsers(dest="command", required=True)

    def shared(p, sweep_input):
        p.add_argument("--model", choices=MODELS, default="ho")
        p.add_argument("--n", default="", help="particle numbers, e.g. 2,8,20 or 1-54")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--alpha-max", type=float, default=20.0)
        p.add_argument("--beta-max", type=float, default=20.0)
        p.add_argument("--mesh", type=float, default=0.01)
        p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
        p.add_argument("--shells", default=None, help="restrict a sweep to these N before fitting")
        p.add_argument("--skip-invalid", action="store_true")
        p.add_argument("--position-file", default=None, help="x,f table; '{N}' is substituted")
        p.add_argument("--momentum-file", default=None, help="x,f table; '{N}' is substituted")
        p.add_argument("--coupling", type=float, default=0.1, help="GP per-atom coupling")
        p.add_argument("--length-scale", type=float, default=1.0,
                       help="oscillator length (ho) or Gaussian width (gaussian)")
        if sweep_input:
            p.add_argument("sweep_csv", help="sweep CSV produced by 'sweep'")

    shared(sub.add_parser("sweep", help="measure a model over N"), False)
    shared(sub.add_parser("regions", help="alpha-beta trend regions of a sweep"), True)
    shared(sub.add_parser("fit", help="fit the order-disorder pair to C(N)"), True)
    check = sub.add_parser("check", help="verify record invariants of a sweep file")
    check.add_argument("sweep_csv")
    return parser


def config_from_args(args):
    try:
        return RunConfig(
            model=args.model,
            n_values=parse_n_list(args.n),
            length_scale=args.length_scale,
            coupling=args.coupling,
            position_file=args.position_file,
            momentum_file=args.momentum_file,
            alpha_max=args.alpha_max,
            beta_max=args.beta_max,
            mesh=args.mesh,
            out=Path(args.out),
            threads=args.threads,
            shells=parse_n_list(args.shells) if args.shells else None,
            skip_invalid=args.skip_invalid,
        )
    except ValueError as exc:
        raise CLIError(f"bad argument: {exc}") from None


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "check":
            cmd_check(args.sweep_csv)
            return EXIT_OK
        config = config_from_args(args)
        if args.command == "sweep":
            cmd_sweep(config)
        elif args.command == "regions":
            cmd_regions(args.sweep_csv, config)
        else:
            cmd_fit(args.sweep_csv, config)
    except CLIError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (BoundViolation, GPConvergenceError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (TrendError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
