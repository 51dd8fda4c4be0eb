"""Command-line front end.

Subcommands::

    lrorder fit            --input data.csv [--format json|csv] [--output PATH] [--verify PATH]
    lrorder ci             --input data.csv --method lrt --level 0.95 --points 0.5,1
    lrorder simulate       --scenario study.cfg [--reps N] [--seed S] [--threads T] --output PREFIX
    lrorder quantile-table [--reps N] [--seed S] --output PATH

Input files are UTF-8 CSV with a ``value,group`` header; ``group`` is one
of two labels (``x`` and ``y`` by default, case-insensitive).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import DegenerateOrderError, LROError
from .estimators import TwoSample, fit_lro, odc_diagram, odc_hull
from .inference import METHODS, IntervalEstimate, _num, interval
from .quantiles import DEFAULT_CHERNOFF, DEFAULT_LRT, build_quantile_table
from .simulation import parse_config, run_study

ORDER_ASSUMPTION = (
    "likelihood ratio order needs at least one pair with x < y "
    "(largest y must exceed smallest x)"
)


class CliError(Exception):
    pass


# -- input -----------------------------------------------------------------

def read_two_sample(path, x_label: str = "x", y_label: str = "y") -> TwoSample:
    """Parse a ``value,group`` CSV into a :class:`TwoSample`.

    Rows with unparseable or non-finite values are rejected with their line
    number rather than skipped.
    """
    text = sys.stdin.read() if str(path) == "-" else Path(path).read_text(encoding="utf-8")
    reader = csv.reader(io.StringIO(text))
    header = None
    xs: list[float] = []
    ys: list[float] = []
    labels = {x_label.lower(): xs, y_label.lower(): ys}
    for row in reader:
        if not row or all(not c.strip() for c in row):
            continue
        if header is None:
            header = [c.strip().lower() for c in row]
            if "value" not in header or "group" not in header:
                raise CliError(f"line {reader.line_num}: header must contain 'value' and 'group'")
            vi, gi = header.index("value"), header.index("group")
            continue
        if len(row) <= max(vi, gi):
            raise CliError(f"line {reader.line_num}: expected {len(header)} fields")
        raw, group = row[vi].strip(), row[gi].strip().lower()
        try:
            value = float(raw)
        except ValueError:
            raise CliError(f"line {reader.line_num}: cannot parse value {raw!r}") from None
        if not math.isfinite(value):
            raise CliError(f"line {reader.line_num}: missing or non-finite value {raw!r}")
        if group not in labels:
            raise CliError(f"line {reader.line_num}: unknown group {row[gi]!r} "
                           f"(expected {x_label!r} or {y_label!r})")
        labels[group].append(value)
    if not xs and not ys:
        raise CliError("no observations")
    if not xs or not ys:
        missing = x_label if not xs else y_label
        raise CliError(f"no observations in group {missing!r}")
    try:
        return TwoSample(np.array(xs), np.array(ys))
    except DegenerateOrderError:
        raise CliError(f"degenerate data: {ORDER_ASSUMPTION}") from None


def _points(spec: str | None) -> list[float]:
    if not spec:
        return []
    try:
        pts = [float(p) for p in spec.split(",") if p.strip()]
    except ValueError:
        raise CliError(f"--points must be comma-separated numbers, got {spec!r}") from None
    if not all(math.isfinite(p) for p in pts):
        raise CliError("--points must be finite")
    return pts


def _check_level(level: float) -> float:
    if not 0.0 < level < 1.0:
        raise CliError(f"--level must lie in (0, 1), got {level}")
    return level


# -- output ----------------------------------------------------------------

def _floats(a) -> list:
    return [_num(v) for v in np.asarray(a, dtype=float)]


def fit_payload(ts: TwoSample) -> dict:
    fit = fit_lro(ts)
    diagram = odc_diagram(ts)
    hull = odc_hull(ts)
    hx, hy = hull.vx, hull.vy
    return {
        "n1": ts.n1,
        "n2": ts.n2,
        "pi_n": fit.pi_n,
        "f_star": {"knots": _floats(fit.f_star.knots), "cdf": _floats(fit.f_star.cdf_values),
                   "masses": _floats(fit.f_star.masses)},
        "g_star": {"knots": _floats(fit.g_star.knots), "cdf": _floats(fit.g_star.cdf_values),
                   "masses": _floats(fit.g_star.masses)},
        "theta": {"breakpoints": _floats(fit.theta_star.breakpoints),
                  "levels": _floats(fit.theta_star.levels)},
        "odc": {"g": _floats(diagram.x), "f": _floats(diagram.y),
                "gcm_g": _floats(hx), "gcm_f": _floats(hy)},
    }


def _csv_cell(v) -> str:
    return v if isinstance(v, str) else repr(float(v))


def fit_csv(payload: dict) -> str:
    """Long CSV ``table,index,x,value`` for a fit payload."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["table", "index", "x", "value"])
    w.writerow(["pi_n", 0, "", repr(payload["pi_n"])])
    for name in ("f_star", "g_star"):
        d = payload[name]
        for i, (k, c) in enumerate(zip(d["knots"], d["cdf"])):
            w.writerow([name, i, _csv_cell(k), _csv_cell(c)])
    th = payload["theta"]
    edges = th["breakpoints"] + ["inf"]
    for i, (b, lv) in enumerate(zip(edges, th["levels"])):
        w.writerow(["theta", i, _csv_cell(b), _csv_cell(lv)])
    odc = payload["odc"]
    for i, (g, f) in enumerate(zip(odc["g"], odc["f"])):
        w.writerow(["odc", i, _csv_cell(g), _csv_cell(f)])
    for i, (g, f) in enumerate(zip(odc["gcm_g"], odc["gcm_f"])):
        w.writerow(["odc_gcm", i, _csv_cell(g), _csv_cell(f)])
    return buf.getvalue()


def read_theta_levels(path) -> list[float]:
    """Recover the theta levels from a ``fit`` output file in either format."""
    text = Path(path).read_text(encoding="utf-8")
    if text.lstrip().startswith("{"):
        levels = json.loads(text)["fit"]["theta"]["levels"]
    else:
        levels = [r["value"] for r in csv.DictReader(io.StringIO(text)) if r["table"] == "theta"]
    return [float(v) for v in levels]


def _emit(text: str, output) -> None:
    if output:
        Path(output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


# -- subcommands -----------------------------------------------------------

def cmd_fit(args) -> int:
    ts = read_two_sample(args.input, args.x_label, args.y_label)
    payload = fit_payload(ts)
    if args.verify:
        stored = read_theta_levels(args.verify)
        fresh = [float(v) for v in payload["theta"]["levels"]]
        if stored != fresh:
            raise CliError(f"theta levels differ: stored {stored}, refitted {fresh}")
        print(f"verified: {len(fresh)} theta levels match", file=sys.stderr)
        return 0
    if args.format == "csv":
        text = fit_csv(payload)
    else:
        text = _dump_json({"version": __version__, "fit": payload})
    _emit(text, args.output)
    return 0


def cmd_ci(args) -> int:
    level = _check_level(args.level)
    methods = [m.strip() for m in args.method.split(",") if m.strip()]
    bad = [m for m in methods if m not in METHODS]
    if bad:
        raise CliError(f"unknown method(s) {bad}; choose from {', '.join(METHODS)}")
    ts = read_two_sample(args.input, args.x_label, args.y_label)
    fit = fit_lro(ts)
    points = _points(args.points) or [float(v) for v in np.unique(ts.y)]
    rows = []
    for z in points:
        for method in methods:
            try:
                est = interval(fit, z, method, level, m=args.m, seed=args.seed,
                               calibration=args.calibration)
            except (LROError, ValueError) as exc:
                est = IntervalEstimate(z, fit.theta(z), math.nan, math.nan, level, method,
                                       {}, "unsupported")
                row = est.to_dict()
                row["message"] = str(exc)
                rows.append(row)
                continue
            rows.append(est.to_dict())
    if args.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["z", "method", "level", "estimate", "lower", "upper", "status", "nuisances"])
        for r in rows:
            nuis = ";".join(f"{k}={_csv_cell(v)}" for k, v in r["nuisances"].items())
            w.writerow([_csv_cell(r["z"]), r["method"], repr(r["level"]),
                        _csv_cell(r["estimate"]), _csv_cell(r["lower"]),
                        _csv_cell(r["upper"]), r["status"], nuis])
        text = buf.getvalue()
    else:
        text = _dump_json({"version": __version__, "intervals": rows})
    _emit(text, args.output)
    return 0


class _Progress:
    def __init__(self, stream=None):
        self.stream = stream or sys.stderr
        self.color = "NO_COLOR" not in os.environ and self.stream.isatty()

    def __call__(self, n, done, total):
        if done != total and done % max(1, total // 20):
            return
        msg = f"n={n}: {done}/{total} replications"
        if self.color:
            msg = f"\x1b[36m{msg}\x1b[0m"
        print(msg, file=self.stream)


def cmd_simulate(args) -> int:
    try:
        text = Path(args.scenario).read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot read scenario file: {exc}") from None
    scenario, settings = parse_config(text)
    if args.reps is not None:
        settings.replications = args.reps
    if args.seed is not None:
        settings.seed = args.seed
    settings.__post_init__()
    threads = args.threads or os.cpu_count() or 1
    report = run_study(scenario, settings, threads=threads, progress=_Progress())
    csv_text = report.to_csv()
    json_text = _dump_json({"version": __version__, "report": report.summary()})
    if args.output:
        prefix = Path(args.output)
        prefix.with_suffix(".csv").write_text(csv_text, encoding="utf-8")
        prefix.with_suffix(".json").write_text(json_text, encoding="utf-8")
    else:
        sys.stdout.write(json_text if args.format == "json" else csv_text)
    return 0


def cmd_quantile_table(args) -> int:
    cp, lp = dict(DEFAULT_CHERNOFF), dict(DEFAULT_LRT)
    if args.reps is not None:
        cp["replications"] = args.reps
        lp["replications"] = max(1, args.reps // 4)
    if args.seed is not None:
        cp["seed"] = args.seed
        lp["seed"] = args.seed + 1
    table = build_quantile_table(cp, lp, progress=lambda m: print(m, file=sys.stderr))
    _emit(table.dumps(), args.output)
    return 0


# -- parser ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lrorder", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=f"lrorder {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def data_args(sp):
        sp.add_argument("--input", required=True, help="CSV with value,group columns ('-' for stdin)")
        sp.add_argument("--x-label", default="x", help="group label of the X sample")
        sp.add_argument("--y-label", default="y", help="group label of the Y sample")
        sp.add_argument("--format", choices=("json", "csv"), default="json")
        sp.add_argument("--output", help="write here instead of stdout")

    sp = sub.add_parser("fit", help="constrained MLE of F, G and theta")
    data_args(sp)
    sp.add_argument("--verify", metavar="PATH",
                    help="check that a previous fit output has the same theta levels")
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("ci", help="pointwise confidence intervals for theta")
    data_args(sp)
    sp.add_argument("--method", default="lrt", help=f"comma list from {', '.join(METHODS)}")
    sp.add_argument("--level", type=float, default=0.95)
    sp.add_argument("--points", help="comma-separated evaluation points (default: distinct y)")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--m", type=int, default=5, help="subsets for the split method")
    sp.add_argument("--calibration", choices=("pivotal", "chi2"), default="pivotal",
                    help="critical value used by the lrt method")
    sp.set_defaults(func=cmd_ci)

    sp = sub.add_parser("simulate", help="Monte Carlo study from a scenario file")
    sp.add_argument("--scenario", required=True, help="key = value scenario file")
    sp.add_argument("--reps", type=int, help="override replications")
    sp.add_argument("--seed", type=int, help="override seed")
    sp.add_argument("--threads", type=int, help="worker processes (default: all cores)")
    sp.add_argument("--format", choices=("json", "csv"), default="csv",
                    help="stdout format when --output is not given")
    sp.add_argument("--output", help="path prefix; writes PREFIX.csv and PREFIX.json")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("quantile-table", help="regenerate the Chernoff and LRT quantile table")
    sp.add_argument("--reps", type=int, help="Chernoff replications (LRT uses a quarter)")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--output", help="write here instead of stdout")
    sp.set_defaults(func=cmd_quantile_table)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CliError, LROError, ValueError) as exc:
        print(f"lrorder {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
