"""Command-line interface: ``cvtail {cvplot,test,tables,fit-gpd,returns}``.

Machine output goes to stdout (or ``--out``); diagnostics go to stderr.
The exit status is 0 exactly when the requested output was produced.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import __version__, asymptotics, montecarlo
from .distributions import Alternative, RandomSource
from .empirics import (
    DEFAULT_MIN_TAIL,
    Sample,
    TestReport,
    compute_statistic,
    cv_curve,
    dyadic_thresholds,
    max_feasible_m,
    parse_statistic,
    statistic_label,
    statistic_T_m,
)
from .errors import CvTailError, InputFormatError, LargeSampleApproximationWarning
from .gpdfit import fit_gpd_ml
from .returns import log_returns, parse_prices, parse_values, split_parts

log = logging.getLogger("cvtail")

REPORT_SCHEMA = "cvtail.report/1"
SYNTHETIC_STREAM = 1
DEFAULT_ORDER = 3
P_METHOD_NAMES = {"mc": "monte-carlo", "asym": "asymptotic-sim", "approx": "chi2-approx"}


@dataclass
class Report:
    n: int
    minimum: float
    maximum: float
    zeros_dropped: int
    source: str
    seed: int
    reps: int
    tests: list = field(default_factory=list)
    fit: dict = None
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        out = {
            "schema": REPORT_SCHEMA,
            "tool": {"name": "cvtail", "version": __version__},
            "input": {
                "n": self.n, "min": self.minimum, "max": self.maximum,
                "zeros_dropped": self.zeros_dropped, "source": self.source,
            },
            "seed": self.seed,
            "reps": self.reps,
            "tests": [t.to_dict() for t in self.tests],
            "notes": list(self.notes),
        }
        if self.fit is not None:
            out["fit"] = self.fit
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


# -- input -------------------------------------------------------------------


@dataclass
class Loaded:
    sample: Sample
    zeros: int
    source: str


def _read_text(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _synthetic_model(args) -> Alternative:
    kind = args.synthetic
    if kind == "exp":
        return Alternative("exp", args.mu)
    if kind == "gpd":
        return Alternative("gpd", args.xi, args.beta)
    return Alternative("abst", args.nu)


def load_sample(args) -> Loaded:
    if args.synthetic:
        model = _synthetic_model(args)
        seed = args.seed if args.data_seed is None else args.data_seed
        draws = model.draw(args.synthetic_n, RandomSource(seed, SYNTHETIC_STREAM))
        sample, zeros, source = Sample(draws), 0, f"synthetic {model.label()} n={args.synthetic_n} seed={seed}"
    else:
        if args.input is None:
            raise InputFormatError("no input given (path, '-' for stdin, or --synthetic)")
        text = _read_text(args.input)
        if args.prices or args.signed:
            returns = log_returns(parse_prices(text)) if args.prices else parse_values(text, positive=False)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                parts = split_parts(returns)
            sample = parts.positive if args.part == "positive" else parts.negative
            zeros, source = parts.zeros, f"{args.input} ({args.part} part)"
        else:
            sample, zeros, source = Sample(parse_values(text)), 0, args.input
    if args.largest is not None:
        sample = sample.largest(args.largest)
        source += f", largest {args.largest}"
    return Loaded(sample, zeros, source)


def _digest(loaded: Loaded, args, reps: int) -> Report:
    vals = loaded.sample.values
    return Report(
        n=loaded.sample.n,
        minimum=float(vals[0]) if vals.size else None,
        maximum=float(vals[-1]) if vals.size else None,
        zeros_dropped=loaded.zeros,
        source=loaded.source,
        seed=args.seed,
        reps=reps,
    )


def _emit(text: str, args):
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _csv(rows, header) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow(["" if v is None else v for v in r])
    return buf.getvalue()


def _number_list(text: str, cast=float):
    out = []
    for part in text.split(","):
        part = part.strip()
        if part:
            out.append(cast(float(part)) if cast is int else cast(part))
    return out


def _levels(text: str):
    vals = _number_list(text)
    return [v / 100.0 if v > 1 else v for v in vals]


# -- commands ----------------------------------------------------------------


def cmd_cvplot(args) -> int:
    loaded = load_sample(args)
    curve = cv_curve(loaded.sample, args.min_tail)
    if args.band_level is not None:
        bands = montecarlo.cv_plot_bands(loaded.sample.n, args.band_level, args.min_tail,
                                         args.band_reps, RandomSource(args.seed),
                                         workers=args.workers)
        curve.with_bands(bands)
    header = ("k", "threshold", "tail_count", "cv", "band_lo", "band_hi")
    if args.format == "json":
        payload = {
            "schema": "cvtail.cvplot/1", "n": loaded.sample.n, "min_tail": args.min_tail,
            "band_level": curve.band_level, "band_reps": args.band_reps if curve.band_level is not None else None,
            "seed": args.seed, "source": loaded.source,
            "rows": [dict(zip(header, r)) for r in curve.rows()],
        }
        _emit(json.dumps(payload, sort_keys=True, indent=2) + "\n", args)
    else:
        _emit(_csv(curve.rows(), header), args)
    if curve.band_level is not None:
        log.info("%.1f%% of CV-plot points inside the %.0f%% bands; %.1f%% above",
                 100 * curve.fraction_inside(), 100 * curve.band_level, 100 * curve.fraction_above())
    return 0


def run_test(sample: Sample, stat: str, m, p_method: str, reps: int, seed: int,
             min_tail: int = DEFAULT_MIN_TAIL, sidedness=None, workers=None) -> TestReport:
    """Compute one statistic on ``sample`` and its p-value by the chosen method."""
    notes = []
    if stat.strip().lower() == "tm" and m is None:
        m = min(DEFAULT_ORDER, max_feasible_m(sample.n, min_tail))
        notes.append(f"order m={m} chosen by default")
    kind, m = parse_statistic(stat, m)
    label = statistic_label(kind, m)
    cvs = thresholds = None
    if kind == "tm":
        value, cvs = statistic_T_m(sample, m, min_tail)
        thresholds = list(dyadic_thresholds(sample, m, min_tail).thresholds)
    else:
        value = compute_statistic(sample, kind)
    p_value = method = None
    if p_method in ("asym", "approx") and kind != "tm":
        raise CvTailError(f"--p-method {p_method} is only available for the tm statistic")
    if p_method == "mc":
        p_value = montecarlo.empirical_pvalue(value, label, sample.n, m, reps, RandomSource(seed),
                                              sidedness=sidedness, min_tail=min_tail,
                                              workers=workers)
        notes.append(f"{sidedness or montecarlo.default_sidedness(label)} Monte Carlo p-value")
    elif p_method == "asym":
        dist = asymptotics.sample_asymptotic_T(asymptotics.spectrum_for_order(m), reps,
                                               RandomSource(seed))
        p_value = dist.upper_pvalue(value)
    elif p_method == "approx":
        approx = asymptotics.moment_match(asymptotics.spectrum_for_order(m))
        p_value = asymptotics.approx_pvalue(value, approx)
        notes.append(f"a={approx.a:.4f} b={approx.b:.4f} nu={approx.nu:.4f}")
    if p_method in ("asym", "approx") and sample.n < 500:
        msg = "large-sample approximation used with n < 500"
        warnings.warn(msg, LargeSampleApproximationWarning, stacklevel=2)
        notes.append(msg)
    if p_method is not None:
        method = P_METHOD_NAMES[p_method]
    return TestReport(label, float(value), sample.n, m if kind == "tm" else None, p_value, method,
                      cvs, thresholds, notes)


def cmd_test(args) -> int:
    loaded = load_sample(args)
    report = _digest(loaded, args, args.reps)
    p_method = None if args.p_method == "none" else args.p_method
    if loaded.sample.n < args.min_tail:
        msg = f"sample has {loaded.sample.n} values (< min-tail {args.min_tail}); test disabled"
        log.warning(msg)
        report.notes.append(msg)
    else:
        report.tests.append(run_test(loaded.sample, args.stat, args.m, p_method, args.reps,
                                     args.seed, args.min_tail, args.sidedness, args.workers))
    _emit(_format_report(report, args.format), args)
    return 0


def _format_report(report: Report, fmt: str) -> str:
    if fmt == "json":
        return report.to_json()
    if fmt == "csv":
        rows = [(t.statistic, t.value, t.n, t.m, t.p_value, t.p_method,
                 None if t.cvs is None else " ".join(f"{c:.6g}" for c in t.cvs))
                for t in report.tests]
        return _csv(rows, ("statistic", "value", "n", "m", "p_value", "p_method", "cvs"))
    lines = [f"input: {report.source}", f"n={report.n} min={report.minimum} max={report.maximum} "
             f"zeros_dropped={report.zeros_dropped}"]
    for t in report.tests:
        p = "" if t.p_value is None else f"  p={t.p_value:.4g} ({t.p_method})"
        lines.append(f"{t.statistic} = {t.value:.6g}{p}")
        if t.cvs is not None:
            lines.append("  cv per threshold: " + ", ".join(f"{c:.3f}" for c in t.cvs))
    if report.fit is not None:
        for k in sorted(report.fit):
            lines.append(f"{k}: {report.fit[k]}")
    lines.extend(f"note: {n}" for n in report.notes)
    return "\n".join(lines) + "\n"


def _expand_stats(args):
    out = []
    for s in _number_list(args.stat, str):
        if s.lower() == "tm":
            if not args.m:
                raise CvTailError("--stat tm needs --m")
            out.extend(f"t{m}" for m in _number_list(args.m, int))
        else:
            kind, m = parse_statistic(s)
            out.append(statistic_label(kind, m))
    return out


def cmd_tables(args) -> int:
    stats = _expand_stats(args)
    if args.reps is None:
        args.reps = (montecarlo.DEFAULT_TABLE_REPS if args.which == "critical"
                     else montecarlo.DEFAULT_POWER_REPS)
    if args.which == "critical":
        table = montecarlo.CriticalTable()
        levels = _levels(args.levels)
        if args.mode != "finite":
            for s in stats:
                kind, m = parse_statistic(s)
                if kind != "tm":
                    raise CvTailError(f"{args.mode} mode is only defined for tm statistics")
                table.add(montecarlo.asymptotic_critical_row(m, levels, args.reps, args.seed, args.mode))
        else:
            for s in stats:
                for n in _number_list(args.n, int):
                    cfg = montecarlo.SimConfig(s, n, args.reps, args.seed, workers=args.workers,
                                               min_tail=args.min_tail)
                    table.add(montecarlo.simulate_critical_points(cfg, levels))
        _emit(table.to_json() + "\n" if args.format == "json" else table.to_csv(), args)
        return 0

    if not args.alt:
        raise CvTailError("--which power needs --alt (e.g. abst:4, gpd:0.25)")
    alts = [Alternative.parse(a) for a in args.alt.split(",")]
    level = args.level
    critical = montecarlo.CriticalTable()
    power = montecarlo.PowerTable()
    for s in stats:
        for n in _number_list(args.n, int):
            cfg = montecarlo.SimConfig(s, n, args.critical_reps, args.seed, workers=args.workers,
                                       min_tail=args.min_tail)
            critical.add(montecarlo.simulate_critical_points(
                cfg, montecarlo.critical_levels_for(s, level)))
            for alt in alts:
                power.add(montecarlo.power_estimate(alt, s, n, level, args.reps, critical,
                                                    RandomSource(args.seed, 2),
                                                    min_tail=args.min_tail, workers=args.workers))
    _emit(power.to_json() + "\n" if args.format == "json" else power.to_csv(), args)
    return 0


def cmd_fit_gpd(args) -> int:
    loaded = load_sample(args)
    report = _digest(loaded, args, 0)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        fit = fit_gpd_ml(loaded.sample)
    for w in caught:
        log.warning("%s", w.message)
    report.fit = fit.to_dict()
    if args.format == "csv":
        d = report.fit
        keys = ("xi", "beta", "tail_power", "implied_cv", "loglik", "n", "boundary")
        _emit(_csv([[d[k] for k in keys]], keys), args)
    else:
        _emit(_format_report(report, args.format), args)
    return 0


def cmd_returns(args) -> int:
    text = _read_text(args.input)
    returns = log_returns(parse_prices(text)) if not args.signed else parse_values(text, positive=False)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        parts = split_parts(returns, args.min_tail)
    for w in caught:
        log.warning("%s", w.message)
    if args.emit == "summary":
        summary = {
            "schema": "cvtail.returns/1", "returns": int(len(returns)),
            "positive": parts.positive.n, "negative": parts.negative.n, "zeros": parts.zeros,
        }
        if args.format == "json":
            _emit(json.dumps(summary, sort_keys=True, indent=2) + "\n", args)
        else:
            keys = ("returns", "positive", "negative", "zeros")
            _emit(_csv([[summary[k] for k in keys]], keys), args)
        return 0
    values = {"returns": returns, "positive": parts.positive.values,
              "negative": parts.negative.values}[args.emit]
    _emit("".join(f"{v!r}\n" for v in np.asarray(values).tolist()), args)
    return 0


# -- parser ------------------------------------------------------------------


def _common(p, reps_default=montecarlo.DEFAULT_TABLE_REPS, fmt_default="json",
            formats=("json", "csv", "text")):
    p.add_argument("--seed", type=int, default=0, help="simulation seed (default 0)")
    p.add_argument("--reps", type=int, default=reps_default, help="Monte Carlo replicates (default %(default)s)")
    p.add_argument("--format", choices=formats, default=fmt_default)
    p.add_argument("--out", help="write output to this file instead of stdout")
    p.add_argument("--workers", type=int, default=None, help="worker threads for simulations")
    _verbose(p)


def _verbose(p):
    p.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS,
                   help="log progress to stderr")


def _input(p):
    p.add_argument("input", nargs="?", help="data file ('-' for stdin)")
    p.add_argument("--prices", action="store_true",
                   help="input is a date,price series; analyse a part of its log-returns")
    p.add_argument("--signed", action="store_true",
                   help="input holds signed returns; analyse a part of them")
    p.add_argument("--part", choices=("positive", "negative"), default="positive")
    p.add_argument("--largest", type=int, default=None, help="keep only the K largest values")
    p.add_argument("--synthetic", choices=("exp", "gpd", "abst"),
                   help="generate the input instead of reading it")
    p.add_argument("--synthetic-n", type=int, default=2000)
    p.add_argument("--data-seed", type=int, default=None,
                   help="seed for --synthetic data (defaults to --seed)")
    p.add_argument("--mu", type=float, default=1.0, help="exponential mean")
    p.add_argument("--xi", type=float, default=0.3, help="GPD shape")
    p.add_argument("--beta", type=float, default=1.0, help="GPD scale")
    p.add_argument("--nu", type=float, default=4.0, help="Student degrees of freedom")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cvtail",
        description="Residual coefficient of variation tools for exponential vs Pareto tails.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("cvplot", help="CV-plot data with simulated pointwise bands")
    _input(p)
    _common(p, montecarlo.DEFAULT_BAND_REPS, "csv", ("csv", "json"))
    p.add_argument("--min-tail", type=int, default=DEFAULT_MIN_TAIL)
    p.add_argument("--band-level", type=float, default=0.9,
                   help="pointwise band level (default 0.9)")
    p.add_argument("--no-bands", dest="band_level", action="store_const", const=None)
    p.add_argument("--band-reps", type=int, default=montecarlo.DEFAULT_BAND_REPS)
    p.set_defaults(func=cmd_cvplot)

    p = sub.add_parser("test", help="run an exponentiality test")
    _input(p)
    _common(p)
    p.add_argument("--stat", default="tm", help="tm, cv, mw or su (or t0, t1, ...)")
    p.add_argument("--m", type=int, default=None, help="order of the tm statistic (default: min(3, largest feasible))")
    p.add_argument("--p-method", choices=("mc", "asym", "approx", "none"), default="mc")
    p.add_argument("--sidedness", choices=("upper", "lower", "two-sided"), default=None)
    p.add_argument("--min-tail", type=int, default=DEFAULT_MIN_TAIL)
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("tables", help="critical-point and power tables")
    _common(p, None, "csv", ("csv", "json"))
    p.add_argument("--which", choices=("critical", "power"), default="critical")
    p.add_argument("--stat", default="t0,t1,t2,t3,t4", help="comma list: t0..t4, tm, cv, mw, su")
    p.add_argument("--m", default=None, help="comma list of orders when --stat tm")
    p.add_argument("--n", default="50,100,200,500,1000,2000", help="comma list of sample sizes")
    p.add_argument("--levels", default="90,95,99", help="quantile levels (percent or fraction)")
    p.add_argument("--mode", choices=("finite", "asymptotic", "approximate"), default="finite")
    p.add_argument("--alt", default=None, help="comma list of alternatives, e.g. abst:4,gpd:0.25")
    p.add_argument("--level", type=float, default=0.05, help="significance level for power")
    p.add_argument("--critical-reps", type=int, default=montecarlo.DEFAULT_TABLE_REPS)
    p.add_argument("--min-tail", type=int, default=2,
                   help="smallest dyadic tail allowed (default 2 so every table cell is feasible)")
    p.set_defaults(func=cmd_tables)

    p = sub.add_parser("fit-gpd", help="maximum-likelihood GPD fit")
    _input(p)
    _common(p, 0)
    p.set_defaults(func=cmd_fit_gpd)

    p = sub.add_parser("returns", help="log-returns and their positive/negative parts")
    p.add_argument("input", help="date,price file ('-' for stdin)")
    p.add_argument("--signed", action="store_true", help="input already holds signed returns")
    p.add_argument("--emit", choices=("summary", "returns", "positive", "negative"),
                   default="summary")
    p.add_argument("--min-tail", type=int, default=DEFAULT_MIN_TAIL)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--reps", type=int, default=0)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--out")
    _verbose(p)
    p.set_defaults(func=cmd_returns)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="cvtail: %(levelname)s: %(message)s", stream=sys.stderr, force=True)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", LargeSampleApproximationWarning)
            return args.func(args)
    except (CvTailError, OSError) as exc:
        print(f"cvtail: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
