"""Command-line interface.

Exit codes: 0 ok, 1 usage, 2 I/O or parse error, 3 data error, 4 fit
failure, 5 invalid specification.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from typing import Optional, Sequence

import numpy as np

from volbreak.errors import (
    BadRow,
    EmptySeries,
    InvalidSpec,
    MalformedHeader,
    StageError,
    VolbreakError,
)
from volbreak.garch import fit_garch
from volbreak.icss import IcssConfig
from volbreak.npcpm import DEFAULT_THRESHOLDS, ThresholdTable, calibrate_threshold
from volbreak.pipeline import (
    PipelineConfig,
    compare_models,
    detect,
    run_three_stage,
    run_two_stage,
)
from volbreak.segmentation import Segmentation
from volbreak.series import ReturnSeries, ljung_box, log_returns, read_price_csv
from volbreak.simulation import PAPER_DESIGN, RegimeSpec, run_experiment

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_DATA, EXIT_FIT, EXIT_SPEC = 0, 1, 2, 3, 4, 5

DEFAULT_SEED = 20120101


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # argparse exits 2 by default
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


class CliError(Exception):
    def __init__(self, code: int, message: str) -> None:
        self.code = code
        super().__init__(message)


def _load_returns(path: str) -> ReturnSeries:
    try:
        prices = read_price_csv(path)
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot read {path}: {exc.strerror or exc}") from exc
    except (MalformedHeader, BadRow, EmptySeries, UnicodeDecodeError) as exc:
        raise CliError(EXIT_IO, f"{path}: {exc}") from exc
    return log_returns(prices)


def _write(path: Optional[str], text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot write {path}: {exc.strerror or exc}") from exc


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def _config(args) -> PipelineConfig:
    table = DEFAULT_THRESHOLDS
    if getattr(args, "table", None):
        try:
            with open(args.table, encoding="utf-8") as fh:
                table = ThresholdTable.from_csv(fh)
        except OSError as exc:
            raise CliError(EXIT_IO, f"cannot read {args.table}: {exc.strerror or exc}") from exc
        except ValueError as exc:
            raise CliError(EXIT_IO, f"{args.table}: {exc}") from exc
    try:
        icss = IcssConfig(threshold=args.threshold, min_segment=args.min_segment)
    except ValueError as exc:
        raise CliError(EXIT_USAGE, str(exc)) from exc
    return PipelineConfig(icss=icss, npcpm_table=table, npcpm_min_segment=args.min_segment)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def _lenient_summary(x: np.ndarray, lags: int) -> dict:
    """Every statistic that can be computed, with a reason for each that cannot."""
    out: dict = {
        "n_returns": int(len(x)),
        "mean": None,
        "std_dev": None,
        "skewness": None,
        "excess_kurtosis": None,
        "ljung_box_p": None,
        "ljung_box_sq_p": None,
        "errors": {},
    }
    errors = out["errors"]
    n = len(x)
    out["mean"] = float(np.mean(x))
    constant = bool(np.all(x == x[0]))
    if n >= 2:
        out["std_dev"] = 0.0 if constant else float(np.std(x, ddof=1))
    else:
        errors["std_dev"] = "sample standard deviation needs at least 2 returns"
    if constant:
        errors["skewness"] = errors["excess_kurtosis"] = "undefined for a constant series"
    else:
        from scipy import stats

        out["skewness"] = float(stats.skew(x, bias=True))
        out["excess_kurtosis"] = float(stats.kurtosis(x, fisher=True, bias=True))
    for key, series in (("ljung_box_p", x), ("ljung_box_sq_p", x * x)):
        try:
            out[key] = ljung_box(series, lags)[1]
        except VolbreakError as exc:
            if key == "ljung_box_sq_p" and n > lags and np.all(series == series[0]) and not constant:
                out[key] = 1.0
            else:
                errors[key] = str(exc)
    return out


def cmd_summarize(args) -> int:
    r = _load_returns(args.input)
    _write(args.output, _dump(_lenient_summary(r.values, args.lags)))
    return EXIT_OK


def cmd_detect(args) -> int:
    r = _load_returns(args.input)
    config = _config(args)
    n = len(r)
    if n < 2 * args.min_segment:
        raise CliError(EXIT_DATA, f"series has {n} returns; detection needs at least {2 * args.min_segment}")
    try:
        seg = detect(r.values, args.detector, config)
    except VolbreakError as exc:
        raise CliError(EXIT_DATA, str(exc)) from exc
    dates = None if r.labels is None else [r.labels[c] for c in seg.change_points]
    _write(
        args.output,
        _dump(
            {
                "detector": args.detector,
                "n": n,
                "change_points": list(seg.change_points),
                "change_dates": dates,
            }
        ),
    )
    if args.plot_data:
        cps = set(seg.change_points)
        lines = ["index,date,return,is_change_point"]
        for i, v in enumerate(r.values):
            date = "" if r.labels is None else r.labels[i]
            lines.append(f"{i},{date},{float(v)!r},{int(i in cps)}")
        _write(args.plot_data, "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_fit(args) -> int:
    r = _load_returns(args.input)
    config = _config(args)
    x = r.values
    try:
        if args.model == "plain" or args.detector == "none":
            if args.model != "plain":
                raise CliError(EXIT_USAGE, "regime models need a detector")
            fit = fit_garch(x, args.dist)
            payload = {"detector": "none", "change_points": [], "fit": fit.to_dict()}
        else:
            if args.detector in ("icss", "npcpm"):
                res = run_two_stage(x, args.detector, args.model, args.dist, config)
            else:
                res = run_three_stage(x, args.detector, args.model, args.dist, config)
            fit = res.fit
            payload = res.to_dict()
    except StageError as exc:
        code = EXIT_FIT if exc.stage in ("fit", "stage1") else EXIT_DATA
        raise CliError(code, str(exc)) from exc
    except VolbreakError as exc:
        raise CliError(EXIT_DATA, str(exc)) from exc
    _write(args.output, _dump(payload))
    if not fit.converged:
        print("warning: optimiser did not converge; best point written", file=sys.stderr)
        return EXIT_FIT
    return EXIT_OK


def cmd_compare(args) -> int:
    r = _load_returns(args.input)
    config = _config(args)
    table = compare_models(r.values, config)
    _write(args.output, _dump(table.to_dict()))
    text = table.to_text()
    if args.text:
        _write(args.text, text)
    else:
        sys.stderr.write(text)
    if table.best_aic is None:
        return EXIT_FIT
    return EXIT_OK


def cmd_calibrate(args) -> int:
    if not 0 < args.alpha < 1:
        raise CliError(EXIT_USAGE, "--alpha must lie in (0, 1)")
    try:
        h = calibrate_threshold(args.n, args.alpha, args.sims, args.seed, args.min_segment)
    except VolbreakError as exc:
        raise CliError(EXIT_SPEC, str(exc)) from exc
    _write(args.output, f"# alpha={args.alpha:g}\nn,h\n{args.n},{h:.6g}\n")
    return EXIT_OK


def cmd_simulate(args) -> int:
    if args.spec:
        try:
            with open(args.spec, encoding="utf-8") as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise CliError(EXIT_IO, f"cannot read {args.spec}: {exc.strerror or exc}") from exc
        except json.JSONDecodeError as exc:
            raise CliError(EXIT_SPEC, f"{args.spec}: invalid JSON: {exc}") from exc
        try:
            spec = RegimeSpec.from_dict(raw)
        except InvalidSpec as exc:
            raise CliError(EXIT_SPEC, str(exc)) from exc
    else:
        spec = PAPER_DESIGN
    detectors = [d.strip() for d in args.detectors.split(",") if d.strip()]
    try:
        report = run_experiment(spec, args.reps, detectors, args.seed, _config(args))
    except InvalidSpec as exc:
        raise CliError(EXIT_SPEC, str(exc)) from exc
    _write(args.output, report.to_json())
    if args.histogram:
        _write(args.histogram, report.histogram_csv())
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _nonneg_int(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {text}")
    return value


def _unit_interval(text: str) -> float:
    value = float(text)
    if not (0 < value < 1) or math.isnan(value):
        raise argparse.ArgumentTypeError(f"expected a value in (0, 1), got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="volbreak", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def detector_opts(p):
        p.add_argument("--threshold", type=float, default=1.358, help="ICSS critical value")
        p.add_argument("--min-segment", type=_positive_int, default=10)
        p.add_argument("--table", help="NPCPM threshold table CSV (n,h with '# alpha=' line)")

    def io_opts(p, needs_input=True):
        if needs_input:
            p.add_argument("--input", "-i", required=True, help="price CSV with date,close columns")
        p.add_argument("--output", "-o", help="output path (default stdout)")

    p = sub.add_parser("summarize", help="summary statistics of log returns")
    io_opts(p)
    p.add_argument("--lags", type=_positive_int, default=20)
    p.set_defaults(func=cmd_summarize)

    p = sub.add_parser("detect", help="volatility change points")
    io_opts(p)
    p.add_argument("--detector", choices=("icss", "npcpm"), required=True)
    p.add_argument("--plot-data", help="also write index,date,return,is_change_point CSV here")
    detector_opts(p)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("fit", help="fit one GARCH model")
    io_opts(p)
    p.add_argument("--model", choices=("plain", "omega", "abo"), default="plain")
    p.add_argument("--detector", choices=("none", "icss", "npcpm", "gicss", "gnpcpm"), default="none")
    p.add_argument("--dist", choices=("gaussian", "student_t"), default="gaussian")
    detector_opts(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("compare", help="AIC/BIC comparison over the model grid")
    io_opts(p)
    p.add_argument("--text", help="write the aligned text table here (default stderr)")
    detector_opts(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("calibrate", help="Monte Carlo NPCPM threshold for one length")
    io_opts(p, needs_input=False)
    p.add_argument("--n", type=_positive_int, required=True)
    p.add_argument("--alpha", type=_unit_interval, default=0.05)
    p.add_argument("--sims", type=_positive_int, default=10_000)
    p.add_argument("--seed", type=_nonneg_int, default=DEFAULT_SEED)
    p.add_argument("--min-segment", type=_positive_int, default=2)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("simulate", help="detector Monte Carlo on a regime design")
    io_opts(p, needs_input=False)
    p.add_argument("--spec", help="RegimeSpec JSON (default: 600-obs t(3) design)")
    p.add_argument("--reps", type=_positive_int, default=1000)
    p.add_argument("--detectors", default="icss,npcpm")
    p.add_argument("--seed", type=_nonneg_int, default=DEFAULT_SEED)
    p.add_argument("--histogram", help="write change-point location histogram CSV here")
    detector_opts(p)
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # --help, or a usage error already reported
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except CliError as exc:
        print(f"volbreak {args.command}: {exc}", file=sys.stderr)
        return exc.code
    except VolbreakError as exc:
        print(f"volbreak {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
