"""Command-line entry point: ``spectral-risk {spectrum,backtest,experiment,report}``.

Exit statuses: 0 success, 2 usage, 65 bad data or config, 66 missing file,
70 internal error.
"""
from __future__ import annotations

import argparse
import csv
import io
import logging
import os
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import spectral
from .backtest import COST_CONVENTIONS, run_backtest
from .config import ConfigError, ExperimentConfig, env_seed, load_config
from .experiment import report_from_directory, run_csv, run_to_directory
from .market_data import PanelFormatError, PanelValidationError, load_panel, ticker_indices, window
from .metrics import METRIC_LABELS, METRIC_NAMES, DegenerateSeriesError, summarize
from .strategies import KINDS, StrategySpec, sample_simplex

logger = logging.getLogger(__name__)

EX_OK = 0
EX_USAGE = 2
EX_DATAERR = 65
EX_NOINPUT = 66
EX_SOFTWARE = 70

SUBCOMMANDS = ("spectrum", "backtest", "experiment", "report")


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


@dataclass
class CliInvocation:
    subcommand: str
    data_path: Optional[Path] = None
    config_path: Optional[Path] = None
    output_dir: Optional[Path] = None
    seed: Optional[int] = None
    options: dict = field(default_factory=dict)


def _assets(text: str) -> list[str]:
    names = [a.strip() for a in text.split(",") if a.strip()]
    if not names:
        raise argparse.ArgumentTypeError("expected a comma-separated list of tickers")
    return names


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(
        prog="spectral-risk",
        description="Spectral risk detection and rolling-window strategy backtests.",
        formatter_class=fmt,
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="subcommand", metavar="{spectrum,backtest,experiment,report}")
    sub.required = True

    def data_args(p: argparse.ArgumentParser) -> None:
        p.add_argument("--data", type=Path, required=True, help="returns CSV (date,<ticker>,...)")
        p.add_argument("--prices", action="store_true",
                       help="treat the CSV as price levels and convert to simple returns")

    p = sub.add_parser("spectrum", formatter_class=fmt,
                       help="normalized spectrum and vertex distances per rolling window")
    data_args(p)
    p.add_argument("--window", type=int, default=20, help="window length in days")
    p.add_argument("--assets", type=_assets, default=None, help="comma-separated tickers (default: all)")
    p.add_argument("--last", action="store_true", help="only report the most recent window")
    p.add_argument("--out", type=Path, default=None, help="output CSV file (default: stdout)")

    p = sub.add_parser("backtest", formatter_class=fmt, help="run one strategy on one universe")
    data_args(p)
    p.add_argument("--window", type=int, default=20, help="window length in days")
    p.add_argument("--assets", type=_assets, default=None, help="comma-separated tickers (default: all)")
    p.add_argument("--strategy", choices=KINDS, default="rr", help="strategy kind")
    p.add_argument("--cost-bp", type=float, default=10.0, help="proportional cost in basis points")
    p.add_argument("--alpha", type=float, default=0.01, help="tail level for VaR/CVaR")
    p.add_argument("--reduction", type=float, default=0.5, help="exposure kept on a risk signal")
    p.add_argument("--cost-convention", choices=COST_CONVENTIONS, default="l1",
                   help="turnover convention")
    p.add_argument("--seed", type=int, default=None,
                   help="seed for random strategies (fallback: $SPECTRAL_RISK_SEED, then 0)")
    p.add_argument("--out", type=Path, default=None,
                   help="output directory for backtest_<strategy>.csv (default: stdout)")

    p = sub.add_parser("experiment", formatter_class=fmt,
                       help="full grid experiment over random universes")
    data_args(p)
    p.add_argument("--config", type=Path, default=None, help="JSON experiment config")
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None, help="master seed (overrides config)")
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1, help="worker processes")
    p.add_argument("--reps", type=int, default=None, help="repetitions per cell (overrides config)")
    p.add_argument("--cost-bp", type=float, default=None, help="cost in basis points (overrides config)")
    p.add_argument("--alpha", type=float, default=None, help="metric tail level (overrides config)")
    p.add_argument("--reduction", type=float, default=None,
                   help="exposure kept on a risk signal, all strategies (overrides config)")
    p.add_argument("--save-runs", action="store_true", help="write per-day series under runs/")

    p = sub.add_parser("report", formatter_class=fmt,
                       help="rebuild summary tables from stored per-rep CSVs")
    p.add_argument("--out", type=Path, required=True, help="experiment output directory")
    p.add_argument("--format", choices=("markdown", "csv"), default="markdown",
                   help="table format printed to stdout")
    return parser


def parse_cli(argv: Sequence[str]) -> CliInvocation:
    """Parse and validate arguments; usage errors exit with status 2."""
    args = build_parser().parse_args(list(argv))
    opts = vars(args).copy()
    inv = CliInvocation(
        subcommand=opts.pop("subcommand"),
        data_path=opts.pop("data", None),
        config_path=opts.pop("config", None),
        output_dir=opts.pop("out", None),
        seed=opts.pop("seed", None),
        options=opts,
    )
    for path in (inv.data_path, inv.config_path):
        if path is not None and not path.is_file():
            raise CliError(f"no such file: {path}", EX_NOINPUT)
    if inv.subcommand == "report" and not inv.output_dir.is_dir():
        raise CliError(f"no such directory: {inv.output_dir}", EX_NOINPUT)
    if "window" in opts and opts["window"] < 2:
        raise CliError("--window must be at least 2", EX_USAGE)
    return inv


def _write(text: str, path: Optional[Path]) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")


def _universe(panel, assets) -> list[int]:
    if assets is None:
        return list(range(panel.n_assets))
    try:
        return ticker_indices(panel, assets)
    except KeyError as exc:
        raise CliError(str(exc.args[0]), EX_DATAERR) from None


def cmd_spectrum(inv: CliInvocation) -> int:
    o = inv.options
    panel = load_panel(inv.data_path, prices=o["prices"])
    universe = _universe(panel, o["assets"])
    n, w = len(universe), o["window"]
    if n < 2:
        raise CliError("spectrum needs at least two assets", EX_USAGE)
    if panel.n_days < w:
        raise CliError(f"panel has {panel.n_days} days, fewer than the window {w}", EX_DATAERR)
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["date", *(f"s{i + 1}" for i in range(n - 1)),
                     *(f"d_v{k}" for k in range(n)), "level", "rr_signal",
                     *(["enhanced_signal"] if n >= 3 else [])])
    days = [panel.n_days] if o["last"] else range(w, panel.n_days + 1)
    for t in days:
        # the row is labelled by the last date inside the window
        s = spectral.normalized_spectrum(window(panel, universe, t, w))
        d = spectral.vertex_distances(s)
        row = [panel.dates[t - 1], *(repr(float(x)) for x in s.values),
               *(repr(float(x)) for x in d), spectral.classify_scenario(s).level,
               int(spectral.rr_signal(s))]
        if n >= 3:
            row.append(int(spectral.enhanced_signal(s)))
        writer.writerow(row)
    _write(out.getvalue(), inv.output_dir)
    return EX_OK


def cmd_backtest(inv: CliInvocation) -> int:
    o = inv.options
    panel = load_panel(inv.data_path, prices=o["prices"])
    universe = _universe(panel, o["assets"])
    seed = inv.seed if inv.seed is not None else (env_seed() or 0)
    rng = np.random.default_rng(seed)
    bench = sample_simplex(len(universe), rng) if o["strategy"] == "random_benchmark" else None
    spec = StrategySpec(o["strategy"], reduction=o["reduction"], benchmark_weights=bench,
                        alpha=o["alpha"])
    res = run_backtest(panel, universe, spec, o["window"], o["cost_bp"] / 1e4, rng,
                       cost_convention=o["cost_convention"])
    text = run_csv(panel, res)
    if inv.output_dir is None:
        sys.stdout.write(text)
        return EX_OK
    inv.output_dir.mkdir(parents=True, exist_ok=True)
    (inv.output_dir / f"backtest_{spec.kind}.csv").write_text(text, encoding="utf-8")
    try:
        m = summarize(res.net, o["alpha"])
        for name in METRIC_NAMES:
            print(f"{METRIC_LABELS[name]:>8}  {getattr(m, name):.6g}")
    except (DegenerateSeriesError, ValueError) as exc:
        print(f"metrics unavailable: {exc}")
    print(f"reduced-exposure days: {res.reduced_days} of {len(res.net)}")
    return EX_OK


def cmd_experiment(inv: CliInvocation) -> int:
    o = inv.options
    panel = load_panel(inv.data_path, prices=o["prices"])
    cfg: ExperimentConfig = load_config(inv.config_path)
    overrides = {
        "master_seed": inv.seed,
        "reps": o["reps"],
        "cost_rate": None if o["cost_bp"] is None else o["cost_bp"] / 1e4,
        "alpha": o["alpha"],
        "save_runs": True if o["save_runs"] else None,
    }
    cfg = cfg.with_overrides(**overrides)
    if o["reduction"] is not None:
        cfg = replace(cfg, strategies=tuple(replace(s, reduction=o["reduction"]) for s in cfg.strategies))
    try:
        cells = run_to_directory(panel, cfg, inv.output_dir, jobs=max(1, o["jobs"]))
    except ValueError as exc:
        raise CliError(str(exc), EX_DATAERR) from None
    for c in cells:
        logger.info("N=%d w=%d: %d/%d reps completed", c.n, c.w, c.completed, cfg.reps)
    sys.stdout.write((inv.output_dir / "summary.md").read_text(encoding="utf-8"))
    return EX_OK


def cmd_report(inv: CliInvocation) -> int:
    try:
        report_from_directory(inv.output_dir)
    except FileNotFoundError as exc:
        raise CliError(str(exc), EX_NOINPUT) from None
    name = "summary.md" if inv.options["format"] == "markdown" else "summary.csv"
    sys.stdout.write((inv.output_dir / name).read_text(encoding="utf-8"))
    return EX_OK


COMMANDS = {
    "spectrum": cmd_spectrum,
    "backtest": cmd_backtest,
    "experiment": cmd_experiment,
    "report": cmd_report,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        inv = parse_cli(argv)
        logging.basicConfig(level=logging.INFO if inv.options.get("verbose") else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return COMMANDS[inv.subcommand](inv)
    except SystemExit as exc:
        return int(exc.code or 0)
    except CliError as exc:
        print(f"spectral-risk: {exc}", file=sys.stderr)
        return exc.code
    except (PanelFormatError, PanelValidationError, ConfigError) as exc:
        print(f"spectral-risk: {exc}", file=sys.stderr)
        return EX_DATAERR
    except FileNotFoundError as exc:
        print(f"spectral-risk: {exc}", file=sys.stderr)
        return EX_NOINPUT
    except Exception as exc:  # noqa: BLE001
        logger.exception("internal error")
        print(f"spectral-risk: internal error: {exc}", file=sys.stderr)
        return EX_SOFTWARE


if __name__ == "__main__":
    raise SystemExit(main())
