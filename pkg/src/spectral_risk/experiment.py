"""Monte-Carlo experiment over a grid of universe sizes and window lengths.

Each (N, w, rep) work item draws its own universe from a seed derived from the
master seed by a SplitMix64 mix, so items can run in any order or in parallel
and still give identical numbers. Within a rep every strategy sees the same
universe and the same days; RR always runs before the random control, which
copies RR's count of reduced-exposure days.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
import os
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .backtest import BacktestResult, run_backtest
from .config import ExperimentConfig, StrategyEntry
from .market_data import ReturnPanel, sample_universe
from .metrics import METRIC_LABELS, METRIC_NAMES, DegenerateSeriesError, MetricsSummary, summarize
from .strategies import LABELS, StrategySpec, random_exposure_path, sample_simplex

logger = logging.getLogger(__name__)

_MASK = (1 << 64) - 1


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK
    return x ^ (x >> 31)


def rep_seed(master_seed: int, n: int, w: int, rep: int) -> int:
    h = splitmix64(master_seed & _MASK)
    for v in (n, w, rep):
        h = splitmix64(h ^ (v & _MASK))
    return h


def universe_hash(tickers: Sequence[str]) -> str:
    return hashlib.sha256(",".join(tickers).encode()).hexdigest()[:16]


@dataclass
class RepResult:
    n: int
    w: int
    rep: int
    seed: int
    universe: list[int]
    universe_hash: str
    metrics: dict[str, MetricsSummary] = field(default_factory=dict)
    reduced_days: dict[str, int] = field(default_factory=dict)
    excluded: Optional[str] = None
    runs: dict[str, BacktestResult] = field(default_factory=dict, repr=False)


@dataclass
class CellResult:
    n: int
    w: int
    strategies: list[str]
    mean: dict[str, MetricsSummary]
    std: dict[str, MetricsSummary]
    rep_seeds: list[int]
    completed: int
    excluded: list[int] = field(default_factory=list)

    @property
    def labels(self) -> list[str]:
        return [LABELS[k] for k in self.strategies]


def _execution_order(kinds: list[str]) -> list[str]:
    # the random control needs RR's reduced-day count, so RR goes first
    order = list(kinds)
    if "random_control" in order:
        if "rr" in order:
            order.remove("rr")
        order.insert(0, "rr")
    return order


def run_rep(panel: ReturnPanel, cfg: ExperimentConfig, n: int, w: int, rep: int,
            keep_runs: bool = False) -> RepResult:
    seed = rep_seed(cfg.master_seed, n, w, rep)
    rng = np.random.default_rng(seed)
    universe = sample_universe(panel, n, rng)
    result = RepResult(n, w, rep, seed, universe,
                       universe_hash([panel.tickers[i] for i in universe]))
    entries = {s.kind: s for s in cfg.strategies}
    bench_weights = sample_simplex(n, rng) if "random_benchmark" in entries else None
    runs: dict[str, BacktestResult] = {}
    for kind in _execution_order(list(entries)):
        entry = entries.get(kind) or StrategyEntry(kind, entries["random_control"].reduction)
        spec = StrategySpec(
            kind,
            reduction=entry.reduction,
            benchmark_weights=bench_weights if kind == "random_benchmark" else None,
            alpha=cfg.optimizer_alpha,
        )
        path = None
        if kind == "random_control":
            rr = runs["rr"]
            path = random_exposure_path(len(rr.net), rr.reduced_days, spec.reduction, rng)
        res = run_backtest(panel, universe, spec, w, cfg.cost_rate, exposure_path=path,
                           cost_convention=cfg.cost_convention)
        runs[kind] = res
        if res.wipeout:
            result.excluded = f"wipeout in {kind}"
            logger.warning("N=%d w=%d rep=%d excluded: %s", n, w, rep, result.excluded)
            return result
    for kind in entries:
        try:
            result.metrics[kind] = summarize(runs[kind].net, cfg.alpha)
        except DegenerateSeriesError as exc:
            result.metrics.clear()
            result.excluded = f"degenerate {kind}: {exc}"
            logger.warning("N=%d w=%d rep=%d excluded: %s", n, w, rep, result.excluded)
            return result
        result.reduced_days[kind] = runs[kind].reduced_days
    if keep_runs:
        result.runs = {k: runs[k] for k in entries}
    return result


def aggregate(n: int, w: int, strategies: list[str], reps: Sequence[RepResult]) -> CellResult:
    """Average per-rep metrics in rep order; excluded reps are left out."""
    reps = sorted(reps, key=lambda r: r.rep)
    done = [r for r in reps if r.excluded is None]
    mean: dict[str, MetricsSummary] = {}
    std: dict[str, MetricsSummary] = {}
    for kind in strategies:
        if done:
            mat = np.array([[getattr(r.metrics[kind], m) for m in METRIC_NAMES] for r in done])
            mu = mat.mean(axis=0)
            sd = mat.std(axis=0, ddof=1) if len(done) > 1 else np.zeros(len(METRIC_NAMES))
        else:
            mu = sd = np.full(len(METRIC_NAMES), np.nan)
        mean[kind] = MetricsSummary(*map(float, mu))
        std[kind] = MetricsSummary(*map(float, sd))
    return CellResult(
        n=n, w=w, strategies=list(strategies), mean=mean, std=std,
        rep_seeds=[r.seed for r in reps], completed=len(done),
        excluded=[r.rep for r in reps if r.excluded is not None],
    )


_worker_state: dict = {}


def _init_worker(panel: ReturnPanel, cfg: ExperimentConfig, keep_runs: bool) -> None:
    _worker_state.update(panel=panel, cfg=cfg, keep_runs=keep_runs)


def _work(item: tuple[int, int, int]) -> RepResult:
    s = _worker_state
    return run_rep(s["panel"], s["cfg"], *item, keep_runs=s["keep_runs"])


def run_experiment_reps(panel: ReturnPanel, cfg: ExperimentConfig, jobs: int = 1,
                        keep_runs: bool = False) -> list[RepResult]:
    if panel.n_days <= max(cfg.grid_w):
        raise ValueError(f"panel has {panel.n_days} days; need more than {max(cfg.grid_w)}")
    if panel.n_assets < max(cfg.grid_N):
        raise ValueError(f"panel has {panel.n_assets} assets; need at least {max(cfg.grid_N)}")
    items = [(n, w, rep) for n in cfg.grid_N for w in cfg.grid_w for rep in range(cfg.reps)]
    if jobs <= 1:
        return [run_rep(panel, cfg, *item, keep_runs=keep_runs) for item in items]
    with ProcessPoolExecutor(max_workers=jobs, initializer=_init_worker,
                             initargs=(panel, cfg, keep_runs)) as pool:
        return list(pool.map(_work, items, chunksize=max(1, len(items) // (4 * jobs))))


def cells_from_reps(cfg_strategies: list[str], reps: Iterable[RepResult],
                    order: Optional[Sequence[tuple[int, int]]] = None) -> list[CellResult]:
    grouped: dict[tuple[int, int], list[RepResult]] = {}
    for r in reps:
        grouped.setdefault((r.n, r.w), []).append(r)
    keys = list(order) if order is not None else sorted(grouped)
    return [aggregate(n, w, cfg_strategies, grouped[(n, w)]) for n, w in keys if (n, w) in grouped]


def run_experiment(panel: ReturnPanel, cfg: ExperimentConfig, jobs: int = 1) -> list[CellResult]:
    reps = run_experiment_reps(panel, cfg, jobs)
    order = [(n, w) for n in cfg.grid_N for w in cfg.grid_w]
    return cells_from_reps([s.kind for s in cfg.strategies], reps, order)


# ---------------------------------------------------------------- output

def _fmt(x: float) -> str:
    return f"{x:.6g}"


def emit_table(results: Sequence[CellResult], fmt: str = "markdown") -> str:
    """Comparison tables: one block per cell, metrics as rows, strategies as columns."""
    if not results:
        raise ValueError("no results to tabulate")
    if fmt == "csv":
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        for i, cell in enumerate(results):
            if i == 0:
                writer.writerow(["N", "w", "metric", *cell.labels])
            for m in METRIC_NAMES:
                writer.writerow([cell.n, cell.w, METRIC_LABELS[m],
                                 *(_fmt(getattr(cell.mean[k], m)) for k in cell.strategies)])
        return out.getvalue()
    if fmt != "markdown":
        raise ValueError(f"unknown table format {fmt!r}")
    blocks = []
    for cell in results:
        lines = [
            f"### N = {cell.n}, w = {cell.w} ({cell.completed} reps)",
            "",
            "| metric | " + " | ".join(cell.labels) + " |",
            "|---|" + "---:|" * len(cell.labels),
        ]
        for m in METRIC_NAMES:
            vals = " | ".join(_fmt(getattr(cell.mean[k], m)) for k in cell.strategies)
            lines.append(f"| {METRIC_LABELS[m]} | {vals} |")
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + "\n"


SUMMARY_HEADER = ["N", "w", "strategy", "completed",
                  *METRIC_NAMES, *(f"{m}_std" for m in METRIC_NAMES)]
REP_HEADER = ["rep", "seed", "strategy", "status", "reduced_days", "universe_hash", *METRIC_NAMES]


def summary_csv(results: Sequence[CellResult]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(SUMMARY_HEADER)
    for cell in results:
        for k in cell.strategies:
            writer.writerow([cell.n, cell.w, k, cell.completed,
                             *(repr(float(getattr(cell.mean[k], m))) for m in METRIC_NAMES),
                             *(repr(float(getattr(cell.std[k], m))) for m in METRIC_NAMES)])
    return out.getvalue()


def rep_csv(strategies: Sequence[str], reps: Sequence[RepResult]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(REP_HEADER)
    for r in sorted(reps, key=lambda r: r.rep):
        for k in strategies:
            if r.excluded is not None:
                writer.writerow([r.rep, r.seed, k, "excluded", "", r.universe_hash,
                                 *([""] * len(METRIC_NAMES))])
            else:
                ms = r.metrics[k]
                writer.writerow([r.rep, r.seed, k, "ok", r.reduced_days[k], r.universe_hash,
                                 *(repr(float(getattr(ms, m))) for m in METRIC_NAMES)])
    return out.getvalue()


def run_csv(panel: ReturnPanel, res: BacktestResult) -> str:
    """Per-day series of one backtest; signal strategies add the two vertex distances."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    with_d = not np.all(np.isnan(res.distances))
    writer.writerow(["day", "date", "gross", "cost", "net", "exposure", "wealth",
                     *(["d_v0", "d_v1"] if with_d else [])])
    for i, (day, wealth) in enumerate(zip(res.days, res.wealth)):
        row = [int(day), panel.dates[day], repr(float(res.gross[i])), repr(float(res.cost[i])),
               repr(float(res.net[i])), repr(float(res.exposure[i])), repr(float(wealth))]
        if with_d:
            row += [repr(float(res.distances[i, 0])), repr(float(res.distances[i, 1]))]
        writer.writerow(row)
    return out.getvalue()


def _metadata(panel: ReturnPanel, cfg: ExperimentConfig) -> dict:
    tails = {}
    for w in cfg.grid_w:
        n_out = panel.n_days - w
        tails[str(w)] = {
            "optimizer_tail_count": max(1, math.ceil(cfg.optimizer_alpha * w - 1e-12)),
            "metric_tail_count": max(1, math.ceil(cfg.alpha * n_out - 1e-12)),
            "out_of_sample_days": n_out,
        }
    notes = []
    if any(v["optimizer_tail_count"] == 1 for v in tails.values()):
        notes.append("optimizer tail holds a single scenario for some windows: "
                     "Min-VaR and Min-CVaR both minimize the worst in-window loss there")
    return {"config": cfg.to_dict(), "panel": {"days": panel.n_days, "assets": panel.n_assets,
            "first_date": panel.dates[0], "last_date": panel.dates[-1]},
            "tail_counts": tails, "notes": notes}


def write_outputs(out_dir: str | os.PathLike, panel: ReturnPanel, cfg: ExperimentConfig,
                  reps: Sequence[RepResult]) -> list[CellResult]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    kinds = [s.kind for s in cfg.strategies]
    order = [(n, w) for n in cfg.grid_N for w in cfg.grid_w]
    for n, w in order:
        cell_reps = [r for r in reps if (r.n, r.w) == (n, w)]
        (out / f"cell_{n}_{w}.csv").write_text(rep_csv(kinds, cell_reps), encoding="utf-8")
    cells = cells_from_reps(kinds, reps, order)
    (out / "summary.csv").write_text(summary_csv(cells), encoding="utf-8")
    (out / "summary.md").write_text(emit_table(cells, "markdown"), encoding="utf-8")
    (out / "meta.json").write_text(json.dumps(_metadata(panel, cfg), indent=2) + "\n", encoding="utf-8")
    if cfg.save_runs:
        runs_dir = out / "runs"
        runs_dir.mkdir(exist_ok=True)
        for r in reps:
            for kind, res in r.runs.items():
                name = f"N{r.n}_w{r.w}_rep{r.rep}_{kind}.csv"
                (runs_dir / name).write_text(run_csv(panel, res), encoding="utf-8")
    return cells


def run_to_directory(panel: ReturnPanel, cfg: ExperimentConfig, out_dir: str | os.PathLike,
                     jobs: int = 1) -> list[CellResult]:
    reps = run_experiment_reps(panel, cfg, jobs, keep_runs=cfg.save_runs)
    return write_outputs(out_dir, panel, cfg, reps)


_CELL_RE = re.compile(r"cell_(\d+)_(\d+)\.csv$")


def read_cell_csv(path: str | os.PathLike) -> tuple[list[str], list[RepResult]]:
    m = _CELL_RE.search(str(path))
    if m is None:
        raise ValueError(f"{path}: not a cell_<N>_<w>.csv file")
    n, w = int(m.group(1)), int(m.group(2))
    reps: dict[int, RepResult] = {}
    kinds: list[str] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != REP_HEADER:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        for row in reader:
            rep = int(row["rep"])
            kind = row["strategy"]
            if kind not in kinds:
                kinds.append(kind)
            r = reps.setdefault(rep, RepResult(n, w, rep, int(row["seed"]), [], row["universe_hash"]))
            if row["status"] == "excluded":
                r.excluded = "excluded"
                continue
            r.metrics[kind] = MetricsSummary.from_dict({m_: row[m_] for m_ in METRIC_NAMES})
            r.reduced_days[kind] = int(row["reduced_days"])
    return kinds, list(reps.values())


def report_from_directory(out_dir: str | os.PathLike) -> list[CellResult]:
    """Rebuild summary.csv / summary.md from stored per-rep CSVs."""
    out = Path(out_dir)
    meta_path = out / "meta.json"
    order = None
    if meta_path.exists():
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
        c = meta["config"]
        order = [(n, w) for n in c["grid_N"] for w in c["grid_w"]]
    files = sorted(out.glob("cell_*_*.csv"))
    if not files:
        raise FileNotFoundError(f"no cell_<N>_<w>.csv files in {out}")
    all_reps: list[RepResult] = []
    kinds: list[str] = []
    for f in files:
        k, reps = read_cell_csv(f)
        kinds = kinds or k
        all_reps.extend(reps)
    cells = cells_from_reps(kinds, all_reps, order)
    (out / "summary.csv").write_text(summary_csv(cells), encoding="utf-8")
    (out / "summary.md").write_text(emit_table(cells, "markdown"), encoding="utf-8")
    return cells
