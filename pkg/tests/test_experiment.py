import csv
import io
import json

import numpy as np
import pytest

from spectral_risk.backtest import run_backtest
from spectral_risk.config import ExperimentConfig, StrategyEntry
from spectral_risk.experiment import (
    CellResult,
    aggregate,
    emit_table,
    rep_seed,
    report_from_directory,
    run_experiment,
    run_experiment_reps,
    run_rep,
    run_to_directory,
    splitmix64,
)
from spectral_risk.market_data import sample_universe
from spectral_risk.metrics import METRIC_NAMES, MetricsSummary, summarize
from spectral_risk.strategies import StrategySpec


def cfg_for(*kinds, **kw):
    base = dict(grid_N=(4,), grid_w=(20,), reps=1, strategies=tuple(StrategyEntry(k) for k in kinds))
    base.update(kw)
    return ExperimentConfig(**base)


def test_splitmix_reference_values():
    # first outputs of the reference SplitMix64 generator seeded with 0
    assert splitmix64(0) == 0xE220A8397B1DCDAF
    assert splitmix64(0x9E3779B97F4A7C15) == 0x6E789E6AA1B965F4


def test_rep_seed_distinct_and_stable():
    seeds = {rep_seed(7, n, w, r) for n in (5, 10) for w in (20, 30) for r in range(50)}
    assert len(seeds) == 200
    assert rep_seed(7, 5, 20, 3) == rep_seed(7, 5, 20, 3)
    assert rep_seed(7, 5, 20, 3) != rep_seed(8, 5, 20, 3)


def test_single_rep_equals_direct_summary(small_panel):
    cfg = cfg_for("one_over_n", master_seed=3)
    [cell] = run_experiment(small_panel, cfg)
    rng = np.random.default_rng(rep_seed(3, 4, 20, 0))
    universe = sample_universe(small_panel, 4, rng)
    direct = summarize(run_backtest(small_panel, universe, StrategySpec("one_over_n"), 20, 0.001).net)
    assert cell.mean["one_over_n"] == direct
    assert cell.completed == 1


def test_identical_reps_average_to_common_value(small_panel):
    r = run_rep(small_panel, cfg_for("rr"), 4, 20, 0)
    cell = aggregate(4, 20, ["rr"], [r, r])
    for m in METRIC_NAMES:
        assert getattr(cell.mean["rr"], m) == pytest.approx(getattr(r.metrics["rr"], m), rel=1e-15)
        assert getattr(cell.std["rr"], m) == 0.0


def test_random_control_copies_rr_count(regime):
    panel, _ = regime
    cfg = cfg_for("one_over_n", "random_control", "rr", grid_N=(10,), reps=3)
    for rep in run_experiment_reps(panel, cfg):
        assert rep.reduced_days["random_control"] == rep.reduced_days["rr"]
        assert rep.reduced_days["rr"] > 0


def test_random_control_without_rr_in_output(regime):
    panel, _ = regime
    rep = run_rep(panel, cfg_for("random_control", grid_N=(10,)), 10, 20, 0)
    assert set(rep.metrics) == {"random_control"}
    assert rep.reduced_days["random_control"] > 0


def test_strategies_share_universe(small_panel):
    cfg = cfg_for("one_over_n", "rr", "min_var", reps=2)
    reps = run_experiment_reps(small_panel, cfg, keep_runs=True)
    for rep in reps:
        universes = {tuple(res.universe) for res in rep.runs.values()}
        days = {tuple(res.days) for res in rep.runs.values()}
        assert len(universes) == 1 and len(days) == 1


def test_parallel_matches_serial(small_panel):
    cfg = cfg_for("one_over_n", "rr", "random_control", reps=3)
    a = run_experiment_reps(small_panel, cfg, jobs=1)
    b = run_experiment_reps(small_panel, cfg, jobs=2)
    assert [r.metrics for r in a] == [r.metrics for r in b]


def test_degenerate_rep_excluded(regime):
    # enhanced RR sits in liquidity all the time on a rank-one panel
    panel, _ = regime
    flat = panel.__class__(panel.dates, panel.tickers,
                           np.outer(np.resize([0.01, -0.012, 0.004], panel.n_days), np.ones(panel.n_assets))
                           * np.linspace(1, 2, panel.n_assets))
    cfg = cfg_for("one_over_n", "rr_enhanced", grid_N=(10,))
    [cell] = run_experiment(flat, cfg)
    assert cell.completed == 0
    assert cell.excluded == [0]


def test_panel_too_small(small_panel):
    with pytest.raises(ValueError):
        run_experiment(small_panel, cfg_for("rr", grid_N=(9,)))
    with pytest.raises(ValueError):
        run_experiment(small_panel, cfg_for("rr", grid_w=(90,)))


def _cell(n, w, kinds, value):
    ms = {k: MetricsSummary(*(value + i for i in range(8))) for k in kinds}
    return CellResult(n, w, list(kinds), ms, ms, [1], 1)


class TestEmitTable:
    def test_single_cell_single_strategy(self):
        text = emit_table([_cell(5, 20, ["rr"], 0.1)], "csv")
        rows = list(csv.reader(io.StringIO(text)))
        assert rows[0] == ["N", "w", "metric", "RR"]
        assert len(rows) == 9
        assert [r[2] for r in rows[1:]] == ["a.r.", "st.dev.", "SR", "VaR 1%", "CVaR 1%", "MDD", "Sk", "K"]

    def test_column_order_follows_config(self):
        kinds = ["min_cvar", "one_over_n", "rr"]
        text = emit_table([_cell(5, 20, kinds, 0.1)], "markdown")
        header = next(l for l in text.splitlines() if l.startswith("| metric"))
        assert header == "| metric | Min-CVaR | 1/N | RR |"

    def test_markdown_round_trip(self, small_panel):
        cells = run_experiment(small_panel, cfg_for("one_over_n", "rr", "min_var", reps=2))
        text = emit_table(cells, "markdown")
        rows = [l for l in text.splitlines() if l.startswith("| ") and not l.startswith("| metric")]
        assert len(rows) == 8
        for row, m in zip(rows, METRIC_NAMES):
            parsed = [float(x) for x in row.strip("| ").split(" | ")[1:]]
            for kind, v in zip(["one_over_n", "rr", "min_var"], parsed):
                truth = getattr(cells[0].mean[kind], m)
                assert v == pytest.approx(truth, rel=5e-6, abs=1e-300)

    def test_empty(self):
        with pytest.raises(ValueError):
            emit_table([])


def test_output_files_and_report(tmp_path, small_panel):
    cfg = cfg_for("one_over_n", "rr", "random_control", reps=2, grid_w=(10, 20), save_runs=True)
    run_to_directory(small_panel, cfg, tmp_path)
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == ["cell_4_10.csv", "cell_4_20.csv", "meta.json", "runs", "summary.csv", "summary.md"]
    assert len(list((tmp_path / "runs").iterdir())) == 2 * 2 * 3
    rr_run = (tmp_path / "runs" / "N4_w20_rep0_rr.csv").read_text().splitlines()[0]
    assert rr_run.endswith("d_v0,d_v1")
    meta = json.loads((tmp_path / "meta.json").read_text())
    assert meta["tail_counts"]["20"]["optimizer_tail_count"] == 1
    assert meta["notes"]

    before = (tmp_path / "summary.csv").read_bytes()
    (tmp_path / "summary.csv").unlink()
    report_from_directory(tmp_path)
    assert (tmp_path / "summary.csv").read_bytes() == before
