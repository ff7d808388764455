import json
import os

import numpy as np
import pandas as pd
import pytest

from offpolicy.config import ExperimentSettings, MissingSettingError
from offpolicy.experiments import (RESULTS_COLUMNS,
                                   RESULTS_FILE,
                                   SETTINGS_FILE,
                                   SUMMARY_FILE,
                                   ExperimentError,
                                   ResultsError,
                                   RunOptions,
                                   RunRecord,
                                   SweepCell,
                                   UnknownCombinationError,
                                   build_grid,
                                   feature_seed,
                                   learning_curve,
                                   load_results,
                                   rank,
                                   run_cell,
                                   run_options,
                                   run_sweep,
                                   sensitivity_table,
                                   single_cell,
                                   stepsize_table,
                                   stream_seed,
                                   summarize,
                                   sweep_cells,
                                   write_results)
from offpolicy.learners import UnknownAlgorithmError
from offpolicy.utils import mix_seed

SMALL = RunOptions(steps=200, eval_every=20)


###############################################################################
# grids
###############################################################################

@pytest.mark.parametrize("algorithm, size", [
    ("td", 38), ("gtd", 304), ("gtd2", 304), ("htd", 304), ("pgtd", 304), ("pgtd2", 304),
    ("etd", 38), ("etdb", 228), ("tb", 38), ("vtrace", 38), ("abtd", 38),
    ("altlife", 38), ("lstd", 2), ("lsetd", 2), ("lsaltd", 2),
])
def test_default_grid_sizes(algorithm, size):
    grid = build_grid(algorithm, "collision")
    assert len(grid) == size
    assert len(grid.cells()) == size


def test_abtd_sweeps_zeta_instead_of_lambda():
    grid = build_grid("abtd", "collision")
    assert grid.lambdas == (0.0,)
    assert grid.zetas == (0.0, 0.9)


def test_etd_lambda_study_grid():
    grid = build_grid("etd", "fourrooms", grid="etd-lambda-study")
    assert len(grid) == 19 * 8
    assert 0.95 in grid.lambdas


def test_grid_overrides_and_variants():
    grid = build_grid("td", "collision", alphas=[0.5, 0.25], lambdas=[0.0], rho_placement="partial-delta")
    cells = grid.cells()
    assert [c.alpha for c in cells] == [0.5, 0.25]
    assert all(c.rho_placement == "partial-delta" for c in cells)


def test_invalid_combinations():
    with pytest.raises(UnknownCombinationError):
        build_grid("altlife", "fourrooms")
    with pytest.raises(UnknownCombinationError):
        build_grid("lsaltd", "hv-fourrooms")
    with pytest.raises(UnknownCombinationError):
        build_grid("td", "mountaincar")
    with pytest.raises(UnknownAlgorithmError):
        build_grid("sarsa", "collision")


def test_cell_id():
    cell = SweepCell(problem="collision", algorithm="gtd", alpha=0.25, alpha_h=0.01, lam=0.9)
    assert cell.cell_id == "collision/gtd/lambda=0.9/alpha=0.25/alpha_h=0.01/beta=0.0/zeta=0.0/full-delta"
    assert not cell.is_baseline
    assert SweepCell(problem="collision", algorithm="lstd").is_baseline


###############################################################################
# running cells
###############################################################################

def test_every_cell_has_its_own_streams():
    td_cell = SweepCell(problem="collision", algorithm="td", alpha=0.01)
    etd_cell = SweepCell(problem="collision", algorithm="etd", alpha=0.01)
    assert stream_seed(0, td_cell.cell_id, 3) == stream_seed(0, td_cell.cell_id, 3)
    assert stream_seed(0, td_cell.cell_id, 3) != stream_seed(0, td_cell.cell_id, 4)
    assert stream_seed(0, td_cell.cell_id, 3) != stream_seed(1, td_cell.cell_id, 3)
    assert stream_seed(0, td_cell.cell_id, 3) != feature_seed(0, "collision", 3)
    td = run_cell(td_cell, 1, SMALL)
    etd = run_cell(etd_cell, 1, SMALL)
    assert td.seed == stream_seed(0, td_cell.cell_id, 1) == mix_seed(0, td_cell.cell_id, 1)
    assert etd.seed == stream_seed(0, etd_cell.cell_id, 1)
    assert td.seed != etd.seed


def test_run_cell_is_deterministic():
    cell = SweepCell(problem="collision", algorithm="htd", alpha=0.05, alpha_h=0.01, lam=0.9)
    first = run_cell(cell, 0, SMALL)
    second = run_cell(cell, 0, SMALL)
    assert first.steps == list(range(20, 201, 20))
    assert first.errors == second.errors
    assert not first.diverged
    assert first.auc == pytest.approx(np.mean(first.errors))
    assert first.final == first.errors[-1]


def test_zero_weights_error_sets_the_threshold():
    record = run_cell(SweepCell(problem="collision", algorithm="td", alpha=1e-9), 0, RunOptions(steps=20, eval_every=10))
    # a tiny stepsize barely moves the weights away from zero
    assert record.errors[0] == pytest.approx(record.threshold / 100.0, rel=1e-3)


def test_divergence_records_the_threshold():
    options = RunOptions(steps=100, eval_every=10, cutoff=1e-6)
    record = run_cell(SweepCell(problem="collision", algorithm="td", alpha=0.1), 0, options)
    assert record.diverged
    assert record.errors == [] and record.steps == []
    assert record.auc == record.final == record.threshold


def test_fourrooms_cell_tracks_every_gvf():
    options = RunOptions(steps=50, eval_every=25)
    record = run_cell(SweepCell(problem="fourrooms", algorithm="tb", alpha=0.05, lam=0.9), 0, options)
    assert record.steps == [25, 50]
    assert all(np.isfinite(record.errors))


def test_abtd_cell():
    record = run_cell(SweepCell(problem="hv-fourrooms", algorithm="abtd", alpha=0.05, zeta=0.9),
                      0, RunOptions(steps=40, eval_every=20))
    assert len(record.errors) == 2


def test_lstd_baseline_on_tabular_features():
    options = RunOptions(steps=5000, eval_every=10, features="tabular")
    record = run_cell(SweepCell(problem="collision", algorithm="lstd"), 0, options)
    assert not record.diverged
    assert record.steps == [5000]
    assert record.final < 1e-6


def test_singular_baseline_diverges():
    options = RunOptions(steps=1, eval_every=1, features="tabular", ridge=0.0)
    record = run_cell(SweepCell(problem="collision", algorithm="lsetd"), 0, options)
    assert record.diverged
    assert record.final == record.threshold


def test_sweep_is_independent_of_the_worker_count():
    cells = build_grid("td", "collision", alphas=[0.1, 0.01], lambdas=[0.0, 0.9]).cells()
    serial = run_sweep(cells, 2, SMALL, workers=1)
    parallel = run_sweep(cells, 2, SMALL, workers=4)
    assert [(r.cell_id, r.run) for r in serial] == sorted((c.cell_id, i) for c in cells for i in range(2))
    assert [(r.cell_id, r.run, r.errors, r.auc) for r in serial] == \
        [(r.cell_id, r.run, r.errors, r.auc) for r in parallel]


###############################################################################
# cells from settings
###############################################################################

def test_single_cell_from_settings():
    settings = ExperimentSettings({"problem": "collision", "algorithm": "etdb", "alpha": "2^-5",
                                   "beta": 0.4, "zeta": 0.5, "lambda": 0.9})
    cell = single_cell(settings)
    assert cell.alpha == 2.0 ** -5 and cell.beta == 0.4 and cell.lam == 0.9
    assert cell.zeta == 0.0

    with pytest.raises(MissingSettingError):
        single_cell(ExperimentSettings({"problem": "collision", "algorithm": "td"}))
    assert single_cell(ExperimentSettings({"problem": "collision", "algorithm": "lstd"})).alpha == 0.0


def test_sweep_cells_from_settings():
    settings = ExperimentSettings({"problem": "fourrooms", "alphas": "0.5,0.25", "alpha-hs": "0.01",
                                   "lambdas": "0.9", "betas": "0.2", "zetas": "0.9"})
    cells = sweep_cells(settings)
    algorithms = {c.algorithm for c in cells}
    assert "altlife" not in algorithms and "lsaltd" not in algorithms
    assert {"td", "gtd", "abtd", "lstd", "lsetd"} <= algorithms
    assert [c.cell_id for c in cells] == sorted(c.cell_id for c in cells)
    assert len([c for c in cells if c.algorithm == "gtd"]) == 2

    collision = sweep_cells(ExperimentSettings({"problem": "collision", "algorithms": "altlife,lsaltd"}))
    assert {c.algorithm for c in collision} == {"altlife", "lsaltd"}


def test_run_options_from_settings():
    options = run_options(ExperimentSettings({"steps": 123, "eval-every": 3, "base-seed": 9}), "collision")
    assert (options.steps, options.eval_every, options.base_seed) == (123, 3, 9)
    assert run_options(ExperimentSettings(), "fourrooms").steps == 50000


###############################################################################
# results
###############################################################################

TD_FAST = SweepCell(problem="collision", algorithm="td", alpha=0.5)
TD_SLOW = SweepCell(problem="collision", algorithm="td", alpha=0.25)
GTD = SweepCell(problem="collision", algorithm="gtd", alpha=0.5, alpha_h=0.01)
CELLS = [TD_FAST, TD_SLOW, GTD]


def _record(cell, run, errors, diverged=False):
    record = RunRecord(cell_id=cell.cell_id, run=run, seed=run, steps=[10 * (i + 1) for i in range(len(errors))],
                       errors=list(errors), diverged=diverged, threshold=10.0)
    if diverged:
        record.auc = record.final = 10.0
    else:
        record.auc = float(np.mean(errors))
        record.final = errors[-1]
    return record


RECORDS = [
    _record(TD_FAST, 0, [2.0, 1.0]), _record(TD_FAST, 1, [4.0, 3.0]),
    _record(TD_SLOW, 0, [5.0], diverged=True), _record(TD_SLOW, 1, [1.0, 1.0]),
    _record(GTD, 0, [1.0, 1.0]), _record(GTD, 1, [1.0, 1.0]),
]


@pytest.fixture
def results_dir(tmp_path):
    write_results(str(tmp_path), CELLS, RECORDS, ExperimentSettings({"problem": "collision"}))
    return str(tmp_path)


def test_summary():
    summary = {s["cell_id"]: s for s in summarize(CELLS, RECORDS)}
    assert summary[TD_FAST.cell_id]["auc"] == 2.5
    assert summary[TD_FAST.cell_id]["final"] == 2.0
    assert summary[TD_SLOW.cell_id]["final"] == 5.5
    assert summary[TD_SLOW.cell_id]["diverged_fraction"] == 0.5
    assert summary[GTD.cell_id]["runs"] == 2


def test_results_files(results_dir):
    for name in (RESULTS_FILE, SUMMARY_FILE, SETTINGS_FILE):
        assert os.path.exists(os.path.join(results_dir, name))

    series, cells = load_results(results_dir)
    assert list(series.columns) == RESULTS_COLUMNS
    assert len(series) == 11
    assert len(cells) == 3
    with open(os.path.join(results_dir, SUMMARY_FILE)) as f:
        assert [s["cell_id"] for s in json.load(f)] == sorted(c.cell_id for c in CELLS)


def test_missing_or_corrupt_results(tmp_path):
    with pytest.raises(ResultsError):
        load_results(str(tmp_path))
    pd.DataFrame({"step": [1]}).to_csv(tmp_path / RESULTS_FILE, index=False)
    (tmp_path / SUMMARY_FILE).write_text("[]")
    with pytest.raises(ResultsError):
        load_results(str(tmp_path))


def test_rank(results_dir):
    _, cells = load_results(results_dir)
    ranked = rank(cells, "final")
    assert ranked["cell_id"].tolist() == [GTD.cell_id, TD_FAST.cell_id, TD_SLOW.cell_id]
    assert ranked["rank"].tolist() == [1, 2, 3]

    # equal criteria fall back to the cell id
    tied = cells.assign(final=1.0)
    assert rank(tied, "final")["cell_id"].tolist() == sorted(cells["cell_id"])

    with pytest.raises(ExperimentError):
        rank(cells, "median")
    with pytest.raises(ExperimentError):
        rank(cells.iloc[0:0], "final")


def test_sensitivity_table(results_dir):
    _, cells = load_results(results_dir)
    table = sensitivity_table(cells).set_index("cell_id")
    assert table.loc[TD_FAST.cell_id, "algorithm_diverged_pct"] == 50.0
    assert table.loc[GTD.cell_id, "algorithm_diverged_pct"] == 0.0


def test_learning_curve(results_dir):
    series, cells = load_results(results_dir)
    curve = learning_curve(series, cells, "final")
    td = curve[curve["algorithm"] == "td"]
    assert td["cell_id"].unique().tolist() == [TD_FAST.cell_id]
    assert td["step"].tolist() == [10, 20]
    assert td["mean_error"].tolist() == pytest.approx([3.0, 2.0])
    assert td["stderr"].tolist() == pytest.approx([1.0, 1.0])


def test_learning_curve_fills_diverged_runs_with_the_threshold(results_dir):
    series, cells = load_results(results_dir)
    curve = learning_curve(series, cells[cells["cell_id"] == TD_SLOW.cell_id], "final")
    assert curve["step"].tolist() == [10, 20]
    assert curve["mean_error"].tolist() == pytest.approx([3.0, 5.5])


def test_stepsize_table(results_dir):
    _, cells = load_results(results_dir)
    table = stepsize_table(cells, "final")
    assert list(table.columns) == ["problem", "algorithm", "alpha", "value", "diverged_fraction", "cell_id"]
    assert table[["algorithm", "alpha", "value"]].values.tolist() == [
        ["gtd", 0.5, 1.0], ["td", 0.25, 5.5], ["td", 0.5, 2.0]]
