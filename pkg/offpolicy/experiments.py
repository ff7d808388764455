# experiments.py
#
# MIT License
#
# Copyright (c) 2026 The offpolicy authors
#
# Permission is hereby granted, free of charge, to any person obtaining a copy
# of this software and associated documentation files (the "Software"), to deal
# in the Software without restriction, including without limitation the rights
# to use, copy, modify, merge, publish, distribute, sublicense, and/or sell
# copies of the Software, and to permit persons to whom the Software is
# furnished to do so, subject to the following conditions:
#
# The above copyright notice and this permission notice shall be included in all
# copies or substantial portions of the Software.
#
# THE SOFTWARE IS PROVIDED "AS IS", WITHOUT WARRANTY OF ANY KIND, EXPRESS OR
# IMPLIED, INCLUDING BUT NOT LIMITED TO THE WARRANTIES OF MERCHANTABILITY,
# FITNESS FOR A PARTICULAR PURPOSE AND NONINFRINGEMENT. IN NO EVENT SHALL THE
# AUTHORS OR COPYRIGHT HOLDERS BE LIABLE FOR ANY CLAIM, DAMAGES OR OTHER
# LIABILITY, WHETHER IN AN ACTION OF CONTRACT, TORT OR OTHERWISE, ARISING FROM,
# OUT OF OR IN CONNECTION WITH THE SOFTWARE OR THE USE OR OTHER DEALINGS IN THE
# SOFTWARE.

"""
Parameter grids, seeded execution of sweep cells, and result aggregation.
"""

import functools
import itertools
import json
import logging
import math
import os
from dataclasses import dataclass, field
from multiprocessing import Pool
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .baselines import BASELINE_VARIANTS, BaselineError, LstdAccumulator
from .config import (ALGORITHM_IDS,
                     BASELINE_IDS,
                     DEFAULT_ALPHA_HS,
                     DEFAULT_ALPHAS,
                     DEFAULT_BETAS,
                     DEFAULT_C_BAR,
                     DEFAULT_CUTOFF,
                     DEFAULT_ETD_STUDY_LAMBDAS,
                     DEFAULT_FINAL_FRACTION,
                     DEFAULT_LAMBDAS,
                     DEFAULT_RIDGE,
                     DEFAULT_TRUTH_SAMPLES,
                     DEFAULT_ZETAS,
                     EPISODIC_ONLY_IDS,
                     GRADIENT_ALGORITHM_IDS,
                     PROBLEM_COLLISION,
                     PROBLEM_IDS,
                     SETTINGS_KEY_ALGORITHM,
                     SETTINGS_KEY_ALGORITHMS,
                     SETTINGS_KEY_ALPHA,
                     SETTINGS_KEY_ALPHA_H,
                     SETTINGS_KEY_ALPHA_HS,
                     SETTINGS_KEY_ALPHAS,
                     SETTINGS_KEY_BASE_SEED,
                     SETTINGS_KEY_BETA,
                     SETTINGS_KEY_BETAS,
                     SETTINGS_KEY_C_BAR,
                     SETTINGS_KEY_CUTOFF,
                     SETTINGS_KEY_FEATURES,
                     SETTINGS_KEY_GRID,
                     SETTINGS_KEY_HTD_SIGN,
                     SETTINGS_KEY_LAMBDA,
                     SETTINGS_KEY_LAMBDAS,
                     SETTINGS_KEY_PROBLEM,
                     SETTINGS_KEY_RHO_PLACEMENT,
                     SETTINGS_KEY_TRACE_FORM,
                     SETTINGS_KEY_TRUTH,
                     SETTINGS_KEY_TRUTH_SAMPLES,
                     SETTINGS_KEY_ZETA,
                     SETTINGS_KEY_ZETAS,
                     ExperimentSettings)
from .environments import Problem, make_problem
from .evaluation import (GroundTruth,
                         auc,
                         final_perf,
                         ground_truth,
                         value_error)
from .learners import LearnerConfig, UnknownAlgorithmError, abtd_psi, make_learner
from .utils import OffPolicyError, ensure_dir, mix_seed

RESULTS_FILE = "results.csv"
SUMMARY_FILE = "summary.json"
SETTINGS_FILE = "settings.yaml"

RESULTS_COLUMNS = ["problem", "algorithm", "lambda", "alpha", "alpha_h", "beta", "zeta",
                   "rho_placement", "run", "step", "error", "diverged"]

PARAMETER_COLUMNS = ["problem", "algorithm", "lambda", "alpha", "alpha_h", "beta", "zeta", "rho_placement"]

###############################################################################
# errors
###############################################################################


class ExperimentError(OffPolicyError):
    """Base class for experiment errors"""
    pass


class UnknownCombinationError(ExperimentError):
    """The algorithm cannot run on that problem"""
    pass


class ResultsError(ExperimentError):
    """Missing or corrupt results files"""
    pass


###############################################################################
# cells and grids
###############################################################################

@dataclass(frozen=True)
class SweepCell:
    """
    One parameter point of one algorithm on one problem.

    Baselines have no stepsize and record alpha = 0.
    """
    problem: str
    algorithm: str
    alpha: float = 0.0
    alpha_h: float = 0.0
    lam: float = 0.0
    beta: float = 0.0
    zeta: float = 0.0
    rho_placement: str = "full-delta"
    trace_form: str = "rho-inside"
    htd_sign: str = "main"
    c_bar: float = DEFAULT_C_BAR

    @property
    def cell_id(self) -> str:
        return (f"{self.problem}/{self.algorithm}/lambda={self.lam!r}/alpha={self.alpha!r}"
                f"/alpha_h={self.alpha_h!r}/beta={self.beta!r}/zeta={self.zeta!r}/{self.rho_placement}")

    @property
    def is_baseline(self) -> bool:
        return self.algorithm in BASELINE_IDS

    def learner_config(self) -> LearnerConfig:
        return LearnerConfig(algorithm=self.algorithm, alpha=self.alpha, alpha_h=self.alpha_h,
                             lam=self.lam, beta=self.beta, zeta=self.zeta, c_bar=self.c_bar,
                             rho_placement=self.rho_placement, trace_form=self.trace_form,
                             htd_sign=self.htd_sign)

    def parameters(self) -> Dict[str, Any]:
        return {"problem": self.problem, "algorithm": self.algorithm, "lambda": self.lam,
                "alpha": self.alpha, "alpha_h": self.alpha_h, "beta": self.beta,
                "zeta": self.zeta, "rho_placement": self.rho_placement}


@dataclass(frozen=True)
class SweepGrid:
    """
    The parameter values swept for one algorithm; parameters the algorithm
    does not use hold a single placeholder value.
    """
    algorithm: str
    problem: str
    alphas: Tuple[float, ...] = (0.0,)
    alpha_hs: Tuple[float, ...] = (0.0,)
    lambdas: Tuple[float, ...] = (0.0,)
    betas: Tuple[float, ...] = (0.0,)
    zetas: Tuple[float, ...] = (0.0,)
    rho_placement: str = "full-delta"
    trace_form: str = "rho-inside"
    htd_sign: str = "main"
    c_bar: float = DEFAULT_C_BAR

    def cells(self) -> List[SweepCell]:
        return [SweepCell(problem=self.problem, algorithm=self.algorithm, alpha=alpha,
                          alpha_h=alpha_h, lam=lam, beta=beta, zeta=zeta,
                          rho_placement=self.rho_placement, trace_form=self.trace_form,
                          htd_sign=self.htd_sign, c_bar=self.c_bar)
                for lam, alpha, alpha_h, beta, zeta in itertools.product(
                    self.lambdas, self.alphas, self.alpha_hs, self.betas, self.zetas)]

    def __len__(self) -> int:
        return len(self.alphas) * len(self.alpha_hs) * len(self.lambdas) * len(self.betas) * len(self.zetas)


def check_combination(algorithm: str, problem: str) -> None:
    if algorithm not in ALGORITHM_IDS + BASELINE_IDS:
        raise UnknownAlgorithmError(f"unknown algorithm '{algorithm}'")
    if problem not in PROBLEM_IDS:
        raise UnknownCombinationError(f"unknown problem '{problem}'")
    if algorithm in EPISODIC_ONLY_IDS and problem != PROBLEM_COLLISION:
        raise UnknownCombinationError(f"{algorithm} is only defined for the episodic {PROBLEM_COLLISION} problem")


def build_grid(algorithm: str, problem: str, grid: str = "default",
               alphas: Optional[Sequence[float]] = None,
               alpha_hs: Optional[Sequence[float]] = None,
               lambdas: Optional[Sequence[float]] = None,
               betas: Optional[Sequence[float]] = None,
               zetas: Optional[Sequence[float]] = None,
               **variants) -> SweepGrid:
    """
    The standard grid of an algorithm: 19 stepsizes for every incremental
    method, 8 secondary stepsizes for the gradient methods, the lambda grid
    (not for ABTD, which sweeps zeta instead) and the beta grid for ETD(lambda, beta).
    Baselines only sweep lambda.
    """
    check_combination(algorithm, problem)

    default_lambdas = DEFAULT_ETD_STUDY_LAMBDAS if grid == "etd-lambda-study" else DEFAULT_LAMBDAS
    values: Dict[str, Tuple[float, ...]] = {
        "lambdas": tuple(lambdas or default_lambdas),
    }
    if algorithm not in BASELINE_IDS:
        values["alphas"] = tuple(alphas or DEFAULT_ALPHAS)
    if algorithm in GRADIENT_ALGORITHM_IDS:
        values["alpha_hs"] = tuple(alpha_hs or DEFAULT_ALPHA_HS)
    if algorithm == "etdb":
        values["betas"] = tuple(betas or DEFAULT_BETAS)
    if algorithm == "abtd":
        values["zetas"] = tuple(zetas or DEFAULT_ZETAS)
        values["lambdas"] = (0.0,)

    return SweepGrid(algorithm=algorithm, problem=problem, **values, **variants)


###############################################################################
# running cells
###############################################################################

@dataclass(frozen=True)
class RunOptions:
    steps: int
    eval_every: int
    base_seed: int = 0
    cutoff: float = DEFAULT_CUTOFF
    features: str = "binary"
    truth: str = "exact"
    truth_samples: int = DEFAULT_TRUTH_SAMPLES
    final_fraction: float = DEFAULT_FINAL_FRACTION
    ridge: float = DEFAULT_RIDGE


@dataclass
class RunRecord:
    """
    The error series of one run of one cell. A diverged series stops at the
    detection point and its auc and final are the divergence threshold.
    """
    cell_id: str
    run: int
    seed: int
    steps: List[int] = field(default_factory=list)
    errors: List[float] = field(default_factory=list)
    diverged: bool = False
    auc: float = 0.0
    final: float = 0.0
    threshold: float = 0.0


def stream_seed(base_seed: int, cell_id: str, run_index: int) -> int:
    """
    Seed of the behavior stream of one run of one cell
    """
    return mix_seed(base_seed, cell_id, run_index)


def feature_seed(base_seed: int, problem: str, run_index: int) -> int:
    return mix_seed(base_seed, problem, run_index, "features")


@functools.lru_cache(maxsize=64)
def _cached_problem(name: str, features: str, seed: int) -> Problem:
    return make_problem(name, features=features, seed=seed)


@functools.lru_cache(maxsize=16)
def _cached_truth(name: str, features: str, seed: int, mode: str, samples: int, base_seed: int) -> GroundTruth:
    return ground_truth(_cached_problem(name, features, seed), mode=mode, samples=samples, seed=base_seed)


def _setup(cell: SweepCell, run_index: int, options: RunOptions):
    check_combination(cell.algorithm, cell.problem)
    fseed = feature_seed(options.base_seed, cell.problem, run_index)
    problem = _cached_problem(cell.problem, options.features, fseed)
    # neither d_b nor the true values depend on the features
    truth = _cached_truth(cell.problem, options.features, 0, options.truth, options.truth_samples, options.base_seed)
    zeros = [np.zeros(problem.dim)] * len(problem.gvfs)
    threshold = options.cutoff * value_error(problem, truth, zeros)
    return problem, truth, threshold


def _finish(record: RunRecord, options: RunOptions) -> RunRecord:
    if record.diverged or not record.errors:
        record.diverged = True
        record.auc = record.final = record.threshold
    else:
        record.auc = auc(record.errors)
        record.final = final_perf(record.errors, options.final_fraction)
    return record


def run_cell(cell: SweepCell, run_index: int, options: RunOptions) -> RunRecord:
    """
    Simulate one behavior stream, update one learner per GVF and record the
    value error every `eval_every` steps.
    """
    if cell.is_baseline:
        return run_baseline(cell, run_index, options)

    problem, truth, threshold = _setup(cell, run_index, options)
    seed = stream_seed(options.base_seed, cell.cell_id, run_index)
    rng = np.random.default_rng(seed)
    record = RunRecord(cell_id=cell.cell_id, run=run_index, seed=seed, threshold=threshold)

    config = cell.learner_config()
    learners = []
    for g in problem.gvfs:
        psi = abtd_psi(cell.zeta, problem.behavior, g.target) if cell.algorithm == "abtd" else None
        learners.append(make_learner(config, problem.dim, episodic=problem.episodic, psi=psi))

    s = problem.reset(rng)
    episode_start = True
    for step in range(1, options.steps + 1):
        transitions, s, done = problem.step(s, rng, episode_start=episode_start)
        episode_start = done
        for learner, t in zip(learners, transitions):
            learner.update(t)

        if any(learner.diverged for learner in learners):
            record.diverged = True
        elif step % options.eval_every == 0:
            error = value_error(problem, truth, [learner.w for learner in learners])
            if not math.isfinite(error) or error > threshold:
                record.diverged = True
            else:
                record.steps.append(step)
                record.errors.append(error)

        if record.diverged:
            logging.info(f"[SWEEP] {cell.cell_id} run {run_index} diverged at step {step}")
            break

    return _finish(record, options)


def run_baseline(cell: SweepCell, run_index: int, options: RunOptions) -> RunRecord:
    """
    Accumulate the least-squares statistics over the whole stream and solve once at the end
    """
    problem, truth, threshold = _setup(cell, run_index, options)
    seed = stream_seed(options.base_seed, cell.cell_id, run_index)
    rng = np.random.default_rng(seed)
    record = RunRecord(cell_id=cell.cell_id, run=run_index, seed=seed, threshold=threshold)

    variant = BASELINE_VARIANTS[cell.algorithm]
    accumulators = [LstdAccumulator(problem.dim, lam=cell.lam, variant=variant) for _ in problem.gvfs]

    s = problem.reset(rng)
    episode_start = True
    for _ in range(options.steps):
        transitions, s, done = problem.step(s, rng, episode_start=episode_start)
        episode_start = done
        for acc, t in zip(accumulators, transitions):
            acc.accumulate(t)

    try:
        weights = [acc.solve(options.ridge) for acc in accumulators]
        error = value_error(problem, truth, weights)
    except BaselineError as e:
        logging.info(f"[SWEEP] {cell.cell_id} run {run_index}: {e}")
        record.diverged = True
    else:
        if math.isfinite(error) and error <= threshold:
            record.steps.append(options.steps)
            record.errors.append(error)
        else:
            record.diverged = True

    return _finish(record, options)


def _run_task(task: Tuple[SweepCell, int, RunOptions]) -> RunRecord:
    return run_cell(*task)


def run_sweep(cells: Sequence[SweepCell], runs: int, options: RunOptions, workers: int = 1) -> List[RunRecord]:
    """
    Run every cell `runs` times. The records come back ordered by
    (cell id, run index) whatever the number of workers.
    """
    tasks = [(cell, run, options) for cell in cells for run in range(runs)]
    logging.info(f"[SWEEP] {len(cells)} cells x {runs} runs = {len(tasks)} runs on {workers} worker(s)")

    if workers <= 1:
        records = [_run_task(task) for task in tasks]
    else:
        with Pool(processes=workers) as pool:
            records = list(pool.imap_unordered(_run_task, tasks, chunksize=max(1, len(tasks) // (workers * 8))))

    records.sort(key=lambda r: (r.cell_id, r.run))
    return records


###############################################################################
# cells from settings
###############################################################################

def run_options(settings: ExperimentSettings, problem: str) -> RunOptions:
    return RunOptions(steps=settings.steps_for(problem),
                      eval_every=settings.eval_every,
                      base_seed=settings[SETTINGS_KEY_BASE_SEED],
                      cutoff=settings[SETTINGS_KEY_CUTOFF],
                      features=settings[SETTINGS_KEY_FEATURES],
                      truth=settings[SETTINGS_KEY_TRUTH],
                      truth_samples=settings[SETTINGS_KEY_TRUTH_SAMPLES])


def _variants(settings: ExperimentSettings) -> Dict[str, Any]:
    return {"rho_placement": settings[SETTINGS_KEY_RHO_PLACEMENT],
            "trace_form": settings[SETTINGS_KEY_TRACE_FORM],
            "htd_sign": settings[SETTINGS_KEY_HTD_SIGN],
            "c_bar": settings[SETTINGS_KEY_C_BAR]}


def single_cell(settings: ExperimentSettings) -> SweepCell:
    """
    The one parameter point named by the settings, for `run`
    """
    settings.require(SETTINGS_KEY_PROBLEM, SETTINGS_KEY_ALGORITHM)
    algorithm, problem = settings[SETTINGS_KEY_ALGORITHM], settings[SETTINGS_KEY_PROBLEM]
    check_combination(algorithm, problem)
    if algorithm not in BASELINE_IDS:
        settings.require(SETTINGS_KEY_ALPHA)
    if algorithm in GRADIENT_ALGORITHM_IDS:
        settings.require(SETTINGS_KEY_ALPHA_H)
    cell = SweepCell(problem=problem, algorithm=algorithm,
                     alpha=settings.get(SETTINGS_KEY_ALPHA, 0.0),
                     alpha_h=settings[SETTINGS_KEY_ALPHA_H] if algorithm in GRADIENT_ALGORITHM_IDS else 0.0,
                     lam=settings[SETTINGS_KEY_LAMBDA],
                     beta=settings[SETTINGS_KEY_BETA] if algorithm == "etdb" else 0.0,
                     zeta=settings[SETTINGS_KEY_ZETA] if algorithm == "abtd" else 0.0,
                     **_variants(settings))
    if not cell.is_baseline:
        cell.learner_config().validate()
    return cell


def sweep_cells(settings: ExperimentSettings) -> List[SweepCell]:
    """
    Every cell of every selected algorithm, skipping the episodic-only
    algorithms on continuing problems unless they were asked for explicitly.
    """
    settings.require(SETTINGS_KEY_PROBLEM)
    problem = settings[SETTINGS_KEY_PROBLEM]
    explicit = settings[SETTINGS_KEY_ALGORITHMS] or ([settings[SETTINGS_KEY_ALGORITHM]] if settings[SETTINGS_KEY_ALGORITHM] else None)
    algorithms = explicit or [a for a in ALGORITHM_IDS + BASELINE_IDS
                              if a not in EPISODIC_ONLY_IDS or problem == PROBLEM_COLLISION]

    cells: List[SweepCell] = []
    for algorithm in algorithms:
        grid = build_grid(algorithm, problem, grid=settings[SETTINGS_KEY_GRID],
                          alphas=settings[SETTINGS_KEY_ALPHAS],
                          alpha_hs=settings[SETTINGS_KEY_ALPHA_HS],
                          lambdas=settings[SETTINGS_KEY_LAMBDAS],
                          betas=settings[SETTINGS_KEY_BETAS],
                          zetas=settings[SETTINGS_KEY_ZETAS],
                          **_variants(settings))
        logging.debug(f"[SWEEP] {algorithm}: {len(grid)} cells")
        cells.extend(grid.cells())
    return sorted(cells, key=lambda c: c.cell_id)


###############################################################################
# results files
###############################################################################

def results_frame(cells: Sequence[SweepCell], records: Sequence[RunRecord]) -> pd.DataFrame:
    by_id = {c.cell_id: c for c in cells}
    frames = []
    for r in records:
        n = len(r.steps)
        params = by_id[r.cell_id].parameters()
        columns = {k: [params[k]] * n for k in PARAMETER_COLUMNS}
        columns.update({"run": [r.run] * n, "step": r.steps, "error": r.errors, "diverged": [r.diverged] * n})
        frames.append(pd.DataFrame(columns, columns=RESULTS_COLUMNS))
    if not frames:
        return pd.DataFrame(columns=RESULTS_COLUMNS)
    return pd.concat(frames, ignore_index=True)


def summarize(cells: Sequence[SweepCell], records: Sequence[RunRecord]) -> List[Dict[str, Any]]:
    """
    One entry per cell, sorted by cell id: mean auc and final over the runs
    """
    grouped: Dict[str, List[RunRecord]] = {}
    for r in records:
        grouped.setdefault(r.cell_id, []).append(r)

    summary = []
    for cell in sorted(cells, key=lambda c: c.cell_id):
        runs = sorted(grouped.get(cell.cell_id, []), key=lambda r: r.run)
        if not runs:
            continue
        summary.append({
            "cell_id": cell.cell_id,
            "parameters": cell.parameters(),
            "auc": float(np.mean([r.auc for r in runs])),
            "final": float(np.mean([r.final for r in runs])),
            "diverged_fraction": sum(r.diverged for r in runs) / len(runs),
            "runs": len(runs),
            "threshold": runs[0].threshold,
        })
    return summary


def write_results(out_dir: str, cells: Sequence[SweepCell], records: Sequence[RunRecord],
                  settings: Optional[ExperimentSettings] = None) -> None:
    ensure_dir(out_dir)
    results_frame(cells, records).to_csv(os.path.join(out_dir, RESULTS_FILE), index=False)
    with open(os.path.join(out_dir, SUMMARY_FILE), "w") as f:
        json.dump(summarize(cells, records), f, indent=2)
        f.write("\n")
    if settings is not None:
        settings.dump(os.path.join(out_dir, SETTINGS_FILE))
    logging.info(f"[SWEEP] results written to {out_dir}")


def load_results(results_dir: str) -> Tuple[pd.DataFrame, pd.DataFrame]:
    """
    The long-format series and the per-cell summary table
    """
    results_path = os.path.join(results_dir, RESULTS_FILE)
    summary_path = os.path.join(results_dir, SUMMARY_FILE)
    try:
        series = pd.read_csv(results_path)
        with open(summary_path, "r") as f:
            summary = json.load(f)
    except FileNotFoundError as e:
        raise ResultsError(f"missing results file: {e.filename}")
    except (ValueError, pd.errors.ParserError) as e:
        raise ResultsError(f"corrupt results in {results_dir}: {e}")

    missing = [c for c in RESULTS_COLUMNS if c not in series.columns]
    if missing:
        raise ResultsError(f"{results_path} lacks the columns {', '.join(missing)}")
    try:
        return series, summary_frame(summary)
    except (KeyError, TypeError) as e:
        raise ResultsError(f"corrupt summary in {summary_path}: {e}")


def summary_frame(summary: Sequence[Dict[str, Any]]) -> pd.DataFrame:
    rows = []
    for entry in summary:
        row = {"cell_id": entry["cell_id"]}
        row.update({k: entry["parameters"][k] for k in PARAMETER_COLUMNS})
        row.update({k: entry[k] for k in ("auc", "final", "diverged_fraction", "runs", "threshold")})
        rows.append(row)
    return pd.DataFrame(rows, columns=["cell_id"] + PARAMETER_COLUMNS +
                        ["auc", "final", "diverged_fraction", "runs", "threshold"])


###############################################################################
# ranking and plot data
###############################################################################

def rank(cells: pd.DataFrame, criterion: str = "final") -> pd.DataFrame:
    """
    Cells ordered by ascending criterion, ties broken by cell id
    """
    if cells.empty:
        raise ExperimentError("nothing to rank")
    if criterion not in ("auc", "final"):
        raise ExperimentError(f"unknown criterion '{criterion}'")
    ranked = cells.sort_values([criterion, "cell_id"], kind="mergesort").reset_index(drop=True)
    ranked.insert(0, "rank", np.arange(1, len(ranked) + 1))
    return ranked


def sensitivity_table(cells: pd.DataFrame) -> pd.DataFrame:
    """
    One row per cell with both criteria, plus the percentage of the
    algorithm's cells in which some run diverged.
    """
    if cells.empty:
        raise ExperimentError("no cells")
    table = cells.sort_values("cell_id", kind="mergesort").reset_index(drop=True)
    diverged = (table["diverged_fraction"] > 0).groupby(table["algorithm"]).transform("mean")
    table["algorithm_diverged_pct"] = 100.0 * diverged
    return table


def best_cells(cells: pd.DataFrame, criterion: str, by: Sequence[str]) -> pd.DataFrame:
    ranked = rank(cells, criterion)
    return ranked.groupby(list(by), sort=True).head(1).sort_values(list(by), kind="mergesort").reset_index(drop=True)


def learning_curve(series: pd.DataFrame, cells: pd.DataFrame, criterion: str = "final") -> pd.DataFrame:
    """
    Mean error (and its standard error) against step for the best cell of
    every (algorithm, lambda, zeta). Points missing after a divergence count
    as the divergence threshold.
    """
    rows = []
    for _, best in best_cells(cells, criterion, ["algorithm", "lambda", "zeta"]).iterrows():
        mask = np.ones(len(series), dtype=bool)
        for k in PARAMETER_COLUMNS:
            mask &= (series[k] == best[k]).to_numpy()
        cell_series = series[mask]
        if cell_series.empty:
            continue
        table = cell_series.pivot_table(index="step", columns="run", values="error", aggfunc="first")
        runs = int(best["runs"])
        table = table.reindex(columns=range(runs)).fillna(best["threshold"])
        mean = table.mean(axis=1)
        if runs > 1:
            stderr = table.std(axis=1, ddof=1) / math.sqrt(runs)
        else:
            stderr = pd.Series(0.0, index=table.index)
        for step in table.index:
            rows.append({"algorithm": best["algorithm"], "lambda": best["lambda"], "zeta": best["zeta"],
                         "cell_id": best["cell_id"], "step": int(step),
                         "mean_error": float(mean[step]), "stderr": float(stderr[step]), "runs": runs})
    return pd.DataFrame(rows, columns=["algorithm", "lambda", "zeta", "cell_id", "step",
                                       "mean_error", "stderr", "runs"])


def stepsize_table(cells: pd.DataFrame, criterion: str = "final") -> pd.DataFrame:
    """
    For every (algorithm, alpha), the criterion of the best setting of the other parameters
    """
    best = best_cells(cells, criterion, ["problem", "algorithm", "alpha"])
    out = best[["problem", "algorithm", "alpha", criterion, "diverged_fraction", "cell_id"]]
    return out.rename(columns={criterion: "value"})
