# main.py
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


import argparse
import logging
import os
import sys
from typing import List, Optional

import numpy as np
import pandas as pd

from .baselines import NotPositiveDefiniteError, compute_mspbe, compute_neu
from .config import (APP_DESCRIPTION,
                     APP_TITLE,
                     DEFAULT_LAMBDAS,
                     DEFAULT_LOG_LEVEL,
                     DEFAULT_RIDGE,
                     SETTINGS_KEY_ALGORITHM,
                     SETTINGS_KEY_BASE_SEED,
                     SETTINGS_KEY_CRITERION,
                     SETTINGS_KEY_DEBUG_LOGS,
                     SETTINGS_KEY_FEATURES,
                     SETTINGS_KEY_KIND,
                     SETTINGS_KEY_LAMBDAS,
                     SETTINGS_KEY_OUTPUT,
                     SETTINGS_KEY_PAPER_SCALE,
                     SETTINGS_KEY_PROBLEM,
                     SETTINGS_KEY_TRUTH,
                     SETTINGS_KEY_TRUTH_SAMPLES,
                     SETTINGS_SCHEMA,
                     ExperimentSettings,
                     SettingsError)
from .environments import make_problem
from .evaluation import expected_td_system, ground_truth, write_truth_csv
from .experiments import (learning_curve,
                          load_results,
                          rank,
                          run_options,
                          run_sweep,
                          sensitivity_table,
                          single_cell,
                          stepsize_table,
                          sweep_cells,
                          write_results)
from .utils import OffPolicyError, ensure_dir, set_log_level

LOG_FORMAT = "%(asctime)s [%(threadName)-12.12s] [%(levelname)-5.5s]  %(message)s"

# flags that take no value
BOOLEAN_KEYS = [SETTINGS_KEY_DEBUG_LOGS, SETTINGS_KEY_PAPER_SCALE]

# extra spellings of some flags
FLAG_ALIASES = {
    SETTINGS_KEY_ALGORITHM: ["--algo"],
    SETTINGS_KEY_BASE_SEED: ["--seed"],
    SETTINGS_KEY_DEBUG_LOGS: ["--debug"],
}

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_SETTINGS_ERROR = 2


###############################################################################
# commands
###############################################################################

def cmd_run(settings: ExperimentSettings) -> None:
    """
    Run one parameter point for `runs` runs
    """
    cell = single_cell(settings)
    options = run_options(settings, cell.problem)
    logging.info(f"[MAIN] Running {cell.cell_id}")
    records = run_sweep([cell], settings.runs, options, workers=settings.workers)
    write_results(settings[SETTINGS_KEY_OUTPUT], [cell], records, settings)


def cmd_sweep(settings: ExperimentSettings) -> None:
    cells = sweep_cells(settings)
    options = run_options(settings, settings[SETTINGS_KEY_PROBLEM])
    records = run_sweep(cells, settings.runs, options, workers=settings.workers)
    write_results(settings[SETTINGS_KEY_OUTPUT], cells, records, settings)


def cmd_report(settings: ExperimentSettings) -> None:
    """
    Rank the cells of a results directory and write the sensitivity table next to them
    """
    results_dir = settings.results_dir
    criterion = settings[SETTINGS_KEY_CRITERION]
    _, cells = load_results(results_dir)

    ranked = rank(cells, criterion)
    ranked.to_csv(os.path.join(results_dir, f"ranking-{criterion}.csv"), index=False)
    sensitivity_table(cells).to_csv(os.path.join(results_dir, "sensitivity.csv"), index=False)

    best = ranked.iloc[0]
    logging.info(f"[MAIN] Best cell by {criterion}: {best['cell_id']} ({best[criterion]})")


def cmd_oracle(settings: ExperimentSettings, objectives: bool = False) -> None:
    """
    Write the ground truth of a problem and, with `objectives`, the MSPBE and
    NEU of the zero vector and of the expected TD fixed point of every GVF
    """
    settings.require(SETTINGS_KEY_PROBLEM)
    name = settings[SETTINGS_KEY_PROBLEM]
    problem = make_problem(name, features=settings[SETTINGS_KEY_FEATURES], seed=settings[SETTINGS_KEY_BASE_SEED])
    truth = ground_truth(problem, mode=settings[SETTINGS_KEY_TRUTH],
                         samples=settings[SETTINGS_KEY_TRUTH_SAMPLES], seed=settings[SETTINGS_KEY_BASE_SEED])

    out_dir = ensure_dir(settings[SETTINGS_KEY_OUTPUT])
    path = os.path.join(out_dir, f"truth-{name}.csv")
    write_truth_csv(problem, truth, path)
    logging.info(f"[MAIN] Ground truth ({truth.source}) written to {path}")

    if not objectives:
        return

    rows = []
    for j, g in enumerate(problem.gvfs):
        for lam in settings.get(SETTINGS_KEY_LAMBDAS, DEFAULT_LAMBDAS):
            A, b, C = expected_td_system(problem, j, truth.d_b, lam)
            w_fixed = np.linalg.solve(A + DEFAULT_RIDGE * np.eye(problem.dim), b)
            for label, w in (("zero", np.zeros(problem.dim)), ("fixed-point", w_fixed)):
                try:
                    mspbe = compute_mspbe(A, b, C, w)
                except NotPositiveDefiniteError:
                    mspbe = float("nan")
                rows.append({"gvf": g.name, "lambda": lam, "weights": label,
                             "mspbe": mspbe, "neu": compute_neu(A, b, w)})
    path = os.path.join(out_dir, f"objectives-{name}.csv")
    pd.DataFrame(rows).to_csv(path, index=False)
    logging.info(f"[MAIN] Objectives written to {path}")


def cmd_plotdata(settings: ExperimentSettings) -> None:
    results_dir = settings.results_dir
    kind = settings[SETTINGS_KEY_KIND]
    criterion = settings[SETTINGS_KEY_CRITERION]
    series, cells = load_results(results_dir)

    if kind == "learning_curve":
        table = learning_curve(series, cells, criterion)
    elif kind == "stepsize":
        table = stepsize_table(cells, criterion)
    else:
        table = sensitivity_table(cells)

    path = os.path.join(results_dir, f"{kind}.csv")
    table.to_csv(path, index=False)
    logging.info(f"[MAIN] {len(table)} rows written to {path}")


###############################################################################
# command line
###############################################################################

def _add_setting_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", metavar="FILE", help="YAML settings file")
    for key in SETTINGS_SCHEMA:
        flags = [f"--{key}"] + FLAG_ALIASES.get(key, [])
        if key in BOOLEAN_KEYS:
            parser.add_argument(*flags, dest=key, action="store_const", const=True, default=None)
        else:
            parser.add_argument(*flags, dest=key, default=None, metavar="VALUE")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog=APP_TITLE, description=APP_DESCRIPTION)
    common = argparse.ArgumentParser(add_help=False)
    _add_setting_flags(common)

    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True
    sub.add_parser("run", parents=[common], help="run one parameter setting")
    sub.add_parser("sweep", parents=[common], help="run a parameter sweep")
    sub.add_parser("report", parents=[common], help="rank the cells of a results directory")
    oracle = sub.add_parser("oracle", parents=[common], help="write the ground truth of a problem")
    oracle.add_argument("--objectives", action="store_true",
                        help="also write the MSPBE and NEU of the expected TD fixed points")
    sub.add_parser("plotdata", parents=[common], help="write plot-ready data from a results directory")
    return parser


def load_settings(args: argparse.Namespace) -> ExperimentSettings:
    """
    Defaults, then the settings file, then the flags
    """
    settings = ExperimentSettings.from_file(args.config) if args.config else ExperimentSettings()
    settings.update({key: getattr(args, key) for key in SETTINGS_SCHEMA})
    return settings


def main(argv: Optional[List[str]] = None) -> int:
    logging.basicConfig(format=LOG_FORMAT, level=DEFAULT_LOG_LEVEL)

    args = build_parser().parse_args(argv)
    try:
        settings = load_settings(args)
        set_log_level(settings)
        logging.debug(f"[MAIN] Running '{args.command}' with {settings.as_dict()}")

        if args.command == "run":
            cmd_run(settings)
        elif args.command == "sweep":
            cmd_sweep(settings)
        elif args.command == "report":
            cmd_report(settings)
        elif args.command == "oracle":
            cmd_oracle(settings, objectives=args.objectives)
        else:
            cmd_plotdata(settings)

    except SettingsError as e:
        logging.error(f"[MAIN] Configuration error: {e}")
        print(f"{APP_TITLE}: {e}", file=sys.stderr)
        return EXIT_SETTINGS_ERROR
    except OffPolicyError as e:
        logging.error(f"[MAIN] {args.command} failed: {e}")
        print(f"{APP_TITLE}: {e}", file=sys.stderr)
        return EXIT_ERROR

    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
