# config.py
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

import logging
import os
from typing import Any, Dict, Iterable, List, Optional

import yaml

from .utils import OffPolicyError, ParseError, parse_number

CURR_DIR = os.path.dirname(os.path.realpath(__file__))

###############################################################################
# Application info and credits
###############################################################################

APP_TITLE = "offpolicy"
APP_DESCRIPTION = "Linear off-policy TD prediction algorithms, benchmarks and a parameter-sweep harness"

# prefix for all the environment variables we read
APP_ENV_PREFIX = "OFFPOLICY"

# number of worker processes for sweeps
ENV_WORKERS = f"{APP_ENV_PREFIX}_WORKERS"

###############################################################################
# identifiers
###############################################################################

PROBLEM_COLLISION = "collision"
PROBLEM_FOURROOMS = "fourrooms"
PROBLEM_HV_FOURROOMS = "hv-fourrooms"

PROBLEM_IDS = [PROBLEM_COLLISION, PROBLEM_FOURROOMS, PROBLEM_HV_FOURROOMS]

# the incremental learners
ALGORITHM_IDS = ["td", "altlife",
                 "gtd", "gtd2", "htd", "pgtd", "pgtd2",
                 "etd", "etdb",
                 "tb", "vtrace", "abtd"]

# least-squares fixed-point baselines
BASELINE_IDS = ["lstd", "lsetd", "lsaltd"]

# learners with a secondary weight vector (and so an alpha_h)
GRADIENT_ALGORITHM_IDS = ["gtd", "gtd2", "htd", "pgtd", "pgtd2"]

# algorithms only defined for episodic problems
EPISODIC_ONLY_IDS = ["altlife", "lsaltd"]

RHO_PLACEMENTS = ["full-delta", "partial-delta"]
TRACE_FORMS = ["rho-inside", "rho-outside"]
HTD_SIGNS = ["main", "flipped"]
FEATURE_KINDS = ["binary", "tabular"]
TRUTH_MODES = ["exact", "sampled"]
CRITERIA = ["final", "auc"]
PLOT_KINDS = ["learning_curve", "stepsize", "sensitivity"]
GRID_NAMES = ["default", "etd-lambda-study"]

###############################################################################
# settings keys
###############################################################################

# note: command line flags are derived from these keys (`--alpha-h` <-> "alpha-h")

SETTINGS_KEY_PROBLEM = "problem"

SETTINGS_KEY_ALGORITHM = "algorithm"

# restricts a sweep to a subset of the algorithms
SETTINGS_KEY_ALGORITHMS = "algorithms"

SETTINGS_KEY_ALPHA = "alpha"

SETTINGS_KEY_ALPHA_H = "alpha-h"

SETTINGS_KEY_LAMBDA = "lambda"

SETTINGS_KEY_BETA = "beta"

SETTINGS_KEY_ZETA = "zeta"

SETTINGS_KEY_C_BAR = "c-bar"

SETTINGS_KEY_RUNS = "runs"

SETTINGS_KEY_STEPS = "steps"

SETTINGS_KEY_EVAL_EVERY = "eval-every"

SETTINGS_KEY_BASE_SEED = "base-seed"

SETTINGS_KEY_OUTPUT = "output"

# input directory for `report` and `plotdata`
SETTINGS_KEY_RESULTS = "results"

# divergence cutoff, as a multiple of the zero-weight error
SETTINGS_KEY_CUTOFF = "cutoff"

SETTINGS_KEY_RHO_PLACEMENT = "rho-placement"

SETTINGS_KEY_TRACE_FORM = "trace-form"

SETTINGS_KEY_HTD_SIGN = "htd-sign"

SETTINGS_KEY_FEATURES = "features"

SETTINGS_KEY_TRUTH = "truth"

SETTINGS_KEY_TRUTH_SAMPLES = "truth-samples"

SETTINGS_KEY_GRID = "grid"

SETTINGS_KEY_ALPHAS = "alphas"

SETTINGS_KEY_ALPHA_HS = "alpha-hs"

SETTINGS_KEY_LAMBDAS = "lambdas"

SETTINGS_KEY_BETAS = "betas"

SETTINGS_KEY_ZETAS = "zetas"

SETTINGS_KEY_CRITERION = "criterion"

SETTINGS_KEY_KIND = "kind"

SETTINGS_KEY_WORKERS = "workers"

SETTINGS_KEY_DEBUG_LOGS = "debug-logs"

SETTINGS_KEY_PAPER_SCALE = "paper-scale"

###############################################################################
# Default values
###############################################################################

# the log level
DEFAULT_LOG_LEVEL = logging.INFO

# the Four Rooms map committed with the package
DEFAULT_FOURROOMS_MAP = os.path.join(CURR_DIR, "assets", "fourrooms.txt")

# constant discount of both benchmarks
DEFAULT_GAMMA = 0.9

# primary stepsizes: 2^-18, 2^-17, ..., 2^0
DEFAULT_ALPHAS = [2.0 ** -k for k in range(18, -1, -1)]

# secondary stepsizes: 0.01 * 2^{0,2,...,14}
DEFAULT_ALPHA_HS = [0.01 * 2.0 ** k for k in range(0, 15, 2)]

DEFAULT_LAMBDAS = [0.0, 0.9]

# followon decay of ETD(lambda, beta)
DEFAULT_BETAS = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0]

DEFAULT_ZETAS = [0.0, 0.9]

# lambda grid for the emphatic lambda study
DEFAULT_ETD_STUDY_LAMBDAS = [0.0, 0.2, 0.4, 0.6, 0.8, 0.9, 0.95, 1.0]

# V-trace truncation level
DEFAULT_C_BAR = 1.0

# desk profile
DEFAULT_RUNS = 10
DEFAULT_EVAL_EVERY = 10

# full profile (`--paper-scale`)
DEFAULT_PAPER_RUNS = 50
DEFAULT_PAPER_EVAL_EVERY = 1

# stream length per problem
DEFAULT_STEPS = {
    PROBLEM_COLLISION: 20000,
    PROBLEM_FOURROOMS: 50000,
    PROBLEM_HV_FOURROOMS: 50000,
}

# error > cutoff * (error of the zero weight vector) marks a run as diverged
DEFAULT_CUTOFF = 100.0

# fraction of the series averaged for the final performance
DEFAULT_FINAL_FRACTION = 0.01

# ridge added to A before solving the least-squares fixed point
DEFAULT_RIDGE = 1e-8

# power iteration tolerance and iteration cap for d_b
DEFAULT_POWER_TOL = 1e-12
DEFAULT_POWER_MAX_ITER = 1000000

# steps before a target-policy rollout is declared non-terminating
DEFAULT_ROLLOUT_HORIZON = 10000

# samples for `truth: sampled`
DEFAULT_TRUTH_SAMPLES = 10000000

# output directory
DEFAULT_OUTPUT = "results"


###############################################################################
# errors
###############################################################################

class SettingsError(OffPolicyError):
    """Base class for configuration errors"""
    pass


class UnknownSettingError(SettingsError):
    """A key that is not a known setting"""
    pass


class MissingSettingError(SettingsError):
    """A required setting has no value"""
    pass


class InvalidSettingError(SettingsError):
    """A setting has a value of the wrong type or out of range"""
    pass


###############################################################################
# settings
###############################################################################

def _as_float(key: str, value: Any) -> float:
    try:
        return parse_number(value)
    except ParseError as e:
        raise InvalidSettingError(f"{key}: {e}")


def _as_int(key: str, value: Any) -> int:
    if isinstance(value, bool):
        raise InvalidSettingError(f"{key}: expected an integer, got {value!r}")
    try:
        f = parse_number(value)
    except ParseError as e:
        raise InvalidSettingError(f"{key}: {e}")
    if f != int(f):
        raise InvalidSettingError(f"{key}: expected an integer, got {value!r}")
    return int(f)


def _as_bool(key: str, value: Any) -> bool:
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in ("1", "true", "yes", "on"):
        return True
    if text in ("0", "false", "no", "off"):
        return False
    raise InvalidSettingError(f"{key}: expected a boolean, got {value!r}")


def _as_str(key: str, value: Any) -> str:
    return str(value).strip().strip("\'").strip("\"")


def _as_float_list(key: str, value: Any) -> List[float]:
    if isinstance(value, str):
        value = [v for v in value.split(",") if v.strip()]
    if not isinstance(value, (list, tuple)):
        value = [value]
    return [_as_float(key, v) for v in value]


def _as_str_list(key: str, value: Any) -> List[str]:
    if isinstance(value, str):
        value = value.split(",")
    if not isinstance(value, (list, tuple)):
        value = [value]
    return [_as_str(key, v) for v in value if _as_str(key, v)]


def _choice(choices: Iterable[str]):
    choices = list(choices)

    def coerce(key: str, value: Any) -> str:
        s = _as_str(key, value)
        if s not in choices:
            raise InvalidSettingError(f"{key}: '{s}' is not one of {', '.join(choices)}")
        return s

    return coerce


def _choice_list(choices: Iterable[str]):
    one = _choice(choices)

    def coerce(key: str, value: Any) -> List[str]:
        return [one(key, v) for v in _as_str_list(key, value)]

    return coerce


# key -> (coercion, default)
SETTINGS_SCHEMA = {
    SETTINGS_KEY_PROBLEM: (_choice(PROBLEM_IDS), None),
    SETTINGS_KEY_ALGORITHM: (_choice(ALGORITHM_IDS + BASELINE_IDS), None),
    SETTINGS_KEY_ALGORITHMS: (_choice_list(ALGORITHM_IDS + BASELINE_IDS), None),
    SETTINGS_KEY_ALPHA: (_as_float, None),
    SETTINGS_KEY_ALPHA_H: (_as_float, 0.0),
    SETTINGS_KEY_LAMBDA: (_as_float, 0.0),
    SETTINGS_KEY_BETA: (_as_float, 0.0),
    SETTINGS_KEY_ZETA: (_as_float, 0.0),
    SETTINGS_KEY_C_BAR: (_as_float, DEFAULT_C_BAR),
    SETTINGS_KEY_RUNS: (_as_int, None),
    SETTINGS_KEY_STEPS: (_as_int, None),
    SETTINGS_KEY_EVAL_EVERY: (_as_int, None),
    SETTINGS_KEY_BASE_SEED: (_as_int, 0),
    SETTINGS_KEY_OUTPUT: (_as_str, DEFAULT_OUTPUT),
    SETTINGS_KEY_RESULTS: (_as_str, None),
    SETTINGS_KEY_CUTOFF: (_as_float, DEFAULT_CUTOFF),
    SETTINGS_KEY_RHO_PLACEMENT: (_choice(RHO_PLACEMENTS), "full-delta"),
    SETTINGS_KEY_TRACE_FORM: (_choice(TRACE_FORMS), "rho-inside"),
    SETTINGS_KEY_HTD_SIGN: (_choice(HTD_SIGNS), "main"),
    SETTINGS_KEY_FEATURES: (_choice(FEATURE_KINDS), "binary"),
    SETTINGS_KEY_TRUTH: (_choice(TRUTH_MODES), "exact"),
    SETTINGS_KEY_TRUTH_SAMPLES: (_as_int, DEFAULT_TRUTH_SAMPLES),
    SETTINGS_KEY_GRID: (_choice(GRID_NAMES), "default"),
    SETTINGS_KEY_ALPHAS: (_as_float_list, None),
    SETTINGS_KEY_ALPHA_HS: (_as_float_list, None),
    SETTINGS_KEY_LAMBDAS: (_as_float_list, None),
    SETTINGS_KEY_BETAS: (_as_float_list, None),
    SETTINGS_KEY_ZETAS: (_as_float_list, None),
    SETTINGS_KEY_CRITERION: (_choice(CRITERIA), "final"),
    SETTINGS_KEY_KIND: (_choice(PLOT_KINDS), "learning_curve"),
    SETTINGS_KEY_WORKERS: (_as_int, None),
    SETTINGS_KEY_DEBUG_LOGS: (_as_bool, False),
    SETTINGS_KEY_PAPER_SCALE: (_as_bool, False),
}


class ExperimentSettings(object):
    """
    The settings class: defaults, overridden by a YAML file, overridden by flags
    """

    def __init__(self, values: Optional[Dict[str, Any]] = None):
        self._values: Dict[str, Any] = {k: default for k, (_, default) in SETTINGS_SCHEMA.items()}
        if values:
            self.update(values)

    @classmethod
    def from_file(cls, path: str) -> "ExperimentSettings":
        """
        Load settings from a YAML mapping of key -> value
        """
        logging.debug(f"[SETTINGS] Loading settings from {path}")
        try:
            with open(path, "r") as f:
                contents = yaml.safe_load(f)
        except OSError as e:
            raise SettingsError(f"cannot read settings file {path}: {e}")
        except yaml.YAMLError as e:
            raise InvalidSettingError(f"{path} is not valid YAML: {e}")

        if contents is None:
            contents = {}
        if not isinstance(contents, dict):
            raise InvalidSettingError(f"{path}: expected a mapping of key -> value")
        return cls(contents)

    def update(self, values: Dict[str, Any]) -> None:
        """
        Override settings. `None` values are ignored, so unset flags never
        shadow file values.
        """
        for key, value in values.items():
            if key not in SETTINGS_SCHEMA:
                raise UnknownSettingError(f"unknown setting '{key}'")
            if value is None:
                continue
            coerce, _ = SETTINGS_SCHEMA[key]
            self._values[key] = coerce(key, value)
            logging.debug(f"[SETTINGS] {key} = {self._values[key]!r}")

    def __getitem__(self, key: str) -> Any:
        if key not in SETTINGS_SCHEMA:
            raise UnknownSettingError(f"unknown setting '{key}'")
        return self._values[key]

    def get(self, key: str, default: Any = None) -> Any:
        value = self[key]
        return default if value is None else value

    def require(self, *keys: str) -> None:
        for key in keys:
            if self[key] is None:
                raise MissingSettingError(f"missing required setting '{key}'")

    def as_dict(self) -> Dict[str, Any]:
        return dict(self._values)

    def dump(self, path: str) -> None:
        """
        Write the effective settings, for provenance
        """
        with open(path, "w") as outfile:
            yaml.safe_dump(self.as_dict(), outfile, default_flow_style=False, sort_keys=True)

    ###########################################################################
    # resolved values
    ###########################################################################

    @property
    def runs(self) -> int:
        default = DEFAULT_PAPER_RUNS if self[SETTINGS_KEY_PAPER_SCALE] else DEFAULT_RUNS
        return self.get(SETTINGS_KEY_RUNS, default)

    @property
    def eval_every(self) -> int:
        default = DEFAULT_PAPER_EVAL_EVERY if self[SETTINGS_KEY_PAPER_SCALE] else DEFAULT_EVAL_EVERY
        return self.get(SETTINGS_KEY_EVAL_EVERY, default)

    def steps_for(self, problem: str) -> int:
        return self.get(SETTINGS_KEY_STEPS, DEFAULT_STEPS[problem])

    @property
    def workers(self) -> int:
        if self[SETTINGS_KEY_WORKERS] is not None:
            return max(1, self[SETTINGS_KEY_WORKERS])
        env = os.environ.get(ENV_WORKERS)
        if env:
            return max(1, _as_int(ENV_WORKERS, env))
        return os.cpu_count() or 1

    @property
    def results_dir(self) -> str:
        return self.get(SETTINGS_KEY_RESULTS, self[SETTINGS_KEY_OUTPUT])
