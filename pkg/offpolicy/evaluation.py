# evaluation.py
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
Ground truth (true values and the behavior stationary distribution), the
value-error metrics and the two ranking criteria.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import scipy.linalg

from .baselines import compute_mspbe, compute_neu
from .config import (DEFAULT_FINAL_FRACTION,
                     DEFAULT_POWER_MAX_ITER,
                     DEFAULT_POWER_TOL,
                     DEFAULT_ROLLOUT_HORIZON,
                     DEFAULT_TRUTH_SAMPLES)
from .environments import Problem
from .utils import OffPolicyError, mix_seed

###############################################################################
# errors
###############################################################################


class EvaluationError(OffPolicyError):
    """Base class for evaluation errors"""
    pass


class HorizonExceededError(EvaluationError):
    """A target-policy rollout did not terminate within the horizon"""
    pass


class NonConvergenceError(EvaluationError):
    """Power iteration did not converge"""
    pass


class ZeroInterestError(EvaluationError):
    """The interest has no mass under d_b"""
    pass


class EmptySeriesError(EvaluationError):
    """An empty error series"""
    pass


###############################################################################
# ground truth
###############################################################################

@dataclass(frozen=True)
class GroundTruth:
    """
    `v_true` has one row per GVF; `source` is "exact" or "sampled(n)".
    """
    v_true: np.ndarray
    d_b: np.ndarray
    source: str

    def __post_init__(self):
        if abs(float(np.sum(self.d_b)) - 1.0) > 1e-9:
            raise EvaluationError(f"d_b sums to {np.sum(self.d_b)}")
        if not np.all(np.isfinite(self.v_true)):
            raise EvaluationError("true values are not finite")


def behavior_transition_matrix(problem: Problem) -> np.ndarray:
    """
    P_b[s, s'] = sum_a b(a|s) p(s'|s, a)
    """
    n = problem.n_states
    P = np.zeros((n, n))
    for s in range(n):
        for a in range(problem.n_actions):
            pb = problem.behavior.prob(s, a)
            if pb <= 0.0:
                continue
            for p, s_next in problem.outcomes(s, a):
                P[s, s_next] += pb * p
    return P


def target_system(problem: Problem, gvf: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    The discounted target-policy transition matrix
    P_pi[s, s'] = sum_a pi(a|s) p(s'|s, a) gamma(s, a, s') and the expected
    cumulant r[s], so that v = r + P_pi v.
    """
    g = problem.gvfs[gvf]
    n = problem.n_states
    P = np.zeros((n, n))
    r = np.zeros(n)
    for s in range(n):
        for a in range(problem.n_actions):
            pa = g.target.prob(s, a)
            if pa <= 0.0:
                continue
            for p, s_next in problem.outcomes(s, a):
                P[s, s_next] += pa * p * g.gamma(s, a, s_next)
                r[s] += pa * p * g.cumulant(s, a, s_next)
    return P, r


def _rollout(problem: Problem, gvf: int, s: int, horizon: int) -> Optional[float]:
    # None when the rollout is not deterministic and needs the linear solve
    g = problem.gvfs[gvf]
    total, discount = 0.0, 1.0
    for _ in range(horizon):
        a = int(np.argmax(g.target.row(s)))
        outcomes = problem.outcomes(s, a)
        gammas = [g.gamma(s, a, n) for _, n in outcomes]
        if len(outcomes) > 1:
            if any(gm > 0.0 for gm in gammas):
                return None
            return total + discount * sum(p * g.cumulant(s, a, n) for p, n in outcomes)
        _, s_next = outcomes[0]
        total += discount * g.cumulant(s, a, s_next)
        if gammas[0] == 0.0:
            return total
        discount *= gammas[0]
        s = s_next
    raise HorizonExceededError(f"{g.name}: rollout from state {s} did not terminate in {horizon} steps")


def true_values(problem: Problem, gvf: int = 0, horizon: int = DEFAULT_ROLLOUT_HORIZON) -> np.ndarray:
    """
    v_pi of one GVF: a single rollout per state for deterministic targets,
    the linear solve (I - P_pi) v = r otherwise.
    """
    g = problem.gvfs[gvf]
    if g.target.is_deterministic:
        values = [_rollout(problem, gvf, s, horizon) for s in range(problem.n_states)]
        if all(v is not None for v in values):
            return np.array(values, dtype=np.float64)

    P, r = target_system(problem, gvf)
    try:
        v = scipy.linalg.solve(np.eye(problem.n_states) - P, r)
    except scipy.linalg.LinAlgError as e:
        raise HorizonExceededError(f"{g.name}: the target policy never terminates ({e})")
    return v


def stationary_distribution(problem: Problem, mode: str = "exact",
                            samples: int = DEFAULT_TRUTH_SAMPLES, seed: int = 0,
                            tol: float = DEFAULT_POWER_TOL,
                            max_iter: int = DEFAULT_POWER_MAX_ITER) -> np.ndarray:
    """
    d_b by power iteration on the behavior chain (`exact`) or by visit
    frequencies over `samples` contiguous behavior steps (`sampled`).
    """
    if mode == "sampled":
        return sampled_distribution(problem, samples, seed)
    if mode != "exact":
        raise EvaluationError(f"unknown stationary distribution mode '{mode}'")
    return power_iteration(behavior_transition_matrix(problem), tol=tol, max_iter=max_iter)


def power_iteration(P: np.ndarray, tol: float = DEFAULT_POWER_TOL,
                    max_iter: int = DEFAULT_POWER_MAX_ITER) -> np.ndarray:
    n = P.shape[0]
    d = np.full(n, 1.0 / n)
    for i in range(max_iter):
        d_next = d @ P
        d_next /= d_next.sum()
        if np.max(np.abs(d_next - d)) < tol:
            logging.debug(f"[EVAL] power iteration converged after {i + 1} iterations")
            return d_next
        d = d_next
    raise NonConvergenceError(f"power iteration did not converge in {max_iter} iterations")


def sampled_distribution(problem: Problem, samples: int, seed: int = 0) -> np.ndarray:
    if samples <= 0:
        raise EvaluationError(f"need a positive number of samples, got {samples}")
    rng = np.random.default_rng(mix_seed(seed, problem.name, "d_b"))
    counts = np.zeros(problem.n_states)
    s = problem.reset(rng)
    for _ in range(samples):
        counts[s] += 1
        a = problem.behavior.sample(s, rng)
        s = problem.next_state(s, a, rng)
    return counts / samples


def ground_truth(problem: Problem, mode: str = "exact", samples: int = DEFAULT_TRUTH_SAMPLES,
                 seed: int = 0) -> GroundTruth:
    logging.debug(f"[EVAL] computing the {mode} ground truth of {problem}")
    d_b = stationary_distribution(problem, mode=mode, samples=samples, seed=seed)
    v_true = np.array([true_values(problem, j) for j in range(len(problem.gvfs))])
    source = "exact" if mode == "exact" else f"sampled({samples})"
    return GroundTruth(v_true=v_true, d_b=d_b, source=source)


def truth_table(problem: Problem, truth: GroundTruth) -> pd.DataFrame:
    """
    One row per state: state, d_b and one v_true column per GVF
    """
    df = pd.DataFrame({"state": np.arange(problem.n_states), "d_b": truth.d_b})
    if len(problem.gvfs) == 1:
        df["v_true"] = truth.v_true[0]
    else:
        for j, g in enumerate(problem.gvfs):
            df[f"v_true_{g.name}"] = truth.v_true[j]
    return df


def write_truth_csv(problem: Problem, truth: GroundTruth, path: str) -> None:
    truth_table(problem, truth).to_csv(path, index=False)


###############################################################################
# metrics
###############################################################################

def _errors(w: np.ndarray, features: np.ndarray, v_true: np.ndarray) -> np.ndarray:
    return features @ w - v_true


def rve(w: np.ndarray, features: np.ndarray, v_true: np.ndarray, d_b: np.ndarray) -> float:
    """
    sqrt(sum_s d_b(s) (w . x(s) - v(s))^2)
    """
    err = _errors(w, features, v_true)
    return math.sqrt(float(np.sum(d_b * err * err)))


def nrve(w: np.ndarray, features: np.ndarray, v_true: np.ndarray, d_b: np.ndarray,
         interest: np.ndarray) -> float:
    mass = float(np.sum(d_b * interest))
    if mass <= 0.0:
        raise ZeroInterestError("the interest has no mass under d_b")
    err = _errors(w, features, v_true)
    return math.sqrt(float(np.sum(d_b * interest * err * err)) / mass)


def trve(inputs: Sequence[Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]]) -> float:
    """
    Mean of the nrve of every GVF; each input is (w, features, v_true, d_b, interest)
    """
    if not inputs:
        raise EvaluationError("trve of no GVFs")
    return float(np.mean([nrve(*args) for args in inputs]))


def value_error(problem: Problem, truth: GroundTruth, weights: Sequence[np.ndarray]) -> float:
    """
    RVE for a single-GVF problem, TRVE over all the GVFs otherwise
    """
    X = problem.feature_matrix
    if len(problem.gvfs) == 1:
        return rve(weights[0], X, truth.v_true[0], truth.d_b)
    return trve([(weights[j], X, truth.v_true[j], truth.d_b, problem.interest_vector(j))
                 for j in range(len(problem.gvfs))])


def auc(series: Sequence[float]) -> float:
    if len(series) == 0:
        raise EmptySeriesError("auc of an empty series")
    return float(np.mean(series))


def final_perf(series: Sequence[float], fraction: float = DEFAULT_FINAL_FRACTION) -> float:
    """
    Mean over the last ceil(fraction * len) points
    """
    if len(series) == 0:
        raise EmptySeriesError("final performance of an empty series")
    # 1e-9 absorbs the rounding of fraction * len
    k = max(1, math.ceil(fraction * len(series) - 1e-9))
    return float(np.mean(np.asarray(series)[-k:]))


###############################################################################
# objectives of a weight vector
###############################################################################

def expected_td_system(problem: Problem, gvf: int, d_b: np.ndarray,
                       lam: float = 0.0) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    The expected off-policy TD(lambda) system under d_b:
    A = X^T D (I - lambda P_pi)^-1 (I - P_pi) X, b = X^T D (I - lambda P_pi)^-1 r
    and C = X^T D X.
    """
    X = problem.feature_matrix
    P, r = target_system(problem, gvf)
    n = problem.n_states
    D = np.diag(d_b)
    K = scipy.linalg.solve((np.eye(n) - lam * P).T, D @ X).T
    A = K @ (np.eye(n) - P) @ X
    b = K @ r
    C = X.T @ D @ X
    return A, b, C


def objective_errors(problem: Problem, w: np.ndarray, gvf: int = 0, lam: float = 0.0,
                     d_b: Optional[np.ndarray] = None) -> Tuple[float, float]:
    """
    (MSPBE, NEU) of a weight vector against the exact expected system
    """
    if d_b is None:
        d_b = stationary_distribution(problem)
    A, b, C = expected_td_system(problem, gvf, d_b, lam)
    return compute_mspbe(A, b, C, w), compute_neu(A, b, w)
