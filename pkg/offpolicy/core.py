# core.py
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
Shared domain types: features, tabular policies, GVFs, transitions and weights.
"""

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .utils import OffPolicyError

# rows of a tabular policy must sum to 1 within this tolerance
POLICY_ROW_TOL = 1e-12


###############################################################################
# errors
###############################################################################

class CoreError(OffPolicyError):
    """Base class for errors in the core types"""
    pass


class CoverageError(CoreError):
    """The behavior policy does not cover the target policy"""
    pass


class DimensionMismatchError(CoreError):
    """Vectors of different dimensions were combined"""
    pass


class InvalidFeatureError(CoreError):
    """Malformed feature vector"""
    pass


class InvalidPolicyError(CoreError):
    """Malformed action-probability table"""
    pass


class InvalidGvfError(CoreError):
    """A GVF produced a discount or interest outside [0, 1]"""
    pass


###############################################################################
# features
###############################################################################

class FeatureVector(object):
    """
    The feature vector x(s) of a state.

    Either sparse binary (a strictly increasing list of active indices, each
    with implicit value 1) or dense (a real array). Both views are always
    available; instances are immutable.
    """

    __slots__ = ("_dim", "_indices", "_dense")

    def __init__(self, dim: int, indices: Optional[Sequence[int]] = None, values: Optional[Sequence[float]] = None):
        if dim <= 0:
            raise InvalidFeatureError(f"dimension must be positive, got {dim}")
        if (indices is None) == (values is None):
            raise InvalidFeatureError("exactly one of indices or values must be given")

        if indices is not None:
            idx = tuple(int(i) for i in indices)
            for prev, curr in zip(idx, idx[1:]):
                if curr <= prev:
                    raise InvalidFeatureError(f"active indices must be strictly increasing: {idx}")
            if idx and (idx[0] < 0 or idx[-1] >= dim):
                raise InvalidFeatureError(f"active indices {idx} out of range for dimension {dim}")
            dense = np.zeros(dim, dtype=np.float64)
            dense[list(idx)] = 1.0
            self._indices = idx
        else:
            dense = np.array(values, dtype=np.float64)
            if dense.shape != (dim,):
                raise InvalidFeatureError(f"expected {dim} values, got shape {dense.shape}")
            self._indices = None

        dense.flags.writeable = False
        self._dim = dim
        self._dense = dense

    @classmethod
    def binary(cls, dim: int, indices: Iterable[int]) -> "FeatureVector":
        return cls(dim, indices=sorted(indices))

    @classmethod
    def from_dense(cls, values: Sequence[float]) -> "FeatureVector":
        return cls(len(values), values=values)

    @classmethod
    def one_hot(cls, dim: int, index: int) -> "FeatureVector":
        return cls(dim, indices=[index])

    @property
    def dim(self) -> int:
        return self._dim

    @property
    def is_sparse(self) -> bool:
        return self._indices is not None

    @property
    def indices(self) -> Sequence[int]:
        """
        The active indices (the non-zero entries for a dense vector)
        """
        if self._indices is not None:
            return self._indices
        return tuple(int(i) for i in np.flatnonzero(self._dense))

    @property
    def dense(self) -> np.ndarray:
        return self._dense

    def dot(self, w: np.ndarray, sparse: Optional[bool] = None) -> float:
        """
        w . x, correctly rounded.

        The sparse path adds w[i] over the active indices and the dense path
        adds w[i] * x[i] over all entries. Both use an exactly rounded sum,
        so both agree bit for bit.
        """
        if len(w) != self._dim:
            raise DimensionMismatchError(f"weights of dimension {len(w)} for features of dimension {self._dim}")
        if sparse is None:
            sparse = self.is_sparse
        if sparse:
            return math.fsum(float(w[i]) for i in self.indices)
        return math.fsum(float(wi) * float(xi) for wi, xi in zip(w, self._dense))

    def __eq__(self, other) -> bool:
        if not isinstance(other, FeatureVector):
            return NotImplemented
        return self._dim == other._dim and bool(np.array_equal(self._dense, other._dense))

    def __hash__(self) -> int:
        return hash((self._dim, self._dense.tobytes()))

    def __repr__(self) -> str:
        if self.is_sparse:
            return f"FeatureVector(dim={self._dim}, active={list(self._indices)})"
        return f"FeatureVector(dim={self._dim}, values={self._dense.tolist()})"


###############################################################################
# policies
###############################################################################

class TabularPolicy(object):
    """
    A stochastic, stationary policy as a (states x actions) probability table.
    """

    def __init__(self, probs: Sequence[Sequence[float]]):
        table = np.array(probs, dtype=np.float64)
        if table.ndim != 2 or table.size == 0:
            raise InvalidPolicyError(f"expected a non-empty 2D table, got shape {table.shape}")
        if np.any(table < 0.0) or np.any(table > 1.0):
            raise InvalidPolicyError("action probabilities must be in [0, 1]")
        sums = table.sum(axis=1)
        bad = np.flatnonzero(np.abs(sums - 1.0) > POLICY_ROW_TOL)
        if len(bad) > 0:
            raise InvalidPolicyError(f"rows {bad.tolist()} do not sum to 1")

        cdf = np.cumsum(table, axis=1)
        cdf /= cdf[:, -1:]
        table.flags.writeable = False
        cdf.flags.writeable = False
        self._probs = table
        self._cdf = cdf

    @property
    def probs(self) -> np.ndarray:
        return self._probs

    @property
    def n_states(self) -> int:
        return self._probs.shape[0]

    @property
    def n_actions(self) -> int:
        return self._probs.shape[1]

    def prob(self, s: int, a: int) -> float:
        return float(self._probs[s, a])

    def row(self, s: int) -> np.ndarray:
        return self._probs[s]

    def sample(self, s: int, rng: np.random.Generator) -> int:
        return int(np.searchsorted(self._cdf[s], rng.random(), side="right"))

    @property
    def is_deterministic(self) -> bool:
        return bool(np.all(np.max(self._probs, axis=1) == 1.0))

    def covers(self, target: "TabularPolicy", states: Optional[Iterable[int]] = None) -> bool:
        """
        True when this (behavior) policy gives positive probability to every
        action the target takes, in the given states (default: all).
        """
        if target.probs.shape != self._probs.shape:
            raise DimensionMismatchError(f"policy tables of shapes {self._probs.shape} and {target.probs.shape}")
        rows = list(range(self.n_states)) if states is None else list(states)
        b = self._probs[rows]
        pi = target.probs[rows]
        return bool(np.all((pi <= 0.0) | (b > 0.0)))

    def __repr__(self) -> str:
        return f"TabularPolicy(states={self.n_states}, actions={self.n_actions})"


###############################################################################
# GVFs
###############################################################################

@dataclass(frozen=True)
class GvfSpec:
    """
    A prediction question: target policy, cumulant, discount and interest.
    """
    name: str
    target: TabularPolicy
    cumulant: Callable[[int, int, int], float]
    discount: Callable[[int, int, int], float]
    interest: Callable[[int], float]

    def gamma(self, s: int, a: int, s_next: int) -> float:
        g = float(self.discount(s, a, s_next))
        if not 0.0 <= g <= 1.0:
            raise InvalidGvfError(f"{self.name}: discount {g} outside [0, 1] for ({s}, {a}, {s_next})")
        return g

    def interest_of(self, s: int) -> float:
        i = float(self.interest(s))
        if not 0.0 <= i <= 1.0:
            raise InvalidGvfError(f"{self.name}: interest {i} outside [0, 1] in state {s}")
        return i


###############################################################################
# transitions and weights
###############################################################################

@dataclass(frozen=True)
class Transition:
    """
    One step of experience, as seen by the learner of a single GVF.

    `episode_start` marks the first transition of an episode, for the
    learners that restart their traces there.
    """
    s: int
    a: int
    s_next: int
    reward: float
    gamma_next: float
    pi_prob: float
    b_prob: float
    interest: float
    x: FeatureVector
    x_next: FeatureVector
    episode_start: bool = False

    def __post_init__(self):
        if not self.b_prob > 0.0:
            raise CoverageError(f"behavior probability {self.b_prob} for action {self.a} in state {self.s}")
        if self.pi_prob < 0.0:
            raise CoverageError(f"negative target probability {self.pi_prob}")

    @property
    def rho(self) -> float:
        return self.pi_prob / self.b_prob


@dataclass
class WeightSet:
    """
    Primary weights w and, for two-timescale methods, secondary weights h.
    """
    w: np.ndarray
    h: np.ndarray

    @classmethod
    def zeros(cls, dim: int, secondary: bool = False) -> "WeightSet":
        return cls(np.zeros(dim, dtype=np.float64),
                   np.zeros(dim if secondary else 0, dtype=np.float64))

    @property
    def dim(self) -> int:
        return len(self.w)

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.w)) and np.all(np.isfinite(self.h)))

    def copy(self) -> "WeightSet":
        return WeightSet(self.w.copy(), self.h.copy())


###############################################################################
# operations
###############################################################################

def rho(t: Transition) -> float:
    """
    The importance sampling ratio pi(A|S) / b(A|S) of a transition
    """
    if not t.b_prob > 0.0:
        raise CoverageError(f"behavior probability {t.b_prob} for action {t.a} in state {t.s}")
    return t.pi_prob / t.b_prob


def td_error(w: np.ndarray, t: Transition) -> float:
    return t.reward + t.gamma_next * float(np.dot(w, t.x_next.dense)) - float(np.dot(w, t.x.dense))


def predict(w: np.ndarray, x: FeatureVector) -> float:
    return x.dot(w)
