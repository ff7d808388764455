# baselines.py
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
Least-squares fixed points (LSTD, LSETD and LSAltTD) and the MSPBE / NEU objectives.
"""

import logging
from typing import Optional

import numpy as np
import scipy.linalg

from .config import DEFAULT_RIDGE
from .core import DimensionMismatchError, Transition
from .utils import OffPolicyError

VARIANT_PLAIN = "plain"
VARIANT_EMPHATIC = "emphatic"
VARIANT_ALTLIFE = "altlife"

LSTD_VARIANTS = [VARIANT_PLAIN, VARIANT_EMPHATIC, VARIANT_ALTLIFE]

# baseline algorithm id -> accumulator variant
BASELINE_VARIANTS = {
    "lstd": VARIANT_PLAIN,
    "lsetd": VARIANT_EMPHATIC,
    "lsaltd": VARIANT_ALTLIFE,
}

# plain-LSTD trace forms: rho_t gamma_t (lambda e + x_t), or the learners' rho_t (gamma_t lambda e + x_t)
TRACE_VERBATIM = "verbatim"
TRACE_LEARNER = "learner"


###############################################################################
# errors
###############################################################################

class BaselineError(OffPolicyError):
    """Base class for least-squares baseline errors"""
    pass


class SingularMatrixError(BaselineError):
    """A is singular and no ridge was given"""
    pass


class NotPositiveDefiniteError(BaselineError):
    """C is not positive definite"""
    pass


###############################################################################
# accumulator
###############################################################################

class LstdAccumulator(object):
    """
    Running means of A = E[e (x - gamma' x')^T], b = E[R e] and C = E[x x^T].

    `beta` is the followon decay of the emphatic variant; None decays it by
    gamma_t, as in ETD(lambda).
    """

    def __init__(self, dim: int, lam: float = 0.0, variant: str = VARIANT_PLAIN,
                 beta: Optional[float] = None, trace_form: str = TRACE_VERBATIM):
        if variant not in LSTD_VARIANTS:
            raise BaselineError(f"unknown LSTD variant '{variant}'")
        self.dim = dim
        self.lam = lam
        self.variant = variant
        self.beta = beta
        self.trace_form = trace_form

        self.A = np.zeros((dim, dim))
        self.b = np.zeros(dim)
        self.C = np.zeros((dim, dim))
        self.e = np.zeros(dim)
        self.n = 0

        self.F = 0.0
        self.M = 0.0
        self.last_rho = 0.0
        self.last_gamma = 0.0
        self.episode_rho_product = 1.0

    def _trace(self, t: Transition) -> np.ndarray:
        x = t.x.dense
        r = t.rho
        if self.variant == VARIANT_EMPHATIC:
            decay = self.last_gamma if self.beta is None else self.beta
            self.F = decay * self.last_rho * self.F + t.interest
            self.M = self.lam * t.interest + (1.0 - self.lam) * self.F
            return r * (self.last_gamma * self.lam * self.e + self.M * x)

        if self.variant == VARIANT_ALTLIFE:
            if t.episode_start:
                self.e = np.zeros(self.dim)
                self.episode_rho_product = 1.0
            e = r * (self.last_gamma * self.lam * self.e + self.episode_rho_product * x)
            self.episode_rho_product *= r
            return e

        if self.trace_form == TRACE_LEARNER:
            return r * (self.last_gamma * self.lam * self.e + x)
        return r * self.last_gamma * (self.lam * self.e + x)

    def accumulate(self, t: Transition) -> "LstdAccumulator":
        if t.x.dim != self.dim:
            raise DimensionMismatchError(f"features of dimension {t.x.dim} for an accumulator of dimension {self.dim}")

        x = t.x.dense
        self.e = self._trace(t)
        k = 1.0 / (self.n + 1)
        self.A += k * (np.outer(self.e, x - t.gamma_next * t.x_next.dense) - self.A)
        self.b += k * (t.reward * self.e - self.b)
        self.C += k * (np.outer(x, x) - self.C)
        self.n += 1

        self.last_rho = t.rho
        self.last_gamma = t.gamma_next
        return self

    def merge(self, other: "LstdAccumulator") -> "LstdAccumulator":
        """
        Combine the statistics of another shard, weighting by sample counts.
        The trace state of `self` is kept.
        """
        if other.dim != self.dim or other.variant != self.variant:
            raise BaselineError(f"cannot merge a {other.variant}/{other.dim} accumulator into {self.variant}/{self.dim}")
        total = self.n + other.n
        if total == 0:
            return self
        p, q = self.n / total, other.n / total
        self.A = p * self.A + q * other.A
        self.b = p * self.b + q * other.b
        self.C = p * self.C + q * other.C
        self.n = total
        return self

    def solve(self, ridge: float = DEFAULT_RIDGE) -> np.ndarray:
        return lstd_solve(self, ridge)

    def __repr__(self) -> str:
        return f"LstdAccumulator({self.variant}, dim={self.dim}, lambda={self.lam}, n={self.n})"


def lstd_accumulate(acc: LstdAccumulator, t: Transition) -> LstdAccumulator:
    return acc.accumulate(t)


def lstd_solve(acc: LstdAccumulator, ridge: float = DEFAULT_RIDGE) -> np.ndarray:
    """
    (A + ridge I)^-1 b
    """
    if acc.n == 0:
        raise BaselineError("no transitions accumulated")
    if ridge < 0.0:
        raise BaselineError(f"ridge must be >= 0, got {ridge}")
    try:
        w = scipy.linalg.solve(acc.A + ridge * np.eye(acc.dim), acc.b)
    except (scipy.linalg.LinAlgError, ValueError) as e:
        raise SingularMatrixError(f"cannot solve the {acc.variant} LSTD system after {acc.n} steps: {e}")
    if not np.all(np.isfinite(w)):
        raise SingularMatrixError(f"the {acc.variant} LSTD solution is not finite")
    logging.debug(f"[LSTD] solved {acc} with ridge {ridge}")
    return w


###############################################################################
# objectives
###############################################################################

def _residual(A: np.ndarray, b: np.ndarray, w: np.ndarray) -> np.ndarray:
    if A.shape != (len(w), len(w)) or len(b) != len(w):
        raise DimensionMismatchError(f"A {A.shape}, b {b.shape} and w {w.shape} do not match")
    return b - A @ w


def compute_mspbe(A: np.ndarray, b: np.ndarray, C: np.ndarray, w: np.ndarray) -> float:
    """
    (b - A w)^T C^-1 (b - A w)
    """
    r = _residual(A, b, w)
    try:
        factor = scipy.linalg.cho_factor(C)
    except scipy.linalg.LinAlgError as e:
        raise NotPositiveDefiniteError(f"C is not positive definite: {e}")
    return float(r @ scipy.linalg.cho_solve(factor, r))


def compute_neu(A: np.ndarray, b: np.ndarray, w: np.ndarray) -> float:
    r = _residual(A, b, w)
    return float(r @ r)
