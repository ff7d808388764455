# learners.py
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
Incremental linear off-policy TD learners.

Every `*_step` function updates a `WeightSet` and a `TraceState` in place from
one `Transition` and returns both. Time indexing: when processing the
transition (S_t, A_t, S_t+1), `trace.last_gamma` holds gamma_t (the discount of
the previous transition, 0 before the first one) and `t.gamma_next` is
gamma_t+1. All the traces start at zero, so a zero discount cuts them without
any explicit reset.
"""

import logging
from dataclasses import asdict, dataclass, fields
from typing import Any, Callable, Dict, Optional, Tuple

import numpy as np

from .config import (ALGORITHM_IDS,
                     DEFAULT_C_BAR,
                     EPISODIC_ONLY_IDS,
                     GRADIENT_ALGORITHM_IDS,
                     HTD_SIGNS,
                     RHO_PLACEMENTS,
                     TRACE_FORMS)
from .core import FeatureVector, TabularPolicy, Transition, WeightSet, td_error
from .utils import OffPolicyError

###############################################################################
# errors
###############################################################################


class LearnerError(OffPolicyError):
    """Base class for learner errors"""
    pass


class UnknownAlgorithmError(LearnerError):
    """Not a known algorithm id"""
    pass


class InvalidLearnerConfigError(LearnerError):
    """A learner parameter is out of range"""
    pass


class EpisodicOnlyError(LearnerError):
    """The algorithm is only defined for episodic problems"""
    pass


###############################################################################
# configuration and state
###############################################################################

@dataclass(frozen=True)
class LearnerConfig:
    """
    Parameters of one learner. `lam` is the trace-decay parameter lambda.
    """
    algorithm: str
    alpha: float
    alpha_h: float = 0.0
    lam: float = 0.0
    beta: float = 0.0
    zeta: float = 0.0
    c_bar: float = DEFAULT_C_BAR
    rho_placement: str = "full-delta"
    trace_form: str = "rho-inside"
    htd_sign: str = "main"

    def validate(self) -> "LearnerConfig":
        def check(ok: bool, msg: str):
            if not ok:
                raise InvalidLearnerConfigError(f"{self.algorithm}: {msg}")

        if self.algorithm not in ALGORITHM_IDS:
            raise UnknownAlgorithmError(f"unknown algorithm '{self.algorithm}'")
        check(self.alpha > 0.0, f"alpha must be > 0, got {self.alpha}")
        check(self.alpha_h >= 0.0, f"alpha_h must be >= 0, got {self.alpha_h}")
        if self.algorithm in GRADIENT_ALGORITHM_IDS:
            check(self.alpha_h > 0.0, "alpha_h must be > 0 for gradient methods")
        check(0.0 <= self.lam <= 1.0, f"lambda must be in [0, 1], got {self.lam}")
        check(0.0 <= self.beta <= 1.0, f"beta must be in [0, 1], got {self.beta}")
        check(0.0 <= self.zeta <= 1.0, f"zeta must be in [0, 1], got {self.zeta}")
        check(self.c_bar > 0.0, f"c_bar must be > 0, got {self.c_bar}")
        check(self.rho_placement in RHO_PLACEMENTS, f"unknown rho placement '{self.rho_placement}'")
        check(self.trace_form in TRACE_FORMS, f"unknown trace form '{self.trace_form}'")
        check(self.htd_sign in HTD_SIGNS, f"unknown HTD sign '{self.htd_sign}'")
        return self

    def as_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class TraceState:
    """
    Everything a learner remembers besides its weights.

    `z_rho` is the main trace: z^rho for the rho-inside forms, z' when the
    ratio stays outside (rho-outside, partial-delta) and for the
    action-dependent bootstrapping methods. `z_b` is the uncorrected HTD
    trace. `F` and `M` are the followon trace and the emphasis of the
    emphatic methods.
    """
    z_rho: np.ndarray
    z_b: np.ndarray
    F: float = 0.0
    M: float = 0.0
    last_rho: float = 0.0
    last_pi: float = 0.0
    last_b: float = 1.0
    last_nu: float = 0.0
    last_gamma: float = 0.0
    episode_rho_product: float = 1.0

    @classmethod
    def zeros(cls, dim: int) -> "TraceState":
        return cls(z_rho=np.zeros(dim, dtype=np.float64), z_b=np.zeros(dim, dtype=np.float64))

    def remember(self, t: Transition) -> None:
        self.last_rho = t.rho
        self.last_pi = t.pi_prob
        self.last_b = t.b_prob
        self.last_gamma = t.gamma_next


###############################################################################
# importance sampling ratio placement
###############################################################################

def _partial_td_error(w: np.ndarray, t: Transition) -> float:
    # rho_t (R + gamma w . x_t+1) - w . x_t: the ratio only corrects the target
    return t.rho * (t.reward + t.gamma_next * float(np.dot(w, t.x_next.dense))) - float(np.dot(w, t.x.dense))


def _ratio_kept_outside(cfg: LearnerConfig) -> bool:
    return cfg.rho_placement == "partial-delta" or cfg.trace_form == "rho-outside"


def _corrected_trace(cfg: LearnerConfig, trace: TraceState, t: Transition,
                     scale: float = 1.0) -> Tuple[np.ndarray, np.ndarray]:
    """
    The trace to keep and the corrected trace z^rho = rho_t (gamma_t lambda z + scale x_t).

    When the ratio stays out of the trace the kept trace is
    z' = rho_t-1 gamma_t lambda z' + scale x_t, and z^rho = rho_t z'.
    """
    gl = trace.last_gamma * cfg.lam
    if _ratio_kept_outside(cfg):
        kept = trace.last_rho * gl * trace.z_rho + scale * t.x.dense
        return kept, t.rho * kept
    z = t.rho * (gl * trace.z_rho + scale * t.x.dense)
    return z, z


def _td_term(cfg: LearnerConfig, w: np.ndarray, t: Transition, kept: np.ndarray) -> Tuple[float, np.ndarray]:
    """
    A scalar d and a trace e whose product d e is the TD part of an update.

    full-delta gives delta_t z^rho, partial-delta gives delta'_t z'.
    """
    if cfg.rho_placement == "partial-delta":
        return _partial_td_error(w, t), kept
    if cfg.trace_form == "rho-outside":
        return t.rho * td_error(w, t), kept
    return td_error(w, t), kept


###############################################################################
# Off-policy TD and Alternative-life TD
###############################################################################

def offtd_step(cfg: LearnerConfig, ws: WeightSet, trace: TraceState, t: Transition) -> Tuple[WeightSet, TraceState]:
    kept, _ = _corrected_trace(cfg, trace, t)
    d, e = _td_term(cfg, ws.w, t, kept)
    ws.w = ws.w + cfg.alpha * d * e

    trace.z_rho = kept
    trace.remember(t)
    return ws, trace


def altlife_td_step(cfg: LearnerConfig, ws: WeightSet, trace: TraceState, t: Transition,
                    episode_rho_product: float) -> Tuple[WeightSet, TraceState]:
    """
    z <- rho_t (gamma lambda z + P x_t), where P is the product of the ratios
    seen earlier in the episode. The caller resets P to 1 and the trace to 0
    at every episode start.
    """
    kept, _ = _corrected_trace(cfg, trace, t, episode_rho_product)
    d, e = _td_term(cfg, ws.w, t, kept)
    ws.w = ws.w + cfg.alpha * d * e

    trace.z_rho = kept
    trace.remember(t)
    return ws, trace


###############################################################################
# gradient TD
###############################################################################

def _gradient_correction(cfg: LearnerConfig, t: Transition, h: np.ndarray, z: np.ndarray) -> np.ndarray:
    # gamma_t+1 (1 - lambda) (h . z) x_t+1
    return t.gamma_next * (1.0 - cfg.lam) * float(np.dot(h, z)) * t.x_next.dense


def _secondary_step(cfg: LearnerConfig, h: np.ndarray, d: float, e: np.ndarray, x: np.ndarray) -> np.ndarray:
    return h + cfg.alpha_h * (d * e - float(np.dot(h, x)) * x)


def gtd_step(cfg: LearnerConfig, ws: WeightSet, trace: TraceState, t: Transition) -> Tuple[WeightSet, TraceState]:
    x = t.x.dense
    kept, z = _corrected_trace(cfg, trace, t)
    d, e = _td_term(cfg, ws.w, t, kept)

    h_old = ws.h
    ws.h = _secondary_step(cfg, h_old, d, e, x)
    ws.w = ws.w + cfg.alpha * d * e - cfg.alpha * _gradient_correction(cfg, t, h_old, z)

    trace.z_rho = kept
    trace.remember(t)
    return ws, trace


def gtd2_step(cfg: LearnerConfig, ws: WeightSet, trace: TraceState, t: Transition) -> Tuple[WeightSet, TraceState]:
    x = t.x.dense
    kept, z = _corrected_trace(cfg, trace, t)
    d, e = _td_term(cfg, ws.w, t, kept)

    h_old = ws.h
    ws.h = _secondary_step(cfg, h_old, d, e, x)
    ws.w = ws.w + cfg.alpha * float(np.dot(h_old, x)) * x - cfg.alpha * _gradient_correction(cfg, t, h_old, z)

    trace.z_rho = kept
    trace.remember(t)
    return ws, trace


def htd_step(cfg: LearnerConfig, ws: WeightSet, trace: TraceState, t: Transition) -> Tuple[WeightSet, TraceState]:
    """
    Hybrid TD: a corrected trace z^rho and an uncorrected behavior trace z_b.
    On-policy both traces coincide and the update is TD(lambda).
    """
    x = t.x.dense
    kept, z = _corrected_trace(cfg, trace, t)
    z_b = trace.last_gamma * cfg.lam * trace.z_b + x
    d, e = _td_term(cfg, ws.w, t, kept)
    diff = x - t.gamma_next * t.x_next.dense

    h_old = ws.h
    ws.h = h_old + cfg.alpha_h * (d * e - diff * float(np.dot(h_old, z_b)))
    correction = diff * float(np.dot(z - z_b, h_old))
    if cfg.htd_sign == "flipped":
        ws.w = ws.w + cfg.alpha * (d * e + correction)
    else:
        ws.w = ws.w + cfg.alpha * (d * e - correction)

    trace.z_rho = kept
    trace.z_b = z_b
    trace.remember(t)
    return ws, trace


def _mirror_prox(cfg: LearnerConfig, ws: WeightSet, trace: TraceState, t: Transition,
                 primary: Callable[[float, np.ndarray, np.ndarray, np.ndarray, np.ndarray], np.ndarray]
                 ) -> Tuple[WeightSet, TraceState]:
    # both the extrapolation and the full step start from (w_t, h_t)
    x = t.x.dense
    kept, z = _corrected_trace(cfg, trace, t)
    w, h = ws.w, ws.h

    d, e = _td_term(cfg, w, t, kept)
    h_half = _secondary_step(cfg, h, d, e, x)
    w_half = primary(d, e, h, z, x)

    d_half, _ = _td_term(cfg, w_half, t, kept)
    h_half_x = float(np.dot(h_half, x))
    ws.h = h + cfg.alpha_h * (d_half * e - h_half_x * x)
    ws.w = primary(d_half, e, h_half, z, x)

    trace.z_rho = kept
    trace.remember(t)
    return ws, trace


def pgtd2_step(cfg: LearnerConfig, ws: WeightSet, trace: TraceState, t: Transition) -> Tuple[WeightSet, TraceState]:
    """
    Proximal GTD2: a mirror-prox extrapolation step followed by a full
    step from the same point, using the gradients at the extrapolated one.
    """
    w = ws.w

    def primary(d, e, h, z, x):
        return w + cfg.alpha * float(np.dot(h, x)) * x - cfg.alpha * _gradient_correction(cfg, t, h, z)

    return _mirror_prox(cfg, ws, trace, t, primary)


def pgtd_step(cfg: LearnerConfig, ws: WeightSet, trace: TraceState, t: Transition) -> Tuple[WeightSet, TraceState]:
    w = ws.w

    def primary(d, e, h, z, x):
        return w + cfg.alpha * d * e - cfg.alpha * _gradient_correction(cfg, t, h, z)

    return _mirror_prox(cfg, ws, trace, t, primary)


###############################################################################
# emphatic TD
###############################################################################

def etd_step(cfg: LearnerConfig, ws: WeightSet, trace: TraceState, t: Transition) -> Tuple[WeightSet, TraceState]:
    """
    ETD(lambda) and, for `etdb`, ETD(lambda, beta): the followon decays by
    gamma_t or by the fixed beta.
    """
    decay = cfg.beta if cfg.algorithm == "etdb" else trace.last_gamma

    # F starts at 0, so the first step gives F_0 = I_0
    trace.F = trace.last_rho * decay * trace.F + t.interest
    trace.M = cfg.lam * t.interest + (1.0 - cfg.lam) * trace.F
    kept, _ = _corrected_trace(cfg, trace, t, trace.M)
    d, e = _td_term(cfg, ws.w, t, kept)
    ws.w = ws.w + cfg.alpha * d * e

    trace.z_rho = kept
    trace.remember(t)
    return ws, trace


###############################################################################
# action-dependent bootstrapping
###############################################################################

def abtd_psi(zeta: float, b_table: TabularPolicy, pi_table: TabularPolicy) -> float:
    """
    psi(zeta) = 2 zeta psi0 + max(0, 2 zeta - 1)(psi_max - 2 psi0), with the
    extremes of max(b, pi) taken over the pairs the behavior can take.
    """
    support = b_table.probs > 0.0
    if not np.any(support):
        raise InvalidLearnerConfigError("the behavior policy has an empty support")
    m = np.maximum(b_table.probs, pi_table.probs)[support]
    psi0 = 1.0 / float(np.max(m))
    psi_max = 1.0 / float(np.min(m))
    return 2.0 * zeta * psi0 + max(0.0, 2.0 * zeta - 1.0) * (psi_max - 2.0 * psi0)


def abtd_nu(psi: float, b_prob: float, pi_prob: float) -> float:
    return min(psi, 1.0 / max(b_prob, pi_prob))


def abtd_psi_nu(zeta: float, b_table: TabularPolicy, pi_table: TabularPolicy, s: int, a: int) -> Tuple[float, float]:
    psi = abtd_psi(zeta, b_table, pi_table)
    return psi, abtd_nu(psi, b_table.prob(s, a), pi_table.prob(s, a))


def trace_decay(method: str, lam: float, pi_prev: float, b_prev: float, nu_prev: float,
                c_bar: float = DEFAULT_C_BAR) -> float:
    """
    The coefficient kappa of z <- gamma_t kappa z + x_t
    """
    if method == "tb":
        return lam * pi_prev
    if method == "vtrace":
        return lam * min(c_bar, pi_prev / b_prev)
    if method == "abtd":
        return nu_prev * pi_prev
    raise UnknownAlgorithmError(f"'{method}' has no action-dependent trace decay")


def adtd_step(cfg: LearnerConfig, ws: WeightSet, trace: TraceState, t: Transition, method: str,
              psi: float = 0.0) -> Tuple[WeightSet, TraceState]:
    kappa = trace_decay(method, cfg.lam, trace.last_pi, trace.last_b, trace.last_nu, cfg.c_bar)
    z = trace.last_gamma * kappa * trace.z_rho + t.x.dense
    # the trace never holds the ratio here, so only the delta placement matters
    if cfg.rho_placement == "partial-delta":
        d = _partial_td_error(ws.w, t)
    else:
        d = t.rho * td_error(ws.w, t)
    ws.w = ws.w + cfg.alpha * d * z

    trace.z_rho = z
    if method == "abtd":
        trace.last_nu = abtd_nu(psi, t.b_prob, t.pi_prob)
    trace.remember(t)
    return ws, trace


###############################################################################
# the learner
###############################################################################

class Learner(object):
    """
    A learner for one GVF: weights, traces and the update rule of its algorithm.

    Once the weights (or the followon trace) stop being finite the learner is
    marked as diverged and ignores any further transition.
    """

    def __init__(self, config: LearnerConfig, dim: int, psi: Optional[float] = None):
        self.config = config.validate()
        self.dim = dim
        if config.algorithm == "abtd" and psi is None:
            raise InvalidLearnerConfigError("abtd needs psi, computed from the policy tables")
        self.psi = psi if psi is not None else 0.0

        self.weights = WeightSet.zeros(dim, secondary=config.algorithm in GRADIENT_ALGORITHM_IDS)
        self.trace = TraceState.zeros(dim)
        self.steps = 0
        self.diverged = False

    @property
    def algorithm(self) -> str:
        return self.config.algorithm

    @property
    def w(self) -> np.ndarray:
        return self.weights.w

    def update(self, t: Transition) -> None:
        if self.diverged:
            return

        if t.x.dim != self.dim:
            raise InvalidLearnerConfigError(f"features of dimension {t.x.dim} for a learner of dimension {self.dim}")

        cfg, ws, trace = self.config, self.weights, self.trace
        algo = cfg.algorithm
        if algo == "td":
            offtd_step(cfg, ws, trace, t)
        elif algo == "altlife":
            if t.episode_start:
                trace.z_rho = np.zeros(self.dim)
                trace.episode_rho_product = 1.0
            product = trace.episode_rho_product
            altlife_td_step(cfg, ws, trace, t, product)
            trace.episode_rho_product = product * t.rho
        elif algo == "gtd":
            gtd_step(cfg, ws, trace, t)
        elif algo == "gtd2":
            gtd2_step(cfg, ws, trace, t)
        elif algo == "htd":
            htd_step(cfg, ws, trace, t)
        elif algo == "pgtd":
            pgtd_step(cfg, ws, trace, t)
        elif algo == "pgtd2":
            pgtd2_step(cfg, ws, trace, t)
        elif algo in ("etd", "etdb"):
            etd_step(cfg, ws, trace, t)
        else:
            adtd_step(cfg, ws, trace, t, algo, psi=self.psi)

        self.steps += 1
        if not ws.is_finite() or not np.isfinite(trace.F):
            logging.debug(f"[LEARNER] {algo} diverged after {self.steps} steps")
            self.diverged = True

    def predict(self, x: FeatureVector) -> float:
        return x.dot(self.weights.w)

    def values(self, feature_matrix: np.ndarray) -> np.ndarray:
        """
        Predictions for every row of a (states x dim) feature matrix
        """
        return feature_matrix @ self.weights.w

    ###########################################################################
    # snapshots
    ###########################################################################

    def snapshot(self) -> Dict[str, Any]:
        """
        A JSON-serializable record of the whole learner state
        """
        trace = {}
        for f in fields(TraceState):
            value = getattr(self.trace, f.name)
            trace[f.name] = value.tolist() if isinstance(value, np.ndarray) else float(value)
        return {
            "algorithm": self.algorithm,
            "config": self.config.as_dict(),
            "psi": self.psi,
            "dim": self.dim,
            "steps": self.steps,
            "diverged": self.diverged,
            "w": self.weights.w.tolist(),
            "h": self.weights.h.tolist(),
            "trace": trace,
        }

    @classmethod
    def restore(cls, snapshot: Dict[str, Any]) -> "Learner":
        try:
            config = LearnerConfig(**snapshot["config"])
            learner = cls(config, int(snapshot["dim"]), psi=snapshot.get("psi"))
            learner.steps = int(snapshot["steps"])
            learner.diverged = bool(snapshot["diverged"])
            learner.weights = WeightSet(np.array(snapshot["w"], dtype=np.float64),
                                        np.array(snapshot["h"], dtype=np.float64))
            values = {}
            for f in fields(TraceState):
                raw = snapshot["trace"][f.name]
                values[f.name] = np.array(raw, dtype=np.float64) if isinstance(raw, list) else float(raw)
            learner.trace = TraceState(**values)
        except (KeyError, TypeError) as e:
            raise LearnerError(f"malformed learner snapshot: {e}")
        return learner

    def __repr__(self) -> str:
        return f"Learner({self.algorithm}, dim={self.dim}, steps={self.steps}, diverged={self.diverged})"


def make_learner(config: LearnerConfig, dim: int, episodic: bool = True,
                 psi: Optional[float] = None) -> Learner:
    """
    Build a learner, rejecting the episodic-only algorithms on continuing problems
    """
    if config.algorithm not in ALGORITHM_IDS:
        raise UnknownAlgorithmError(f"unknown algorithm '{config.algorithm}'")
    if config.algorithm in EPISODIC_ONLY_IDS and not episodic:
        raise EpisodicOnlyError(f"{config.algorithm} is only defined for episodic problems")
    return Learner(config, dim, psi=psi)
