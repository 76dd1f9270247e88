"""Sampling, stopping and recommendation rules for eps-best arm identification.

Every strategy follows the same protocol. After the initialization rounds
(arm 0, 1, ..., K-1 pulled once, in order) the harness repeatedly calls
``decide(state, beta_value)``, which either stops with a recommendation or
names the arm(s) to pull next. ``beta_value`` is the threshold evaluated at
the current number of samples ``state.t``. Arms are 0-based and every tie
is broken towards the lowest index.

KL-LUCB, per decision::

    a_hat = argmax_a mu_hat_a
    b_hat = argmax_{b != a_hat} u_b
    if l_{a_hat} >= u_{b_hat} - eps: stop, recommend a_hat
    else: pull a_hat, then b_hat

UGapE (single best arm), per decision::

    B_a   = max_{b != a} u_b - l_a
    J     = argmin_a B_a
    if B_J <= eps: stop, recommend J
    c     = argmax_{b != J} u_b
    pull whichever of J, c has the wider interval u - l (J on ties)

KL-Racing, per decision (one decision = one round-robin sweep)::

    drop every active b with u_b < max_{a active} l_a - eps
    if one arm is left: stop, recommend it
    a_hat = argmax_{a active} mu_hat_a
    if l_{a_hat} >= max_{b active, b != a_hat} u_b - eps: stop, recommend a_hat
    else: pull every active arm once, in index order

The confidence bounds u, l come from :func:`kl_confidence_bounds` at the
same ``beta_value``.
"""
from __future__ import annotations

import copy
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from . import kernels
from .families import Family
from .oracle import TIE_RTOL


class StrategyState:
    """Counts and sums of one run; ``t`` is the total number of samples."""

    def __init__(self, family: Family, n_arms: int, eps: float = 0.0):
        if n_arms < 2:
            raise ValueError("need at least two arms")
        self.family = family
        self.eps = float(eps)
        self.counts = np.zeros(n_arms)
        self.sums = np.zeros(n_arms)
        self.t = 0

    @classmethod
    def from_counts(cls, family: Family, counts, means, eps: float = 0.0) -> "StrategyState":
        counts = np.asarray(counts, dtype=float)
        state = cls(family, counts.shape[0], eps)
        state.counts[:] = counts
        state.sums[:] = counts * np.asarray(means, dtype=float)
        state.t = int(round(counts.sum()))
        return state

    @property
    def n_arms(self) -> int:
        return self.counts.shape[0]

    def update(self, arm: int, x: float) -> None:
        self.counts[arm] += 1
        self.sums[arm] += x
        self.t += 1

    def means(self) -> np.ndarray:
        """Empirical means; nan for arms never pulled."""
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.counts > 0, self.sums / np.maximum(self.counts, 1), np.nan)

    def _require_all_pulled(self):
        if np.any(self.counts < 1):
            raise ValueError("every arm must be pulled at least once")


# --- statistics ---------------------------------------------------------------

def z_stat(state: StrategyState, a: int, b: int, eps: float | None = None) -> float:
    """GLR statistic Z_ab: evidence that a is at least as good as b minus eps."""
    eps = state.eps if eps is None else eps
    if a == b:
        raise ValueError("z_stat needs two distinct arms")
    if state.counts[a] < 1 or state.counts[b] < 1:
        raise ValueError("both arms need at least one sample")
    mu = state.means()
    if mu[a] < mu[b] - eps:
        raise ValueError(f"z_stat({a}, {b}) needs mu_hat_a >= mu_hat_b - eps")
    fam = state.family
    return float(kernels.z_stat(fam.code, fam.sigma2, mu[a], mu[b], state.counts[a], state.counts[b], eps))


def glrt_value(state: StrategyState, eps: float | None = None) -> tuple[float, int]:
    """(max over empirical eps-best a of min_b Z_ab, its lowest-index argmax)."""
    eps = state.eps if eps is None else eps
    state._require_all_pulled()
    fam = state.family
    value, arm = kernels.pglrt(fam.code, fam.sigma2, state.means(), state.counts, eps)
    return float(value), int(arm)


def pglrt_check(state: StrategyState, beta_value: float, eps: float | None = None) -> Optional[int]:
    """Recommended arm if the parallel GLRT rejects at level ``beta_value``, else None."""
    value, arm = glrt_value(state, eps)
    return arm if value > beta_value else None


def kl_confidence_bounds(state: StrategyState, a: int, beta_value: float) -> tuple[float, float]:
    """(min, max) of {q : N_a d(mu_hat_a, q) <= beta_value}, clipped to the mean domain."""
    if state.counts[a] < 1:
        raise ValueError(f"arm {a} has no samples")
    fam = state.family
    mu = state.sums[a] / state.counts[a]
    n = state.counts[a]
    lo = kernels.kl_lower(fam.code, fam.sigma2, mu, n, beta_value)
    hi = kernels.kl_upper(fam.code, fam.sigma2, mu, n, beta_value)
    return float(lo), float(hi)


def _all_bounds(state: StrategyState, beta_value: float):
    fam = state.family
    lower = np.empty(state.n_arms)
    upper = np.empty(state.n_arms)
    kernels.kl_bounds(fam.code, fam.sigma2, state.means(), state.counts, beta_value, lower, upper)
    return lower, upper


# --- eps-tracking -----------------------------------------------------------------

def oracle_weights(state: StrategyState, eps: float | None = None) -> tuple[np.ndarray, int]:
    """Plug-in weights w*(mu_hat) of the lowest-index optimal candidate.

    The second value is the kernel status: 0 solved, 1 uniform over the
    empirical best arms (no candidate), 2 solver failure (uniform).
    """
    eps = state.eps if eps is None else eps
    fam = state.family
    w = np.empty(state.n_arms)
    status = kernels.tracking_target(fam.code, fam.sigma2, state.means(), eps, w, TIE_RTOL)
    return w, int(status)


def forced_arm(state: StrategyState) -> Optional[int]:
    """Least pulled arm among those with N_a < sqrt(t) - K/2, if any."""
    threshold = math.sqrt(state.t) - state.n_arms / 2.0
    under = state.counts < threshold
    if not under.any():
        return None
    idx = np.flatnonzero(under)
    return int(idx[np.argmin(state.counts[idx])])


def tracking_next_arm(state: StrategyState, oracle: Callable | np.ndarray | None = None) -> tuple[int, bool]:
    """Next arm under eps-tracking and whether the uniform fallback was used.

    ``oracle`` is either a weight vector, a callable ``state -> weights``,
    or None for the built-in plug-in solver.
    """
    arm = forced_arm(state)
    if arm is not None:
        return arm, False
    fallback = False
    if oracle is None:
        w, status = oracle_weights(state)
        fallback = status == 2
    elif callable(oracle):
        w = np.asarray(oracle(state), dtype=float)
    else:
        w = np.asarray(oracle, dtype=float)
    return int(np.argmax(state.t * w - state.counts)), fallback


# --- strategy objects --------------------------------------------------------------

@dataclass
class Decision:
    stop: bool
    recommendation: int = -1
    arms: tuple = ()
    fallback: bool = False


class Strategy:
    """Base protocol; ``start`` is called on a fresh state before every run."""

    name = "strategy"

    def start(self, state: StrategyState) -> None:
        pass

    def decide(self, state: StrategyState, beta_value: float) -> Decision:
        raise NotImplementedError

    def describe(self) -> str:
        return self.name


class EpsTrackAndStop(Strategy):
    """eps-tracking sampler with the parallel GLRT stopping rule.

    ``eps`` overrides the instance tolerance inside the strategy; 0 gives
    the plain Track-and-Stop for a unique best arm.
    """

    name = "eps-tas"

    def __init__(self, eps: float | None = None):
        self.eps = eps

    def describe(self) -> str:
        return self.name if self.eps is None else f"eps-tas:{self.eps:g}"

    def decide(self, state, beta_value):
        eps = state.eps if self.eps is None else self.eps
        fam = state.family
        mu = state.sums / state.counts
        value, arm = kernels.pglrt(fam.code, fam.sigma2, mu, state.counts, eps)
        if value > beta_value:
            return Decision(True, int(arm))
        forced = forced_arm(state)
        if forced is not None:
            return Decision(False, arms=(forced,))
        w = np.empty(state.n_arms)
        status = kernels.tracking_target(fam.code, fam.sigma2, mu, eps, w, TIE_RTOL)
        nxt = int(np.argmax(state.t * w - state.counts))
        return Decision(False, arms=(nxt,), fallback=status == 2)


class FixedWeights(Strategy):
    """Tracks a fixed allocation (no forced exploration), parallel GLRT stop."""

    name = "fixed"

    def __init__(self, weights: Sequence[float]):
        w = np.asarray(weights, dtype=float)
        if w.ndim != 1 or np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError("fixed weights must be nonnegative and sum to 1")
        self.weights = w

    def describe(self) -> str:
        return "fixed:" + ",".join(f"{x:g}" for x in self.weights)

    def start(self, state):
        if self.weights.shape[0] != state.n_arms:
            raise ValueError(f"fixed weights have {self.weights.shape[0]} entries for {state.n_arms} arms")

    def decide(self, state, beta_value):
        arm = pglrt_check(state, beta_value)
        if arm is not None:
            return Decision(True, arm)
        return Decision(False, arms=(int(np.argmax(state.t * self.weights - state.counts)),))


def _best_challenger(upper: np.ndarray, a: int) -> int:
    masked = upper.copy()
    masked[a] = -np.inf
    return int(np.argmax(masked))


class KLLUCB(Strategy):
    name = "kl-lucb"

    def decide(self, state, beta_value):
        lower, upper = _all_bounds(state, beta_value)
        a = int(np.argmax(state.sums / state.counts))
        b = _best_challenger(upper, a)
        if lower[a] >= upper[b] - state.eps:
            return Decision(True, a)
        return Decision(False, arms=(a, b))


class UGapE(Strategy):
    name = "ugape"

    def decide(self, state, beta_value):
        lower, upper = _all_bounds(state, beta_value)
        k = state.n_arms
        gaps = np.array([upper[[b for b in range(k) if b != a]].max() - lower[a] for a in range(k)])
        j = int(np.argmin(gaps))
        if gaps[j] <= state.eps:
            return Decision(True, j)
        c = _best_challenger(upper, j)
        pull = c if upper[c] - lower[c] > upper[j] - lower[j] else j
        return Decision(False, arms=(pull,))


class KLRacing(Strategy):
    name = "kl-racing"

    def start(self, state):
        self.active = np.ones(state.n_arms, dtype=bool)

    def decide(self, state, beta_value):
        lower, upper = _all_bounds(state, beta_value)
        act = self.active
        best_lower = lower[act].max()
        act &= ~(upper < best_lower - state.eps)
        idx = np.flatnonzero(act)
        if idx.size == 1:
            return Decision(True, int(idx[0]))
        mu = state.sums / state.counts
        a = int(idx[np.argmax(mu[idx])])
        others = idx[idx != a]
        if lower[a] >= upper[others].max() - state.eps:
            return Decision(True, a)
        return Decision(False, arms=tuple(int(i) for i in idx))


def parse_strategy(text: str) -> Strategy:
    """Build a strategy from its config string.

    Accepted: ``eps-tas``, ``eps-tas:EPS``, ``fixed:w1,...,wK``, ``kl-lucb``,
    ``ugape``, ``kl-racing``.
    """
    text = text.strip()
    head, _, arg = text.partition(":")
    head = head.lower()
    if head == "eps-tas":
        if not arg:
            return EpsTrackAndStop()
        eps = float(arg)
        if not eps >= 0:
            raise ValueError(f"strategy eps must be >= 0, got {arg!r}")
        return EpsTrackAndStop(eps)
    if head == "fixed":
        if not arg:
            raise ValueError("fixed strategy needs weights, e.g. fixed:0.5,0.5")
        return FixedWeights([float(x) for x in arg.split(",")])
    if arg:
        raise ValueError(f"strategy {head!r} takes no argument")
    table = {"kl-lucb": KLLUCB, "ugape": UGapE, "kl-racing": KLRacing}
    if head not in table:
        raise ValueError(f"unknown strategy {text!r}")
    return table[head]()


def baseline_step(kind: str, state: StrategyState, beta_value: float, eps: float | None = None,
                  racing: KLRacing | None = None) -> Decision:
    """One decision of a confidence-bound baseline; see the module docstring.

    ``racing`` carries the active set across calls for KL-Racing; a fresh
    one (all arms active) is used when omitted.
    """
    state._require_all_pulled()
    if eps is not None and eps != state.eps:
        state = copy.copy(state)
        state.eps = float(eps)
    if kind == "kl-racing":
        if racing is None:
            racing = KLRacing()
            racing.start(state)
        return racing.decide(state, beta_value)
    return parse_strategy(kind).decide(state, beta_value)
