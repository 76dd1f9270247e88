"""Sequential test of (mu < eps) against (mu > -eps) on one Gaussian stream.

The GLR statistic after t observations is t (|mu_hat| + eps)^2 / (2 sigma2);
the test stops the first time it exceeds beta(t, delta) and answers 2
("mu > -eps") iff mu_hat > 0, else 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np

from .families import Family, sample_many
from .thresholds import ThresholdSpec, cal_T

C_LOG = 3.0 / math.e
DEFAULT_CAP = 10 ** 6


def one_arm_glr_stat(t: float, mu_hat: float, eps: float, sigma2: float) -> float:
    if t < 1:
        raise ValueError("t must be >= 1")
    return t * (abs(mu_hat) + eps) ** 2 / (2.0 * sigma2)


def beta_array(spec: ThresholdSpec, t: np.ndarray) -> np.ndarray:
    """Vectorized :func:`thresholds.beta` for an array of rounds t >= 1."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 1):
        raise ValueError("threshold needs t >= 1")
    loglog = np.log1p(np.log(t))
    scale = {"universal": 3.0 * spec.n_arms, "refined": 6.0, "gaussian1": 3.0, "practical": 1.0}[spec.kind]
    return scale * loglog + spec._const


@dataclass(frozen=True)
class OneArmConfig:
    mu_true: float
    eps: float
    sigma2: float = 1.0
    delta: float = 0.1
    threshold: ThresholdSpec | None = None
    horizon_cap: int = DEFAULT_CAP

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be > 0")
        if not self.sigma2 > 0:
            raise ValueError("sigma2 must be > 0")
        if self.horizon_cap < 1:
            raise ValueError("horizon_cap must be >= 1")
        if self.threshold is None:
            object.__setattr__(self, "threshold", ThresholdSpec("gaussian1", self.delta))
        elif self.threshold.delta != self.delta:
            raise ValueError("threshold delta differs from config delta")


class RngSource:
    """Gaussian observations drawn from a caller-owned generator in fixed blocks."""

    def __init__(self, mu: float, sigma2: float, rng: np.random.Generator, block: int = 256):
        self.family = Family.gaussian(sigma2)
        self.mu = mu
        self.rng = rng
        self.block = block

    def blocks(self) -> Iterator[np.ndarray]:
        size = self.block
        while True:
            yield sample_many(self.family, self.mu, self.rng, size)
            size = min(2 * size, 1 << 16)


class SequenceSource:
    """A fixed, finite observation sequence (for fixtures and replays)."""

    def __init__(self, values: Iterable[float]):
        self.values = np.asarray(list(values), dtype=float)

    def blocks(self) -> Iterator[np.ndarray]:
        yield self.values


@dataclass
class OneArmResult:
    tau: int
    decision: int
    capped: bool
    mu_hat: float = field(default=float("nan"))


def run_source(source, eps: float, sigma2: float, threshold: ThresholdSpec, cap: int = DEFAULT_CAP) -> OneArmResult:
    """Run the test on ``source``; stops, hits ``cap``, or exhausts the source."""
    total = 0.0
    t0 = 0
    for block in source.blocks():
        block = block[: cap - t0]
        if block.size == 0:
            break
        t = t0 + np.arange(1, block.size + 1, dtype=float)
        cum = total + np.cumsum(block)
        mu_hat = cum / t
        stat = t * (np.abs(mu_hat) + eps) ** 2 / (2.0 * sigma2)
        hit = np.flatnonzero(stat > beta_array(threshold, t))
        if hit.size:
            i = int(hit[0])
            m = float(mu_hat[i])
            return OneArmResult(t0 + i + 1, 2 if m > 0 else 1, False, m)
        total = float(cum[-1])
        t0 += block.size
        if t0 >= cap:
            break
    m = total / t0 if t0 else float("nan")
    return OneArmResult(t0, 2 if m > 0 else 1, True, m)


def run_one_arm(config: OneArmConfig, rng: np.random.Generator | None = None, source=None) -> OneArmResult:
    """One run; observations come from ``source`` or, by default, from ``rng``."""
    if source is None:
        if rng is None:
            raise ValueError("need an rng or an observation source")
        source = RngSource(config.mu_true, config.sigma2, rng)
    return run_source(source, config.eps, config.sigma2, config.threshold, config.horizon_cap)


def correct_decisions(mu: float, eps: float) -> set[int]:
    """Answers that are right for mean ``mu``: 1 iff mu < eps, 2 iff mu > -eps."""
    out = set()
    if mu < eps:
        out.add(1)
    if mu > -eps:
        out.add(2)
    return out


# --- predicted sample complexity ----------------------------------------------------

def kl_bin(x: float, y: float) -> float:
    """Binary relative entropy kl(x, y) with 0 ln 0 = 0."""
    def term(p, q):
        if p == 0:
            return 0.0
        if q == 0:
            return math.inf
        return p * math.log(p / q)

    return term(x, y) + term(1.0 - x, 1.0 - y)


def ell(delta: float) -> float:
    return cal_T(math.log(1.0 / delta)) + C_LOG


@dataclass(frozen=True)
class PredictedBounds:
    upper: float
    lower: float
    t0: float

    def __iter__(self):
        return iter((self.upper, self.lower, self.t0))


def predicted_bounds(mu: float, eps: float, sigma2: float, delta: float) -> PredictedBounds:
    """Expected-sample-size envelope for the gaussian1 threshold.

    upper = s [l + 2c ln(s l) + 8 sqrt(l + 2c ln(s l)) + 32 delta^(1/8)] + 1
    lower = s kl(delta, 1 - delta)
    t0    = s l + 2 c s ln(s l)
    with s = 2 sigma2 / (|mu| + eps)^2, l = cal_T(ln 1/delta) + 3/e, c = 3/e.
    """
    if not eps > 0:
        raise ValueError("eps must be > 0")
    s = 2.0 * sigma2 / (abs(mu) + eps) ** 2
    l = ell(delta)
    inner = l + 2.0 * C_LOG * math.log(s * l)
    upper = s * (inner + 8.0 * math.sqrt(inner) + 32.0 * delta ** 0.125) + 1.0
    lower = s * kl_bin(delta, 1.0 - delta)
    t0 = s * l + 2.0 * C_LOG * s * math.log(s * l)
    return PredictedBounds(upper, lower, t0)


def log_inversion_t0(alpha: float, gamma: float) -> float:
    """gamma + 2 alpha ln(gamma); requires gamma >= 1 + alpha >= 1."""
    if alpha < 0 or gamma < 1 + alpha:
        raise ValueError("need alpha >= 0 and gamma >= 1 + alpha")
    return gamma + 2.0 * alpha * math.log(gamma)


def log_inversion_holds(alpha: float, gamma: float, t: float | None = None) -> bool:
    """Whether t >= gamma + alpha ln t at t (default: the t0 above)."""
    t = log_inversion_t0(alpha, gamma) if t is None else t
    return t >= gamma + alpha * math.log(t)


def assumption2_margin(mu: float, eps: float, sigma2: float, delta: float,
                       t_grid: np.ndarray | None = None, rel_step: float = 1e-6) -> float:
    """min over t >= T0 of (|mu|+eps)/(4 sigma sqrt t) - d/dt sqrt(2 beta(t)).

    Uses the gaussian1 threshold and central differences; a nonnegative
    result means the slope condition holds on the grid.
    """
    spec = ThresholdSpec("gaussian1", delta)
    t0 = max(predicted_bounds(mu, eps, sigma2, delta).t0, 1.0 + 1e-3)
    if t_grid is None:
        t_grid = np.geomspace(t0, t0 * 1e6, 2000)
    t_grid = np.asarray(t_grid, dtype=float)
    t_grid = t_grid[t_grid >= t0]
    h = rel_step * t_grid
    deriv = (np.sqrt(2 * beta_array(spec, t_grid + h)) - np.sqrt(2 * beta_array(spec, t_grid - h))) / (2 * h)
    bound = (abs(mu) + eps) / (4.0 * math.sqrt(sigma2) * np.sqrt(t_grid))
    return float(np.min(bound - deriv))
