"""Characteristic time and optimal sampling weights for eps-best-arm identification."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from . import kernels
from .families import Family

TIE_RTOL = 1e-6


@dataclass(frozen=True)
class BanditInstance:
    family: Family
    means: tuple
    eps: float = 0.0

    def __post_init__(self):
        means = tuple(float(self.family.check_mean(m, "means")) for m in self.means)
        object.__setattr__(self, "means", means)
        if len(means) < 2:
            raise ValueError("a bandit instance needs at least two arms")
        if not (self.eps >= 0 and math.isfinite(self.eps)):
            raise ValueError(f"eps must be a finite nonnegative number, got {self.eps!r}")
        object.__setattr__(self, "eps", float(self.eps))

    @property
    def n_arms(self) -> int:
        return len(self.means)

    @property
    def mu(self) -> np.ndarray:
        return np.asarray(self.means, dtype=float)

    def eps_optimal(self) -> list[int]:
        top = max(self.means)
        return [a for a, m in enumerate(self.means) if m >= top - self.eps]

    def candidates(self) -> list[int]:
        """Arms strictly above every other arm minus eps."""
        out = []
        for a, m in enumerate(self.means):
            others = max(x for b, x in enumerate(self.means) if b != a)
            if m > others - self.eps:
                out.append(a)
        return out

    def with_means(self, means, eps=None) -> "BanditInstance":
        return BanditInstance(self.family, tuple(means), self.eps if eps is None else eps)

    def to_dict(self) -> dict:
        return {"family": self.family.to_dict(), "means": list(self.means), "eps": self.eps}


@dataclass
class CandidateSolution:
    arm: int
    t_star: float
    weights: np.ndarray
    y_star: float
    status: int
    residual: float = 0.0


@dataclass
class OracleSolution:
    t_star: float
    per_candidate: list
    w_star_set: list
    optimal_arms: list
    regular: bool
    chosen: int | None
    uniform_fallback: bool = False

    @property
    def weights(self) -> np.ndarray:
        """The tracked target: weights of the lowest-index optimal candidate."""
        return self.w_star_set[0]

    def to_dict(self) -> dict:
        return {
            "t_star": _num(self.t_star),
            "regular": self.regular,
            "chosen": self.chosen,
            "optimal_arms": list(self.optimal_arms),
            "w_star_set": [[float(v) for v in w] for w in self.w_star_set],
            "per_candidate": [
                {
                    "arm": c.arm,
                    "t_star": _num(c.t_star),
                    "weights": [float(v) for v in c.weights],
                    "y_star": _num(c.y_star),
                    "status": _STATUS_NAMES.get(c.status, str(c.status)),
                }
                for c in self.per_candidate
            ],
        }


_STATUS_NAMES = {
    kernels.OK: "ok",
    kernels.INDICATOR: "indicator",
    kernels.NOT_CANDIDATE: "not-candidate",
    kernels.FAILED: "failed",
}


def _num(x):
    x = float(x)
    return x if math.isfinite(x) else None


def _pair(instance: BanditInstance, a: int, b: int):
    if a == b:
        raise ValueError("a and b must differ")
    mu_a, mu_b = instance.means[a], instance.means[b]
    if not mu_a >= mu_b - instance.eps:
        raise ValueError(f"arm {a} is more than eps below arm {b}")
    return instance.family.code, instance.family.sigma2, mu_a, mu_b, instance.eps


def lambda_interval(instance: BanditInstance, a: int, b: int) -> tuple[float, float]:
    """Closed interval holding the alternative mean of arm a against b."""
    kind, _, mu_a, mu_b, eps = _pair(instance, a, b)
    return kernels.pair_interval(kind, mu_a, mu_b, eps)


def lambda_b(instance: BanditInstance, a: int, b: int, x: float) -> float:
    """Minimizer of d(mu_a, l) + x d(mu_b, l + eps) over the pair interval."""
    if x < 0:
        raise ValueError("x must be nonnegative")
    return float(kernels.lambda_b(*_pair(instance, a, b), float(x)))


def g_b(instance: BanditInstance, a: int, b: int, x: float) -> float:
    if x < 0:
        raise ValueError("x must be nonnegative")
    return float(kernels.g_b(*_pair(instance, a, b), float(x)))


def pair_divergences(instance: BanditInstance, a: int, b: int, x: float) -> tuple[float, float]:
    """(d(mu_a, lambda_b(x)), d(mu_b, lambda_b(x) + eps)) without rounding lambda first."""
    if x < 0:
        raise ValueError("x must be nonnegative")
    args = _pair(instance, a, b)
    u = kernels.pair_offset(*args, 1.0, float(x))
    return tuple(float(v) for v in kernels._pair_divs(*args, u))


def g_range(instance: BanditInstance, a: int, b: int) -> tuple[float, float]:
    """``(g_b(0), sup_x g_b(x))``."""
    return tuple(float(v) for v in kernels.g_range(*_pair(instance, a, b)))


def x_b(instance: BanditInstance, a: int, b: int, y: float) -> float:
    """Inverse of :func:`g_b`, defined on ``[g_b(0), sup g_b)``."""
    lo, hi = g_range(instance, a, b)
    if not lo <= y < hi:
        raise ValueError(f"y={y!r} outside the range [{lo}, {hi}) of g_b")
    return float(kernels.x_b(*_pair(instance, a, b), float(y)))


def solve_weights_for_arm(instance: BanditInstance, a: int) -> CandidateSolution:
    """Optimal weights and characteristic time when the answer is arm ``a``."""
    w = np.zeros(instance.n_arms)
    status, t_a, y, residual = kernels.solve_candidate(
        instance.family.code, instance.family.sigma2, instance.mu, a, instance.eps, w
    )
    if status == kernels.NOT_CANDIDATE:
        raise ValueError(f"arm {a} is not a candidate answer (some arm exceeds it by eps or more)")
    if status == kernels.FAILED:
        raise ArithmeticError(f"weight computation failed for arm {a} on {instance.means}")
    return CandidateSolution(a, float(t_a), w, float(y), int(status), float(residual))


def characteristic_time(instance: BanditInstance) -> OracleSolution:
    kind, sigma2, mu = instance.family.code, instance.family.sigma2, instance.mu
    n = instance.n_arms
    t_vals = np.empty(n)
    w_all = np.zeros((n, n))
    status = np.empty(n, dtype=np.int64)
    y_vals = np.empty(n)
    kernels.solve_all(kind, sigma2, mu, instance.eps, t_vals, w_all, status, y_vals)

    per = [
        CandidateSolution(a, float(t_vals[a]), w_all[a].copy(), float(y_vals[a]), int(status[a]))
        for a in range(n)
        if status[a] in (kernels.OK, kernels.INDICATOR)
    ]
    if not per:
        # eps = 0 with several best arms: no finite characteristic time
        best = instance.eps_optimal()
        w = np.zeros(n)
        w[best] = 1.0 / len(best)
        return OracleSolution(math.inf, [], [w], [], len(best) == 1, None, uniform_fallback=True)
    if any(s == kernels.FAILED for s in status):
        bad = [a for a in range(n) if status[a] == kernels.FAILED]
        raise ArithmeticError(f"weight computation failed for arms {bad} on {instance.means}")

    t_star = min(c.t_star for c in per)
    optimal = [c for c in per if c.t_star <= t_star * (1.0 + TIE_RTOL)]
    w_set = []
    for c in optimal:
        if not any(np.max(np.abs(c.weights - w)) <= 1e-9 for w in w_set):
            w_set.append(c.weights)
    return OracleSolution(
        t_star=t_star,
        per_candidate=per,
        w_star_set=w_set,
        optimal_arms=[c.arm for c in optimal],
        regular=len(w_set) == 1,
        chosen=optimal[0].arm,
    )


def two_arm(instance: BanditInstance):
    """Characteristic time of a two-armed instance through the equal-divergence point.

    Returns ``(t_star, (m12, m21))`` where ``m12`` solves
    d(mu_1, l) = d(mu_2, l + eps) (``None`` when arm 1 is not eps-optimal),
    and symmetrically for ``m21``.
    """
    if instance.n_arms != 2:
        raise ValueError("two_arm needs exactly two arms")
    fam, eps = instance.family, instance.eps
    points = []
    inv = 0.0
    for a, b in ((0, 1), (1, 0)):
        mu_a, mu_b = instance.means[a], instance.means[b]
        if mu_a < mu_b - eps:
            points.append(None)
            continue
        lam = _equal_divergence_point(fam, mu_a, mu_b, eps)
        points.append(lam)
        inv = max(inv, float(kernels.kl(fam.code, fam.sigma2, mu_a, lam)))
    t_star = math.inf if inv == 0.0 else 1.0 / inv
    return t_star, tuple(points)


def _equal_divergence_point(fam: Family, mu_a: float, mu_b: float, eps: float) -> float:
    lo, hi = kernels.pair_interval(fam.code, mu_a, mu_b, eps)
    if hi <= lo:
        return 0.5 * (lo + hi)

    def gap(lam):
        return kernels.kl(fam.code, fam.sigma2, mu_a, lam) - kernels.kl(fam.code, fam.sigma2, mu_b, lam + eps)

    # gap is decreasing on [lo, hi]
    if gap(hi) >= 0.0:
        return hi
    if gap(lo) <= 0.0:
        return lo
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if gap(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass
class BruteForceResult:
    t_star: float
    value: float
    best_weights: np.ndarray
    weight_step: float
    lambda_points: int
    coarse: bool
    meta: dict = field(default_factory=dict)


def _simplex_grid(n_arms: int, n_steps: int) -> np.ndarray:
    """All points of the simplex with coordinates in multiples of 1/n_steps."""
    rows = []
    for cuts in combinations(range(n_steps + n_arms - 1), n_arms - 1):
        prev = -1
        row = []
        for c in cuts:
            row.append(c - prev - 1)
            prev = c
        row.append(n_steps + n_arms - 2 - prev)
        rows.append(row)
    return np.asarray(rows, dtype=float) / n_steps


def _grid_div(fam: Family, m: float, lam: np.ndarray) -> np.ndarray:
    lam = np.asarray(lam, dtype=float)
    if fam.kind == "gaussian":
        return (m - lam) ** 2 / (2.0 * fam.sigma2)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(m > 0, m * np.log(m / lam), 0.0) + np.where(
            m < 1, (1 - m) * np.log((1 - m) / (1 - lam)), 0.0
        )
    return np.maximum(out, 0.0)


def _lambda_grid(instance: BanditInstance, a: int, b: int, points: int) -> np.ndarray:
    lo_dom, hi_dom = instance.family.mean_domain
    mu, eps = instance.means, instance.eps
    lo = max(mu[b] - eps, lo_dom + kernels.EDGE)
    hi = min(mu[a], hi_dom - eps - kernels.EDGE)
    return np.linspace(lo, hi, points) if hi > lo else np.array([0.5 * (lo + hi)])


def grid_objective(instance: BanditInstance, weights, lambda_points: int = 20001) -> float:
    """max_a min_{b != a} of the inner infimum at fixed ``weights``, on a lambda grid.

    Any K; 1 / value is the grid estimate of the time these weights need.
    """
    w = np.asarray(weights, dtype=float)
    fam, eps, mu = instance.family, instance.eps, instance.means
    best = -np.inf
    for a in instance.eps_optimal():
        worst = np.inf
        for b in range(instance.n_arms):
            if b == a:
                continue
            lam = _lambda_grid(instance, a, b, lambda_points)
            vals = w[a] * _grid_div(fam, mu[a], lam) + w[b] * _grid_div(fam, mu[b], lam + eps)
            worst = min(worst, float(vals.min()))
        best = max(best, worst)
    return best


def brute_force_T(
    instance: BanditInstance, weight_step: float = 0.005, lambda_points: int = 2001, chunk: int = 4096
) -> BruteForceResult:
    """Exhaustive grid evaluation of the sup-max-min-inf program.

    Independent of the root-finding solver: the inner infimum is a minimum
    over ``lambda_points`` evenly spaced alternatives on each pair
    interval, the outer supremum a maximum over the simplex grid.
    """
    n = instance.n_arms
    if n > 4:
        raise ValueError("brute_force_T is limited to K <= 4")
    n_steps = int(round(1.0 / weight_step))
    grid = _simplex_grid(n, n_steps)
    fam, eps, mu = instance.family, instance.eps, instance.means
    best = np.full(len(grid), -np.inf)
    for a in instance.eps_optimal():
        worst = np.full(len(grid), np.inf)
        for b in range(n):
            if b == a:
                continue
            lam = _lambda_grid(instance, a, b, lambda_points)
            da, db = _grid_div(fam, mu[a], lam), _grid_div(fam, mu[b], lam + eps)
            vals = np.empty(len(grid))
            for start in range(0, len(grid), chunk):
                wa = grid[start:start + chunk, a, None]
                wb = grid[start:start + chunk, b, None]
                vals[start:start + chunk] = np.min(wa * da + wb * db, axis=1)
            worst = np.minimum(worst, vals)
        best = np.maximum(best, worst)
    idx = int(np.argmax(best))
    value = float(best[idx])
    return BruteForceResult(
        t_star=math.inf if value <= 0 else 1.0 / value,
        value=value,
        best_weights=grid[idx].copy(),
        weight_step=1.0 / n_steps,
        lambda_points=lambda_points,
        coarse=weight_step > 0.01 or lambda_points < 501,
        meta={"grid_size": len(grid)},
    )


def lower_bound_general(instance: BanditInstance, delta: float, t_star: float | None = None) -> float:
    """Non-asymptotic lower bound on the expected sample size of any PAC strategy."""
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    if t_star is None:
        t_star = characteristic_time(instance).t_star
    n_opt = len(instance.eps_optimal())
    bound = t_star * ((1.0 - delta) / n_opt * math.log(1.0 / delta) - math.log(2.0))
    return max(bound, 0.0)
