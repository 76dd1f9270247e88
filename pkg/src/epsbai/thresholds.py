"""Deviation function and stopping thresholds beta(t, delta)."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

ZETA2 = math.pi ** 2 / 6.0

_KINDS = ("universal", "refined", "gaussian1", "practical")


def h(u: float) -> float:
    return u - math.log(u)


def h_inv(x: float) -> float:
    """Inverse of u -> u - ln(u) on [1, inf).

    Bisection, capped at 200 iterations, 1e-14 absolute tolerance (or
    until the bracket stops shrinking in floating point).
    """
    if not x >= 1.0:
        raise ValueError(f"h_inv needs x >= 1, got {x!r}")
    if x == 1.0:
        return 1.0
    lo, hi = 1.0, 2.0 * x + 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi or hi - lo <= 1e-14:
            break
        if h(mid) < x:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# Branch points of the piecewise helper below. The two branches meet where
# h_inv(x) = 1/ln(3/2), i.e. at x = h(1/ln(3/2)), so that is the default: it
# keeps cal_T continuous and increasing. The alternative cut x >= h_inv(1/ln(3/2))
# leaves a downward jump at 3.80 and is kept only for comparison.
_BRANCH = h(1.0 / math.log(1.5))
_BRANCH_INV = h_inv(1.0 / math.log(1.5))


def _h_tilde(x: float, branch: float = _BRANCH) -> float:
    if x >= branch:
        u = h_inv(x)
        return math.exp(1.0 / u) * u
    return 1.5 * (x - math.log(math.log(1.5)))


def cal_T(x: float, inverse_branch: bool = False) -> float:
    """Deviation function 2 h~((h_inv(1 + x) + ln(2 zeta(2))) / 2) used by the thresholds."""
    if x < 0:
        raise ValueError(f"cal_T needs x >= 0, got {x!r}")
    branch = _BRANCH_INV if inverse_branch else _BRANCH
    return 2.0 * _h_tilde((h_inv(1.0 + x) + math.log(2.0 * ZETA2)) / 2.0, branch)


def cal_T_approx(x: float) -> float:
    """Closed-form approximation x + 4 ln(1 + x + sqrt(2x)), good for x >= 5."""
    return x + 4.0 * math.log(1.0 + x + math.sqrt(2.0 * x))


@dataclass(frozen=True)
class ThresholdSpec:
    """A threshold family at a fixed risk ``delta``.

    ``n_arms`` is only used by the ``universal`` and ``refined`` kinds.
    """

    kind: str
    delta: float
    n_arms: int = 2
    _const: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown threshold kind {self.kind!r}; expected one of {_KINDS}")
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta!r}")
        if self.n_arms < 1:
            raise ValueError("n_arms must be >= 1")
        if self.kind == "refined" and self.n_arms < 2:
            raise ValueError("refined threshold needs at least two arms")
        object.__setattr__(self, "_const", self._constant())

    def _constant(self) -> float:
        log_inv = math.log(1.0 / self.delta)
        k = self.n_arms
        if self.kind == "universal":
            return k * cal_T(log_inv / k)
        if self.kind == "refined":
            return 2.0 * cal_T(math.log((k - 1) / self.delta) / 2.0)
        if self.kind == "gaussian1":
            return cal_T(log_inv)
        return log_inv

    def __call__(self, t: float) -> float:
        return beta(self, t)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "delta": self.delta}


def beta(spec: ThresholdSpec, t: float) -> float:
    if not t >= 1:
        raise ValueError(f"threshold needs t >= 1, got {t!r}")
    loglog = math.log(1.0 + math.log(t))
    if spec.kind == "universal":
        return 3.0 * spec.n_arms * loglog + spec._const
    if spec.kind == "refined":
        return 6.0 * loglog + spec._const
    if spec.kind == "gaussian1":
        return 3.0 * loglog + spec._const
    # practical: ln((1 + ln t) / delta)
    return loglog + spec._const
