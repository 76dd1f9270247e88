"""One-parameter exponential families parameterized by their mean."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels


@dataclass(frozen=True)
class Family:
    """Gaussian with known variance, or Bernoulli.

    >>> Family.gaussian(1.0).kl(0.0, 1.0)
    0.5
    """

    kind: str
    sigma2: float = 1.0

    def __post_init__(self):
        if self.kind not in ("gaussian", "bernoulli"):
            raise ValueError(f"unknown family {self.kind!r}")
        if self.kind == "gaussian" and not (self.sigma2 > 0 and math.isfinite(self.sigma2)):
            raise ValueError(f"sigma2 must be positive, got {self.sigma2!r}")
        if self.kind == "bernoulli":
            object.__setattr__(self, "sigma2", 1.0)

    @classmethod
    def gaussian(cls, sigma2: float = 1.0) -> "Family":
        return cls("gaussian", float(sigma2))

    @classmethod
    def bernoulli(cls) -> "Family":
        return cls("bernoulli")

    @property
    def code(self) -> int:
        return kernels.GAUSSIAN if self.kind == "gaussian" else kernels.BERNOULLI

    @property
    def mean_domain(self) -> tuple[float, float]:
        """Open interval of admissible means."""
        if self.kind == "gaussian":
            return (-math.inf, math.inf)
        return (0.0, 1.0)

    def in_closure(self, mu: float) -> bool:
        lo, hi = self.mean_domain
        return lo <= mu <= hi if self.kind == "bernoulli" else math.isfinite(mu)

    def check_mean(self, mu: float, name: str = "mu") -> float:
        mu = float(mu)
        if not self.in_closure(mu):
            raise ValueError(f"{name}={mu!r} outside the closure of the {self.kind} mean domain")
        return mu

    def kl(self, mu: float, lam: float) -> float:
        return kl_div(self, mu, lam)

    def to_dict(self) -> dict:
        if self.kind == "gaussian":
            return {"kind": "gaussian", "sigma2": self.sigma2}
        return {"kind": "bernoulli"}

    @classmethod
    def from_dict(cls, data: dict) -> "Family":
        kind = data.get("kind")
        if kind == "gaussian":
            return cls.gaussian(data.get("sigma2", 1.0))
        if kind == "bernoulli":
            if set(data) - {"kind"}:
                raise ValueError("bernoulli family takes no parameters")
            return cls.bernoulli()
        raise ValueError(f"unknown family kind {kind!r}")


def kl_div(family: Family, mu: float, lam: float) -> float:
    """Divergence d(mu, lam) between the members with means mu and lam.

    Bernoulli uses 0 ln 0 = 0 and returns ``inf`` (never raises) when
    ``lam`` sits on {0, 1} and differs from ``mu``.
    """
    mu = family.check_mean(mu)
    lam = family.check_mean(lam, "lam")
    return float(kernels.kl(family.code, family.sigma2, mu, lam))


def kl_div_d2(family: Family, mu: float, lam: float) -> float:
    """Partial derivative of d(mu, lam) with respect to lam."""
    mu = family.check_mean(mu)
    lam = float(lam)
    lo, hi = family.mean_domain
    if not lo < lam < hi:
        raise ValueError(f"lam={lam!r} must lie strictly inside the mean domain")
    return float(kernels.dkl(family.code, family.sigma2, mu, lam))


def sample(family: Family, mu: float, rng: np.random.Generator) -> float:
    """One observation with mean ``mu``.

    Bernoulli: ``1.0 if rng.random() < mu else 0.0``.
    Gaussian: ``mu + sqrt(sigma2) * rng.standard_normal()`` (numpy's
    ziggurat transform of the generator's uniform stream).
    """
    mu = family.check_mean(mu)
    if family.kind == "bernoulli":
        return 1.0 if rng.random() < mu else 0.0
    return mu + math.sqrt(family.sigma2) * rng.standard_normal()


def sample_many(family: Family, mu: float, rng: np.random.Generator, size: int) -> np.ndarray:
    """``size`` observations; consumes the stream exactly like repeated :func:`sample`."""
    mu = family.check_mean(mu)
    if family.kind == "bernoulli":
        return (rng.random(size) < mu).astype(float)
    return mu + math.sqrt(family.sigma2) * rng.standard_normal(size)
