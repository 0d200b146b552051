"""Provider cost laws on a bounded support, with their virtual (information-rent
adjusted) costs.

Every distribution here exposes ``cdf``, ``pdf`` and ``virtual_cost`` on a
support ``[lo, hi]``.  The virtual cost ``c + F(c) / f(c)`` must be strictly
increasing on the support for threshold allocations and bisection payments to
be well defined; constructors check this numerically on a 1,000-point interior
grid and refuse irregular parameterizations.
"""
from __future__ import annotations

import math
from statistics import NormalDist

import numpy as np

_GRID_POINTS = 1000
_STD_NORMAL = NormalDist()


class IrregularCostLawError(ValueError):
    """A cost law whose virtual cost is not strictly increasing."""


class CostDistribution:
    """Base cost law on ``[lo, hi]`` with positive density on the interior."""

    lo: float
    hi: float

    def cdf(self, c: float) -> float:
        raise NotImplementedError

    def pdf(self, c: float) -> float:
        raise NotImplementedError

    def sample(self, rng: np.random.Generator) -> float:
        """Draw one cost by inverse-CDF transform."""
        return self.icdf(rng.random())

    def icdf(self, u: float) -> float:
        raise NotImplementedError

    def virtual_cost(self, c: float) -> float:
        """c + F(c)/f(c), taken as the interior limit at the endpoints."""
        if c <= self.lo:
            return float(c)  # F(lo) = 0
        return float(c + self.cdf(c) / self.pdf(c))

    def _check_regular(self) -> None:
        grid = np.linspace(self.lo, self.hi, _GRID_POINTS + 2)[1:-1]
        values = np.array([self.virtual_cost(c) for c in grid])
        if not np.all(np.diff(values) > 0):
            raise IrregularCostLawError(
                f"virtual cost of {self!r} is not strictly increasing on "
                f"({self.lo}, {self.hi})"
            )


class UniformCost(CostDistribution):
    """Uniform cost law on [lo, hi]; virtual cost is 2c - lo in closed form."""

    def __init__(self, lo: float, hi: float):
        if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
            raise ValueError(f"need finite lo < hi, got lo={lo}, hi={hi}")
        if lo < 0:
            raise ValueError(f"cost support must be non-negative, got lo={lo}")
        self.lo = float(lo)
        self.hi = float(hi)
        self._check_regular()

    def __repr__(self) -> str:
        return f"UniformCost(lo={self.lo}, hi={self.hi})"

    def cdf(self, c: float) -> float:
        if c <= self.lo:
            return 0.0
        if c >= self.hi:
            return 1.0
        return (c - self.lo) / (self.hi - self.lo)

    def pdf(self, c: float) -> float:
        if c < self.lo or c > self.hi:
            return 0.0
        return 1.0 / (self.hi - self.lo)

    def icdf(self, u: float) -> float:
        return self.lo + u * (self.hi - self.lo)


class TruncatedLogNormalCost(CostDistribution):
    """Log-normal cost law truncated to [lo, hi] so an upper cost bound exists.

    ``mu`` and ``sigma`` parameterize the underlying normal of log-cost.
    Truncation renormalizes the density to the retained mass; construction
    fails if the retained mass is negligible or the virtual cost turns
    non-monotone (large ``sigma`` can do that).
    """

    def __init__(self, mu: float, sigma: float, lo: float, hi: float):
        if sigma <= 0:
            raise ValueError(f"sigma must be positive, got {sigma}")
        if not (0 < lo < hi):
            raise ValueError(f"need 0 < lo < hi, got lo={lo}, hi={hi}")
        self.mu = float(mu)
        self.sigma = float(sigma)
        self.lo = float(lo)
        self.hi = float(hi)
        self._phi_lo = _STD_NORMAL.cdf((math.log(lo) - mu) / sigma)
        self._phi_hi = _STD_NORMAL.cdf((math.log(hi) - mu) / sigma)
        self._mass = self._phi_hi - self._phi_lo
        if self._mass < 1e-12:
            raise ValueError(
                f"truncation window [{lo}, {hi}] retains no mass for "
                f"mu={mu}, sigma={sigma}"
            )
        self._check_regular()

    def __repr__(self) -> str:
        return (
            f"TruncatedLogNormalCost(mu={self.mu}, sigma={self.sigma}, "
            f"lo={self.lo}, hi={self.hi})"
        )

    def cdf(self, c: float) -> float:
        if c <= self.lo:
            return 0.0
        if c >= self.hi:
            return 1.0
        z = (math.log(c) - self.mu) / self.sigma
        return (_STD_NORMAL.cdf(z) - self._phi_lo) / self._mass

    def pdf(self, c: float) -> float:
        if c < self.lo or c > self.hi:
            return 0.0
        z = (math.log(c) - self.mu) / self.sigma
        return math.exp(-0.5 * z * z) / (
            c * self.sigma * math.sqrt(2.0 * math.pi) * self._mass
        )

    def icdf(self, u: float) -> float:
        p = self._phi_lo + u * self._mass
        # Clamp away from 0/1 so inv_cdf stays finite at the endpoints.
        p = min(max(p, 1e-15), 1.0 - 1e-15)
        return min(max(math.exp(self.mu + self.sigma * _STD_NORMAL.inv_cdf(p)), self.lo), self.hi)
