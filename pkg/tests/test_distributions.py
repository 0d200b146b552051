import math

import numpy as np
import pytest

from trcm.distributions import (
    CostDistribution,
    IrregularCostLawError,
    TruncatedLogNormalCost,
    UniformCost,
)


def finite_difference_virtual_cost(dist, c, h=1e-6):
    """Independent oracle: c + F(c)/f(c) with the density from a centered
    difference of the CDF."""
    f = (dist.cdf(c + h) - dist.cdf(c - h)) / (2 * h)
    return c + dist.cdf(c) / f


class TestUniformCost:
    def test_virtual_cost_at_lower_bound_is_identity(self):
        assert UniformCost(0, 1).virtual_cost(0.0) == 0.0

    def test_virtual_cost_midpoint_matches_finite_difference_oracle(self):
        dist = UniformCost(0, 1)
        assert dist.virtual_cost(0.5) == pytest.approx(1.0, abs=1e-12)
        assert finite_difference_virtual_cost(dist, 0.5) == pytest.approx(1.0, rel=1e-6)

    def test_virtual_cost_closed_form_shifted_support(self):
        dist = UniformCost(2, 6)
        # closed form 2c - lo
        assert dist.virtual_cost(3.0) == pytest.approx(4.0, abs=1e-12)
        assert finite_difference_virtual_cost(dist, 3.0) == pytest.approx(4.0, rel=1e-6)

    def test_virtual_cost_upper_end_is_two_sided_limit(self):
        dist = UniformCost(1, 3)
        assert dist.virtual_cost(3.0) == pytest.approx(2 * 3 - 1, abs=1e-12)

    def test_rejects_bad_support(self):
        with pytest.raises(ValueError):
            UniformCost(1.0, 1.0)
        with pytest.raises(ValueError):
            UniformCost(-0.5, 1.0)

    def test_sampling_stays_in_support(self):
        dist = UniformCost(0.2, 0.9)
        rng = np.random.default_rng(0)
        draws = np.array([dist.sample(rng) for _ in range(500)])
        assert np.all((draws >= 0.2) & (draws <= 0.9))


class TestTruncatedLogNormal:
    def test_cdf_endpoints(self):
        dist = TruncatedLogNormalCost(mu=-1.0, sigma=0.4, lo=0.1, hi=0.8)
        assert dist.cdf(0.1) == 0.0
        assert dist.cdf(0.8) == 1.0

    def test_density_integrates_to_one(self):
        dist = TruncatedLogNormalCost(mu=-1.0, sigma=0.4, lo=0.1, hi=0.8)
        grid = np.linspace(0.1, 0.8, 20001)
        mass = np.trapezoid([dist.pdf(c) for c in grid], grid)
        assert mass == pytest.approx(1.0, abs=1e-5)

    def test_icdf_inverts_cdf(self):
        dist = TruncatedLogNormalCost(mu=-1.2, sigma=0.5, lo=0.05, hi=0.6)
        for u in (0.01, 0.3, 0.5, 0.9, 0.999):
            assert dist.cdf(dist.icdf(u)) == pytest.approx(u, abs=1e-9)

    def test_virtual_cost_matches_finite_difference_oracle(self):
        dist = TruncatedLogNormalCost(mu=-1.0, sigma=0.35, lo=0.1, hi=0.5)
        for c in (0.15, 0.25, 0.4):
            assert dist.virtual_cost(c) == pytest.approx(
                finite_difference_virtual_cost(dist, c), rel=1e-5
            )

    def test_rejects_empty_truncation_window(self):
        with pytest.raises(ValueError):
            TruncatedLogNormalCost(mu=0.0, sigma=0.1, lo=50.0, hi=60.0)

    def test_rejects_invalid_parameters(self):
        with pytest.raises(ValueError):
            TruncatedLogNormalCost(mu=0.0, sigma=-1.0, lo=0.1, hi=1.0)
        with pytest.raises(ValueError):
            TruncatedLogNormalCost(mu=0.0, sigma=0.5, lo=0.0, hi=1.0)


class SpikyDensityCost(CostDistribution):
    """Density jumps upward mid-support: F/f drops there, so the virtual
    cost dips and regularity must be rejected."""

    def __init__(self):
        self.lo, self.hi = 0.0, 2.0
        self._check_regular()

    def cdf(self, c):
        if c <= 1.0:
            return 0.25 * max(c, 0.0)
        return 0.25 + 0.75 * (min(c, 2.0) - 1.0)

    def pdf(self, c):
        return 0.25 if c <= 1.0 else 0.75


def test_regularity_grid_check_rejects_non_monotone_virtual_cost():
    with pytest.raises(IrregularCostLawError):
        SpikyDensityCost()


def test_regularity_check_runs_on_thousand_point_interior_grid():
    # A regular law constructs fine and its virtual cost is strictly
    # increasing on a fresh interior grid.
    dist = UniformCost(0.3, 1.7)
    grid = np.linspace(dist.lo, dist.hi, 1002)[1:-1]
    values = [dist.virtual_cost(c) for c in grid]
    assert np.all(np.diff(values) > 0)
    assert math.isfinite(values[-1])
