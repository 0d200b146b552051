"""Simulation environment: query contexts, provider ground truth and rewards.

Contexts are plain numpy vectors drawn from a centered Gaussian whose
covariance blends a diagonal scale with a uniform off-diagonal correlation.
Each provider carries a weight vector (driving the user's expected value of
its answers), a cost law and a realized true cost.  Two reward regimes are
supported: Gaussian noise around the linear score, and exponential rewards
whose rate is the softplus of the linear score.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .distributions import CostDistribution, TruncatedLogNormalCost, UniformCost


def softplus(z: float | np.ndarray) -> float | np.ndarray:
    """ln(1 + exp(z)) computed as max(z, 0) + log1p(exp(-|z|)) to avoid overflow."""
    z = np.asarray(z, dtype=float)
    out = np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))
    return float(out) if out.ndim == 0 else out


def context_covariance(d: int, diag_scale: float, offdiag_corr: float) -> np.ndarray:
    """Covariance diag_scale * I + offdiag_corr * (J - I) for d features."""
    if d < 1:
        raise ValueError(f"context dimension must be >= 1, got {d}")
    cov = np.full((d, d), offdiag_corr)
    np.fill_diagonal(cov, diag_scale)
    return cov


def context_cholesky(d: int, diag_scale: float, offdiag_corr: float) -> np.ndarray:
    cov = context_covariance(d, diag_scale, offdiag_corr)
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        raise ValueError(
            "context covariance is not positive definite for "
            f"d={d}, diag_scale={diag_scale}, offdiag_corr={offdiag_corr}"
        ) from None


def sample_context(
    rng: np.random.Generator, d: int, diag_scale: float, offdiag_corr: float
) -> np.ndarray:
    """Draw one context vector x ~ N(0, Sigma)."""
    chol = context_cholesky(d, diag_scale, offdiag_corr)
    return chol @ rng.standard_normal(d)


def sample_contexts(
    rng: np.random.Generator, n: int, d: int, diag_scale: float, offdiag_corr: float
) -> np.ndarray:
    """Draw n context vectors as an (n, d) matrix.

    Consumes the generator in the same order as n calls to
    :func:`sample_context`, so batched and per-round sampling agree.
    """
    chol = context_cholesky(d, diag_scale, offdiag_corr)
    return rng.standard_normal((n, d)) @ chol.T


def expected_value(theta: np.ndarray, x: np.ndarray) -> float:
    """Inner product theta . x: the user's expected value from this provider."""
    theta = np.asarray(theta, dtype=float)
    x = np.asarray(x, dtype=float)
    if theta.shape != x.shape:
        raise ValueError(f"length mismatch: theta {theta.shape} vs x {x.shape}")
    return float(theta @ x)


class GaussianReward:
    """Reward = theta.x + N(0, sigma^2); the linear score is the mean."""

    kind = "gaussian"

    def __init__(self, sigma: float = 0.5):
        if sigma < 0:
            raise ValueError(f"sigma must be >= 0, got {sigma}")
        self.sigma = float(sigma)

    def mean_from_scores(self, scores: np.ndarray) -> np.ndarray:
        return np.asarray(scores, dtype=float)

    def noise_table(self, rng: np.random.Generator, shape: tuple) -> np.ndarray:
        return rng.standard_normal(shape)

    def realize_from_scores(self, scores: np.ndarray, noise: np.ndarray) -> np.ndarray:
        return scores + self.sigma * noise

    def mean(self, theta: np.ndarray, x: np.ndarray) -> float:
        return expected_value(theta, x)

    def sample(self, theta: np.ndarray, x: np.ndarray, rng: np.random.Generator) -> float:
        return float(expected_value(theta, x) + self.sigma * rng.standard_normal())


class ExponentialReward:
    """Reward ~ Exp(rate) with rate = softplus(theta.x); mean is 1/rate."""

    kind = "exponential"

    def mean_from_scores(self, scores: np.ndarray) -> np.ndarray:
        return 1.0 / softplus(np.asarray(scores, dtype=float))

    def noise_table(self, rng: np.random.Generator, shape: tuple) -> np.ndarray:
        return rng.random(shape)

    def realize_from_scores(self, scores: np.ndarray, noise: np.ndarray) -> np.ndarray:
        # Inverse-CDF transform of the pre-drawn uniforms.
        return -np.log1p(-noise) / softplus(np.asarray(scores, dtype=float))

    def mean(self, theta: np.ndarray, x: np.ndarray) -> float:
        return float(1.0 / softplus(expected_value(theta, x)))

    def sample(self, theta: np.ndarray, x: np.ndarray, rng: np.random.Generator) -> float:
        rate = softplus(expected_value(theta, x))
        return float(rng.exponential(1.0 / rate))


RewardModel = GaussianReward | ExponentialReward


def make_reward_model(kind: str, sigma: float = 0.5) -> RewardModel:
    if kind == "gaussian":
        return GaussianReward(sigma)
    if kind == "exponential":
        return ExponentialReward()
    raise ValueError(f"unknown reward model {kind!r}; use 'gaussian' or 'exponential'")


def sample_reward(
    model: RewardModel, theta: np.ndarray, x: np.ndarray, rng: np.random.Generator
) -> float:
    """Draw one stochastic reward for a provider with weights theta at context x."""
    return model.sample(theta, x, rng)


@dataclass(frozen=True)
class ProviderTruth:
    """Ground truth for one provider: value weights, cost law, realized cost."""

    theta: np.ndarray
    cost_dist: CostDistribution
    true_cost: float

    def __post_init__(self):
        if not np.all(np.isfinite(self.theta)):
            raise ValueError("theta must be finite")
        lo, hi = self.cost_dist.lo, self.cost_dist.hi
        if not (lo <= self.true_cost <= hi):
            raise ValueError(
                f"true cost {self.true_cost} outside support [{lo}, {hi}]"
            )

    @property
    def cost_lower(self) -> float:
        return self.cost_dist.lo

    @property
    def cost_upper(self) -> float:
        return self.cost_dist.hi


@dataclass(frozen=True)
class ProviderSet:
    """The provider population of one market instance."""

    providers: tuple[ProviderTruth, ...]

    def __len__(self) -> int:
        return len(self.providers)

    @property
    def thetas(self) -> np.ndarray:
        return np.array([p.theta for p in self.providers])

    @property
    def costs(self) -> np.ndarray:
        return np.array([p.true_cost for p in self.providers])

    @property
    def uppers(self) -> np.ndarray:
        return np.array([p.cost_upper for p in self.providers])

    @property
    def dists(self) -> list[CostDistribution]:
        return [p.cost_dist for p in self.providers]

    def with_cost(self, provider: int, cost: float) -> "ProviderSet":
        """Copy with one provider's true cost replaced (stays in support)."""
        items = list(self.providers)
        p = items[provider]
        items[provider] = ProviderTruth(p.theta, p.cost_dist, float(cost))
        return ProviderSet(tuple(items))


# Default ranges for randomly generated market instances.  Weight norms are
# tight so providers differ mainly in direction (keeps cross-provider value
# gaps large relative to the stage-elimination thresholds without inflating
# any single provider's level); cost supports sit low enough that most
# queries admit a provider with positive surplus.
THETA_NORM_RANGE = (1.3, 1.5)
COST_LO_RANGE = (0.02, 0.1)
COST_WIDTH_RANGE = (0.12, 0.25)
LOGNORMAL_SIGMA = 0.35


def make_providers(
    rng: np.random.Generator,
    n_providers: int,
    d: int,
    cost_family: str = "uniform",
) -> ProviderSet:
    """Generate a random market instance of n_providers providers."""
    if n_providers < 1:
        raise ValueError(f"need at least one provider, got {n_providers}")
    providers = []
    for _ in range(n_providers):
        direction = rng.standard_normal(d)
        direction /= np.linalg.norm(direction)
        theta = direction * rng.uniform(*THETA_NORM_RANGE)
        lo = rng.uniform(*COST_LO_RANGE)
        hi = lo + rng.uniform(*COST_WIDTH_RANGE)
        if cost_family == "uniform":
            dist: CostDistribution = UniformCost(lo, hi)
        elif cost_family == "lognormal":
            dist = TruncatedLogNormalCost(
                mu=float(np.log(0.5 * (lo + hi))), sigma=LOGNORMAL_SIGMA, lo=lo, hi=hi
            )
        else:
            raise ValueError(
                f"unknown cost family {cost_family!r}; use 'uniform' or 'lognormal'"
            )
        providers.append(ProviderTruth(theta, dist, dist.sample(rng)))
    return ProviderSet(tuple(providers))


def make_symmetric_providers(
    rng: np.random.Generator,
    n_providers: int,
    d: int,
    theta_norm: float = 1.4,
    cost_lo: float = 0.05,
    cost_hi: float = 0.25,
) -> ProviderSet:
    """Near-symmetric market: equal weight norms (random directions) and a
    common cost support, so no provider is structurally dominated.  Useful
    for audits that need every provider's bid to be allocation-relevant."""
    providers = []
    for _ in range(n_providers):
        direction = rng.standard_normal(d)
        direction /= np.linalg.norm(direction)
        dist = UniformCost(cost_lo, cost_hi)
        providers.append(ProviderTruth(direction * theta_norm, dist, dist.sample(rng)))
    return ProviderSet(tuple(providers))


def sample_bid_params(
    provider_index: int,
    x: np.ndarray,
    context_matrices: np.ndarray,
    scale: float,
    base_mu: float = -1.2,
    base_sigma: float = 0.25,
) -> tuple[float, float]:
    """Latent (mu, sigma) of a provider's log-normal bid model at context x.

    ``context_matrices`` holds one (2, d) matrix per provider; the first row
    shifts mu and the second shifts sigma, both scaled by ``scale``.  sigma is
    clamped to 1e-6 from below.
    """
    if scale < 0:
        raise ValueError(f"scale must be >= 0, got {scale}")
    mats = np.asarray(context_matrices, dtype=float)
    if mats.ndim == 2:
        mat = mats
    else:
        mat = mats[provider_index]
    x = np.asarray(x, dtype=float)
    if mat.shape != (2, x.shape[0]):
        raise ValueError(f"context matrix shape {mat.shape} != (2, {x.shape[0]})")
    mu = base_mu + scale * float(mat[0] @ x)
    sigma = max(base_sigma + scale * float(mat[1] @ x), 1e-6)
    return mu, sigma


def draw_lognormal_bid(
    rng: np.random.Generator, mu: float, sigma: float, cost_upper: float
) -> float:
    """One bid from the affine log-normal model, capped at the cost bound."""
    return min(float(rng.lognormal(mu, sigma)), cost_upper)
