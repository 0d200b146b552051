"""The composed truthful mechanism: one-shot bid resampling, premium payments,
and the staged bandit run over a full horizon.

Protocol: bids are elicited once up front (truthful costs unless an override
is injected).  Each bid is passed through the one-shot resampler with its own
random stream: with probability ``1 - mu`` the bid stays put, otherwise it
jumps uniformly into ``(bid, cost_upper]``.  The modified bids fix each
provider's virtual cost for the whole horizon.  Every round the staged
selector picks a provider; a winner is paid its original bid, plus the
premium ``(cost_upper - bid) / mu`` on every win if its bid was resampled.

Randomness is split into documented streams derived from the run seed:
``[seed, 0]`` provider ground truth, ``[seed, 1]`` contexts and reward noise,
``[seed, 2, i]`` the resampler of provider i.  Reward noise is pre-drawn for
every (provider, round) pair, so realized rewards are a fixed table that does
not depend on who wins: paired runs that differ only in bids see identical
contexts, rewards and (on designated rounds) learning updates.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import _engine as engine
from .auction import bid_virtual_cost
from .bandit import Branch, SelectionDecision, SelectorState, record_reward, select_provider
from .environment import (
    ProviderSet,
    RewardModel,
    make_providers,
    make_reward_model,
    sample_contexts,
)

ENV_STREAM = 0
CONTEXT_STREAM = 1
RESAMPLE_STREAM = 2

NO_WINNER = -1  # winner sentinel for rounds where the query is not assigned


@dataclass(frozen=True)
class ResampleRecord:
    """One provider's pass through the resampler."""

    original_bid: float
    modified_bid: float
    resampled: bool
    gamma: float
    mu: float
    cost_upper: float


def resample_value(bid: float, cost_upper: float, gamma: float) -> float:
    """Deterministic resample-branch bid: bid + gamma * (cost_upper - bid).

    Algebraically equal to scaling the bid by ``1 + gamma * (upper/bid - 1)``
    but well defined at bid = 0.
    """
    return bid + gamma * (cost_upper - bid)


def resample_bid(
    bid: float, mu: float, cost_upper: float, rng: np.random.Generator
) -> ResampleRecord:
    """One-shot randomized bid adjustment.

    Draws gamma ~ U[0,1] first and the branch second, so a fixed generator
    state fixes (gamma, branch) regardless of the bid, making the modified
    bid non-decreasing in the original one.
    """
    if not (0.0 <= bid <= cost_upper):
        raise ValueError(f"bid {bid} outside [0, {cost_upper}]")
    if not (0.0 < mu < 1.0):
        raise ValueError(f"mu must be in (0, 1), got {mu}")
    gamma = float(rng.random())
    resampled = bool(rng.random() < mu)
    modified = resample_value(bid, cost_upper, gamma) if resampled else bid
    return ResampleRecord(
        original_bid=float(bid),
        modified_bid=float(modified),
        resampled=resampled,
        gamma=gamma,
        mu=float(mu),
        cost_upper=float(cost_upper),
    )


def resample_conditional_cdf(a: float, bid: float, cost_upper: float) -> float:
    """P(modified bid < a | resampled) = (a - bid) / (cost_upper - bid)."""
    if bid >= cost_upper:
        raise ValueError(f"bid {bid} must be below the cost bound {cost_upper}")
    if not (bid <= a <= cost_upper):
        raise ValueError(f"a={a} outside [{bid}, {cost_upper}]")
    return (a - bid) / (cost_upper - bid)


def round_payment(record: ResampleRecord, allocated: int) -> float:
    """Per-round payment: losers get zero; a winner gets its original bid,
    plus (cost_upper - bid)/mu if its bid was resampled."""
    if not allocated:
        return 0.0
    if record.resampled:
        return record.original_bid + (record.cost_upper - record.original_bid) / record.mu
    return record.original_bid


@dataclass
class RunConfig:
    """Configuration of one mechanism run."""

    rounds: int
    providers: int = 4
    dim: int = 5
    mu: float = 0.05
    alpha: float = 0.75
    reward: str = "gaussian"
    reward_sigma: float = 0.5
    cost_family: str = "uniform"
    diag_scale: float = 0.2
    offdiag_corr: float = 0.05
    seed: int = 0
    resampling: bool = True
    bids: np.ndarray | None = None  # override; default is truthful costs
    # Opt-in: gate forced exploration on the bid-dependent candidate sets
    # (reproduces steeper learning curves; breaks exact monotonicity).
    gated_exploration: bool = False

    def validate(self) -> None:
        if self.rounds < self.providers:
            raise ValueError(
                f"rounds ({self.rounds}) must be >= providers ({self.providers})"
            )
        if self.providers < 1 or self.dim < 1:
            raise ValueError("providers and dim must be >= 1")
        if not (0.0 < self.mu < 1.0):
            raise ValueError(f"mu must be in (0, 1), got {self.mu}")
        if self.alpha < 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if self.reward not in ("gaussian", "exponential"):
            raise ValueError(f"unknown reward regime {self.reward!r}")
        if self.cost_family not in ("uniform", "lognormal"):
            raise ValueError(f"unknown cost family {self.cost_family!r}")

    def reward_model(self) -> RewardModel:
        return make_reward_model(self.reward, self.reward_sigma)


@dataclass(frozen=True)
class MechanismOutcome:
    """One round's mechanism result."""

    round: int
    winner: int | None
    branch: Branch
    stage: int
    payment: float
    modified_bids: np.ndarray
    resampled: np.ndarray


@dataclass
class RunTrace:
    """Everything one run produced, as flat per-round arrays."""

    config: RunConfig
    providers: ProviderSet
    bids: np.ndarray
    records: list[ResampleRecord]
    modified_bids: np.ndarray
    virtual_costs: np.ndarray
    pay_if_win: np.ndarray
    winner: np.ndarray
    branch: np.ndarray
    stage: np.ndarray
    payment: np.ndarray
    regret: np.ndarray
    realized_regret: np.ndarray
    user_utility: np.ndarray
    clairvoyant_utility: np.ndarray
    expected_values: np.ndarray = field(repr=False)  # (providers, rounds)
    contexts: np.ndarray = field(repr=False)  # (rounds, dim)
    state: SelectorState = field(repr=False, default=None)
    stage_evals: list | None = field(repr=False, default=None)

    @property
    def resampled_flags(self) -> np.ndarray:
        return np.array([r.resampled for r in self.records])

    def outcome(self, t: int) -> MechanismOutcome:
        """The round-t result as a single record (t is 1-based)."""
        w = int(self.winner[t - 1])
        return MechanismOutcome(
            round=t,
            winner=None if w == NO_WINNER else w,
            branch=Branch(self.branch[t - 1]),
            stage=int(self.stage[t - 1]),
            payment=float(self.payment[t - 1]),
            modified_bids=self.modified_bids,
            resampled=self.resampled_flags,
        )

    def allocation_counts(self, provider: int) -> np.ndarray:
        """Cumulative number of wins of one provider after each round."""
        return np.cumsum(self.winner == provider)

    def provider_utility(self, provider: int) -> float:
        """Total realized utility of a provider over the run."""
        wins = int(np.sum(self.winner == provider))
        cost = self.providers.providers[provider].true_cost
        return wins * (self.pay_if_win[provider] - cost)


def elicit_and_resample(
    config: RunConfig, providers: ProviderSet
) -> tuple[np.ndarray, list[ResampleRecord]]:
    """Collect one bid per provider (truthful unless overridden) and run each
    through its own resampling stream."""
    uppers = providers.uppers
    if config.bids is not None:
        bids = np.asarray(config.bids, dtype=float)
        if bids.shape[0] != len(providers):
            raise ValueError(f"need {len(providers)} bids, got {bids.shape[0]}")
    else:
        bids = providers.costs
    if np.any(bids < 0) or np.any(bids > uppers):
        raise ValueError("bids must lie within [0, cost_upper] per provider")
    records = []
    for i, b in enumerate(bids):
        rng = np.random.default_rng([config.seed, RESAMPLE_STREAM, i])
        if config.resampling:
            records.append(resample_bid(float(b), config.mu, float(uppers[i]), rng))
        else:
            records.append(
                ResampleRecord(
                    original_bid=float(b),
                    modified_bid=float(b),
                    resampled=False,
                    gamma=float(rng.random()),
                    mu=config.mu,
                    cost_upper=float(uppers[i]),
                )
            )
    return bids, records


def run_mechanism(
    config: RunConfig,
    providers: ProviderSet | None = None,
    collect_stages: bool = False,
    resample_records: list[ResampleRecord] | None = None,
) -> RunTrace:
    """Run the composed mechanism for a full horizon and return its trace.

    ``providers`` may be supplied to share one market instance across runs
    (fresh contexts, rewards and resampling per seed); otherwise it is drawn
    from the run's own environment stream.  ``resample_records`` bypasses the
    elicitation step entirely (audit hook for conditioning on the resampler's
    randomness).
    """
    config.validate()
    if providers is None:
        providers = make_providers(
            np.random.default_rng([config.seed, ENV_STREAM]),
            config.providers,
            config.dim,
            config.cost_family,
        )
    if len(providers) != config.providers:
        raise ValueError(
            f"provider set has {len(providers)} providers, config says {config.providers}"
        )
    m, d, horizon = config.providers, config.dim, config.rounds
    model = config.reward_model()

    if resample_records is not None:
        if len(resample_records) != m:
            raise ValueError(f"need {m} resample records, got {len(resample_records)}")
        records = list(resample_records)
        bids = np.array([r.original_bid for r in records])
    else:
        bids, records = elicit_and_resample(config, providers)
    modified = np.array([r.modified_bid for r in records])
    dists = providers.dists
    psi = np.array([bid_virtual_cost(dists[i], modified[i]) for i in range(m)])
    pay_if_win = np.array([round_payment(records[i], 1) for i in range(m)])

    rng = np.random.default_rng([config.seed, CONTEXT_STREAM])
    contexts = sample_contexts(rng, horizon, d, config.diag_scale, config.offdiag_corr)
    noise = model.noise_table(rng, (m, horizon))
    scores = providers.thetas @ contexts.T  # (m, horizon)
    means = model.mean_from_scores(scores)
    rewards = model.realize_from_scores(scores, noise)

    state = SelectorState(m, d, horizon, config.alpha)
    selected = np.empty(horizon, dtype=np.int64)
    branch = np.empty(horizon, dtype=np.int8)
    stage = np.empty(horizon, dtype=np.int8)
    ovs_selected = np.empty(horizon, dtype=np.float64)
    stage_evals: list | None = [] if collect_stages else None

    if collect_stages or not engine.HAVE_NUMBA:
        for t in range(1, horizon + 1):
            x = contexts[t - 1]
            decision = select_provider(
                state, x, psi, t,
                collect_stages=collect_stages,
                gated=config.gated_exploration,
            )
            i = decision.winner
            record_reward(state, decision, t, x, rewards[i, t - 1])
            selected[t - 1] = i
            branch[t - 1] = decision.branch
            stage[t - 1] = decision.stage
            ovs_selected[t - 1] = decision.v_hat[i] + decision.width[i] - psi[i]
            if stage_evals is not None:
                stage_evals.append(decision.stage_trace)
    else:
        engine.run_rounds(
            state.gram_inv,
            state.weighted,
            state.theta,
            contexts,
            rewards,
            psi,
            float(config.alpha),
            state._inv_sqrt_horizon,
            state.max_stage,
            config.gated_exploration,
            selected,
            branch,
            stage,
            ovs_selected,
        )
        state.restore_bookkeeping(selected, branch, stage)

    # Participation floor on exploitation rounds: when even the optimistic
    # surplus of the best candidate is negative the query is not assigned.
    # Forced exploration allocates regardless (its schedule must stay
    # bid-independent).
    winner = np.where(
        (branch == int(Branch.FORCED_EXPLORATION)) | (ovs_selected >= 0.0),
        selected,
        NO_WINNER,
    )
    cols = np.arange(horizon)
    allocated = winner >= 0
    safe_winner = np.where(allocated, winner, 0)
    payment = np.where(allocated, pay_if_win[safe_winner], 0.0)
    surplus = means - psi[:, None]
    oracle_surplus = np.maximum(surplus.max(axis=0), 0.0)
    regret = oracle_surplus - np.where(allocated, surplus[safe_winner, cols], 0.0)
    realized_regret = oracle_surplus - np.where(
        allocated, rewards[safe_winner, cols] - psi[safe_winner], 0.0
    )
    user_utility = np.where(allocated, means[safe_winner, cols] - payment, 0.0)
    clairvoyant = np.maximum((means - pay_if_win[:, None]).max(axis=0), 0.0)

    if config.bids is None and resample_records is None:
        # Truthful bids: every allocated round must leave the winner whole.
        utility_per_win = pay_if_win - providers.costs
        if np.any(utility_per_win < -1e-12):
            bad = int(np.argmin(utility_per_win))
            raise AssertionError(
                f"provider {bad} would realize negative utility "
                f"{utility_per_win[bad]} under truthful bidding"
            )

    return RunTrace(
        config=config,
        providers=providers,
        bids=bids,
        records=records,
        modified_bids=modified,
        virtual_costs=psi,
        pay_if_win=pay_if_win,
        winner=winner,
        branch=branch,
        stage=stage,
        payment=payment,
        regret=regret,
        realized_regret=realized_regret,
        user_utility=user_utility,
        clairvoyant_utility=clairvoyant,
        expected_values=means,
        contexts=contexts,
        state=state,
        stage_evals=stage_evals,
    )


def paired_run(
    config: RunConfig, providers: ProviderSet, bids: np.ndarray
) -> RunTrace:
    """Run with the given bids on shared providers (same seed streams)."""
    return run_mechanism(replace(config, bids=np.asarray(bids, dtype=float)), providers)
