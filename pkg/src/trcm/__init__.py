"""Truthful reverse-auction provider selection with contextual bandit learning.

A buyer repeatedly procures answers from competing providers whose expected
quality is a learned linear function of the query context.  Providers bid
costs once; bids pass through a one-shot randomized adjustment, the staged
bandit allocates each round by optimistic virtual surplus, and winners are
paid their bid plus a premium when their bid was resampled.  The audit
subpackage verifies monotonicity, truthfulness, individual rationality, the
premium payment identity and the learner's confidence bounds empirically.
"""

from .auction import (
    AuctionOutcome,
    allocate_optimal,
    bid_virtual_cost,
    critical_payment,
    run_optimal_auction,
    virtual_cost,
)
from .bandit import (
    Branch,
    SelectionDecision,
    SelectorState,
    StageModel,
    base_linucb,
    record_reward,
    select_provider,
    sherman_morrison_update,
)
from .distributions import (
    CostDistribution,
    IrregularCostLawError,
    TruncatedLogNormalCost,
    UniformCost,
)
from .environment import (
    ExponentialReward,
    GaussianReward,
    ProviderSet,
    ProviderTruth,
    expected_value,
    make_providers,
    make_reward_model,
    sample_bid_params,
    sample_context,
    sample_contexts,
    sample_reward,
    softplus,
)
from .harness import (
    ExperimentConfig,
    ExperimentResult,
    instantaneous_regret,
    oracle_choice,
    run_experiment,
)
from .mechanism import (
    MechanismOutcome,
    ResampleRecord,
    RunConfig,
    RunTrace,
    resample_bid,
    resample_conditional_cdf,
    resample_value,
    round_payment,
    run_mechanism,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
