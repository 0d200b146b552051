"""Experiment harness: seed sweeps, regret/revenue metrics, CSV and SVG output.

Regret is measured in expected terms against a clairvoyant oracle that knows
every provider's true mean value and faces the same per-provider virtual
costs; it is therefore non-negative round by round.  "Revenue" curves chart
the user's cumulative expected utility (expected value of the winner minus
the actual payment) against the clairvoyant's, where the clairvoyant picks
the provider maximizing expected value minus that provider's committed
per-win payment (abstaining at 0), which makes the dominance exact under
expected-value accounting.  Realized regret (closen arm's realized reward) is
tracked in a separate optional file.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .environment import ProviderSet, RewardModel, make_providers
from .mechanism import ENV_STREAM, RunConfig, RunTrace, run_mechanism
from .svg import Series, write_line_chart

METRICS_HEADER = "round,mean_cum_regret,mean_round_regret,mean_user_utility,mean_clairvoyant_utility"
RUNS_HEADER = "seed,total_regret,total_utility,total_payments,resample_count"
REALIZED_HEADER = "round,mean_cum_realized_regret,mean_round_realized_regret"

OUTPUT_FILES = (
    "metrics_by_round.csv",
    "runs_summary.csv",
    "cum_regret.svg",
    "round_regret.svg",
    "revenue.svg",
)


@dataclass
class ExperimentConfig:
    """A seed sweep of mechanism runs plus its output location."""

    rounds: int = 10_000
    seeds: int = 40
    providers: int = 4
    dim: int = 5
    mu: float = 0.05
    alpha: float = 0.75
    reward: str = "gaussian"
    reward_sigma: float = 0.5
    cost_family: str = "uniform"
    diag_scale: float = 0.2
    offdiag_corr: float = 0.05
    base_seed: int = 0
    out_dir: str = "out"
    realized: bool = True
    gated_exploration: bool = False

    def validate(self) -> None:
        if self.seeds < 1:
            raise ValueError(f"need at least one seed, got {self.seeds}")
        self.run_config(self.base_seed).validate()

    def run_config(self, seed: int) -> RunConfig:
        return RunConfig(
            rounds=self.rounds,
            providers=self.providers,
            dim=self.dim,
            mu=self.mu,
            alpha=self.alpha,
            reward=self.reward,
            reward_sigma=self.reward_sigma,
            cost_family=self.cost_family,
            diag_scale=self.diag_scale,
            offdiag_corr=self.offdiag_corr,
            seed=seed,
            gated_exploration=self.gated_exploration,
        )


@dataclass
class RunSummary:
    seed: int
    total_regret: float
    total_utility: float
    total_payments: float
    resample_count: int


@dataclass
class ExperimentResult:
    """Seed-averaged per-round curves plus one summary row per run."""

    config: ExperimentConfig
    mean_cum_regret: np.ndarray
    mean_round_regret: np.ndarray
    mean_cum_utility: np.ndarray
    mean_cum_clairvoyant: np.ndarray
    mean_cum_realized_regret: np.ndarray
    mean_round_realized_regret: np.ndarray
    summaries: list[RunSummary] = field(default_factory=list)

    @property
    def rounds(self) -> np.ndarray:
        return np.arange(1, self.config.rounds + 1)


def oracle_choice(
    theta_all: np.ndarray,
    x: np.ndarray,
    virtual_costs: np.ndarray,
    reward_model: RewardModel | None = None,
) -> int | None:
    """Clairvoyant pick: lowest-index maximizer of true expected value minus
    virtual cost, or None when every such surplus is negative.

    With no reward model the expected value is the linear score; passing the
    exponential model uses its true mean instead.
    """
    theta_all = np.asarray(theta_all, dtype=float)
    scores = theta_all @ np.asarray(x, dtype=float)
    values = scores if reward_model is None else reward_model.mean_from_scores(scores)
    surplus = values - np.asarray(virtual_costs, dtype=float)
    best = int(np.argmax(surplus))
    return best if surplus[best] >= 0 else None


def instantaneous_regret(
    theta_all: np.ndarray,
    x: np.ndarray,
    virtual_costs: np.ndarray,
    chosen: int | None,
    reward_model: RewardModel | None = None,
) -> float:
    """Oracle expected surplus minus the chosen provider's expected surplus
    (either side contributing 0 on abstention); never negative."""
    theta_all = np.asarray(theta_all, dtype=float)
    scores = theta_all @ np.asarray(x, dtype=float)
    values = scores if reward_model is None else reward_model.mean_from_scores(scores)
    surplus = values - np.asarray(virtual_costs, dtype=float)
    oracle = max(0.0, float(surplus.max()))
    chosen_surplus = 0.0 if chosen is None else float(surplus[chosen])
    return oracle - chosen_surplus


def shared_providers(config: ExperimentConfig) -> ProviderSet:
    """The market instance shared by every run of a sweep (structural
    parameters fixed; contexts/rewards/resampling redrawn per seed)."""
    rng = np.random.default_rng([config.base_seed, ENV_STREAM])
    return make_providers(rng, config.providers, config.dim, config.cost_family)


def run_experiment(config: ExperimentConfig, write_outputs: bool = True) -> ExperimentResult:
    """Run the sweep, aggregate over seeds in seed order, and emit outputs."""
    config.validate()
    providers = shared_providers(config)
    t_axis = None
    sums = {}
    summaries = []
    for k in range(config.seeds):
        seed = config.base_seed + k
        trace = run_mechanism(config.run_config(seed), providers)
        cum_regret = np.cumsum(trace.regret)
        cum_realized = np.cumsum(trace.realized_regret)
        cum_utility = np.cumsum(trace.user_utility)
        cum_clair = np.cumsum(trace.clairvoyant_utility)
        if t_axis is None:
            t_axis = np.arange(1, config.rounds + 1)
            for key in ("cumr", "roundr", "cumu", "cumc", "cumrr", "roundrr"):
                sums[key] = np.zeros(config.rounds)
        sums["cumr"] += cum_regret
        sums["roundr"] += trace.regret
        sums["cumu"] += cum_utility
        sums["cumc"] += cum_clair
        sums["cumrr"] += cum_realized
        sums["roundrr"] += trace.realized_regret
        summaries.append(
            RunSummary(
                seed=seed,
                total_regret=float(cum_regret[-1]),
                total_utility=float(cum_utility[-1]),
                total_payments=float(np.sum(trace.payment)),
                resample_count=int(np.sum(trace.resampled_flags)),
            )
        )
    n = float(config.seeds)
    result = ExperimentResult(
        config=config,
        mean_cum_regret=sums["cumr"] / n,
        mean_round_regret=sums["roundr"] / n,
        mean_cum_utility=sums["cumu"] / n,
        mean_cum_clairvoyant=sums["cumc"] / n,
        mean_cum_realized_regret=sums["cumrr"] / n,
        mean_round_realized_regret=sums["roundrr"] / n,
        summaries=summaries,
    )
    if write_outputs:
        write_experiment_outputs(result)
    return result


def _write_lines(path: str, header: str, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(header)
        fh.write("\n")
        for row in rows:
            fh.write(",".join(row))
            fh.write("\n")


def emit_metrics_csv(result: ExperimentResult, path: str) -> None:
    """Per-round seed means; utilities are cumulative (they feed the revenue
    chart).  Floats use their shortest round-trip representation."""
    rows = (
        (
            str(t),
            repr(float(result.mean_cum_regret[t - 1])),
            repr(float(result.mean_round_regret[t - 1])),
            repr(float(result.mean_cum_utility[t - 1])),
            repr(float(result.mean_cum_clairvoyant[t - 1])),
        )
        for t in range(1, result.config.rounds + 1)
    )
    _write_lines(path, METRICS_HEADER, rows)


def emit_runs_csv(result: ExperimentResult, path: str) -> None:
    rows = (
        (
            str(s.seed),
            repr(s.total_regret),
            repr(s.total_utility),
            repr(s.total_payments),
            str(s.resample_count),
        )
        for s in result.summaries
    )
    _write_lines(path, RUNS_HEADER, rows)


def emit_realized_csv(result: ExperimentResult, path: str) -> None:
    rows = (
        (
            str(t),
            repr(float(result.mean_cum_realized_regret[t - 1])),
            repr(float(result.mean_round_realized_regret[t - 1])),
        )
        for t in range(1, result.config.rounds + 1)
    )
    _write_lines(path, REALIZED_HEADER, rows)


def emit_plot(result: ExperimentResult, kind: str, path: str) -> None:
    """Write one chart: 'cum_regret' (curve + sqrt-t guide matched at T/2),
    'round_regret' (single curve) or 'revenue' (actual vs clairvoyant)."""
    t = result.rounds.astype(float)
    if kind == "cum_regret":
        half = max(len(t) // 2, 1)
        scale = result.mean_cum_regret[half - 1] / np.sqrt(t[half - 1])
        series = [
            Series("mean cumulative regret", t, result.mean_cum_regret),
            Series("sqrt(t) guide", t, scale * np.sqrt(t)),
        ]
        write_line_chart(path, series, "Cumulative regret", "round", "regret")
    elif kind == "round_regret":
        series = [Series("mean per-round regret", t, result.mean_round_regret)]
        write_line_chart(path, series, "Per-round regret", "round", "regret")
    elif kind == "revenue":
        series = [
            Series("cumulative user utility", t, result.mean_cum_utility),
            Series("clairvoyant benchmark", t, result.mean_cum_clairvoyant),
        ]
        write_line_chart(path, series, "Cumulative user utility", "round", "utility")
    else:
        raise ValueError(f"unknown plot kind {kind!r}")


def write_experiment_outputs(result: ExperimentResult) -> None:
    out = result.config.out_dir
    os.makedirs(out, exist_ok=True)
    emit_metrics_csv(result, os.path.join(out, "metrics_by_round.csv"))
    emit_runs_csv(result, os.path.join(out, "runs_summary.csv"))
    if result.config.realized:
        emit_realized_csv(result, os.path.join(out, "realized_regret_by_round.csv"))
    emit_plot(result, "cum_regret", os.path.join(out, "cum_regret.svg"))
    emit_plot(result, "round_regret", os.path.join(out, "round_regret.svg"))
    emit_plot(result, "revenue", os.path.join(out, "revenue.svg"))
