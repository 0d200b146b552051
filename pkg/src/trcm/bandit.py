"""Staged contextual bandit selector with bid-independent forced exploration.

Each provider keeps one ridge-regression model per stage (Gram matrix
``I + sum x x^T`` over that stage's recorded rounds, plus the reward-weighted
context sum).  A round walks the stages: starting at stage 1 it either

  (a) force-explores the round-robin designated provider when that provider's
      confidence width at the current stage is still above the stage
      threshold ``2^-s`` (the only branch that learns),
  (b) pure-exploits once every width is below ``1/sqrt(T)``,
  (c) advances the stage after shrinking the candidate set to providers whose
      optimistic virtual surplus trails the overall best by at most
      ``2 * 2^(1-s)``, when every width is below the stage threshold, or
  (d) exploits within the current stage otherwise.

The optimistic virtual surplus of a provider is ``v_hat + width - psi`` where
``psi`` is the virtual cost of its (resampled) bid; the bandit never sees raw
bids.  Monotonicity of the induced allocation in each provider's own bid
rests on two structural facts, both enforced here:

  * the walk's branch conditions (a)-(c) use only widths and the round-robin
    index, quantified over ALL providers, so which rounds learn (and into
    which stage) is completely independent of the submitted bids;
  * candidate elimination compares against the maximum surplus over ALL
    providers, so a provider keeps its candidacy whenever it would have kept
    it under any higher own-bid, and rivals' candidacies only shrink when a
    provider lowers its bid.

Exploit branches then take the surplus argmax over the surviving candidates
(falling back to all providers if the intersection ever empties).  At the
stage cap (``ceil(ln T)`` stages) branch (d) fires unconditionally so the
walk always terminates.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum

import numpy as np


class Branch(IntEnum):
    FORCED_EXPLORATION = 0
    PURE_EXPLOIT = 1
    WITHIN_STAGE_EXPLOIT = 2


@dataclass
class StageModel:
    """Per-(provider, stage) ridge model; arrays are views into the selector state."""

    gram_inverse: np.ndarray
    weighted_sum: np.ndarray
    rounds: list[int]

    @property
    def theta_hat(self) -> np.ndarray:
        return self.gram_inverse @ self.weighted_sum


@dataclass
class SelectionDecision:
    """Outcome of one selection walk.

    ``v_hat`` and ``width`` hold the estimates of the deciding stage for the
    providers still active there (NaN elsewhere).  ``learn`` is true exactly
    on forced-exploration rounds.  ``stage_trace`` (only when requested)
    lists ``(stage, active_indices, v_hat, width)`` for every stage visited.
    """

    winner: int
    branch: Branch
    stage: int
    learn: bool
    v_hat: np.ndarray
    width: np.ndarray
    stage_trace: list | None = None


def sherman_morrison_update(gram_inverse: np.ndarray, x: np.ndarray) -> np.ndarray:
    """(A + x x^T)^-1 from A^-1 by the rank-one identity, re-symmetrized."""
    u = gram_inverse @ x
    denom = 1.0 + float(x @ u)
    out = gram_inverse - np.outer(u, u) / denom
    return 0.5 * (out + out.T)


def base_linucb(model: StageModel, x: np.ndarray, alpha: float) -> tuple[float, float]:
    """Value estimate and confidence width of one stage model at context x.

    Returns ``(theta_hat . x, alpha * sqrt(x^T A^-1 x))``; the width is
    non-negative because the Gram matrix is positive definite.
    """
    x = np.asarray(x, dtype=float)
    if x.shape[0] != model.gram_inverse.shape[0]:
        raise ValueError(
            f"context dim {x.shape[0]} != model dim {model.gram_inverse.shape[0]}"
        )
    if alpha < 0:
        raise ValueError(f"alpha must be >= 0, got {alpha}")
    v_hat = float(model.theta_hat @ x)
    width = alpha * math.sqrt(max(float(x @ (model.gram_inverse @ x)), 0.0))
    return v_hat, width


class SelectorState:
    """Mutable learning state: one owner per simulated run."""

    def __init__(self, n_providers: int, dim: int, horizon: int, alpha: float):
        if n_providers < 1 or dim < 1 or horizon < 1:
            raise ValueError("n_providers, dim and horizon must all be >= 1")
        if alpha < 0:
            raise ValueError(f"alpha must be >= 0, got {alpha}")
        self.n_providers = n_providers
        self.dim = dim
        self.horizon = horizon
        self.alpha = alpha
        self.max_stage = max(1, math.ceil(math.log(horizon)))
        m, s, d = n_providers, self.max_stage, dim
        eye = np.eye(d)
        self.gram_inv = np.tile(eye, (m, s, 1, 1))
        self.weighted = np.zeros((m, s, d))
        self.theta = np.zeros((m, s, d))
        # Round bookkeeping: which rounds each (provider, stage) learned from,
        # plus the pure-exploitation and within-stage-exploitation rounds.
        self.stage_rounds: list[list[list[int]]] = [
            [[] for _ in range(s)] for _ in range(m)
        ]
        self.pure_rounds: list[int] = []
        self.within_rounds: list[list[int]] = [[] for _ in range(s)]
        self.last_recorded = 0
        self._inv_sqrt_horizon = 1.0 / math.sqrt(horizon)

    def stage_model(self, provider: int, stage: int) -> StageModel:
        """View of one per-(provider, stage) model; stages are 1-based."""
        return StageModel(
            gram_inverse=self.gram_inv[provider, stage - 1],
            weighted_sum=self.weighted[provider, stage - 1],
            rounds=self.stage_rounds[provider][stage - 1],
        )

    def exploration_counts(self) -> np.ndarray:
        """(providers, stages) matrix of recorded forced-exploration rounds."""
        return np.array(
            [[len(s) for s in per_provider] for per_provider in self.stage_rounds]
        )

    def exploitation_bound_holds(self) -> bool:
        """Per stage, within-stage exploitation rounds never exceed
        (n_providers - 1) times the stage's total forced explorations."""
        counts = self.exploration_counts().sum(axis=0)
        m = self.n_providers
        return all(
            len(self.within_rounds[s]) <= (m - 1) * counts[s]
            for s in range(self.max_stage)
        )

    def restore_bookkeeping(
        self, selected: np.ndarray, branch: np.ndarray, stage: np.ndarray
    ) -> None:
        """Rebuild the round index sets from per-round decision arrays (used
        after a compiled full-horizon run mutated the model arrays)."""
        for idx in range(selected.shape[0]):
            t = idx + 1
            si = int(stage[idx]) - 1
            b = int(branch[idx])
            if b == Branch.FORCED_EXPLORATION:
                self.stage_rounds[int(selected[idx])][si].append(t)
            elif b == Branch.PURE_EXPLOIT:
                self.pure_rounds.append(t)
            else:
                self.within_rounds[si].append(t)
        self.last_recorded = selected.shape[0]


def designated_provider(t: int, n_providers: int) -> int:
    """Round-robin schedule over 1-based rounds, independent of all bids."""
    return t % n_providers


def select_provider(
    state: SelectorState,
    x: np.ndarray,
    virtual_costs: np.ndarray,
    t: int,
    collect_stages: bool = False,
    gated: bool = False,
) -> SelectionDecision:
    """Run the staged walk for round t and pick a provider.

    Pure with respect to ``state``; pair with :func:`record_reward` to commit
    the round.  ``virtual_costs`` must hold one value per provider.

    With ``gated=True`` the walk's conditions are scoped to the surviving
    candidates (exploration fires only for a designated provider still in
    the candidate set, widths are quantified over candidates, and the
    elimination threshold is anchored at the candidate maximum).  Gating
    concentrates exploration on near-optimal providers, at the cost of
    making the learning schedule depend on bids through the candidate sets,
    which measurably breaks exact allocation monotonicity; it is kept as an
    opt-in for curve reproduction and for auditing that very effect.
    """
    m = state.n_providers
    virtual_costs = np.asarray(virtual_costs, dtype=float)
    if virtual_costs.shape[0] != m:
        raise ValueError(f"need {m} virtual costs, got {virtual_costs.shape[0]}")
    x = np.asarray(x, dtype=float)
    j = designated_provider(t, m)
    candidates = np.ones(m, dtype=bool)
    s = 1
    trace: list | None = [] if collect_stages else None
    alpha = state.alpha
    while True:
        si = s - 1
        v = state.theta[:, si] @ x
        q = np.einsum("kij,i,j->k", state.gram_inv[:, si], x, x)
        w = alpha * np.sqrt(np.maximum(q, 0.0))
        if trace is not None:
            trace.append((s, np.flatnonzero(candidates), v.copy(), w.copy()))

        threshold = 2.0**-s
        scope = candidates if gated else slice(None)
        if (not gated or candidates[j]) and w[j] > threshold:
            winner, branch, learn = j, Branch.FORCED_EXPLORATION, True
            break
        ovs = v + w - virtual_costs
        if np.all(w[scope] <= state._inv_sqrt_horizon):
            winner = _candidate_argmax(ovs, candidates)
            branch, learn = Branch.PURE_EXPLOIT, False
            break
        if s < state.max_stage and np.all(w[scope] <= threshold):
            cut = (ovs[candidates].max() if gated else ovs.max()) - 4.0 * threshold
            candidates &= ovs >= cut  # keep within 2 * 2^(1-s) of the best
            s += 1
            continue
        winner = _candidate_argmax(ovs, candidates)
        branch, learn = Branch.WITHIN_STAGE_EXPLOIT, False
        break

    v_full = np.where(candidates, v, np.nan)
    w_full = np.where(candidates, w, np.nan)
    v_full[winner] = v[winner]
    w_full[winner] = w[winner]
    return SelectionDecision(
        winner=winner,
        branch=branch,
        stage=s,
        learn=learn,
        v_hat=v_full,
        width=w_full,
        stage_trace=trace,
    )


def _candidate_argmax(ovs: np.ndarray, candidates: np.ndarray) -> int:
    """Lowest-index maximizer among candidates (all providers if none left)."""
    if candidates.any():
        masked = np.where(candidates, ovs, -np.inf)
    else:
        masked = ovs
    return int(np.argmax(masked))


def record_reward(
    state: SelectorState,
    decision: SelectionDecision,
    t: int,
    x: np.ndarray,
    reward: float,
) -> None:
    """Commit round t: on forced exploration, fold (x, reward) into the
    winner's model at the deciding stage; otherwise only update the round
    bookkeeping.  Recording a round twice is an error."""
    if t <= state.last_recorded:
        raise ValueError(f"round {t} already recorded (last was {state.last_recorded})")
    state.last_recorded = t
    if decision.learn:
        i, si = decision.winner, decision.stage - 1
        x = np.asarray(x, dtype=float)
        state.gram_inv[i, si] = sherman_morrison_update(state.gram_inv[i, si], x)
        state.weighted[i, si] += reward * x
        state.theta[i, si] = state.gram_inv[i, si] @ state.weighted[i, si]
        state.stage_rounds[i][si].append(t)
    elif decision.branch == Branch.PURE_EXPLOIT:
        state.pure_rounds.append(t)
    else:
        state.within_rounds[decision.stage - 1].append(t)
