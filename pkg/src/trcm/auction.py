"""User-optimal reverse auction: virtual costs, allocation, threshold payments.

With known expected values the buyer-optimal rule picks the provider
maximizing ``value - virtual_cost`` when that surplus is non-negative, and
pays the winner the critical cost report at which it would stop winning.
Strict monotonicity of the virtual cost makes the threshold unique and
bisection-friendly.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .distributions import CostDistribution

BISECTION_TOL = 1e-10
BISECTION_MAX_ITER = 200


def virtual_cost(dist: CostDistribution, c: float) -> float:
    """c + F(c)/f(c) for a cost report c inside the support."""
    if not (dist.lo <= c <= dist.hi):
        raise ValueError(f"cost {c} outside support [{dist.lo}, {dist.hi}]")
    return dist.virtual_cost(c)


def bid_virtual_cost(dist: CostDistribution, b: float) -> float:
    """Virtual cost of a bid, extended below the support.

    Bids live in [0, hi]; below lo the distribution puts no mass, so the
    information-rent term vanishes and the extension is the identity.
    """
    if b < 0 or b > dist.hi:
        raise ValueError(f"bid {b} outside [0, {dist.hi}]")
    if b <= dist.lo:
        return float(b)
    return dist.virtual_cost(b)


@dataclass
class AuctionOutcome:
    """One auction round: winner (None if no non-negative surplus), surpluses,
    and the payment to the winner (zero when nobody wins)."""

    winner: int | None
    surpluses: np.ndarray = field(repr=False)
    payment: float = 0.0


def allocate_optimal(values: np.ndarray, virtual_costs: np.ndarray) -> AuctionOutcome:
    """Pick the lowest-index maximizer of value - virtual cost if that is >= 0."""
    values = np.asarray(values, dtype=float)
    virtual_costs = np.asarray(virtual_costs, dtype=float)
    if values.size == 0:
        raise ValueError("need at least one provider")
    if values.shape != virtual_costs.shape:
        raise ValueError(
            f"length mismatch: {values.shape} values vs {virtual_costs.shape} virtual costs"
        )
    surpluses = values - virtual_costs
    best = int(np.argmax(surpluses))  # argmax takes the first max: lowest index
    winner = best if surpluses[best] >= 0 else None
    return AuctionOutcome(winner=winner, surpluses=surpluses)


def critical_payment(
    values: np.ndarray,
    dists: list[CostDistribution],
    winner: int,
    costs: np.ndarray,
) -> float:
    """Highest cost report at which ``winner`` still wins, via bisection.

    The competing benchmark is the best rival surplus floored at zero (the
    participation threshold), so the winner's surplus at the returned report
    is still non-negative.  ``costs[winner]`` is ignored.  Because the
    winner's virtual cost rises strictly in its report, the surplus gap
    crosses zero exactly once; if even the top of the support stays
    competitive the payment is the support's upper end.
    """
    values = np.asarray(values, dtype=float)
    costs = np.asarray(costs, dtype=float)
    if winner is None:
        raise ValueError("no winner: critical payment undefined")
    rival_surpluses = [
        values[j] - virtual_cost(dists[j], costs[j])
        for j in range(len(values))
        if j != winner
    ]
    benchmark = max(0.0, max(rival_surpluses, default=0.0))
    dist = dists[winner]
    v = float(values[winner])

    def gap(s: float) -> float:
        return v - dist.virtual_cost(s) - benchmark

    lo, hi = dist.lo, dist.hi
    if gap(hi) >= 0.0:
        return hi
    # gap(lo) = v - lo - benchmark >= 0 whenever the winner actually won.
    a, b = lo, hi
    for _ in range(BISECTION_MAX_ITER):
        if b - a <= BISECTION_TOL:
            break
        mid = 0.5 * (a + b)
        if gap(mid) >= 0.0:
            a = mid
        else:
            b = mid
    return 0.5 * (a + b)


def run_optimal_auction(
    values: np.ndarray, dists: list[CostDistribution], costs: np.ndarray
) -> AuctionOutcome:
    """Full buyer-optimal auction on reported costs: allocation plus payment."""
    costs = np.asarray(costs, dtype=float)
    psis = np.array([virtual_cost(d, c) for d, c in zip(dists, costs)])
    outcome = allocate_optimal(values, psis)
    if outcome.winner is not None:
        outcome.payment = critical_payment(values, dists, outcome.winner, costs)
    return outcome
