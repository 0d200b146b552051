"""Buyer-optimal reverse auction on a toy market.

Three providers quote costs for answering a query.  The buyer knows how much
each provider's answer is worth and adjusts every reported cost upward by its
information rent (the virtual cost).  The query goes to the provider with
the largest value-minus-virtual-cost surplus, provided that surplus is
non-negative, and the winner is paid the highest cost report at which it
would still have won.
"""
import numpy as np

from trcm import UniformCost, allocate_optimal, critical_payment, run_optimal_auction, virtual_cost

values = np.array([0.90, 0.80, 0.55])
dists = [UniformCost(0.0, 1.0), UniformCost(0.1, 0.8), UniformCost(0.0, 0.6)]
costs = np.array([0.20, 0.30, 0.15])

print("provider | value | cost | virtual cost | surplus")
psis = np.array([virtual_cost(d, c) for d, c in zip(dists, costs)])
for i in range(3):
    print(
        f"    {i}    | {values[i]:.2f}  | {costs[i]:.2f} | "
        f"{psis[i]:.3f}        | {values[i] - psis[i]:+.3f}"
    )

outcome = run_optimal_auction(values, dists, costs)
print(f"\nwinner: provider {outcome.winner}")
print(f"payment (critical threshold): {outcome.payment:.6f}")
print(f"winner's margin over its cost: {outcome.payment - costs[outcome.winner]:+.6f}")

# The payment is exactly the report at which the winner would stop winning:
# nudge the winner's report just past the threshold and it loses.
eps = 1e-6
probe = costs.copy()
probe[outcome.winner] = outcome.payment + eps
psis_probe = np.array([virtual_cost(d, c) for d, c in zip(dists, probe)])
print(
    f"reporting payment + {eps:g} instead would give winner "
    f"{allocate_optimal(values, psis_probe).winner}"
)

# With weak values nobody clears the participation bar and the query is
# simply not assigned.
weak = allocate_optimal(np.array([0.1, 0.05, 0.02]), psis)
print(f"\nwith weak values the winner is: {weak.winner}")

# Lowering your cost report never hurts: sweep the winner's report downward
# and watch the allocation stick.
sweep = np.linspace(costs[outcome.winner], dists[outcome.winner].lo, 5)
wins = []
for c in sweep:
    probe = costs.copy()
    probe[outcome.winner] = c
    psis_probe = np.array([virtual_cost(d, cc) for d, cc in zip(dists, probe)])
    wins.append(allocate_optimal(values, psis_probe).winner == outcome.winner)
print(f"keeps winning while lowering its report: {wins}")

# Single provider: the threshold plays the role of a reserve price.
solo = critical_payment(np.array([1.0]), [UniformCost(0, 1)], 0, np.array([0.3]))
print(f"\nsingle-provider reserve-style payment: {solo:.6f} (solves 1 - 2z = 0)")
