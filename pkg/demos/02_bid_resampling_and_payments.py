"""The one-shot bid resampler and the premium payment rule.

Bids are elicited once.  With probability mu a bid jumps uniformly into
(bid, cost bound]; the winner is then paid its original bid every round it
wins, plus the premium (bound - bid)/mu if its bid was resampled.  The
premium's expectation over the resampler equals the integral of the
allocation rule over the resampling interval, which is exactly what makes
truthful reporting optimal in expectation.
"""
import numpy as np

from trcm import ResampleRecord, resample_bid, resample_conditional_cdf, resample_value, round_payment

rng = np.random.default_rng(0)
bid, mu, upper = 2.0, 0.1, 10.0

records = [resample_bid(bid, mu, upper, np.random.default_rng(k)) for k in range(20_000)]
hit = [r for r in records if r.resampled]
print(f"resampled fraction: {len(hit) / len(records):.4f} (target mu = {mu})")

# Conditional on resampling the modified bid is uniform on (bid, upper]:
# compare the empirical CDF at the midpoint with the closed form.
mid = 6.0
empirical = np.mean([r.modified_bid < mid for r in hit])
print(
    f"P(modified < {mid} | resampled): empirical {empirical:.4f}, "
    f"closed form {resample_conditional_cdf(mid, bid, upper):.4f}"
)

# For a fixed random draw the adjustment is monotone in the bid.
gamma = 0.5
bids = np.linspace(0.0, upper, 6)
print("\nbid -> modified bid at gamma = 0.5:")
for b in bids:
    print(f"  {b:5.2f} -> {resample_value(b, upper, gamma):6.3f}")

# Payments: losers get nothing; an unresampled winner is paid its bid; a
# resampled winner collects the premium on every win.
plain = ResampleRecord(bid, bid, False, gamma, mu, upper)
boosted = ResampleRecord(bid, resample_value(bid, upper, gamma), True, gamma, mu, upper)
print(f"\nloser payment:              {round_payment(boosted, 0):.2f}")
print(f"unresampled winner payment: {round_payment(plain, 1):.2f}")
print(f"resampled winner payment:   {round_payment(boosted, 1):.2f}  "
      f"(= {bid} + ({upper} - {bid})/{mu})")

# The premium is a martingale for the integral of the allocation rule:
# with a threshold allocation 1{report <= z} the integral from bid to the
# bound is z - bid, and the Monte Carlo premium matches it.
z = 6.0
n = 200_000
gammas = rng.random(n)
branch = rng.random(n) < mu
premium = np.where(
    branch & (resample_value(bid, upper, gammas) <= z), (upper - bid) / mu, 0.0
)
print(f"\nE[premium] Monte Carlo: {premium.mean():.4f}   integral z - bid = {z - bid:.4f}")
