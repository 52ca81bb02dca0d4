"""How the three masking strategies spend a fixed budget.

With difficulty scores in hand, ``diffi`` always takes the top-ranked nodes
for the exploited share of the budget, ``prob`` masks each node with a rate
that grows with its score, and ``random`` ignores the scores.

    python3 demos/masking_strategies.py
"""
import numpy as np

from h3gnn.ssl import mask_budget, mask_diffi, mask_prob, mask_probabilities, mask_random

n, ratio, exploit = 1000, 0.5, 0.5
rng = np.random.default_rng(0)
scores = rng.gamma(2.0, 1.0, n)  # stand-in for per-node prediction errors
hard = np.argsort(-scores)[:100]  # the 10% hardest nodes

draws = 2000
freq = {"random": np.zeros(n), "diffi": np.zeros(n), "prob": np.zeros(n)}
for _ in range(draws):
    freq["random"] += mask_random(n, ratio, rng)
    freq["diffi"] += mask_diffi(scores, ratio, exploit, rng)
    freq["prob"] += mask_prob(scores, ratio, exploit, rng)

print(f"budget: {mask_budget(n, ratio)} of {n} nodes")
for name, counts in freq.items():
    f = counts / draws
    print(f"{name:>6}: hardest 10% masked {100 * f[hard].mean():5.1f}% of the time, "
          f"the rest {100 * np.delete(f, hard).mean():5.1f}%")

p = mask_probabilities(scores, ratio, exploit)
print(f"prob: largest gap between observed and target rate {np.abs(freq['prob'] / draws - p).max():.3f}")
