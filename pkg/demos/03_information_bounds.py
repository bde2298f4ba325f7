# %% [markdown]
# # Mutual information on small finite problems
#
# On a finite grid each belief curve's maximizer is a grid point, so the
# joint law of (curve, comparison outcome) can be enumerated exactly.
# We compare the search's choice with the best pair under two notions of
# information: the predictive one (current weights) and the perfect one
# (the true curve known).

# %%
import math

import numpy as np

from sbes import oracle
from sbes.policy import Decision

rng = np.random.default_rng(4)
inst = oracle.random_instance(rng)
state = oracle.random_state(inst, rng)
print(f"grid of {inst.grid.size} points, K = {inst.ensemble.K}, true curve {inst.truth}")
print("weights", np.round(state.ensemble.weights, 3))

# %% [markdown]
# The search picks the pair with the most negative expected entropy
# change.  Over all pairs that is the same as the largest predictive
# mutual information.

# %%
d = oracle.sbes_decision(inst, state)
values = [
    oracle.predictive_mi(inst, state, Decision(float(h), float(z))) for h, z in inst.pairs(state)
]
print(f"search's pair ({d.h:.3f}, {d.z:.3f}): {oracle.predictive_mi(inst, state, d):.5f} bits")
print(f"best over {len(values)} pairs: {max(values):.5f} bits")

# %% [markdown]
# The gap between the perfect-information optimum and the search's
# choice is bounded by ``4 sqrt(2 KL)``, where KL is between the point
# mass on the truth and the weights (in nats).

# %%
report, _ = oracle.check_perfect_bound(inst, state)
gap = abs(report.perfect_optimal - report.perfect) * math.log(2)
print(f"gap {gap:.4f} nats <= bound {report.bound_rhs:.4f} nats")
print(f"L1 distance of weights to truth {report.l1_distance:.4f}")

# %% [markdown]
# The randomized suite repeats these checks on 200 instances.  The floor
# at zero in the corollary fails on some of them, because the perfect
# quantity mixes two distributions and can be negative.

# %%
print()
print(oracle.format_table(oracle.run_suite(60, seed=0)))
