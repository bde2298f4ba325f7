# %% [markdown]
# # The search as a stepsize rule
#
# Gradient ascent on a 2-D Gaussian density with noisy finite-difference
# gradients.  The classical rules scale the gradient by a fixed schedule;
# the two search rules run a 5-iteration line search along the unit
# gradient direction instead.  Start points lie far from the optimum.

# %%
import numpy as np

from sbes import stepsize

obj = stepsize.make_multi_objective("gaussian-density", 2)
print(f"optimum {obj.optimum}, farthest vertex at {obj.d_max:.3f}")

x0 = stepsize.init_sampler(obj, "far", np.random.default_rng(0))
print(f"start {np.round(x0, 3)}, distance {obj.distance(x0):.3f}\n")

# %%
for rule in stepsize.RULES:
    tr = stepsize.run_sgd(obj, stepsize.StepsizeRule(rule), x0, iterations=10, rng=np.random.default_rng(1))
    path = " ".join(f"{d:.2f}" for d in tr.distances)
    print(f"{rule:<12} evals {sum(tr.evaluations):>3}  distances {path}")

# %% [markdown]
# Far from the optimum the density is nearly flat, so the gradient is
# tiny and a fixed schedule barely moves.  The line search looks along
# the whole ray to the boundary and can take a long step.  The averages
# over 20 start points are produced by ``sbes stepsize``.

# %%
rows = stepsize.run_stepsize_suite("nonconvex", "far", inits=5)
for row in stepsize.summarize_stepsize(rows, "nonconvex"):
    label = row["objective"] if row["dim"] == "" else f"{row['objective']}-{row['dim']}"
    print(f"{label:<20}" + "".join(f"{row[r]:>9.3f}" for r in stepsize.RULES))
