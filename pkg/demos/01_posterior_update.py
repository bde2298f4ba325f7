# %% [markdown]
# # One comparison, by hand
#
# The search keeps a piecewise-constant density for the location of the
# maximizer.  A single comparison between two observations splits the
# domain into three regions and rescales each one by a constant.  This
# script walks through one update on the unit interval and checks the
# expected entropy change against a direct computation.

# %%
import numpy as np

from sbes.policy import expected_entropy_change
from sbes.posterior import ComparisonOutcome, PiecewiseDensity, normalizers

prior = PiecewiseDensity.uniform(0.0, 1.0)
x_l, x_r = 0.25, 0.75
g, gbar = 0.8, 0.6

# %% [markdown]
# ``g`` is the probability that the comparison points the right way when
# the maximizer lies outside ``[x_l, x_r]``.  ``gbar`` is the probability
# of seeing ``f(x_l) > f(x_r)`` when it lies between them.

# %%
left, mid = prior.region_masses(x_l, x_r)
u1, u0 = normalizers(left, mid, g, gbar)
print(f"P(y_hat = 1) = {u1:.4f}, P(y_hat = 0) = {u0:.4f}")

for y_hat in (1, 0):
    post = prior.update(ComparisonOutcome(y_hat, x_l, x_r), g, gbar)
    print(f"\ny_hat = {y_hat}")
    print("  edges     ", post.edges)
    print("  densities ", np.round(post.densities, 4))
    print(f"  entropy    {post.entropy_bits():.5f} bits")
    print(f"  recommend  {post.recommend()}")

# %% [markdown]
# The acquisition value is the expected posterior entropy minus the prior
# entropy.  The closed form uses only the two region masses.

# %%
closed = expected_entropy_change(left, mid, g, gbar)
direct = sum(
    u * prior.update(ComparisonOutcome(y, x_l, x_r), g, gbar).entropy_bits()
    for y, u in ((1, u1), (0, u0))
) - prior.entropy_bits()
print(f"\nclosed form {closed:.6f} bits, direct {direct:.6f} bits")

# %% [markdown]
# An uninformative comparison (``g = gbar = 1/2``) leaves the density
# unchanged, so its value is exactly zero.

# %%
print(f"uninformative pair: {expected_entropy_change(left, mid, 0.5, 0.5):.1e} bits")
