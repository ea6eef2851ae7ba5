"""Discretizing the latent ability process and evaluating likelihoods.

The latent ability state is continuous, so its likelihood involves an
intractable integral.  Chopping the state range into m intervals turns the
model into a finite-state chain: an initial probability vector, a
row-stochastic transition kernel, and per-throw observation weights.  This
script builds those pieces, shows their invariants, and checks the fast
forward recursion against a literal sum over every possible state path.
"""

import itertools
import math

import numpy as np

from hothand import (
    Leg,
    ModelKind,
    ModelSpec,
    ParamVector,
    build_grid,
    initial_vector,
    leg_observation_matrix,
    loglik_total,
    par_transition_pair,
)
from hothand.core import Dataset

# ---------------------------------------------------------------------------
# A grid over the plausible ability range.  The production default is
# m = 150 intervals on [-2.5, 2.5]; a coarse grid keeps the printout small.

grid = build_grid(m=10, b0=-2.5, bm=2.5)
print("interval width:", grid.step)
print("first/last midpoints:", grid.midpoints[0], grid.midpoints[-1])

# The initial ability of a leg is normally distributed; discretized, that
# becomes a probability vector over intervals.  Tail mass beyond the range
# is absorbed into the edge intervals, so the vector sums to one exactly.
delta = initial_vector(grid, mu_delta=-0.034, sigma_delta=0.690)
print("\ninitial vector:", np.round(delta, 4))
print("sum:", delta.sum())

# One autoregressive step becomes a row-stochastic matrix.  Within-turn
# dynamics are persistent (phi close to 1, small noise); across turns the
# ability nearly resets.
within, across = par_transition_pair(grid, phi_w=0.726, phi_a=0.057,
                                     sigma_w=0.464, sigma_a=0.790)
print("\nwithin-turn kernel row sums:", np.round(within.sum(axis=1), 12))
print("across-turn rows are nearly identical (weak coupling):")
print("  max row spread:", np.abs(across - across.mean(axis=0)).max().round(4))

# ---------------------------------------------------------------------------
# Forward recursion versus the exhaustive path sum.
#
# The likelihood of a leg is a sum over m^T state paths.  The forward
# recursion computes it in O(T m^2); on a tiny instance we can afford the
# O(m^T) enumeration and compare.

params = ParamVector(
    beta0=np.array([-0.45]), beta1=0.27, beta2=0.33,
    phi_w=0.726, phi_a=0.057, sigma_w=0.464, sigma_a=0.790,
    mu_delta=-0.034, sigma_delta=0.690,
)
spec = ModelSpec(kind=ModelKind.M4, m=4, b0=-2.0, bm=2.0)
leg = Leg(player_id="demo", leg_id="L1", y=[1, 0, 1, 1, 0])
dataset = Dataset.from_legs([leg])

fast = loglik_total(dataset, params, spec)

small_grid = build_grid(spec.m, spec.b0, spec.bm)
weights = leg_observation_matrix(leg, params, small_grid, 0)
start = initial_vector(small_grid, params.mu_delta, params.sigma_delta)
w_mat, a_mat = par_transition_pair(small_grid, params.phi_w, params.phi_a,
                                   params.sigma_w, params.sigma_a)
terms = []
for path in itertools.product(range(spec.m), repeat=leg.T):
    value = start[path[0]] * weights[0][path[0]]
    for t in range(2, leg.T + 1):
        gamma = a_mat if (t - 1) % 3 == 0 else w_mat
        value *= gamma[path[t - 2], path[t - 1]] * weights[t - 1][path[t - 1]]
    terms.append(value)
exhaustive = math.log(math.fsum(terms))

print(f"\nforward recursion: {fast:.12f}")
print(f"exhaustive sum over {spec.m ** leg.T} paths: {exhaustive:.12f}")
print(f"relative difference: {abs(fast - exhaustive) / abs(exhaustive):.2e}")
