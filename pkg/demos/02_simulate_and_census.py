"""Synthetic data generation and the within-turn sequence census.

Without access to proprietary tournament feeds, validation runs on
synthetic data.  This script simulates throwing-success sequences under a
state-free model and under the periodic-autoregression model, then
tabulates the eight possible within-turn outcome patterns (000 ... 111).
Persistent within-turn ability shows up as an excess of all-miss and
all-hit turns relative to what independent throws can produce.
"""

from hothand import (
    LegStructure,
    ModelKind,
    ParamVector,
    PATTERNS,
    SimulationPlan,
    analytic_census,
    sequence_census,
    simulate_dataset,
    spread_intercepts,
)

structure = LegStructure(n_players=20, legs_per_player=150, length_min=7, length_max=12)
intercepts = spread_intercepts(structure.n_players)

# ---------------------------------------------------------------------------
# A state-free world: success depends only on player and turn position.

m2_params = ParamVector(beta0=intercepts, beta1=0.228, beta2=0.276)
m2_data = simulate_dataset(
    SimulationPlan(seed=1, kind=ModelKind.M2, params=m2_params, structure=structure)
)
print(f"state-free dataset: {m2_data.n_legs} legs, {m2_data.n_throws} throws")

census = sequence_census(m2_data)
expected = analytic_census(m2_params, ModelKind.M2, m2_data)
print("\npattern   simulated   analytic")
for k, pattern in enumerate(PATTERNS):
    print(f"  {pattern}     {census.proportions[k]:.4f}     {expected[k]:.4f}")

# ---------------------------------------------------------------------------
# A hot-handed world: ability is strongly persistent within a turn
# (phi_w = 0.726) but nearly resets between turns (phi_a = 0.057).

m4_params = ParamVector(
    beta0=intercepts, beta1=0.270, beta2=0.330,
    phi_w=0.726, phi_a=0.057, sigma_w=0.464, sigma_a=0.790,
    mu_delta=-0.034, sigma_delta=0.690,
)
m4_data = simulate_dataset(
    SimulationPlan(seed=2, kind=ModelKind.M4, params=m4_params, structure=structure)
)
m4_census = sequence_census(m4_data)

# Compare against the best state-free description of the same data: the
# census an independent-throws model would imply at the matched rates.
matched = analytic_census(m2_params, ModelKind.M2, m4_data)
print("\nwith persistent within-turn ability:")
print("pattern   simulated   state-free")
for k, pattern in enumerate(PATTERNS):
    marker = " <-" if pattern in ("000", "111") else ""
    print(f"  {pattern}     {m4_census.proportions[k]:.4f}     {matched[k]:.4f}{marker}")
print("\nall-miss and all-hit turns are over-represented: streaks within a")
print("turn are real under this data-generating process, and a model without")
print("a latent state cannot reproduce them.")

# Reproducibility: the same plan always yields the same dataset.
again = simulate_dataset(
    SimulationPlan(seed=2, kind=ModelKind.M4, params=m4_params, structure=structure)
)
print("\nbit-reproducible from the seed:", again == m4_data)
