"""Fitting the nested model ladder and comparing by AIC.

Four nested models: player intercepts only; plus turn-position dummies;
plus an AR(1) latent ability state; plus a periodic AR(1) distinguishing
within-turn from across-turn transitions.  Fitting walks up this ladder
(each fit warm-starts the next), and AIC arbitrates.  On data simulated
with strong within-turn persistence, the periodic model should win.

Moderate sizes keep this demo around a minute on one core.
"""

import time

from hothand import (
    LegStructure,
    ModelKind,
    ModelSpec,
    OptimizerSettings,
    ParamVector,
    SimulationPlan,
    aic_table,
    fit,
    simulate_dataset,
    spread_intercepts,
)

structure = LegStructure(n_players=15, legs_per_player=150, length_min=7, length_max=12)
truth = ParamVector(
    beta0=spread_intercepts(structure.n_players),
    beta1=0.270, beta2=0.330,
    phi_w=0.726, phi_a=0.057, sigma_w=0.464, sigma_a=0.790,
    mu_delta=-0.034, sigma_delta=0.690,
)
data = simulate_dataset(
    SimulationPlan(seed=13, kind=ModelKind.M4, params=truth, structure=structure)
)
print(f"simulated {data.n_throws} throws by {data.n_players} players")

# CIs need a Hessian; skip them for the benchmark models to save time.
fast = OptimizerSettings(compute_ci=False)
fits = []
for kind, settings in [
    (ModelKind.M1, fast),
    (ModelKind.M2, fast),
    (ModelKind.M3, fast),
    (ModelKind.M4, OptimizerSettings()),
]:
    started = time.perf_counter()
    result = fit(data, ModelSpec(kind=kind, m=80), settings=settings)
    print(
        f"{kind.value}: loglik={result.loglik:.2f} aic={result.aic:.2f} "
        f"converged={result.converged} ({time.perf_counter() - started:.1f}s)"
    )
    fits.append(result)

print("\nmodel  k   AIC        dAIC    state process")
for row in aic_table(fits):
    print(f"{row.model:5s} {row.n_params:3d} {row.aic:10.2f} {row.delta_aic:7.2f}  {row.state_process}")

best = fits[-1]
print("\nperiodic-model estimates (truth in parentheses):")
for name, true_value in [
    ("phi_w", 0.726), ("phi_a", 0.057), ("sigma_w", 0.464), ("sigma_a", 0.790),
    ("beta1", 0.270), ("beta2", 0.330), ("mu_delta", -0.034), ("sigma_delta", 0.690),
]:
    estimate = getattr(best.params_hat, name)
    interval = best.ci.get(name) if best.ci else None
    ci_text = f" CI [{interval[0]:+.3f}, {interval[1]:+.3f}]" if interval else ""
    print(f"  {name:12s} {estimate:+.3f} ({true_value:+.3f}){ci_text}")

print("\nwithin-turn persistence is strong while the across-turn coefficient")
print("sits near zero: streaks live inside a turn of three darts and barely")
print("survive the break while the opponent throws.")
