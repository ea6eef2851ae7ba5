from __future__ import annotations

import numpy as np
import pytest
from scipy.special import expit, logit
from scipy.stats import chisquare

from hothand.core import Dataset, Leg, ModelKind, ModelSpec, ParamVector
from hothand.simulate import (
    LegStructure,
    SimulationPlan,
    analytic_census,
    model_implied_census,
    recovery_experiment,
    sequence_census,
    simulate_dataset,
    spread_intercepts,
)

from oracles import census_product_oracle


def _position_rates(ds: Dataset):
    counts = np.zeros(3)
    hits = np.zeros(3)
    for leg in ds.legs:
        for t in range(leg.T):
            counts[t % 3] += 1
            hits[t % 3] += leg.y[t]
    return hits / counts, counts


class TestSimulateDataset:
    def test_bit_reproducible(self):
        params = ParamVector(beta0=np.array([-0.5, -0.2]), beta1=0.2, beta2=0.3,
                             phi=0.5, sigma=0.6, mu_delta=0.0, sigma_delta=0.7)
        plan = SimulationPlan(seed=42, kind=ModelKind.M3, params=params,
                              structure=LegStructure(2, 10, 5, 9))
        assert simulate_dataset(plan) == simulate_dataset(plan)

    def test_mirror_mode_preserves_structure_exactly(self, rng):
        template = Dataset.from_legs(
            [Leg(player_id=p, leg_id=f"L{j}", y=rng.integers(0, 2, size=int(rng.integers(3, 11))))
             for p in ("x", "y") for j in range(4)]
        )
        params = ParamVector(beta0=np.array([-0.3, -0.1]))
        plan = SimulationPlan(seed=1, kind=ModelKind.M1, params=params, template=template)
        sim = simulate_dataset(plan)
        assert sim.players == template.players
        assert sim.n_legs == template.n_legs
        assert [(l.player_id, l.leg_id, l.T) for l in sim.legs] == [
            (l.player_id, l.leg_id, l.T) for l in template.legs
        ]

    def test_m1_law_of_large_numbers(self):
        plan = SimulationPlan(
            seed=7, kind=ModelKind.M1, params=ParamVector(beta0=np.array([0.0])),
            structure=LegStructure(1, 100_000, 10, 10),
        )
        ds = simulate_dataset(plan)
        assert ds.n_throws == 1_000_000
        rate = sum(int(leg.y.sum()) for leg in ds.legs) / ds.n_throws
        assert rate == pytest.approx(0.5, abs=0.002)

    def test_m2_position_rates_match_reference_proportions(self):
        # position-specific success rates 0.355 / 0.409 / 0.420
        b0 = logit(0.355)
        params = ParamVector(
            beta0=np.array([b0]),
            beta1=logit(0.409) - b0,
            beta2=logit(0.420) - b0,
        )
        plan = SimulationPlan(seed=8, kind=ModelKind.M2, params=params,
                              structure=LegStructure(1, 112_000, 9, 9))
        ds = simulate_dataset(plan)
        assert ds.n_throws > 1_000_000
        rates, _ = _position_rates(ds)
        for rate, target in zip(rates, (0.355, 0.409, 0.420)):
            assert rate == pytest.approx(target, abs=0.003)

    def test_m3_with_vanishing_state_indistinguishable_from_m2(self):
        base = dict(beta0=np.array([-0.5]), beta1=0.22, beta2=0.28)
        m3 = ParamVector(**base, phi=0.0, sigma=1e-8, mu_delta=0.0, sigma_delta=1e-8)
        plan = SimulationPlan(seed=9, kind=ModelKind.M3, params=m3,
                              structure=LegStructure(1, 30_000, 9, 9))
        ds = simulate_dataset(plan)
        rates, counts = _position_rates(ds)
        expected_p = expit(np.array([-0.5, -0.5 + 0.22, -0.5 + 0.28]))
        hits = rates * counts
        observed = np.concatenate([hits, counts - hits])
        expected = np.concatenate([counts * expected_p, counts * (1 - expected_p)])
        stat, pvalue = chisquare(observed, expected * observed.sum() / expected.sum())
        assert pvalue > 0.01

    def test_validation(self):
        params = ParamVector(beta0=np.array([0.0]))
        with pytest.raises(ValueError):
            SimulationPlan(seed=1, kind=ModelKind.M1, params=params)
        with pytest.raises(ValueError):
            SimulationPlan(seed=1, kind=ModelKind.M3, params=params,
                           structure=LegStructure(1, 1, 3, 3))
        with pytest.raises(ValueError):
            SimulationPlan(seed=1, kind=ModelKind.M1,
                           params=ParamVector(beta0=np.zeros(3)),
                           structure=LegStructure(2, 5, 3, 6))


class TestSequenceCensus:
    def test_single_leg_two_turns(self):
        ds = Dataset.from_legs([Leg(player_id="a", leg_id="l", y=[1, 1, 1, 0, 0, 0, 1])])
        census = sequence_census(ds)
        assert census.n_turns == 2
        assert census.as_dict()["111"] == 0.5
        assert census.as_dict()["000"] == 0.5

    def test_short_legs_contribute_nothing(self):
        ds = Dataset.from_legs([
            Leg(player_id="a", leg_id="1", y=[1, 0]),
            Leg(player_id="a", leg_id="2", y=[1, 0, 1, 1, 1]),
        ])
        census = sequence_census(ds)
        assert census.n_turns == 1  # only the first turn of the 5-throw leg

    def test_no_complete_turn_is_an_error(self):
        ds = Dataset.from_legs([Leg(player_id="a", leg_id="1", y=[1, 0])])
        with pytest.raises(ValueError):
            sequence_census(ds)

    def test_proportions_sum_to_one_and_order_invariant(self, rng):
        legs = [Leg(player_id="a", leg_id=f"L{j}", y=rng.integers(0, 2, size=9)) for j in range(30)]
        ds = Dataset.from_legs(legs)
        census = sequence_census(ds)
        assert census.proportions.sum() == pytest.approx(1.0, abs=1e-12)
        shuffled = Dataset.from_legs(legs[::-1])
        assert np.array_equal(sequence_census(shuffled).proportions, census.proportions)

    def test_monte_carlo_matches_product_oracle_under_m1(self):
        params = ParamVector(beta0=np.array([-0.4]))
        plan = SimulationPlan(seed=10, kind=ModelKind.M1, params=params,
                              structure=LegStructure(1, 40_000, 6, 6))
        ds = simulate_dataset(plan)
        census = sequence_census(ds)
        expected = census_product_oracle(params, ModelKind.M1, ds)
        n = census.n_turns
        for k in range(8):
            se = np.sqrt(expected[k] * (1 - expected[k]) / n)
            assert abs(census.proportions[k] - expected[k]) < 3 * se + 1e-9


class TestAnalyticCensus:
    def test_matches_independent_product_oracle(self, rng):
        params = ParamVector(beta0=np.array([-0.6, -0.2]), beta1=0.2, beta2=0.3)
        legs = [Leg(player_id=p, leg_id=f"L{j}", y=rng.integers(0, 2, size=int(rng.integers(3, 10))))
                for p in ("a", "b") for j in range(5)]
        ds = Dataset.from_legs(legs)
        for kind in (ModelKind.M1, ModelKind.M2):
            mine = analytic_census(params, kind, ds)
            oracle = census_product_oracle(params, kind, ds)
            assert np.allclose(mine, oracle, atol=1e-12)
            assert mine.sum() == pytest.approx(1.0, abs=1e-12)

    def test_rejects_state_models(self, rng):
        params = ParamVector(beta0=np.array([0.0]), phi=0.5, sigma=1.0,
                             mu_delta=0.0, sigma_delta=1.0)
        ds = Dataset.from_legs([Leg(player_id="a", leg_id="l", y=[1, 0, 1])])
        with pytest.raises(ValueError):
            analytic_census(params, ModelKind.M3, ds)


class TestModelImpliedCensus:
    def test_single_replication_equals_direct_pass(self, rng):
        params = ParamVector(beta0=np.array([-0.4]), beta1=0.2, beta2=0.25)
        template = simulate_dataset(
            SimulationPlan(seed=20, kind=ModelKind.M2, params=params,
                           structure=LegStructure(1, 200, 6, 10))
        )
        report = model_implied_census(params, template, 1, seed=33, kind=ModelKind.M2)
        child = np.random.SeedSequence(33).spawn(1)[0]
        direct = sequence_census(
            simulate_dataset(SimulationPlan(seed=child, kind=ModelKind.M2,
                                            params=params, template=template))
        )
        assert np.array_equal(report.mean, direct.proportions)

    def test_converges_to_analytic_value(self):
        params = ParamVector(beta0=np.array([-0.5]), beta1=0.25, beta2=0.3)
        template = simulate_dataset(
            SimulationPlan(seed=21, kind=ModelKind.M2, params=params,
                           structure=LegStructure(1, 600, 6, 10))
        )
        report = model_implied_census(params, template, 60, seed=34, kind=ModelKind.M2)
        expected = analytic_census(params, ModelKind.M2, template)
        for k in range(8):
            assert abs(report.mean[k] - expected[k]) < 4 * report.mc_se[k] + 1e-9

    def test_requires_kind_for_bare_parameters(self):
        params = ParamVector(beta0=np.array([0.0]))
        ds = Dataset.from_legs([Leg(player_id="a", leg_id="l", y=[1, 0, 1])])
        with pytest.raises(ValueError):
            model_implied_census(params, ds, 2, seed=0)

    def test_well_specified_model_census_close_at_scale(self):
        # at ~150k throws a well-specified periodic model reproduces the data
        # census to within 0.01 on every pattern; the generating parameters
        # stand in for the fit, which at this scale matches them to noise
        truth = ParamVector(
            beta0=np.linspace(-0.857, -0.135, 20), beta1=0.27, beta2=0.33,
            phi_w=0.726, phi_a=0.057, sigma_w=0.464, sigma_a=0.790,
            mu_delta=-0.034, sigma_delta=0.690,
        )
        data = simulate_dataset(
            SimulationPlan(seed=90, kind=ModelKind.M4, params=truth,
                           structure=LegStructure(20, 790, 7, 12))
        )
        assert data.n_throws > 140_000
        observed = sequence_census(data)
        report = model_implied_census(truth, data, replications=20, seed=91,
                                      kind=ModelKind.M4)
        deviation = np.abs(report.mean - observed.proportions).max()
        assert deviation <= 0.01


class TestRecoveryExperiment:
    def test_m1_single_player_coverage(self):
        p_true = 0.38
        truth = ParamVector(beta0=np.array([logit(p_true)]))
        report = recovery_experiment(
            truth,
            ModelSpec(kind=ModelKind.M1),
            LegStructure(1, 40, 7, 12),
            replications=50,
            seed=55,
        )
        assert report.n_converged == 50
        row = report.row("beta0[P01]")
        assert row.n_ci == 50
        assert row.ci_coverage == pytest.approx(0.95, abs=0.07)
        assert abs(row.bias) < 0.05

    def test_phi_a_zero_ci_coverage(self):
        # across-turn persistence absent from the truth: where the observed
        # information yields an interval, it should cover 0 almost always
        truth = ParamVector(
            beta0=np.linspace(-0.8, -0.2, 5), beta1=0.27, beta2=0.33,
            phi_w=0.6, phi_a=0.0, sigma_w=0.5, sigma_a=0.75,
            mu_delta=0.0, sigma_delta=0.7,
        )
        report = recovery_experiment(
            truth, ModelSpec(kind=ModelKind.M4, m=50),
            LegStructure(5, 80, 7, 12), replications=20, seed=515151,
        )
        assert report.n_converged == 20
        row = report.row("phi_a")
        assert row.n_ci >= 12  # boundary fits legitimately lack intervals
        assert row.ci_coverage >= 0.85

    def test_failures_are_reported_not_hidden(self, monkeypatch):
        import hothand.simulate as sim_module

        truth = ParamVector(beta0=np.array([-0.3]))
        real_fit = sim_module.fit
        calls = {"n": 0}

        def flaky_fit(dataset, spec, init=None, settings=None):
            calls["n"] += 1
            result = real_fit(dataset, spec, init=init, settings=settings)
            if calls["n"] == 2:
                object.__setattr__(result, "converged", False)
            return result

        monkeypatch.setattr(sim_module, "fit", flaky_fit)
        report = recovery_experiment(
            truth, ModelSpec(kind=ModelKind.M1), LegStructure(1, 10, 5, 8),
            replications=3, seed=56,
        )
        assert report.n_converged == 2
        assert len(report.failures) == 1
        assert "replication 1" in report.failures[0]


class TestSpreadIntercepts:
    def test_range_and_monotonicity(self):
        b = spread_intercepts(20)
        assert b[0] == -0.857 and b[-1] == -0.135
        assert np.all(np.diff(b) > 0)


class TestReportCsv:
    def test_census_report_csv(self, tmp_path):
        params = ParamVector(beta0=np.array([-0.4]), beta1=0.2, beta2=0.25)
        template = simulate_dataset(
            SimulationPlan(seed=70, kind=ModelKind.M2, params=params,
                           structure=LegStructure(1, 50, 6, 9))
        )
        report = model_implied_census(params, template, 5, seed=71, kind=ModelKind.M2)
        path = tmp_path / "census.csv"
        report.to_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "pattern,mean,mc_se"
        assert len(lines) == 9
        assert lines[1].startswith("000,")

    def test_recovery_report_csv(self, tmp_path):
        truth = ParamVector(beta0=np.array([-0.3]))
        report = recovery_experiment(
            truth, ModelSpec(kind=ModelKind.M1), LegStructure(1, 10, 5, 8),
            replications=2, seed=72,
        )
        path = tmp_path / "recovery.csv"
        report.to_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "name,truth,mean_estimate,bias,rmse,ci_coverage,n_ci"
        assert len(lines) == 2  # one parameter row for the single intercept
