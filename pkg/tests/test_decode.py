from __future__ import annotations

import numpy as np
import pytest

from hothand.core import Dataset, Leg, ModelKind, ModelSpec, ParamVector, linear_predictor, success_probability
from hothand.decode import TRAJECTORY_COLUMNS, decode_dataset, trajectory_report, viterbi
from hothand.grid import build_grid
from hothand.likelihood import observation_weights

from conftest import random_leg, random_state_params
from oracles import enumerate_viterbi, state_pieces


class TestViterbi:
    def test_single_throw_maximizes_initial_mass(self, rng):
        params = random_state_params(rng, 1, ModelKind.M3)
        spec = ModelSpec(kind=ModelKind.M3, m=7, b0=-2.0, bm=2.0)
        leg = Leg(player_id="a", leg_id="l", y=[1])
        grid, delta, _ = state_pieces(params, spec)
        w = observation_weights(leg, 1, params, grid, 0)
        expected = grid.midpoints[int(np.argmax(delta * w))]
        assert viterbi(leg, params, spec, 0).s_star[0] == expected

    @pytest.mark.parametrize("kind", [ModelKind.M3, ModelKind.M4])
    def test_matches_exhaustive_enumeration(self, rng, kind):
        for _ in range(5):
            m = int(rng.integers(4, 6))
            T = int(rng.integers(4, 7))
            params = random_state_params(rng, 2, kind)
            spec = ModelSpec(kind=kind, m=m, b0=-2.2, bm=2.2)
            leg = random_leg(rng, "b", "l", T)
            decoded = viterbi(leg, params, spec, 1)
            grid = build_grid(m, spec.b0, spec.bm)
            oracle_path = enumerate_viterbi(leg, params, spec, 1)
            assert np.array_equal(decoded.s_star, grid.midpoints[oracle_path])

    def test_rejects_state_free_models(self):
        params = ParamVector(beta0=np.array([0.0]))
        with pytest.raises(ValueError):
            viterbi(Leg(player_id="a", leg_id="l", y=[1]), params,
                    ModelSpec(kind=ModelKind.M2), 0)

    def test_pi_star_consistent_with_core_functions(self, rng):
        params = random_state_params(rng, 2, ModelKind.M4)
        spec = ModelSpec(kind=ModelKind.M4, m=12, b0=-2.5, bm=2.5)
        leg = random_leg(rng, "b", "l", 8)
        decoded = viterbi(leg, params, spec, 1)
        for t in range(1, leg.T + 1):
            expected = success_probability(
                linear_predictor(params, 1, (t - 1) % 3 + 1, float(decoded.s_star[t - 1]))
            )
            assert decoded.pi_star[t - 1] == expected

    def test_path_beats_random_alternatives(self, rng):
        params = random_state_params(rng, 1, ModelKind.M3)
        spec = ModelSpec(kind=ModelKind.M3, m=10, b0=-2.0, bm=2.0)
        leg = random_leg(rng, "a", "l", 7)
        grid, delta, gamma_for = state_pieces(params, spec)
        from hothand.likelihood import leg_observation_matrix

        logW = np.log(leg_observation_matrix(leg, params, grid, 0))
        log_delta = np.log(delta)
        log_gamma = np.log(gamma_for(2))

        def path_score(path):
            s = log_delta[path[0]] + logW[0, path[0]]
            for t in range(1, leg.T):
                s += log_gamma[path[t - 1], path[t]] + logW[t, path[t]]
            return s

        decoded = viterbi(leg, params, spec, 0)
        best = path_score(np.searchsorted(grid.midpoints, decoded.s_star))
        for _ in range(1000):
            alternative = rng.integers(0, 10, size=leg.T)
            assert path_score(alternative) <= best + 1e-9

    def test_equal_observation_weights_reduce_to_state_prior_path(self, rng, monkeypatch):
        # with flat observation weights the decoder must maximize the pure
        # state-process probability
        params = random_state_params(rng, 1, ModelKind.M3)
        spec = ModelSpec(kind=ModelKind.M3, m=4, b0=-2.0, bm=2.0)
        leg = random_leg(rng, "a", "l", 4)
        import hothand.decode as decode_module

        monkeypatch.setattr(
            decode_module, "leg_observation_matrix",
            lambda leg, params, grid, p: np.ones((leg.T, grid.m)),
        )
        decoded = viterbi(leg, params, spec, 0)
        grid, delta, gamma_for = state_pieces(params, spec)
        gamma = gamma_for(2)
        import itertools

        best_score, best_path = -np.inf, None
        for path in itertools.product(range(4), repeat=leg.T):
            s = delta[path[0]]
            for t in range(1, leg.T):
                s *= gamma[path[t - 1], path[t]]
            if s > best_score:
                best_score, best_path = s, path
        assert np.array_equal(decoded.s_star, grid.midpoints[list(best_path)])

    def test_deterministic_tie_break_toward_lower_state(self, rng, monkeypatch):
        # symmetric two-state chain with flat weights: every path ties, the
        # decoder must settle on the lowest state indices
        params = ParamVector(
            beta0=np.array([0.0]), phi=0.0, sigma=1.0, mu_delta=0.0, sigma_delta=1.0
        )
        spec = ModelSpec(kind=ModelKind.M3, m=2, b0=-1.0, bm=1.0)
        leg = Leg(player_id="a", leg_id="l", y=[1, 0, 1])
        import hothand.decode as decode_module

        monkeypatch.setattr(
            decode_module, "leg_observation_matrix",
            lambda leg, params, grid, p: np.ones((leg.T, grid.m)),
        )
        decoded = viterbi(leg, params, spec, 0)
        grid = build_grid(2, -1.0, 1.0)
        assert np.array_equal(decoded.s_star, np.full(3, grid.midpoints[0]))
        again = viterbi(leg, params, spec, 0)
        assert np.array_equal(decoded.s_star, again.s_star)

    def test_weak_across_turn_coupling_limits_flip_influence(self):
        # with near-zero across-turn persistence, flipping the previous
        # turn's outcomes moves the decoded state at the next turn start by
        # at most one grid step
        params = ParamVector(
            beta0=np.array([-0.4]), beta1=0.27, beta2=0.33,
            phi_w=0.726, phi_a=1e-4, sigma_w=0.464, sigma_a=0.790,
            mu_delta=-0.034, sigma_delta=0.690,
        )
        spec = ModelSpec(kind=ModelKind.M4, m=25, b0=-2.5, bm=2.5)
        grid = build_grid(25, -2.5, 2.5)
        step = grid.step
        base = Leg(player_id="a", leg_id="l", y=[1, 1, 1, 0, 1, 0])
        flipped = Leg(player_id="a", leg_id="l", y=[0, 0, 0, 0, 1, 0])
        s_base = viterbi(base, params, spec, 0).s_star
        s_flip = viterbi(flipped, params, spec, 0).s_star
        assert abs(s_base[3] - s_flip[3]) <= step + 1e-12

    def test_all_zero_leg_with_positive_dynamics_decays_within_turns(self, rng):
        # persistent negative evidence drags the decoded ability down
        params = ParamVector(
            beta0=np.array([0.0]), beta1=0.0, beta2=0.0,
            phi=0.9, sigma=0.6, mu_delta=0.0, sigma_delta=0.7,
        )
        spec = ModelSpec(kind=ModelKind.M3, m=5, b0=-2.0, bm=2.0)
        leg = Leg(player_id="a", leg_id="l", y=[0, 0, 0, 0, 0, 0])
        decoded = viterbi(leg, params, spec, 0)
        oracle_path = enumerate_viterbi(leg, params, spec, 0)
        grid = build_grid(5, -2.0, 2.0)
        assert np.array_equal(decoded.s_star, grid.midpoints[oracle_path])
        pi = decoded.pi_star
        for start in (0, 3):
            turn = pi[start:start + 3]
            assert np.all(np.diff(turn) <= 1e-12)


class TestTrajectoryReport:
    @pytest.fixture
    def report(self, rng):
        params = random_state_params(rng, 2, ModelKind.M4)
        spec = ModelSpec(kind=ModelKind.M4, m=10, b0=-2.5, bm=2.5)
        legs = [random_leg(rng, p, f"L{j}", 7 + j) for p in ("a", "b") for j in range(2)]
        ds = Dataset.from_legs(legs)
        decoded = decode_dataset(ds, params, spec)
        return trajectory_report(decoded, params, ds), params, ds

    def test_column_contract(self, report):
        rows, _, _ = report
        assert set(rows[0]) == set(TRAJECTORY_COLUMNS)

    def test_baseline_repeats_per_player(self, report):
        rows, params, ds = report
        for row in rows:
            p = ds.player_index(row["player_id"])
            assert row["baseline"] == success_probability(float(params.beta0[p]))

    def test_turn_markers_exactly_before_new_turns(self, report):
        rows, _, _ = report
        for row in rows:
            expected = row["t"] > 1 and (row["t"] - 1) % 3 == 0
            assert row["new_turn"] == expected

    def test_row_count_matches_throws(self, report):
        rows, _, ds = report
        assert len(rows) == ds.n_throws

    def test_csv_export_round_trips(self, report, tmp_path):
        from hothand.decode import write_trajectory_csv

        rows, _, _ = report
        path = tmp_path / "traj.csv"
        write_trajectory_csv(rows, path)
        lines = path.read_text().splitlines()
        assert lines[0] == ",".join(TRAJECTORY_COLUMNS)
        assert len(lines) == len(rows) + 1
        first = dict(zip(TRAJECTORY_COLUMNS, lines[1].split(",")))
        assert first["player_id"] == rows[0]["player_id"]
        assert float(first["prob"]) == rows[0]["prob"]
        assert first["new_turn"] in ("0", "1")
