"""Most likely latent state trajectories and their success probabilities.

The jointly most probable discretized state path given a leg's outcomes is
found by dynamic programming over the grid, in log space, at O(T m^2) cost.
Ties in any argmax are broken toward the lower state index, so decoding is
fully deterministic.  The decoded path is converted to a per-throw success
probability trajectory which, together with the player baseline, is what
the tabular export carries for external plotting.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import (
    Dataset,
    Leg,
    ModelKind,
    ModelSpec,
    ParamVector,
    linear_predictor,
    success_probability,
)
from .likelihood import _select_transition, _state_operators, leg_observation_matrix

__all__ = [
    "DecodedLeg",
    "viterbi",
    "decode_dataset",
    "trajectory_report",
    "write_trajectory_csv",
    "TRAJECTORY_COLUMNS",
]


@dataclass(frozen=True, eq=False)
class DecodedLeg:
    """Decoded state path and success-probability trajectory of one leg."""

    leg: Leg
    player_index: int
    s_star: np.ndarray
    pi_star: np.ndarray

    def __post_init__(self):
        for name in ("s_star", "pi_star"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)


class _ViterbiKernel:
    """Shared decoding state: log kernels and log observation weights."""

    def __init__(self, params: ParamVector, spec: ModelSpec):
        if not spec.kind.has_state:
            raise ValueError(f"decoding requires a state model (m3/m4), got {spec.kind.value}")
        params.validate_for(spec.kind)
        self.params = params
        self.spec = spec
        self.grid, delta, transitions = _state_operators(params, spec)
        with np.errstate(divide="ignore"):
            self.log_delta = np.log(delta)
            if spec.kind is ModelKind.M4:
                self.log_transitions = tuple(np.log(g) for g in transitions)
            else:
                self.log_transitions = np.log(transitions)

    def decode(self, leg: Leg, player_index: int) -> DecodedLeg:
        T, m = leg.T, self.spec.m
        with np.errstate(divide="ignore"):
            log_w = np.log(leg_observation_matrix(leg, self.params, self.grid, player_index))

        score = self.log_delta + log_w[0]
        back = np.empty((T, m), dtype=np.intp)
        for t in range(2, T + 1):
            log_gamma = _select_transition(self.spec.kind, self.log_transitions, t)
            candidates = score[:, None] + log_gamma
            best_prev = np.argmax(candidates, axis=0)  # ties -> lower index
            back[t - 1] = best_prev
            score = candidates[best_prev, np.arange(m)] + log_w[t - 1]

        path = np.empty(T, dtype=np.intp)
        path[-1] = int(np.argmax(score))
        for t in range(T - 1, 0, -1):
            path[t - 1] = back[t, path[t]]

        s_star = self.grid.midpoints[path]
        pi_star = np.array(
            [
                success_probability(
                    linear_predictor(self.params, player_index, (t % 3) + 1, float(s_star[t]))
                )
                for t in range(T)
            ]
        )
        return DecodedLeg(leg=leg, player_index=player_index, s_star=s_star, pi_star=pi_star)


def viterbi(leg: Leg, params: ParamVector, spec: ModelSpec, player_index: int) -> DecodedLeg:
    """Exact argmax over the m^T discretized state paths for one leg."""
    return _ViterbiKernel(params, spec).decode(leg, player_index)


def decode_dataset(dataset: Dataset, params: ParamVector, spec: ModelSpec) -> list:
    """Decode every leg, sharing the kernel across legs."""
    if params.n_players != dataset.n_players:
        raise ValueError("parameter vector does not match the dataset's player count")
    kernel = _ViterbiKernel(params, spec)
    return [kernel.decode(leg, dataset.player_index(leg.player_id)) for leg in dataset.legs]


TRAJECTORY_COLUMNS = (
    "player_id",
    "leg_id",
    "t",
    "turn_pos",
    "y",
    "state",
    "prob",
    "baseline",
    "new_turn",
)


def write_trajectory_csv(rows, path) -> None:
    """Write trajectory rows as CSV with the documented column order.

    Booleans are written as 0/1 and floats with full round-trip precision.
    """
    from .io import atomic_write_text

    def cell(value):
        if isinstance(value, bool):
            return "1" if value else "0"
        if isinstance(value, float):
            return repr(value)
        return str(value)

    lines = [",".join(TRAJECTORY_COLUMNS)]
    for row in rows:
        lines.append(",".join(cell(row[c]) for c in TRAJECTORY_COLUMNS))
    atomic_write_text(path, "\n".join(lines) + "\n")


def trajectory_report(
    decoded: Sequence[DecodedLeg], params: ParamVector, dataset: Dataset
) -> list:
    """Long-format rows for plotting decoded trajectories.

    One row per throw: identifiers, turn position, outcome, decoded state,
    decoded success probability, the player's first-dart baseline
    probability, and a marker that is true exactly at throws 4, 7, 10, ...
    where a new turn begins.
    """
    rows = []
    for d in decoded:
        p = dataset.player_index(d.leg.player_id)
        baseline = success_probability(float(params.beta0[p]))
        for t in range(1, d.leg.T + 1):
            turn_pos = (t - 1) % 3 + 1
            rows.append(
                {
                    "player_id": d.leg.player_id,
                    "leg_id": d.leg.leg_id,
                    "t": t,
                    "turn_pos": turn_pos,
                    "y": int(d.leg.y[t - 1]),
                    "state": float(d.s_star[t - 1]),
                    "prob": float(d.pi_star[t - 1]),
                    "baseline": baseline,
                    "new_turn": t > 1 and turn_pos == 1,
                }
            )
    return rows
