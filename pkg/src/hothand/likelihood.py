"""Log-likelihood evaluation.

Models without a latent state (M1/M2) have an exact Bernoulli likelihood
that collapses to a small table of per-(player, position, outcome) counts.
The state models (M3/M4) use the forward recursion of the approximating
discrete-state chain: a row vector is propagated through transition kernels
and per-throw observation weights, normalized after every step so the
computation stays finite for legs of length 10^4 and more; the accumulated
log normalizers sum to the leg log-likelihood.  Cost is O(T m^2) per leg.

Legs are independent, so the dataset log-likelihood is the sum of per-leg
values.  Internally legs are always processed in a canonical order (sorted
by player id, leg id) and grouped by length; the grouping depends only on
the dataset content, never on the worker count, which makes the total
bit-reproducible for any ``workers`` setting and invariant to the order in
which legs were supplied.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.special import expit

from .core import Dataset, Leg, ModelKind, ModelSpec, ParamVector, _clip_open_unit, turn_position
from .grid import Grid, build_grid, initial_vector, par_transition_pair, transition_matrix

__all__ = [
    "observation_weights",
    "leg_observation_matrix",
    "loglik_glm",
    "loglik_leg_forward",
    "loglik_total",
    "prepare_dataset",
]


# ---------------------------------------------------------------------------
# Observation weights


def _weight_table(params: ParamVector, grid: Grid) -> np.ndarray:
    """Per-(player, position, outcome) observation weight vectors.

    Shape (P, 3, 2, m); entry [p, d, y, i] is P(y | s = midpoint_i) for
    player p at turn position d+1.  Only 2*3*P distinct vectors exist, so
    the table is built once per parameter value and indexed per throw.
    """
    dummy = np.array([0.0, params.beta1, params.beta2])
    eta = (params.beta0[:, None] + dummy[None, :])[:, :, None] + grid.midpoints[None, None, :]
    pi = _clip_open_unit(expit(eta))
    table = np.empty((params.n_players, 3, 2, grid.m))
    table[:, :, 1, :] = pi
    table[:, :, 0, :] = _clip_open_unit(1.0 - pi)
    return table


def observation_weights(
    leg: Leg, t: int, params: ParamVector, grid: Grid, player_index: int
) -> np.ndarray:
    """P(y_t | s_t = midpoint_i) for every grid interval i.

    ``t`` is 1-based within the leg.
    """
    if not 1 <= t <= leg.T:
        raise ValueError(f"throw index {t} out of range for a leg of length {leg.T}")
    if not 0 <= player_index < params.n_players:
        raise ValueError(f"player index {player_index} out of range")
    d = turn_position(t)
    dummy = (0.0, params.beta1, params.beta2)[d - 1]
    eta = (float(params.beta0[player_index]) + dummy) + grid.midpoints
    pi = _clip_open_unit(expit(eta))
    if leg.y[t - 1] == 1:
        return pi
    return _clip_open_unit(1.0 - pi)


def leg_observation_matrix(
    leg: Leg, params: ParamVector, grid: Grid, player_index: int
) -> np.ndarray:
    """Stack of observation weight vectors for every throw of a leg, (T, m)."""
    return np.stack(
        [observation_weights(leg, t, params, grid, player_index) for t in range(1, leg.T + 1)]
    )


# ---------------------------------------------------------------------------
# Exact likelihood for the state-free models


def loglik_glm(dataset: Dataset, params: ParamVector, model_kind: ModelKind) -> float:
    """Exact Bernoulli log-likelihood for M1/M2.

    M1 ignores the position dummies (they are fixed at zero); M2 uses them.
    """
    if model_kind not in (ModelKind.M1, ModelKind.M2):
        raise ValueError(f"loglik_glm handles m1/m2 only, got {model_kind.value}")
    params.validate_for(model_kind)
    prepared = prepare_dataset(dataset)
    return _glm_from_counts(prepared.counts, params, model_kind)


def _glm_from_counts(counts: np.ndarray, params: ParamVector, kind: ModelKind) -> float:
    if kind is ModelKind.M1:
        dummy = np.zeros(3)
    else:
        dummy = np.array([0.0, params.beta1, params.beta2])
    eta = params.beta0[:, None] + dummy[None, :]
    pi = _clip_open_unit(expit(eta))
    log_w1 = np.log(pi)
    log_w0 = np.log(_clip_open_unit(1.0 - pi))
    return float(np.sum(counts[:, :, 1] * log_w1) + np.sum(counts[:, :, 0] * log_w0))


# ---------------------------------------------------------------------------
# Forward recursion for the state models


def _select_transition(kind: ModelKind, transitions, t: int) -> np.ndarray:
    """Kernel governing the transition into 1-based throw ``t`` (t >= 2)."""
    if kind is ModelKind.M4:
        within, across = transitions
        return across if (t - 1) % 3 == 0 else within
    return transitions


def loglik_leg_forward(
    leg: Leg,
    params: ParamVector,
    spec: ModelSpec,
    player_index: int,
    delta: np.ndarray,
    transitions,
) -> float:
    """Scaled forward log-likelihood of a single leg under M3/M4.

    ``transitions`` is one kernel for M3 or the (within, across) pair for
    M4.  The forward vector is renormalized to sum one after every step and
    the log normalizers are accumulated, so the result stays finite for
    arbitrarily long legs.
    """
    if not spec.kind.has_state:
        raise ValueError(f"forward likelihood requires m3/m4, got {spec.kind.value}")
    params.validate_for(spec.kind)
    if spec.kind is ModelKind.M4:
        if not (isinstance(transitions, tuple) and len(transitions) == 2):
            raise ValueError("m4 requires a (within, across) transition pair")
        mats = transitions
    else:
        if isinstance(transitions, tuple):
            raise ValueError("m3 takes a single transition matrix")
        mats = (transitions,)
    m = delta.shape[0]
    if m != spec.m or any(g.shape != (m, m) for g in mats):
        raise ValueError("grid, initial vector and transition dimensions disagree")

    grid = build_grid(spec.m, spec.b0, spec.bm)
    weights = leg_observation_matrix(leg, params, grid, player_index)

    v = delta * weights[0]
    total = 0.0
    c = float(v.sum())
    if c <= 0.0:
        return -np.inf
    total += np.log(c)
    v = v / c
    for t in range(2, leg.T + 1):
        gamma = _select_transition(spec.kind, transitions, t)
        v = (v @ gamma) * weights[t - 1]
        c = float(v.sum())
        if c <= 0.0:
            return -np.inf
        total += np.log(c)
        v = v / c
    return float(total)


# ---------------------------------------------------------------------------
# Dataset preparation and batched evaluation


@dataclass(frozen=True, eq=False)
class _LengthGroup:
    y: np.ndarray  # (n, T) outcomes, int64 for table indexing
    player_idx: np.ndarray  # (n,)
    positions: np.ndarray  # (n,) canonical leg positions


@dataclass(frozen=True, eq=False)
class Prepared:
    """Canonically ordered, length-grouped view of a dataset.

    Built once per dataset and reused across parameter evaluations; the
    layout depends only on dataset content so repeated evaluations are
    bit-reproducible.
    """

    dataset: Dataset
    groups: tuple  # _LengthGroup, ascending leg length
    counts: np.ndarray  # (P, 3, 2) throw counts by player, position, outcome
    n_legs: int

    @cached_property
    def player_views(self) -> dict:
        """Restriction of the grouped layout to each single player.

        Canonical order sorts by player id first, so a player's legs occupy
        a contiguous block of canonical positions; each view re-bases them
        to 0..n_p-1.
        """
        views = {}
        for p in range(self.dataset.n_players):
            groups = []
            start = None
            for g in self.groups:
                mask = g.player_idx == p
                if mask.any():
                    positions = g.positions[mask]
                    start = positions.min() if start is None else min(start, positions.min())
                    groups.append(
                        _LengthGroup(y=g.y[mask], player_idx=g.player_idx[mask], positions=positions)
                    )
            rebased = tuple(
                _LengthGroup(y=g.y, player_idx=g.player_idx, positions=g.positions - start)
                for g in groups
            )
            views[p] = rebased
        return views

    @cached_property
    def player_leg_counts(self) -> np.ndarray:
        counts = np.zeros(self.dataset.n_players, dtype=np.int64)
        for g in self.groups:
            np.add.at(counts, g.player_idx, 1)
        return counts


def prepare_dataset(dataset: Dataset) -> Prepared:
    """Sort legs canonically and group them by length."""
    order = sorted(
        range(dataset.n_legs),
        key=lambda i: (dataset.legs[i].player_id, dataset.legs[i].leg_id, i),
    )
    by_length: dict = {}
    for pos, i in enumerate(order):
        leg = dataset.legs[i]
        by_length.setdefault(leg.T, []).append((pos, i))
    groups = []
    for T in sorted(by_length):
        entries = by_length[T]
        y = np.empty((len(entries), T), dtype=np.int64)
        pidx = np.empty(len(entries), dtype=np.intp)
        positions = np.empty(len(entries), dtype=np.intp)
        for row, (pos, i) in enumerate(entries):
            leg = dataset.legs[i]
            y[row] = leg.y
            pidx[row] = dataset.player_index(leg.player_id)
            positions[row] = pos
        groups.append(_LengthGroup(y=y, player_idx=pidx, positions=positions))

    counts = np.zeros((dataset.n_players, 3, 2), dtype=np.int64)
    for g in groups:
        T = g.y.shape[1]
        for t in range(T):
            d = t % 3
            np.add.at(counts, (g.player_idx, d, g.y[:, t]), 1)
    return Prepared(dataset=dataset, groups=tuple(groups), counts=counts, n_legs=dataset.n_legs)


def _forward_group(
    group: _LengthGroup,
    table: np.ndarray,
    delta: np.ndarray,
    kind: ModelKind,
    transitions,
) -> np.ndarray:
    """Per-leg log-likelihoods for one equal-length batch of legs."""
    T = group.y.shape[1]
    v = delta[None, :] * table[group.player_idx, 0, group.y[:, 0], :]
    c = v.sum(axis=1)
    bad = c <= 0.0
    if bad.any():
        c = np.where(bad, 1.0, c)
        total = np.where(bad, -np.inf, np.log(c))
    else:
        total = np.log(c)
    v = v / c[:, None]
    for t in range(2, T + 1):
        gamma = _select_transition(kind, transitions, t)
        v = v @ gamma
        v *= table[group.player_idx, (t - 1) % 3, group.y[:, t - 1], :]
        c = v.sum(axis=1)
        bad = c <= 0.0
        if bad.any():
            c = np.where(bad, 1.0, c)
            total = total + np.where(bad, -np.inf, np.log(c))
        else:
            total = total + np.log(c)
        v = v / c[:, None]
    return total


def _state_operators(params: ParamVector, spec: ModelSpec):
    """Initial vector and transition kernel(s) for a state model."""
    grid = build_grid(spec.m, spec.b0, spec.bm)
    delta = initial_vector(grid, params.mu_delta, params.sigma_delta)
    if spec.kind is ModelKind.M4:
        transitions = par_transition_pair(
            grid, params.phi_w, params.phi_a, params.sigma_w, params.sigma_a
        )
    else:
        transitions = transition_matrix(grid, params.phi, params.sigma)
    return grid, delta, transitions


def _per_leg_loglik(
    groups: tuple,
    n_legs: int,
    table: np.ndarray,
    delta: np.ndarray,
    kind: ModelKind,
    transitions,
    workers: int = 1,
) -> np.ndarray:
    """Log-likelihood of every leg, placed at its canonical position."""
    out = np.empty(n_legs)

    def run(group: _LengthGroup):
        out[group.positions] = _forward_group(group, table, delta, kind, transitions)

    if workers > 1 and len(groups) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, groups))
    else:
        for group in groups:
            run(group)
    return out


def _loglik_state_prepared(
    prepared: Prepared, params: ParamVector, spec: ModelSpec, workers: int = 1
) -> float:
    grid, delta, transitions = _state_operators(params, spec)
    table = _weight_table(params, grid)
    per_leg = _per_leg_loglik(
        prepared.groups, prepared.n_legs, table, delta, spec.kind, transitions, workers
    )
    return float(np.sum(per_leg))


def loglik_total(
    dataset: Dataset, params: ParamVector, spec: ModelSpec, *, workers: int = 1
) -> float:
    """Dataset log-likelihood: sum of independent per-leg log-likelihoods.

    Transition kernels, the initial vector and the observation weight table
    are built once per call and shared across legs.  The summation order is
    canonical (sorted by player id, leg id), so the result does not depend
    on the order of ``dataset.legs`` or on ``workers``.
    """
    params.validate_for(spec.kind)
    if params.n_players != dataset.n_players:
        raise ValueError(
            f"parameter vector covers {params.n_players} players, dataset has {dataset.n_players}"
        )
    if not spec.kind.has_state:
        return loglik_glm(dataset, params, spec.kind)
    prepared = prepare_dataset(dataset)
    return _loglik_state_prepared(prepared, params, spec, workers=workers)
