"""Independent reference implementations used to check the fast paths.

Everything here deliberately avoids the library's forward/Viterbi
recursions: likelihoods are exhaustive sums over all m^T discretized state
paths, decodings are exhaustive argmaxes, and censuses come from closed-form
products.  Slow but transparent.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from hothand.core import Leg, ModelKind, ModelSpec, ParamVector
from hothand.grid import build_grid, initial_vector, par_transition_pair, transition_matrix
from hothand.likelihood import leg_observation_matrix


def state_pieces(params: ParamVector, spec: ModelSpec):
    """Grid, initial vector and the per-step transition chooser."""
    grid = build_grid(spec.m, spec.b0, spec.bm)
    delta = initial_vector(grid, params.mu_delta, params.sigma_delta)
    if spec.kind is ModelKind.M4:
        within, across = par_transition_pair(
            grid, params.phi_w, params.phi_a, params.sigma_w, params.sigma_a
        )

        def gamma_for(t: int) -> np.ndarray:  # transition into 1-based throw t
            return across if (t - 1) % 3 == 0 else within

    else:
        single = transition_matrix(grid, params.phi, params.sigma)

        def gamma_for(t: int) -> np.ndarray:
            return single

    return grid, delta, gamma_for


def _path_probabilities(leg: Leg, params: ParamVector, spec: ModelSpec, player_index: int):
    """Joint probability of (y, path) for every one of the m^T state paths."""
    grid, delta, gamma_for = state_pieces(params, spec)
    W = leg_observation_matrix(leg, params, grid, player_index)
    T, m = leg.T, spec.m
    paths = np.array(list(itertools.product(range(m), repeat=T)), dtype=np.intp)
    p = delta[paths[:, 0]] * W[0][paths[:, 0]]
    for t in range(2, T + 1):
        gamma = gamma_for(t)
        p = p * gamma[paths[:, t - 2], paths[:, t - 1]] * W[t - 1][paths[:, t - 1]]
    return paths, p


def brute_force_leg_loglik(
    leg: Leg, params: ParamVector, spec: ModelSpec, player_index: int
) -> float:
    """Log-likelihood by exhaustive summation over all discretized paths."""
    _, p = _path_probabilities(leg, params, spec, player_index)
    return math.log(math.fsum(p.tolist()))


def enumerate_viterbi(
    leg: Leg, params: ParamVector, spec: ModelSpec, player_index: int
) -> np.ndarray:
    """Most probable path by exhaustive enumeration.

    Paths are generated in lexicographic order and compared strictly, so
    ties resolve to the lexicographically smallest maximizer.
    """
    paths, p = _path_probabilities(leg, params, spec, player_index)
    return paths[int(np.argmax(p))]


def glm_loglik_direct(dataset, params: ParamVector, kind: ModelKind) -> float:
    """Plain per-throw Bernoulli summation for M1/M2."""
    total = 0.0
    for leg in dataset.legs:
        p = dataset.player_index(leg.player_id)
        for t in range(1, leg.T + 1):
            d = (t - 1) % 3 + 1
            eta = float(params.beta0[p])
            if kind is not ModelKind.M1:
                if d == 2:
                    eta += params.beta1
                elif d == 3:
                    eta += params.beta2
            pi = 1.0 / (1.0 + math.exp(-eta))
            total += math.log(pi) if leg.y[t - 1] == 1 else math.log(1.0 - pi)
    return total


def pattern_product_probabilities(pi_by_position) -> np.ndarray:
    """P(pattern) for one player under position-independent throws.

    ``pi_by_position`` holds the success probabilities of the three turn
    positions; pattern index is 4*y1 + 2*y2 + y3.
    """
    p1, p2, p3 = pi_by_position
    out = np.empty(8)
    for idx in range(8):
        bits = ((idx >> 2) & 1, (idx >> 1) & 1, idx & 1)
        probs = (
            (p1 if bits[0] else 1.0 - p1),
            (p2 if bits[1] else 1.0 - p2),
            (p3 if bits[2] else 1.0 - p3),
        )
        out[idx] = probs[0] * probs[1] * probs[2]
    return out


def census_product_oracle(params: ParamVector, kind: ModelKind, template) -> np.ndarray:
    """Expected census under M1/M2 for the template's turn structure."""
    import math as _math

    weights = {}
    for leg in template.legs:
        n = (1 if leg.T >= 3 else 0) + (1 if leg.T >= 6 else 0)
        if n:
            weights[leg.player_id] = weights.get(leg.player_id, 0) + n
    total_turns = sum(weights.values())
    census = np.zeros(8)
    for player, n_turns in weights.items():
        p = template.player_index(player)
        pis = []
        for d in (1, 2, 3):
            eta = float(params.beta0[p])
            if kind is not ModelKind.M1:
                if d == 2:
                    eta += params.beta1
                elif d == 3:
                    eta += params.beta2
            pis.append(1.0 / (1.0 + _math.exp(-eta)))
        census += (n_turns / total_turns) * pattern_product_probabilities(pis)
    return census
