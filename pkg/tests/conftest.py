from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from hothand.core import Dataset, Leg, ModelKind, ParamVector


def random_state_params(rng: np.random.Generator, n_players: int, kind: ModelKind) -> ParamVector:
    """Draw a valid parameter vector with moderate magnitudes."""
    beta0 = rng.uniform(-1.5, 0.5, size=n_players)
    common = dict(
        beta0=beta0,
        beta1=rng.uniform(-0.5, 0.5),
        beta2=rng.uniform(-0.5, 0.5),
        mu_delta=rng.uniform(-0.5, 0.5),
        sigma_delta=rng.uniform(0.3, 1.2),
    )
    if kind is ModelKind.M3:
        return ParamVector(phi=rng.uniform(-0.9, 0.9), sigma=rng.uniform(0.3, 1.2), **common)
    if kind is ModelKind.M4:
        return ParamVector(
            phi_w=rng.uniform(-0.9, 0.9),
            phi_a=rng.uniform(-0.9, 0.9),
            sigma_w=rng.uniform(0.3, 1.2),
            sigma_a=rng.uniform(0.3, 1.2),
            **common,
        )
    return ParamVector(beta0=beta0, beta1=common["beta1"], beta2=common["beta2"])


def random_leg(rng: np.random.Generator, player: str, leg_id: str, T: int) -> Leg:
    return Leg(player_id=player, leg_id=leg_id, y=rng.integers(0, 2, size=T))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20170401)


@pytest.fixture
def small_dataset(rng) -> Dataset:
    """Three players, a handful of short legs."""
    legs = []
    for i, player in enumerate(["anderson", "price", "wright"]):
        for j in range(4):
            legs.append(random_leg(rng, player, f"L{j + 1:02d}", int(rng.integers(4, 10))))
    return Dataset.from_legs(legs)
