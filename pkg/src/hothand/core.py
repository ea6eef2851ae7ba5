"""Shared data model: throws, legs, datasets, model specs, parameter vectors.

A leg is one race from 501 points; its throws are grouped into turns of
three darts.  All downstream modules (likelihood, estimation, decoding,
simulation) consume the immutable types defined here.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, fields, replace
from enum import Enum
from functools import cached_property
from typing import Iterable

import numpy as np
from scipy.special import expit

__all__ = [
    "ModelKind",
    "ModelSpec",
    "ParamVector",
    "ThrowRecord",
    "Leg",
    "Dataset",
    "turn_position",
    "success_probability",
    "linear_predictor",
]

# Smallest/largest values representable strictly inside (0, 1).  Probabilities
# are clipped into this open interval so logs never produce -inf/NaN.
_P_FLOOR = 5e-324
_P_CEIL = float(np.nextafter(1.0, 0.0))


def _clip_open_unit(p):
    """Clip probabilities into the open interval (0, 1)."""
    return np.clip(p, _P_FLOOR, _P_CEIL)


class ModelKind(Enum):
    """The four nested model variants, ordered by flexibility."""

    M1 = "m1"
    M2 = "m2"
    M3 = "m3"
    M4 = "m4"

    @classmethod
    def from_string(cls, label: str) -> "ModelKind":
        try:
            return cls(label.strip().lower())
        except ValueError:
            raise ValueError(
                f"unknown model kind {label!r}; expected one of m1, m2, m3, m4"
            ) from None

    @property
    def has_state(self) -> bool:
        """Whether the model carries a latent ability state process."""
        return self in (ModelKind.M3, ModelKind.M4)

    @property
    def uses_position_dummies(self) -> bool:
        return self is not ModelKind.M1

    @property
    def n_structural(self) -> int:
        """Number of parameters beyond the per-player intercepts."""
        return {"m1": 0, "m2": 2, "m3": 6, "m4": 8}[self.value]

    @property
    def state_process(self) -> str:
        """Label of the latent state process for comparison tables."""
        return {"m1": "-", "m2": "-", "m3": "AR(1)", "m4": "PAR(1)"}[self.value]

    @property
    def description(self) -> str:
        return {
            "m1": "player-specific intercepts only",
            "m2": "intercepts + within-turn position dummies",
            "m3": "position dummies + AR(1) latent ability state",
            "m4": "position dummies + periodic AR(1) state with separate "
            "within-turn and across-turn dynamics",
        }[self.value]


def turn_position(t: int) -> int:
    """Position (1, 2 or 3) of throw ``t`` within its turn of three darts.

    Throws are indexed from 1 within a leg; positions cycle 1, 2, 3, 1, ...
    """
    if t < 1 or int(t) != t:
        raise ValueError(f"throw index must be a positive integer, got {t!r}")
    return (int(t) - 1) % 3 + 1


def success_probability(eta: float) -> float:
    """Inverse-logit success probability, clipped strictly inside (0, 1).

    The clip guards the log-likelihood path against underflow to exactly 0
    or 1 at extreme predictor values.
    """
    if not np.isfinite(eta):
        raise ValueError(f"linear predictor must be finite, got {eta!r}")
    return float(_clip_open_unit(expit(eta)))


def linear_predictor(params: "ParamVector", player_index: int, D: int, s: float) -> float:
    """Success logit for a player at turn position ``D`` and latent level ``s``.

    Computes ``beta0[player] + beta1*1{D=2} + beta2*1{D=3} + s``.  Callers
    pass ``s = 0`` for the state-free models.
    """
    if D not in (1, 2, 3):
        raise ValueError(f"turn position must be 1, 2 or 3, got {D!r}")
    if not 0 <= player_index < params.n_players:
        raise ValueError(
            f"player index {player_index} out of range for {params.n_players} players"
        )
    base = float(params.beta0[player_index])
    if D == 2:
        base = base + params.beta1
    elif D == 3:
        base = base + params.beta2
    return base + s


@dataclass(frozen=True)
class ThrowRecord:
    """One dart from the raw log.

    ``throw_index`` is 1-based within the (player, leg) group; ``score_before``
    is the points remaining before the dart was thrown.
    """

    player_id: str
    leg_id: str
    throw_index: int
    segment: str
    score_before: int

    def __post_init__(self):
        if self.throw_index < 1:
            raise ValueError(f"throw_index must be >= 1, got {self.throw_index}")
        if not 0 <= self.score_before <= 501:
            raise ValueError(
                f"score_before must lie in [0, 501], got {self.score_before}"
            )


@dataclass(frozen=True, eq=False)
class Leg:
    """Binary success sequence of one player within one leg.

    ``y`` holds bits y_1..y_T after truncation; turn positions are derived
    from the throw index alone and never stored.
    """

    player_id: str
    leg_id: str
    y: np.ndarray

    def __post_init__(self):
        y = np.array(self.y, dtype=np.int8, copy=True).reshape(-1)
        if y.size < 1:
            raise ValueError("a leg must contain at least one throw")
        if not np.isin(y, (0, 1)).all():
            raise ValueError(f"leg bits must be 0/1, got {np.unique(y)}")
        y.flags.writeable = False
        object.__setattr__(self, "y", y)

    @property
    def T(self) -> int:
        return int(self.y.size)

    def turn_positions(self) -> np.ndarray:
        """Turn position D_t for every throw, derived from the index."""
        return np.arange(self.T) % 3 + 1

    def bits(self) -> str:
        return "".join(str(int(b)) for b in self.y)

    def __eq__(self, other):
        if not isinstance(other, Leg):
            return NotImplemented
        return (
            self.player_id == other.player_id
            and self.leg_id == other.leg_id
            and np.array_equal(self.y, other.y)
        )

    def __repr__(self):
        return f"Leg({self.player_id!r}, {self.leg_id!r}, {self.bits()!r})"


@dataclass(frozen=True, eq=False)
class Dataset:
    """Collection of legs plus the fixed player index.

    Players are ordered lexicographically by id so that intercept indices
    are stable across runs regardless of leg order.
    """

    legs: tuple
    players: tuple

    @classmethod
    def from_legs(cls, legs: Iterable[Leg]) -> "Dataset":
        legs = tuple(legs)
        players = tuple(sorted({leg.player_id for leg in legs}))
        return cls(legs=legs, players=players)

    def __post_init__(self):
        if not self.legs:
            raise ValueError("dataset must contain at least one leg")
        if list(self.players) != sorted(set(self.players)):
            raise ValueError("players must be a sorted tuple of distinct ids")
        known = set(self.players)
        for leg in self.legs:
            if leg.player_id not in known:
                raise ValueError(f"leg references unknown player {leg.player_id!r}")

    @cached_property
    def _player_index(self) -> dict:
        return {p: i for i, p in enumerate(self.players)}

    def player_index(self, player_id: str) -> int:
        try:
            return self._player_index[player_id]
        except KeyError:
            raise ValueError(f"unknown player {player_id!r}") from None

    @property
    def n_players(self) -> int:
        return len(self.players)

    @property
    def n_legs(self) -> int:
        return len(self.legs)

    @property
    def n_throws(self) -> int:
        return sum(leg.T for leg in self.legs)

    def digest(self) -> str:
        """Content hash over the sorted leg records (order-independent)."""
        lines = sorted(
            f"{leg.player_id}\t{leg.leg_id}\t{leg.bits()}" for leg in self.legs
        )
        h = hashlib.sha256("\n".join(lines).encode("utf-8"))
        return f"sha256:{h.hexdigest()}"

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return self.players == other.players and self.legs == other.legs


@dataclass(frozen=True)
class ModelSpec:
    """Which model to fit plus the state-space discretization settings.

    The grid fields are ignored by the state-free models M1/M2 but are
    validated regardless.
    """

    kind: ModelKind
    m: int = 150
    b0: float = -2.5
    bm: float = 2.5

    def __post_init__(self):
        if self.m < 2:
            raise ValueError(f"grid size m must be >= 2, got {self.m}")
        if not self.b0 < self.bm:
            raise ValueError(f"grid bounds must satisfy b0 < bm, got [{self.b0}, {self.bm}]")


# Parameter fields required by each model beyond the intercepts.
_REQUIRED_FIELDS = {
    ModelKind.M1: (),
    ModelKind.M2: (),
    ModelKind.M3: ("phi", "sigma", "mu_delta", "sigma_delta"),
    ModelKind.M4: ("phi_w", "phi_a", "sigma_w", "sigma_a", "mu_delta", "sigma_delta"),
}


@dataclass(frozen=True, eq=False)
class ParamVector:
    """Model parameters on the natural scale.

    ``beta0`` is aligned with ``Dataset.players``.  Fields not used by a
    given model kind stay ``None`` and are ignored.  Autoregression
    coefficients must lie strictly inside (-1, 1) and scale parameters must
    be positive; both are enforced at construction.
    """

    beta0: np.ndarray
    beta1: float = 0.0
    beta2: float = 0.0
    phi: float | None = None
    sigma: float | None = None
    phi_w: float | None = None
    phi_a: float | None = None
    sigma_w: float | None = None
    sigma_a: float | None = None
    mu_delta: float | None = None
    sigma_delta: float | None = None

    def __post_init__(self):
        beta0 = np.array(self.beta0, dtype=float, copy=True).reshape(-1)
        if beta0.size < 1:
            raise ValueError("beta0 must contain at least one intercept")
        if not np.isfinite(beta0).all():
            raise ValueError("beta0 entries must be finite")
        beta0.flags.writeable = False
        object.__setattr__(self, "beta0", beta0)
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name != "beta0" and value is not None and not np.isfinite(value):
                raise ValueError(f"{f.name} must be finite, got {value}")
        for name in ("phi", "phi_w", "phi_a"):
            value = getattr(self, name)
            if value is not None and not abs(value) < 1.0:
                raise ValueError(f"{name} must satisfy |{name}| < 1, got {value}")
        for name in ("sigma", "sigma_w", "sigma_a", "sigma_delta"):
            value = getattr(self, name)
            if value is not None and not value > 0.0:
                raise ValueError(f"{name} must be positive, got {value}")

    @property
    def n_players(self) -> int:
        return int(self.beta0.size)

    def validate_for(self, kind: ModelKind) -> "ParamVector":
        """Check that every field the model needs is present; returns self."""
        missing = [f for f in _REQUIRED_FIELDS[kind] if getattr(self, f) is None]
        if missing:
            raise ValueError(
                f"parameters for {kind.value} are missing fields: {', '.join(missing)}"
            )
        return self

    def replace(self, **changes) -> "ParamVector":
        return replace(self, **changes)

    def to_dict(self, players: tuple | None = None) -> dict:
        """JSON-friendly mapping; intercepts keyed by player id when given."""
        if players is not None and len(players) != self.n_players:
            raise ValueError("players length does not match beta0")
        if players is None:
            beta0 = [float(b) for b in self.beta0]
        else:
            beta0 = {p: float(b) for p, b in zip(players, self.beta0)}
        out = {"beta0": beta0}
        for f in fields(self):
            if f.name == "beta0":
                continue
            value = getattr(self, f.name)
            if value is not None:
                out[f.name] = float(value)
        return out

    @classmethod
    def from_dict(cls, data: dict, players: tuple | None = None) -> "ParamVector":
        data = dict(data)
        beta0 = data.pop("beta0")
        if isinstance(beta0, dict):
            if players is None:
                players = tuple(sorted(beta0))
            try:
                beta0 = [beta0[p] for p in players]
            except KeyError as exc:
                raise ValueError(f"beta0 is missing player {exc.args[0]!r}") from None
        return cls(beta0=np.asarray(beta0, dtype=float), **data)

    def __eq__(self, other):
        if not isinstance(other, ParamVector):
            return NotImplemented
        if not np.array_equal(self.beta0, other.beta0):
            return False
        return all(
            getattr(self, f.name) == getattr(other, f.name)
            for f in fields(self)
            if f.name != "beta0"
        )
