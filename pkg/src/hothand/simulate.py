"""Synthetic data generation, sequence censuses and recovery experiments.

Simulation draws the latent process exactly (continuous normal draws, no
grid), while fitting discretizes, so simulate-then-fit round trips test
the approximation end to end.  All randomness flows from one integer seed;
replication k of a multi-replication run uses ``SeedSequence(seed).spawn``
child k, and a given plan always reproduces the same dataset bit for bit.

The census tabulates the eight possible within-turn outcome patterns
(000 ... 111) over the first two complete turns of every leg: legs shorter
than 3 throws contribute nothing, legs with 3-5 throws contribute their
first turn only.
"""

from __future__ import annotations

from dataclasses import dataclass
import numpy as np
from scipy.special import expit

from .core import Dataset, Leg, ModelKind, ParamVector, _clip_open_unit
from .estimate import FitResult, OptimizerSettings, fit, parameter_names

__all__ = [
    "PATTERNS",
    "LegStructure",
    "SimulationPlan",
    "SequenceCensus",
    "CensusReport",
    "RecoveryReport",
    "simulate_dataset",
    "sequence_census",
    "analytic_census",
    "model_implied_census",
    "recovery_experiment",
    "spread_intercepts",
]

PATTERNS = ("000", "001", "010", "011", "100", "101", "110", "111")


def spread_intercepts(n_players: int, low: float = -0.857, high: float = -0.135) -> np.ndarray:
    """Evenly spaced intercepts over a realistic elite-player range.

    The default bounds correspond to first-dart success probabilities of
    roughly 0.30 to 0.47.
    """
    return np.linspace(low, high, n_players)


@dataclass(frozen=True)
class LegStructure:
    """Shape of a generated dataset: players, legs and leg-length range."""

    n_players: int = 20
    legs_per_player: int = 150
    length_min: int = 7
    length_max: int = 12

    def __post_init__(self):
        if self.n_players < 1 or self.legs_per_player < 1:
            raise ValueError("structure must contain at least one player and one leg")
        if not 1 <= self.length_min <= self.length_max:
            raise ValueError(
                f"leg length range [{self.length_min}, {self.length_max}] is invalid"
            )

    def player_ids(self) -> list:
        width = max(2, len(str(self.n_players)))
        return [f"P{i + 1:0{width}d}" for i in range(self.n_players)]


@dataclass(frozen=True, eq=False)
class SimulationPlan:
    """Everything needed to generate one synthetic dataset.

    Exactly one of ``structure`` (generate ids and leg lengths) or
    ``template`` (mirror an existing dataset's players and leg lengths
    exactly) must be given.
    """

    seed: object  # int or numpy SeedSequence
    kind: ModelKind
    params: ParamVector
    structure: LegStructure | None = None
    template: Dataset | None = None

    def __post_init__(self):
        if (self.structure is None) == (self.template is None):
            raise ValueError("exactly one of structure or template must be provided")
        self.params.validate_for(self.kind)
        n_players = (
            self.structure.n_players if self.structure is not None else self.template.n_players
        )
        if self.params.n_players != n_players:
            raise ValueError(
                f"params cover {self.params.n_players} players but the plan needs {n_players}"
            )


def _leg_shapes(plan: SimulationPlan, rng: np.random.Generator) -> list:
    """(player_id, leg_id, length) triples; lengths drawn first in plan order."""
    if plan.template is not None:
        return [(leg.player_id, leg.leg_id, leg.T) for leg in plan.template.legs]
    structure = plan.structure
    players = structure.player_ids()
    lengths = rng.integers(
        structure.length_min,
        structure.length_max + 1,
        size=structure.n_players * structure.legs_per_player,
    )
    shapes = []
    k = 0
    width = max(3, len(str(structure.legs_per_player)))
    for player in players:
        for j in range(structure.legs_per_player):
            shapes.append((player, f"L{j + 1:0{width}d}", int(lengths[k])))
            k += 1
    return shapes


def _simulate_state_path(
    kind: ModelKind, params: ParamVector, T: int, eps: np.ndarray
) -> np.ndarray:
    s = np.empty(T)
    s[0] = params.mu_delta + params.sigma_delta * eps[0]
    if kind is ModelKind.M3:
        for i in range(1, T):
            s[i] = params.phi * s[i - 1] + params.sigma * eps[i]
    else:
        for i in range(1, T):
            if i % 3 == 0:  # transition into throw i+1 = 4, 7, 10, ...
                s[i] = params.phi_a * s[i - 1] + params.sigma_a * eps[i]
            else:
                s[i] = params.phi_w * s[i - 1] + params.sigma_w * eps[i]
    return s


def simulate_dataset(plan: SimulationPlan) -> Dataset:
    """Generate one dataset under the plan's model; reproducible from the seed.

    Per leg, the latent state starts from its initial normal law and follows
    the exact (periodic) autoregression; outcomes are Bernoulli draws with
    the inverse-logit success probability.  State-free models skip the state
    draws entirely.
    """
    rng = np.random.default_rng(plan.seed)
    shapes = _leg_shapes(plan, rng)
    params = plan.params
    kind = plan.kind
    players = sorted({player for player, _, _ in shapes})
    player_index = {p: i for i, p in enumerate(players)}
    dummy = np.array([0.0, params.beta1, params.beta2])

    legs = []
    for player, leg_id, T in shapes:
        p = player_index[player]
        positions = np.arange(T) % 3
        eta = (params.beta0[p] + dummy[positions])
        if kind.has_state:
            eps = rng.standard_normal(T)
            eta = eta + _simulate_state_path(kind, params, T, eps)
        pi = _clip_open_unit(expit(eta))
        y = (rng.random(T) < pi).astype(np.int8)
        legs.append(Leg(player_id=player, leg_id=leg_id, y=y))
    return Dataset.from_legs(legs)


@dataclass(frozen=True, eq=False)
class SequenceCensus:
    """Relative frequencies of the eight within-turn outcome patterns."""

    proportions: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        for name in ("proportions", "counts"):
            arr = np.asarray(getattr(self, name))
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def n_turns(self) -> int:
        return int(self.counts.sum())

    def as_dict(self) -> dict:
        return {p: float(v) for p, v in zip(PATTERNS, self.proportions)}


def _pattern_indices(dataset: Dataset) -> np.ndarray:
    indices = []
    for leg in dataset.legs:
        if leg.T >= 3:
            y = leg.y
            indices.append(4 * y[0] + 2 * y[1] + y[2])
            if leg.T >= 6:
                indices.append(4 * y[3] + 2 * y[4] + y[5])
    return np.asarray(indices, dtype=np.intp)


def sequence_census(dataset: Dataset) -> SequenceCensus:
    """Census over the first two complete turns of every leg."""
    indices = _pattern_indices(dataset)
    if indices.size == 0:
        raise ValueError("dataset contains no complete turn (no leg with >= 3 throws)")
    counts = np.bincount(indices, minlength=8)
    return SequenceCensus(proportions=counts / counts.sum(), counts=counts)


def analytic_census(params: ParamVector, kind: ModelKind, template: Dataset) -> np.ndarray:
    """Exact pattern probabilities for the state-free models.

    Under M1/M2 the three throws of a turn are independent with
    position-specific success probabilities, so each pattern's probability
    is a product; the dataset-level census is the average over contributing
    turns, weighted by how many turns each player contributes in the
    template's structure.
    """
    if kind.has_state:
        raise ValueError("analytic census exists only for the state-free models m1/m2")
    params.validate_for(kind)
    if kind is ModelKind.M1:
        dummy = np.zeros(3)
    else:
        dummy = np.array([0.0, params.beta1, params.beta2])
    pi = _clip_open_unit(expit(params.beta0[:, None] + dummy[None, :]))  # (P, 3)

    weights = np.zeros(params.n_players)
    for leg in template.legs:
        p = template.player_index(leg.player_id)
        if leg.T >= 3:
            weights[p] += 1
        if leg.T >= 6:
            weights[p] += 1
    if weights.sum() == 0:
        raise ValueError("template contains no complete turn")
    weights = weights / weights.sum()

    census = np.zeros(8)
    for idx in range(8):
        bits = np.array([(idx >> 2) & 1, (idx >> 1) & 1, idx & 1])
        per_player = np.prod(np.where(bits[None, :] == 1, pi, 1.0 - pi), axis=1)
        census[idx] = float(weights @ per_player)
    return census


@dataclass(frozen=True, eq=False)
class CensusReport:
    """Monte Carlo average census with per-pattern standard errors."""

    mean: np.ndarray
    mc_se: np.ndarray
    per_replication: np.ndarray
    replications: int
    seed: int

    def as_dict(self) -> dict:
        return {
            "patterns": list(PATTERNS),
            "mean": [float(v) for v in self.mean],
            "mc_se": [float(v) for v in self.mc_se],
            "replications": self.replications,
            "seed": self.seed,
        }

    def to_csv(self, path) -> None:
        from .io import atomic_write_text

        lines = ["pattern,mean,mc_se"]
        for k, pattern in enumerate(PATTERNS):
            lines.append(f"{pattern},{self.mean[k]!r},{self.mc_se[k]!r}")
        atomic_write_text(path, "\n".join(lines) + "\n")


def model_implied_census(
    fit_or_params,
    template: Dataset,
    replications: int,
    seed: int,
    *,
    kind: ModelKind | None = None,
) -> CensusReport:
    """Average census over mirror-mode simulations from a (fitted) model.

    Accepts a :class:`FitResult` or a bare parameter vector plus ``kind``.
    Replication k simulates a dataset structured exactly like the template,
    using spawned child seed k; the report carries the per-pattern Monte
    Carlo standard error of the mean.
    """
    if replications < 1:
        raise ValueError("replications must be >= 1")
    if isinstance(fit_or_params, FitResult):
        params = fit_or_params.params_hat
        kind = fit_or_params.kind
    else:
        params = fit_or_params
        if kind is None:
            raise ValueError("kind is required when passing a bare parameter vector")
    children = np.random.SeedSequence(seed).spawn(replications)
    rows = np.empty((replications, 8))
    for k in range(replications):
        plan = SimulationPlan(seed=children[k], kind=kind, params=params, template=template)
        rows[k] = sequence_census(simulate_dataset(plan)).proportions
    mean = rows.mean(axis=0)
    if replications > 1:
        mc_se = rows.std(axis=0, ddof=1) / np.sqrt(replications)
    else:
        mc_se = np.full(8, np.nan)
    return CensusReport(
        mean=mean, mc_se=mc_se, per_replication=rows, replications=replications, seed=seed
    )


# ---------------------------------------------------------------------------
# Parameter recovery


@dataclass(frozen=True)
class RecoveryRow:
    name: str
    truth: float
    mean_estimate: float
    bias: float
    rmse: float
    ci_coverage: float | None
    n_ci: int


@dataclass(frozen=True, eq=False)
class RecoveryReport:
    """Bias/RMSE/coverage summary of a simulate-then-fit study."""

    rows: tuple
    fits: tuple
    n_converged: int
    replications: int
    failures: tuple

    def row(self, name: str) -> RecoveryRow:
        for r in self.rows:
            if r.name == name:
                return r
        raise KeyError(name)

    def as_dict(self) -> dict:
        return {
            "replications": self.replications,
            "n_converged": self.n_converged,
            "failures": list(self.failures),
            "parameters": [
                {
                    "name": r.name,
                    "truth": r.truth,
                    "mean_estimate": r.mean_estimate,
                    "bias": r.bias,
                    "rmse": r.rmse,
                    "ci_coverage": r.ci_coverage,
                    "n_ci": r.n_ci,
                }
                for r in self.rows
            ],
        }

    def to_csv(self, path) -> None:
        from .io import atomic_write_text

        lines = ["name,truth,mean_estimate,bias,rmse,ci_coverage,n_ci"]
        for r in self.rows:
            coverage = "" if r.ci_coverage is None else repr(r.ci_coverage)
            lines.append(
                f"{r.name},{r.truth!r},{r.mean_estimate!r},{r.bias!r},{r.rmse!r},"
                f"{coverage},{r.n_ci}"
            )
        atomic_write_text(path, "\n".join(lines) + "\n")


def recovery_experiment(
    true_params: ParamVector,
    spec,
    structure: LegStructure,
    replications: int,
    seed: int,
    settings: OptimizerSettings | None = None,
) -> RecoveryReport:
    """Simulate under known truth, refit, and summarize recovery quality.

    Every replication is reported; non-converged fits are listed in
    ``failures`` and excluded from the estimate summaries but never hidden.
    """
    if replications < 1:
        raise ValueError("replications must be >= 1")
    true_params.validate_for(spec.kind)
    children = np.random.SeedSequence(seed).spawn(replications)
    players = tuple(structure.player_ids())
    names = parameter_names(spec.kind, players)
    truth_values = _natural_vector(true_params, spec.kind)

    fits = []
    failures = []
    for k in range(replications):
        plan = SimulationPlan(
            seed=children[k], kind=spec.kind, params=true_params, structure=structure
        )
        dataset = simulate_dataset(plan)
        result = fit(dataset, spec, settings=settings)
        fits.append(result)
        if not result.converged:
            failures.append(f"replication {k}: optimizer did not converge")

    converged = [f for f in fits if f.converged]
    rows = []
    for i, name in enumerate(names):
        estimates = np.array([_natural_vector(f.params_hat, spec.kind)[i] for f in converged])
        covered = []
        for f in converged:
            if f.ci is None or f.ci.get(name) is None:
                continue
            lo, hi = f.ci[name]
            covered.append(lo <= truth_values[i] <= hi)
        rows.append(
            RecoveryRow(
                name=name,
                truth=float(truth_values[i]),
                mean_estimate=float(estimates.mean()) if estimates.size else float("nan"),
                bias=float(estimates.mean() - truth_values[i]) if estimates.size else float("nan"),
                rmse=float(np.sqrt(np.mean((estimates - truth_values[i]) ** 2)))
                if estimates.size
                else float("nan"),
                ci_coverage=float(np.mean(covered)) if covered else None,
                n_ci=len(covered),
            )
        )
    return RecoveryReport(
        rows=tuple(rows),
        fits=tuple(fits),
        n_converged=len(converged),
        replications=replications,
        failures=tuple(failures),
    )


def _natural_vector(params: ParamVector, kind: ModelKind) -> np.ndarray:
    from .estimate import _STRUCTURAL

    values = [float(b) for b in params.beta0]
    values.extend(float(getattr(params, name)) for name in _STRUCTURAL[kind])
    return np.asarray(values)
