"""Latent-ability state-space models for binary throwing-success sequences.

A player's varying ability is a continuous autoregressive latent state
shifting the success logit; discretizing the state range turns the model
into a tractable finite-state chain whose likelihood, decoding and
goodness-of-fit machinery live here, together with synthetic-data
generation for validation without proprietary source data.
"""

from .core import (
    Dataset,
    Leg,
    ModelKind,
    ModelSpec,
    ParamVector,
    ThrowRecord,
    linear_predictor,
    success_probability,
    turn_position,
)
from .decode import DecodedLeg, decode_dataset, trajectory_report, viterbi, write_trajectory_csv
from .estimate import (
    AicRow,
    FitResult,
    InformationMatrixError,
    OptimizerSettings,
    aic_table,
    fit,
    observed_information_ci,
)
from .grid import Grid, build_grid, initial_vector, par_transition_pair, transition_matrix
from .io import ParseError, StructureError, load_binary, preprocess, read_raw_throws, save_binary
from .likelihood import (
    leg_observation_matrix,
    loglik_glm,
    loglik_leg_forward,
    loglik_total,
    observation_weights,
)
from .simulate import (
    PATTERNS,
    CensusReport,
    LegStructure,
    RecoveryReport,
    SequenceCensus,
    SimulationPlan,
    analytic_census,
    model_implied_census,
    recovery_experiment,
    sequence_census,
    simulate_dataset,
    spread_intercepts,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "Dataset",
    "Leg",
    "ModelKind",
    "ModelSpec",
    "ParamVector",
    "ThrowRecord",
    "linear_predictor",
    "success_probability",
    "turn_position",
    "Grid",
    "build_grid",
    "initial_vector",
    "transition_matrix",
    "par_transition_pair",
    "observation_weights",
    "leg_observation_matrix",
    "loglik_glm",
    "loglik_leg_forward",
    "loglik_total",
    "OptimizerSettings",
    "FitResult",
    "AicRow",
    "InformationMatrixError",
    "fit",
    "observed_information_ci",
    "aic_table",
    "DecodedLeg",
    "viterbi",
    "decode_dataset",
    "trajectory_report",
    "write_trajectory_csv",
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
    "ParseError",
    "StructureError",
    "read_raw_throws",
    "preprocess",
    "save_binary",
    "load_binary",
]
