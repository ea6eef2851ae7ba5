"""Maximum likelihood estimation, observed-information intervals, AIC tables.

Parameters are optimized on an unconstrained working scale: intercepts and
location parameters enter as-is, autoregression coefficients through tanh
(so |phi| < 1 always holds) and scale parameters through exp (so they stay
positive).  The optimizer is quasi-Newton (L-BFGS-B) with central-difference
gradients; if it fails, a derivative-free simplex pass is run from the best
point and recorded in the trace.

Because legs are independent and each leg involves exactly one player's
intercept, finite differences are organized per block: perturbing an
intercept only requires re-evaluating that player's legs, and the Hessian
cross terms between different players' intercepts are exactly zero.  This
gives the same derivative estimates as the plain schemes at a fraction of
the cost; the plain schemes are kept (``forward_difference_gradient``,
``central_difference_gradient``, ``numeric_hessian``) and serve as
independent checks in the test suite.

Confidence intervals come from the observed information: the negative
log-likelihood Hessian at the maximum, inverted on the working scale, with
the +-1.96-standard-error interval mapped back through the monotone
transforms.  Hessian steps follow h_k = max(step, step*|theta_k|) with
step = 1e-4, central differences, so intervals are reproducible.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.special import logit

from .core import Dataset, ModelKind, ModelSpec, ParamVector
from .likelihood import (
    Prepared,
    _glm_from_counts,
    _loglik_state_prepared,
    _per_leg_loglik,
    _state_operators,
    _weight_table,
    prepare_dataset,
)

__all__ = [
    "OptimizerSettings",
    "FitResult",
    "AicRow",
    "InformationMatrixError",
    "fit",
    "observed_information_ci",
    "aic_table",
    "pack_parameters",
    "unpack_parameters",
    "parameter_names",
    "count_parameters",
    "build_objective",
    "forward_difference_gradient",
    "central_difference_gradient",
    "numeric_hessian",
]

# Intercepts of players with all-0 or all-1 outcomes are clamped here
# instead of diverging to +-infinity.
_DEGENERATE_CLAMP = 10.0

_Z_95 = 1.96

# Structural (non-intercept) parameters per model, in working-vector order,
# with their working-scale transform.
_STRUCTURAL: dict = {
    ModelKind.M1: (),
    ModelKind.M2: ("beta1", "beta2"),
    ModelKind.M3: ("beta1", "beta2", "phi", "sigma", "mu_delta", "sigma_delta"),
    ModelKind.M4: (
        "beta1",
        "beta2",
        "phi_w",
        "phi_a",
        "sigma_w",
        "sigma_a",
        "mu_delta",
        "sigma_delta",
    ),
}

_TRANSFORMS: dict = {
    "beta1": "identity",
    "beta2": "identity",
    "mu_delta": "identity",
    "phi": "tanh",
    "phi_w": "tanh",
    "phi_a": "tanh",
    "sigma": "exp",
    "sigma_w": "exp",
    "sigma_a": "exp",
    "sigma_delta": "exp",
}

_DYNAMIC_DEFAULTS = {"phi": 0.3, "phi_w": 0.3, "phi_a": 0.3, "sigma": 0.5, "sigma_w": 0.5, "sigma_a": 0.5, "mu_delta": 0.0, "sigma_delta": 0.7}


class InformationMatrixError(ValueError):
    """Observed information matrix is not positive definite."""

    def __init__(self, eigenvalue: float):
        self.eigenvalue = float(eigenvalue)
        super().__init__(
            f"observed information matrix is not positive definite "
            f"(smallest eigenvalue {eigenvalue:.6g}); confidence intervals unavailable"
        )


# ---------------------------------------------------------------------------
# Working-scale transform


# tanh saturates to exactly +-1 beyond |x| ~ 19 and exp under/overflows for
# |x| beyond ~745; natural values are clamped just inside the open parameter
# space so that any working-scale point the optimizer visits stays valid.
_PHI_CEIL = float(np.nextafter(1.0, 0.0))
_SIGMA_FLOOR = 5e-324
_SIGMA_CEIL = 1e300


def _to_working(name: str, value: float) -> float:
    kind = _TRANSFORMS[name]
    if kind == "identity":
        return float(value)
    if kind == "tanh":
        return float(np.arctanh(value))
    return float(np.log(value))


def _to_natural(name: str, value: float) -> float:
    kind = _TRANSFORMS[name]
    if kind == "identity":
        return float(value)
    if kind == "tanh":
        return float(np.clip(np.tanh(value), -_PHI_CEIL, _PHI_CEIL))
    with np.errstate(over="ignore"):
        return float(np.clip(np.exp(value), _SIGMA_FLOOR, _SIGMA_CEIL))


def count_parameters(kind: ModelKind, n_players: int) -> int:
    """Free parameter count: P, P+2, P+6 or P+8."""
    return n_players + kind.n_structural


def parameter_names(kind: ModelKind, players: Sequence[str]) -> list:
    """Working-vector coordinate names: intercepts first, then structure."""
    return [f"beta0[{p}]" for p in players] + list(_STRUCTURAL[kind])


def pack_parameters(params: ParamVector, kind: ModelKind) -> np.ndarray:
    """Map a parameter vector to the unconstrained working scale."""
    params.validate_for(kind)
    theta = list(params.beta0)
    for name in _STRUCTURAL[kind]:
        theta.append(_to_working(name, getattr(params, name)))
    return np.array(theta, dtype=float)


def unpack_parameters(theta: np.ndarray, kind: ModelKind, n_players: int) -> ParamVector:
    """Inverse of :func:`pack_parameters`."""
    theta = np.asarray(theta, dtype=float)
    expected = count_parameters(kind, n_players)
    if theta.shape != (expected,):
        raise ValueError(f"expected a vector of length {expected}, got shape {theta.shape}")
    kwargs = {}
    for offset, name in enumerate(_STRUCTURAL[kind]):
        kwargs[name] = _to_natural(name, theta[n_players + offset])
    return ParamVector(beta0=theta[:n_players], **kwargs)


# ---------------------------------------------------------------------------
# Finite differences (plain schemes)


def forward_difference_gradient(fun: Callable, x: np.ndarray, *, step: float = 1e-6) -> np.ndarray:
    """Plain forward-difference gradient with step h_k = step*max(1, |x_k|)."""
    x = np.asarray(x, dtype=float)
    h = step * np.maximum(1.0, np.abs(x))
    f0 = fun(x)
    g = np.empty(x.size)
    for k in range(x.size):
        xk = x.copy()
        xk[k] += h[k]
        g[k] = (fun(xk) - f0) / h[k]
    return g


def central_difference_gradient(fun: Callable, x: np.ndarray, *, step: float = 1e-4) -> np.ndarray:
    """Plain central-difference gradient with step h_k = max(step, step*|x_k|)."""
    x = np.asarray(x, dtype=float)
    h = np.maximum(step, step * np.abs(x))
    g = np.empty(x.size)
    for k in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[k] += h[k]
        xm[k] -= h[k]
        g[k] = (fun(xp) - fun(xm)) / (2.0 * h[k])
    return g


def numeric_hessian(fun: Callable, x: np.ndarray, *, step: float = 1e-4) -> np.ndarray:
    """Central-difference Hessian with step h_k = max(step, step*|x_k|)."""
    x = np.asarray(x, dtype=float)
    n = x.size
    h = np.maximum(step, step * np.abs(x))
    f0 = fun(x)

    def at(**offsets):
        xk = x.copy()
        for idx, mult in offsets.items():
            xk[int(idx)] += mult * h[int(idx)]
        return fun(xk)

    H = np.empty((n, n))
    fp = np.empty(n)
    fm = np.empty(n)
    for i in range(n):
        fp[i] = at(**{str(i): +1})
        fm[i] = at(**{str(i): -1})
        H[i, i] = (fp[i] - 2.0 * f0 + fm[i]) / h[i] ** 2
    for i in range(n):
        for j in range(i + 1, n):
            fpp = at(**{str(i): +1, str(j): +1})
            fpm = at(**{str(i): +1, str(j): -1})
            fmp = at(**{str(i): -1, str(j): +1})
            fmm = at(**{str(i): -1, str(j): -1})
            H[i, j] = H[j, i] = (fpp - fpm - fmp + fmm) / (4.0 * h[i] * h[j])
    return H


# ---------------------------------------------------------------------------
# Objective


@dataclass
class OptimizerSettings:
    """Tolerances and cost knobs for :func:`fit`.

    ``gradient_tol`` is the infinity-norm gradient threshold, ``step_tol``
    the relative objective-decrease threshold; the first of the two to be
    met stops the quasi-Newton loop.
    """

    gradient_step: float = 1e-5
    gradient_tol: float = 1e-5
    step_tol: float = 1e-9
    max_iterations: int = 2000
    hessian_step: float = 1e-4
    workers: int = 1
    compute_ci: bool = True


class _Objective:
    """Negative log-likelihood with block-structured finite differences.

    Coordinate k < P is the intercept of player k and only touches that
    player's legs and that player's row of the observation weight table;
    the remaining coordinates are global.  ``value`` uses the full
    length-grouped layout, ``player_value`` the per-player restriction.
    """

    def __init__(self, prepared: Prepared, spec: ModelSpec, settings: OptimizerSettings):
        self.prepared = prepared
        self.spec = spec
        self.kind = spec.kind
        self.settings = settings
        self.n_players = prepared.dataset.n_players
        self.n_coords = count_parameters(spec.kind, self.n_players)
        self.global_coords = list(range(self.n_players, self.n_coords))

    # -- evaluation ---------------------------------------------------

    def _operators(self, theta: np.ndarray):
        """State operators and weight table for one working-scale point."""
        params = unpack_parameters(theta, self.kind, self.n_players)
        grid, delta, transitions = _state_operators(params, self.spec)
        return delta, transitions, _weight_table(params, grid)

    def value(self, theta: np.ndarray) -> float:
        params = unpack_parameters(theta, self.kind, self.n_players)
        if not self.kind.has_state:
            return -_glm_from_counts(self.prepared.counts, params, self.kind)
        return -_loglik_state_prepared(
            self.prepared, params, self.spec, workers=self.settings.workers
        )

    def _player_sum(self, p: int, delta, transitions, table) -> float:
        """Log-likelihood over player ``p``'s legs, in canonical leg order."""
        groups = self.prepared.player_views[p]
        n_legs = int(self.prepared.player_leg_counts[p])
        per_leg = _per_leg_loglik(groups, n_legs, table, delta, self.kind, transitions, 1)
        return float(np.sum(per_leg))

    def player_value(self, theta: np.ndarray, p: int) -> float:
        """Negative log-likelihood restricted to the legs of player ``p``."""
        params = unpack_parameters(theta, self.kind, self.n_players)
        if not self.kind.has_state:
            counts = np.zeros_like(self.prepared.counts)
            counts[p] = self.prepared.counts[p]
            return -_glm_from_counts(counts, params, self.kind)
        delta, transitions, table = self._operators(theta)
        return -self._player_sum(p, delta, transitions, table)

    # -- derivatives ----------------------------------------------------

    def gradient(self, theta: np.ndarray) -> np.ndarray:
        return self.value_and_gradient(theta)[1]

    def value_and_gradient(self, theta: np.ndarray):
        """Central-difference gradient exploiting the per-player block structure.

        Intercept perturbations leave the transition kernels and initial
        vector untouched, so only the player's weight-table row is rebuilt
        and only that player's legs are re-evaluated.
        """
        theta = np.asarray(theta, dtype=float)
        step = self.settings.gradient_step
        h = step * np.maximum(1.0, np.abs(theta))
        f0 = self.value(theta)
        g = np.empty(self.n_coords)

        def central(k: int, evaluate) -> float:
            up = theta.copy()
            down = theta.copy()
            up[k] += h[k]
            down[k] -= h[k]
            return (evaluate(up) - evaluate(down)) / (2.0 * h[k])

        if not self.kind.has_state:
            for k in range(self.n_coords):
                g[k] = central(k, self.value)
            return f0, g

        delta, transitions, _ = self._operators(theta)
        for p in range(self.n_players):
            def restricted(point, p=p):
                _, _, table = self._operators(point)
                return -self._player_sum(p, delta, transitions, table)

            g[p] = central(p, restricted)
        for k in self.global_coords:
            g[k] = central(k, self.value)
        return f0, g

    def hessian(self, theta: np.ndarray, free: np.ndarray, *, step: float) -> np.ndarray:
        """Central-difference Hessian over the free coordinates.

        Cross terms between two different players' intercepts are exactly
        zero because no leg involves both; they are not estimated.
        """
        theta = np.asarray(theta, dtype=float)
        free = list(free)
        h = np.maximum(step, step * np.abs(theta))
        n_free = len(free)
        H = np.zeros((n_free, n_free))

        def shifted(*moves):
            xk = theta.copy()
            for coord, mult in moves:
                xk[coord] += mult * h[coord]
            return xk

        f0 = self.value(theta)
        globals_free = [(a, k) for a, k in enumerate(free) if k in self.global_coords]
        players_free = [(a, k) for a, k in enumerate(free) if k < self.n_players]

        # global block (including diagonal)
        fplus = {}
        fminus = {}
        for a, k in globals_free:
            fplus[k] = self.value(shifted((k, +1)))
            fminus[k] = self.value(shifted((k, -1)))
            H[a, a] = (fplus[k] - 2.0 * f0 + fminus[k]) / h[k] ** 2
        for ia in range(len(globals_free)):
            a, k = globals_free[ia]
            for ib in range(ia + 1, len(globals_free)):
                b, l = globals_free[ib]
                fpp = self.value(shifted((k, +1), (l, +1)))
                fpm = self.value(shifted((k, +1), (l, -1)))
                fmp = self.value(shifted((k, -1), (l, +1)))
                fmm = self.value(shifted((k, -1), (l, -1)))
                H[a, b] = H[b, a] = (fpp - fpm - fmp + fmm) / (4.0 * h[k] * h[l])

        # intercept diagonal: only the player's own legs move
        for a, p in players_free:
            base = self.player_value(theta, p)
            up = self.player_value(shifted((p, +1)), p)
            down = self.player_value(shifted((p, -1)), p)
            H[a, a] = (up - 2.0 * base + down) / h[p] ** 2

        # intercept x global: legs of other players cancel in the 4-point stencil
        for a, p in players_free:
            for b, k in globals_free:
                fpp = self.player_value(shifted((p, +1), (k, +1)), p)
                fpm = self.player_value(shifted((p, +1), (k, -1)), p)
                fmp = self.player_value(shifted((p, -1), (k, +1)), p)
                fmm = self.player_value(shifted((p, -1), (k, -1)), p)
                H[a, b] = H[b, a] = (fpp - fpm - fmp + fmm) / (4.0 * h[p] * h[k])
        return H


def build_objective(
    dataset: Dataset, spec: ModelSpec, settings: OptimizerSettings | None = None
) -> _Objective:
    """Negative log-likelihood objective on the working scale.

    Exposes ``value``, ``gradient`` and ``value_and_gradient``; the latter
    is exactly what the optimizer consumes, which makes gradient
    cross-checks against the plain difference schemes possible.
    """
    return _Objective(prepare_dataset(dataset), spec, settings or OptimizerSettings())


# ---------------------------------------------------------------------------
# Fit result


@dataclass(frozen=True, eq=False)
class FitResult:
    """Outcome of one maximum likelihood fit."""

    kind: ModelKind
    spec: ModelSpec
    players: tuple
    params_hat: ParamVector
    loglik: float
    n_params: int
    ci: dict | None
    converged: bool
    trace: tuple
    dataset_digest: str
    n_legs: int
    n_throws: int

    @property
    def aic(self) -> float:
        return 2.0 * self.n_params - 2.0 * self.loglik

    def estimate(self, name: str) -> float:
        """Look up a natural-scale estimate by coordinate name."""
        names = parameter_names(self.kind, self.players)
        values = self._natural_values()
        return values[names.index(name)]

    def _natural_values(self) -> list:
        values = [float(b) for b in self.params_hat.beta0]
        for name in _STRUCTURAL[self.kind]:
            values.append(float(getattr(self.params_hat, name)))
        return values

    def to_dict(self) -> dict:
        return {
            "format": FIT_FORMAT,
            "model": self.kind.value,
            "grid": {"m": self.spec.m, "b0": self.spec.b0, "bm": self.spec.bm},
            "players": list(self.players),
            "estimates": self.params_hat.to_dict(self.players),
            "ci": None
            if self.ci is None
            else {k: (None if v is None else [v[0], v[1]]) for k, v in self.ci.items()},
            "loglik": self.loglik,
            "aic": self.aic,
            "n_params": self.n_params,
            "converged": self.converged,
            "trace": list(self.trace),
            "dataset_digest": self.dataset_digest,
            "n_legs": self.n_legs,
            "n_throws": self.n_throws,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FitResult":
        validate_fit_dict(data)
        kind = ModelKind.from_string(data["model"])
        grid = data["grid"]
        players = tuple(data["players"])
        params = ParamVector.from_dict(data["estimates"], players)
        ci = data.get("ci")
        if ci is not None:
            ci = {k: (None if v is None else (float(v[0]), float(v[1]))) for k, v in ci.items()}
        return cls(
            kind=kind,
            spec=ModelSpec(kind=kind, m=int(grid["m"]), b0=float(grid["b0"]), bm=float(grid["bm"])),
            players=players,
            params_hat=params,
            loglik=float(data["loglik"]),
            n_params=int(data["n_params"]),
            ci=ci,
            converged=bool(data["converged"]),
            trace=tuple(data.get("trace", ())),
            dataset_digest=str(data["dataset_digest"]),
            n_legs=int(data["n_legs"]),
            n_throws=int(data["n_throws"]),
        )


FIT_FORMAT = "hothand-fit-v1"

_FIT_REQUIRED_KEYS = (
    "format",
    "model",
    "grid",
    "players",
    "estimates",
    "loglik",
    "n_params",
    "converged",
    "dataset_digest",
    "n_legs",
    "n_throws",
)


def validate_fit_dict(data: dict) -> None:
    """Schema check for a serialized fit; raises ``ValueError`` on problems."""
    if not isinstance(data, dict):
        raise ValueError("fit report must be a JSON object")
    missing = [k for k in _FIT_REQUIRED_KEYS if k not in data]
    if missing:
        raise ValueError(f"fit report is missing keys: {', '.join(missing)}")
    if data["format"] != FIT_FORMAT:
        raise ValueError(f"unsupported fit report format {data['format']!r}")
    if data["model"] not in ("m1", "m2", "m3", "m4"):
        raise ValueError(f"unknown model {data['model']!r} in fit report")
    grid = data["grid"]
    if not isinstance(grid, dict) or not {"m", "b0", "bm"} <= set(grid):
        raise ValueError("fit report grid must carry m, b0, bm")
    if not isinstance(data["players"], list) or not data["players"]:
        raise ValueError("fit report must list at least one player")


# ---------------------------------------------------------------------------
# Fitting


def _empirical_intercepts(prepared: Prepared):
    """Closed-form M1 intercepts; degenerate players clamped with a warning."""
    counts = prepared.counts
    successes = counts[:, :, 1].sum(axis=1).astype(float)
    totals = counts.sum(axis=(1, 2)).astype(float)
    rates = successes / totals
    degenerate = (successes == 0) | (successes == totals)
    with np.errstate(divide="ignore"):
        beta0 = np.clip(logit(rates), -_DEGENERATE_CLAMP, _DEGENERATE_CLAMP)
    if degenerate.any():
        names = [prepared.dataset.players[i] for i in np.flatnonzero(degenerate)]
        warnings.warn(
            f"players with all-0 or all-1 outcomes have their intercept fixed at "
            f"+-{_DEGENERATE_CLAMP}: {', '.join(names)}",
            RuntimeWarning,
            stacklevel=3,
        )
    return beta0, degenerate


def _initial_theta(
    prepared: Prepared, spec: ModelSpec, settings: OptimizerSettings, trace: list
) -> np.ndarray:
    kind = spec.kind
    beta0, _ = _empirical_intercepts(prepared)
    if kind is ModelKind.M1:
        return beta0.copy()
    if kind is ModelKind.M2:
        return np.concatenate([beta0, [0.0, 0.0]])
    # Warm-start the state models from an M2 fit.
    m2 = _fit_prepared(
        prepared,
        ModelSpec(kind=ModelKind.M2, m=spec.m, b0=spec.b0, bm=spec.bm),
        None,
        OptimizerSettings(
            gradient_step=settings.gradient_step,
            gradient_tol=settings.gradient_tol,
            step_tol=settings.step_tol,
            max_iterations=settings.max_iterations,
            workers=settings.workers,
            compute_ci=False,
        ),
    )
    trace.append(f"warmstart m2: loglik={m2.loglik:.6f} converged={m2.converged}")
    head = np.concatenate([m2.params_hat.beta0, [m2.params_hat.beta1, m2.params_hat.beta2]])
    tail = [
        _to_working(name, _DYNAMIC_DEFAULTS[name])
        for name in _STRUCTURAL[kind][2:]
    ]
    return np.concatenate([head, tail])


def fit(
    dataset: Dataset,
    spec: ModelSpec,
    init: ParamVector | None = None,
    settings: OptimizerSettings | None = None,
) -> FitResult:
    """Maximize the log-likelihood of ``spec`` on ``dataset``.

    Deterministic given (dataset, spec, init, settings).  Non-convergence
    is reported through ``FitResult.converged``, never hidden.  Players
    whose outcomes are all 0 or all 1 get their intercept fixed at the
    documented clamp value and are excluded from the information matrix.
    """
    return _fit_prepared(prepare_dataset(dataset), spec, init, settings or OptimizerSettings())


def _fit_prepared(
    prepared: Prepared,
    spec: ModelSpec,
    init: ParamVector | None,
    settings: OptimizerSettings,
) -> FitResult:
    dataset = prepared.dataset
    kind = spec.kind
    n_players = dataset.n_players
    n_coords = count_parameters(kind, n_players)
    trace: list = []

    clamped_beta0, degenerate = _empirical_intercepts(prepared)
    if init is not None:
        init.validate_for(kind)
        if init.n_players != n_players:
            raise ValueError("init parameter vector does not match the dataset's player count")
        theta0 = pack_parameters(init, kind)
    else:
        theta0 = _initial_theta(prepared, spec, settings, trace)
    if degenerate.any():
        theta0[:n_players][degenerate] = clamped_beta0[degenerate]

    objective = _Objective(prepared, spec, settings)

    bounds = None
    if degenerate.any():
        bounds = [(None, None)] * n_coords
        for p in np.flatnonzero(degenerate):
            bounds[p] = (theta0[p], theta0[p])

    res = minimize(
        objective.value_and_gradient,
        theta0,
        jac=True,
        method="L-BFGS-B",
        bounds=bounds,
        options={
            "maxiter": settings.max_iterations,
            "gtol": settings.gradient_tol,
            "ftol": settings.step_tol,
        },
    )
    message = res.message if isinstance(res.message, str) else res.message.decode()
    trace.append(
        f"lbfgsb: nit={res.nit} nfev={res.nfev} f={res.fun:.6f} "
        f"|g|inf={np.max(np.abs(res.jac)):.3e} success={res.success} ({message})"
    )
    theta_hat = np.asarray(res.x, dtype=float)
    f_hat = float(res.fun)
    converged = bool(res.success and np.isfinite(f_hat))

    if not converged:
        fallback = minimize(
            objective.value,
            theta_hat if np.isfinite(f_hat) else theta0,
            method="Nelder-Mead",
            options={"maxiter": settings.max_iterations, "xatol": 1e-8, "fatol": 1e-9},
        )
        trace.append(
            f"fallback nelder-mead: nit={fallback.nit} nfev={fallback.nfev} "
            f"f={fallback.fun:.6f} success={fallback.success}"
        )
        if np.isfinite(fallback.fun) and (not np.isfinite(f_hat) or fallback.fun <= f_hat):
            theta_hat = np.asarray(fallback.x, dtype=float)
            f_hat = float(fallback.fun)
            converged = bool(fallback.success)

    params_hat = unpack_parameters(theta_hat, kind, n_players)
    names = parameter_names(kind, dataset.players)
    free = np.array([k for k in range(n_coords) if not (k < n_players and degenerate[k])])

    ci = None
    if settings.compute_ci and converged:
        try:
            ci = _ci_from_objective(
                objective, theta_hat, free, names, step=settings.hessian_step
            )
        except InformationMatrixError as exc:
            trace.append(f"ci unavailable: {exc}")
            ci = None

    return FitResult(
        kind=kind,
        spec=spec,
        players=dataset.players,
        params_hat=params_hat,
        loglik=-f_hat,
        n_params=n_coords,
        ci=ci,
        converged=converged,
        trace=tuple(trace),
        dataset_digest=dataset.digest(),
        n_legs=dataset.n_legs,
        n_throws=dataset.n_throws,
    )


def _coordinate_transform_name(k: int, n_players: int, kind: ModelKind) -> str:
    if k < n_players:
        return "identity"
    return _TRANSFORMS[_STRUCTURAL[kind][k - n_players]]


def _ci_from_objective(
    objective: _Objective,
    theta_hat: np.ndarray,
    free: np.ndarray,
    names: list,
    *,
    step: float,
) -> dict:
    H = objective.hessian(theta_hat, free, step=step)
    eigenvalues = np.linalg.eigvalsh(H)
    if eigenvalues[0] <= 0.0 or not np.isfinite(eigenvalues).all():
        raise InformationMatrixError(eigenvalues[0])
    try:
        cov = np.linalg.inv(H)
    except np.linalg.LinAlgError:
        # positive but numerically singular (flat ridge at a boundary fit)
        raise InformationMatrixError(eigenvalues[0]) from None
    se = np.sqrt(np.diag(cov))
    kind = objective.kind
    n_players = objective.n_players
    ci: dict = {name: None for name in names}
    for a, k in enumerate(free):
        lo = theta_hat[k] - _Z_95 * se[a]
        hi = theta_hat[k] + _Z_95 * se[a]
        transform = _coordinate_transform_name(int(k), n_players, kind)
        if transform == "tanh":
            lo, hi = np.tanh(lo), np.tanh(hi)
        elif transform == "exp":
            lo, hi = np.exp(lo), np.exp(hi)
        ci[names[int(k)]] = (float(lo), float(hi))
    return ci


def observed_information_ci(
    dataset: Dataset,
    spec: ModelSpec,
    params_hat: ParamVector,
    settings: OptimizerSettings | None = None,
) -> dict:
    """95% intervals from the observed information at ``params_hat``.

    The Hessian of the negative log-likelihood is taken on the working
    scale by central differences and inverted; interval endpoints are mapped
    back through the monotone coordinate transforms, so scale-parameter
    intervals are positive by construction.  Raises
    :class:`InformationMatrixError` (carrying the offending eigenvalue) if
    the matrix is not positive definite.
    """
    settings = settings or OptimizerSettings()
    prepared = prepare_dataset(dataset)
    params_hat.validate_for(spec.kind)
    objective = _Objective(prepared, spec, settings)
    theta_hat = pack_parameters(params_hat, spec.kind)
    _, degenerate = _empirical_intercepts(prepared)
    n_players = dataset.n_players
    free = np.array(
        [k for k in range(objective.n_coords) if not (k < n_players and degenerate[k])]
    )
    names = parameter_names(spec.kind, dataset.players)
    return _ci_from_objective(objective, theta_hat, free, names, step=settings.hessian_step)


# ---------------------------------------------------------------------------
# Model comparison


@dataclass(frozen=True)
class AicRow:
    model: str
    n_params: int
    loglik: float
    aic: float
    delta_aic: float
    state_process: str
    description: str


def aic_table(fits: Sequence[FitResult]) -> list:
    """AIC comparison rows for fits of the same dataset.

    Rows keep the given order; ``delta_aic`` is relative to the best
    (lowest-AIC) fit.  Mixing fits of different datasets is an error.
    """
    if not fits:
        raise ValueError("aic_table requires at least one fit")
    digests = {f.dataset_digest for f in fits}
    if len(digests) != 1:
        raise ValueError("fits were produced on different datasets; refusing to compare AICs")
    best = min(f.aic for f in fits)
    return [
        AicRow(
            model=f.kind.value.upper(),
            n_params=f.n_params,
            loglik=f.loglik,
            aic=f.aic,
            delta_aic=f.aic - best,
            state_process=f.kind.state_process,
            description=f.kind.description,
        )
        for f in fits
    ]
