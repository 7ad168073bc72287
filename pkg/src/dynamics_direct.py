"""Strang split-step Fourier integrator for the Ito system.

One step is: half dispersion, full quadratic nonlinearity (RK4 per grid
point), the exact noise-and-damping exponential, half dispersion.
"""

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Tuple

import numpy as np

from src.exceptions import GridMismatchError, NonFiniteStateError
from src.functionals import sample_functionals
from src.noise_model import BrownianPath, NoiseModel
from src.spectral_grid import ComplexField, GridSpec, apply_multiplier, h1_norm, l2_norm
from src.system_params import SystemParams
from src.trajectory import TrajectoryRecord

logger = logging.getLogger(__name__)

NORM_KINDS = ("L2", "H1")
DEFAULT_THRESHOLD_FACTOR = 1e3


@dataclass(frozen=True)
class PairState:
    u: ComplexField
    v: ComplexField
    t: float = 0.0

    def __post_init__(self):
        self.u.check_same_grid(self.v)

    @property
    def grid(self) -> GridSpec:
        return self.u.grid

    def is_finite(self) -> bool:
        return self.u.is_finite() and self.v.is_finite()


@dataclass(frozen=True)
class SolverConfig:
    """Time step, horizon, sampling cadence and the blow-up detector"""

    dt: float
    t_final: float
    record_every: int = 1
    blowup_threshold: Optional[float] = None
    norm_kind: str = "L2"
    keep_snapshots: bool = True
    stability_factor: float = 0.5
    overflow_cap: float = 50.0

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.t_final >= self.dt:
            raise ValueError(f"dt = {self.dt} exceeds the final time {self.t_final}")
        steps = self.t_final / self.dt
        if abs(steps - round(steps)) > 1e-9 * steps:
            raise ValueError(f"t_final = {self.t_final} is not a multiple of dt = {self.dt}")
        if self.record_every < 1:
            raise ValueError(f"record_every must be >= 1, got {self.record_every}")
        if self.norm_kind not in NORM_KINDS:
            raise ValueError(f"norm_kind must be one of {NORM_KINDS}, got {self.norm_kind!r}")
        if self.blowup_threshold is not None and not self.blowup_threshold > 0:
            raise ValueError(f"blowup_threshold must be positive, got {self.blowup_threshold}")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_final / self.dt))

    def with_dt(self, dt: float) -> "SolverConfig":
        return SolverConfig(
            dt=dt,
            t_final=self.t_final,
            record_every=self.record_every,
            blowup_threshold=self.blowup_threshold,
            norm_kind=self.norm_kind,
            keep_snapshots=self.keep_snapshots,
            stability_factor=self.stability_factor,
            overflow_cap=self.overflow_cap,
        )


def pair_norm(u: ComplexField, v: ComplexField, norm_kind: str = "L2") -> float:
    """||u|| + ||v|| in L^2 or H^1"""
    norm = h1_norm if norm_kind == "H1" else l2_norm
    return norm(u) + norm(v)


@lru_cache(maxsize=64)
def _dispersion_multiplier(grid: GridSpec, mass: float, tau: float) -> np.ndarray:
    return np.exp(1j * grid.k_squared * tau / (2.0 * mass))


def dispersion_step(state: PairState, params: SystemParams, tau: float) -> PairState:
    """Exact solve of i u_t = (1/2 ell) Lap u and i v_t = (1/2 L) Lap v over tau"""
    if not tau > 0:
        raise ValueError(f"substep duration must be positive, got {tau}")
    grid = state.grid
    u = apply_multiplier(state.u, _dispersion_multiplier(grid, params.ell, tau))
    v = apply_multiplier(state.v, _dispersion_multiplier(grid, params.L, tau))
    return PairState(u, v, state.t)


def _nonlinear_rhs(
    u: np.ndarray, v: np.ndarray, lam: complex, kappa: complex
) -> Tuple[np.ndarray, np.ndarray]:
    return -1j * lam * v * np.conj(u), -1j * kappa * u * u


def nonlinear_step(state: PairState, params: SystemParams, tau: float) -> PairState:
    """Classical RK4 for u_t = -i lam v conj(u), v_t = -i kappa u^2 at every grid point"""
    if not tau > 0:
        raise ValueError(f"substep duration must be positive, got {tau}")
    lam, kappa = params.lam, params.kappa
    if lam == 0 and kappa == 0:
        return state
    u0, v0 = state.u.values, state.v.values
    ku1, kv1 = _nonlinear_rhs(u0, v0, lam, kappa)
    ku2, kv2 = _nonlinear_rhs(u0 + 0.5 * tau * ku1, v0 + 0.5 * tau * kv1, lam, kappa)
    ku3, kv3 = _nonlinear_rhs(u0 + 0.5 * tau * ku2, v0 + 0.5 * tau * kv2, lam, kappa)
    ku4, kv4 = _nonlinear_rhs(u0 + tau * ku3, v0 + tau * kv3, lam, kappa)
    u = u0 + (tau / 6.0) * (ku1 + 2.0 * ku2 + 2.0 * ku3 + ku4)
    v = v0 + (tau / 6.0) * (kv1 + 2.0 * kv2 + 2.0 * kv3 + kv4)
    return PairState(state.u.with_values(u), state.v.with_values(v), state.t)


def noise_factor(model: NoiseModel, path: BrownianPath, step_index: int) -> ComplexField:
    """exp(Delta W - (mu + mu~) dt): exact Ito solution of du = -mu u dt + u dW over one step"""
    exponent = model.increment_field(path, step_index) - model.damping_field() * path.dt
    return exponent.with_values(np.exp(exponent.values))


def noise_damping_step(
    state: PairState, model: NoiseModel, path: BrownianPath, step_index: int
) -> PairState:
    if model.n_modes == 0:
        path.check_step(step_index, allow_end=False)
        return state
    factor = noise_factor(model, path, step_index)
    return PairState(state.u * factor, state.v * factor, state.t)


def strang_step(
    state: PairState,
    params: SystemParams,
    model: NoiseModel,
    path: BrownianPath,
    k: int,
) -> PairState:
    """One full step t_k -> t_k + dt, with dt taken from the path"""
    half = 0.5 * path.dt
    state = dispersion_step(state, params, half)
    state = nonlinear_step(state, params, path.dt)
    state = noise_damping_step(state, model, path, k)
    state = dispersion_step(state, params, half)
    return PairState(state.u, state.v, (k + 1) * path.dt)


def check_path(path: BrownianPath, config: SolverConfig, model: NoiseModel):
    if not math.isclose(path.dt, config.dt, rel_tol=1e-12):
        raise ValueError(f"path dt {path.dt} differs from solver dt {config.dt}")
    if path.n_steps < config.n_steps:
        raise ValueError(f"path has {path.n_steps} steps, solver needs {config.n_steps}")
    if path.n_modes != model.n_modes:
        raise ValueError(f"path has {path.n_modes} modes, model has {model.n_modes}")


def check_grid(u0: ComplexField, v0: ComplexField, model: NoiseModel):
    u0.check_same_grid(v0)
    if u0.grid != model.grid:
        raise GridMismatchError("initial data grid differs from the noise model grid")


def resolve_threshold(config: SolverConfig, initial_norm: float) -> float:
    if config.blowup_threshold is not None:
        return float(config.blowup_threshold)
    return DEFAULT_THRESHOLD_FACTOR * initial_norm


def new_record(
    solver: str,
    params: SystemParams,
    model: NoiseModel,
    path: BrownianPath,
    config: SolverConfig,
    threshold: float,
) -> TrajectoryRecord:
    return TrajectoryRecord(
        solver=solver,
        grid=model.grid,
        params=params,
        seed=path.seed,
        dt=config.dt,
        n_steps=config.n_steps,
        record_every=config.record_every,
        path_fingerprint=path.fingerprint,
        noise_free=model.is_deterministic,
        norm_kind=config.norm_kind,
        blowup_threshold=threshold,
    )


def run_direct(
    u0: ComplexField,
    v0: ComplexField,
    params: SystemParams,
    model: NoiseModel,
    path: BrownianPath,
    config: SolverConfig,
) -> TrajectoryRecord:
    """Integrate to t_final or to the first step whose pair norm exceeds the threshold"""
    check_path(path, config, model)
    check_grid(u0, v0, model)
    state = PairState(u0, v0, 0.0)
    initial_norm = pair_norm(u0, v0, config.norm_kind)
    threshold = resolve_threshold(config, initial_norm)
    record = new_record("direct", params, model, path, config, threshold)

    def keep(step: int, current: PairState):
        sample = sample_functionals(current.t, current.u, current.v, params)
        if config.keep_snapshots:
            record.append(step, current.t, sample, current.u, current.v)
        else:
            record.append(step, current.t, sample)

    keep(0, state)
    if initial_norm > threshold:
        record.blowup_step = 0
        logger.warning(f"Blow-up detector triggered at step 0 (norm {initial_norm:.6g})")
        return record

    n_steps = config.n_steps
    report_every = max(1, n_steps // 10)
    logger.info(f"Direct run: {n_steps} steps, dt={config.dt}, seed={path.seed}")
    for k in range(n_steps):
        state = strang_step(state, params, model, path, k)
        if not state.is_finite():
            raise NonFiniteStateError(k + 1, state.t)
        norm = pair_norm(state.u, state.v, config.norm_kind)
        if norm > threshold:
            keep(k + 1, state)
            record.blowup_step = k + 1
            logger.warning(
                f"Blow-up detector triggered at step {k + 1} (t={state.t:.6g}, norm {norm:.6g})"
            )
            return record
        if (k + 1) % config.record_every == 0 or k + 1 == n_steps:
            keep(k + 1, state)
        if (k + 1) % report_every == 0:
            logger.debug(f"Direct step {k + 1}/{n_steps}")
    logger.info(f"Direct run finished at t={state.t:.6g}")
    return record
