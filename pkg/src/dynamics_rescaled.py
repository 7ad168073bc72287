"""Method-of-lines RK4 integrator for the rescaled random PDE in (y, z) = e^{-W} (u, v).

W is evaluated at each RK stage time by linear interpolation of the
Brownian path between grid times, so this leg shares the path with the
direct solver but not its discretization.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from src.dynamics_direct import (
    SolverConfig,
    check_grid,
    check_path,
    new_record,
    pair_norm,
    resolve_threshold,
)
from src.exceptions import AmplitudeOverflowError, NonFiniteStateError, StabilityError
from src.functionals import sample_functionals
from src.noise_model import BrownianPath, NoiseModel
from src.spectral_grid import ComplexField, GridSpec, gradient, laplacian
from src.system_params import SystemParams
from src.trajectory import TrajectoryRecord

logger = logging.getLogger(__name__)

DEFAULT_OVERFLOW_CAP = 50.0
DEFAULT_STABILITY_FACTOR = 0.5


@dataclass(frozen=True)
class RescaledState:
    y: ComplexField
    z: ComplexField
    t: float = 0.0

    def __post_init__(self):
        self.y.check_same_grid(self.z)

    def is_finite(self) -> bool:
        return self.y.is_finite() and self.z.is_finite()


def check_overflow(W: ComplexField, cap: float = DEFAULT_OVERFLOW_CAP):
    max_real = float(np.max(W.values.real))
    if max_real > cap:
        raise AmplitudeOverflowError(max_real, cap)


def _zero_or(field: Optional[ComplexField], grid: GridSpec) -> ComplexField:
    return ComplexField.zeros(grid) if field is None else field


def _conjugated_operator(
    y: ComplexField,
    exp_w: np.ndarray,
    mass: float,
    damping: ComplexField,
) -> ComplexField:
    """-i/(2 mass) e^{-W} Lap(e^W y) - (mu + mu~) y, with e^W precomputed"""
    lap = laplacian(y.with_values(exp_w * y.values))
    return y.with_values((-0.5j / mass) * lap.values / exp_w - damping.values * y.values)


def apply_A(
    y: ComplexField,
    W: ComplexField,
    mass: float,
    mu: ComplexField,
    mu_tilde: ComplexField,
    overflow_cap: float = DEFAULT_OVERFLOW_CAP,
) -> ComplexField:
    for other in (W, mu, mu_tilde):
        y.check_same_grid(other)
    check_overflow(W, overflow_cap)
    return _conjugated_operator(y, np.exp(W.values), mass, mu + mu_tilde)


def materialize_coefficients(
    W: ComplexField, mass: float, mu: ComplexField, mu_tilde: ComplexField
) -> Tuple[List[ComplexField], ComplexField]:
    """b = grad W / mass and c = (1/2 mass) sum (d_j W)^2 + (1/2 mass) Lap W - i (mu + mu~)"""
    grad_w = gradient(W)
    b = [g / mass for g in grad_w]
    squares = sum(g.values**2 for g in grad_w)
    c = W.with_values(
        (squares + laplacian(W).values) / (2.0 * mass) - 1j * (mu.values + mu_tilde.values)
    )
    return b, c


def apply_expanded(
    y: ComplexField, b: List[ComplexField], c: ComplexField, mass: float
) -> ComplexField:
    """-i ((1/2 mass) Lap y + b . grad y + c y)"""
    transport = sum(bj.values * gj.values for bj, gj in zip(b, gradient(y)))
    dispersion = laplacian(y).values / (2.0 * mass)
    return y.with_values(-1j * (dispersion + transport + c.values * y.values))


def rhs_rsnlss(
    state: RescaledState,
    params: SystemParams,
    W: ComplexField,
    mu: Optional[ComplexField] = None,
    mu_tilde: Optional[ComplexField] = None,
    overflow_cap: float = DEFAULT_OVERFLOW_CAP,
) -> Tuple[ComplexField, ComplexField]:
    """(dy/dt, dz/dt) with W frozen at the state's time"""
    grid = state.y.grid
    state.y.check_same_grid(W)
    check_overflow(W, overflow_cap)
    damping = _zero_or(mu, grid) + _zero_or(mu_tilde, grid)
    return _tendencies(state.y, state.z, np.exp(W.values), params, damping)


def _tendencies(
    y: ComplexField,
    z: ComplexField,
    exp_w: np.ndarray,
    params: SystemParams,
    damping: ComplexField,
) -> Tuple[ComplexField, ComplexField]:
    dy = _conjugated_operator(y, exp_w, params.ell, damping)
    dz = _conjugated_operator(z, exp_w, params.L, damping)
    y_vals, z_vals = y.values, z.values
    dy_vals = dy.values - 1j * params.lam * np.conj(exp_w) * z_vals * np.conj(y_vals)
    dz_vals = dz.values - 1j * params.kappa * exp_w * y_vals**2
    return y.with_values(dy_vals), z.with_values(dz_vals)


def stability_bound(
    grid: GridSpec, params: SystemParams, factor: float = DEFAULT_STABILITY_FACTOR
) -> float:
    """dt <= factor / (k_max^2 max(1/(2 ell), 1/(2 L)))"""
    stiffness = grid.k_max**2 * max(1.0 / (2.0 * params.ell), 1.0 / (2.0 * params.L))
    return factor / stiffness


class _StageFields:
    """e^W at the four RK stage times of one step"""

    def __init__(self, model: NoiseModel, path: BrownianPath, cap: float):
        self.model = model
        self.path = path
        self.cap = cap

    def exp_w(self, step: int, fraction: float) -> np.ndarray:
        if self.model.n_modes == 0:
            return np.ones(self.model.grid.shape, dtype=complex)
        W = self.model.w_field(self.path, step, fraction)
        check_overflow(W, self.cap)
        return np.exp(W.values)


def run_rescaled(
    u0: ComplexField,
    v0: ComplexField,
    params: SystemParams,
    model: NoiseModel,
    path: BrownianPath,
    config: SolverConfig,
) -> TrajectoryRecord:
    check_grid(u0, v0, model)
    check_path(path, config, model)
    bound = stability_bound(model.grid, params, config.stability_factor)
    if config.dt > bound:
        raise StabilityError(config.dt, bound)

    damping = model.damping_field()
    stages = _StageFields(model, path, config.overflow_cap)
    initial_norm = pair_norm(u0, v0, config.norm_kind)
    threshold = resolve_threshold(config, initial_norm)
    record = new_record("rescaled", params, model, path, config, threshold)

    def keep(step: int, t: float, y: ComplexField, z: ComplexField, exp_w: np.ndarray):
        u, v = y * exp_w, z * exp_w
        sample = sample_functionals(t, u, v, params)
        if config.keep_snapshots:
            record.append(step, t, sample, y, z)
        else:
            record.append(step, t, sample)

    y, z = u0, v0
    exp_now = stages.exp_w(0, 0.0)
    keep(0, 0.0, y, z, exp_now)
    if initial_norm > threshold:
        record.blowup_step = 0
        logger.warning(f"Blow-up detector triggered at step 0 (norm {initial_norm:.6g})")
        return record

    dt = config.dt
    n_steps = config.n_steps
    report_every = max(1, n_steps // 10)
    logger.info(f"Rescaled run: {n_steps} steps, dt={dt}, seed={path.seed}")
    for k in range(n_steps):
        exp_mid = stages.exp_w(k, 0.5)
        exp_next = stages.exp_w(k + 1, 0.0)
        k1y, k1z = _tendencies(y, z, exp_now, params, damping)
        k2y, k2z = _tendencies(y + k1y * (0.5 * dt), z + k1z * (0.5 * dt), exp_mid, params, damping)
        k3y, k3z = _tendencies(y + k2y * (0.5 * dt), z + k2z * (0.5 * dt), exp_mid, params, damping)
        k4y, k4z = _tendencies(y + k3y * dt, z + k3z * dt, exp_next, params, damping)
        y = y + (k1y + k2y * 2.0 + k3y * 2.0 + k4y) * (dt / 6.0)
        z = z + (k1z + k2z * 2.0 + k3z * 2.0 + k4z) * (dt / 6.0)
        exp_now = exp_next
        t = (k + 1) * dt
        if not (y.is_finite() and z.is_finite()):
            raise NonFiniteStateError(k + 1, t)
        u, v = y * exp_now, z * exp_now
        norm = pair_norm(u, v, config.norm_kind)
        if norm > threshold:
            keep(k + 1, t, y, z, exp_now)
            record.blowup_step = k + 1
            logger.warning(f"Blow-up detector triggered at step {k + 1} (t={t:.6g})")
            return record
        if (k + 1) % config.record_every == 0 or k + 1 == n_steps:
            keep(k + 1, t, y, z, exp_now)
        if (k + 1) % report_every == 0:
            logger.debug(f"Rescaled step {k + 1}/{n_steps}")
    logger.info(f"Rescaled run finished at t={n_steps * dt:.6g}")
    return record
