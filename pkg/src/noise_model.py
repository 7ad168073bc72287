"""Finite-dimensional Wiener process W(t, x) = sum_j mu_j e_j(x) beta_j(t).

Brownian increments come from a counter-based Philox stream keyed by
(seed, mode); the step index is the position in that stream, so a path is
reproducible mode by mode and independent of how many modes are drawn.
"""

import hashlib
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import List, Tuple

import numpy as np

from src.exceptions import GridMismatchError, StepIndexError
from src.spectral_grid import ComplexField, GridSpec

logger = logging.getLogger(__name__)

NOISE_FAMILIES = ("cosine", "gaussian")
SEED_MASK = (1 << 64) - 1


@dataclass(frozen=True, eq=False)
class NoiseMode:
    """One spatial mode: complex coefficient mu and real profile e"""

    mu: complex
    profile: ComplexField
    family: str = "custom"
    parameters: Tuple[Tuple[str, float], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "mu", complex(self.mu))
        if self.profile.max_abs_imag() != 0.0:
            raise ValueError("noise profile e_j must be real-valued")
        if not self.profile.is_finite():
            raise ValueError("noise profile e_j must be bounded")

    @property
    def phi(self) -> ComplexField:
        return self.profile * self.mu

    def describe(self) -> dict:
        return {
            "mu_re": self.mu.real,
            "mu_im": self.mu.imag,
            "family": self.family,
            **dict(self.parameters),
        }


def cosine_mode(grid: GridSpec, mu: complex, wavenumber: int = 1, axis: int = 0) -> NoiseMode:
    """e(x) = cos(2 pi n x_axis / Lbox); n = 0 gives the constant mode"""
    if not 0 <= axis < grid.dim:
        raise ValueError(f"axis {axis} outside a {grid.dim}-dimensional grid")
    x = grid.coordinates[axis]
    profile = ComplexField(grid, np.cos(2.0 * math.pi * wavenumber * x / grid.box_length))
    return NoiseMode(
        mu, profile, "cosine", (("wavenumber", float(wavenumber)), ("axis", float(axis)))
    )


def gaussian_mode(
    grid: GridSpec, mu: complex, center: float, width: float, images: int = 2
) -> NoiseMode:
    """Periodized Gaussian bump centred at (center, ..., center)"""
    if not width > 0:
        raise ValueError(f"gaussian width must be positive, got {width}")
    profile = np.zeros(grid.shape)
    for shift in range(-images, images + 1):
        r2 = sum((x - center - shift * grid.box_length) ** 2 for x in grid.coordinates)
        profile += np.exp(-r2 / (2.0 * width**2))
    return NoiseMode(
        mu, ComplexField(grid, profile), "gaussian", (("center", center), ("width", width))
    )


@dataclass(frozen=True)
class BrownianPath:
    """Per-mode real increments d_beta[j, k] ~ Normal(0, dt), immutable"""

    seed: int
    dt: float
    n_steps: int
    increments: np.ndarray = field(repr=False, compare=False)

    def __post_init__(self):
        increments = np.array(self.increments, dtype=float, copy=True)
        if increments.ndim != 2 or increments.shape[1] != self.n_steps:
            raise ValueError(
                f"increments must have shape (n_modes, {self.n_steps}), got {increments.shape}"
            )
        increments.setflags(write=False)
        object.__setattr__(self, "increments", increments)

    @property
    def n_modes(self) -> int:
        return self.increments.shape[0]

    @property
    def t_final(self) -> float:
        return self.n_steps * self.dt

    @cached_property
    def beta(self) -> np.ndarray:
        """beta_j(t_k) for k = 0..n_steps, shape (n_modes, n_steps + 1)"""
        values = np.zeros((self.n_modes, self.n_steps + 1))
        np.cumsum(self.increments, axis=1, out=values[:, 1:])
        values.setflags(write=False)
        return values

    @cached_property
    def fingerprint(self) -> str:
        """Content hash of the increment table, used for provenance checks"""
        digest = hashlib.sha256()
        digest.update(np.ascontiguousarray(self.increments).tobytes())
        digest.update(repr((self.seed, self.dt, self.n_steps)).encode())
        return digest.hexdigest()

    def check_step(self, step_index: int, allow_end: bool = True):
        upper = self.n_steps if allow_end else self.n_steps - 1
        if not 0 <= step_index <= upper:
            raise StepIndexError(f"step index {step_index} outside [0, {upper}]")

    def beta_at(self, step_index: int, fraction: float = 0.0) -> np.ndarray:
        """beta_j at t_k + fraction*dt, linear in between grid times"""
        self.check_step(step_index)
        values = self.beta[:, step_index]
        if fraction:
            self.check_step(step_index, allow_end=False)
            values = values + fraction * self.increments[:, step_index]
        return values

    def coarsen(self) -> "BrownianPath":
        """Same Brownian motion sampled at 2*dt (pairwise increment sums)"""
        if self.n_steps % 2:
            raise ValueError(f"cannot coarsen a path with odd n_steps={self.n_steps}")
        pairs = self.increments.reshape(self.n_modes, self.n_steps // 2, 2).sum(axis=2)
        return BrownianPath(self.seed, 2.0 * self.dt, self.n_steps // 2, pairs)


def mode_generator(seed: int, mode_index: int) -> np.random.Generator:
    """Counter-based stream for one (seed, mode) pair"""
    key = ((int(seed) & SEED_MASK) << 64) | (int(mode_index) & SEED_MASK)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True, eq=False)
class NoiseModel:
    """Ordered, immutable list of noise modes on one grid"""

    grid: GridSpec
    modes: Tuple[NoiseMode, ...] = ()

    def __post_init__(self):
        modes = tuple(self.modes)
        for mode in modes:
            if mode.profile.grid != self.grid:
                raise GridMismatchError("all noise modes must share the model grid")
        object.__setattr__(self, "modes", modes)

    @classmethod
    def deterministic(cls, grid: GridSpec) -> "NoiseModel":
        return cls(grid, ())

    @property
    def n_modes(self) -> int:
        return len(self.modes)

    @property
    def mu_values(self) -> np.ndarray:
        return np.array([m.mu for m in self.modes], dtype=complex)

    @property
    def is_deterministic(self) -> bool:
        return all(m.mu == 0 for m in self.modes)

    @property
    def purely_imaginary(self) -> bool:
        """Re mu_j = 0 for every mode"""
        return all(m.mu.real == 0.0 for m in self.modes)

    @cached_property
    def profiles(self) -> np.ndarray:
        """e_j stacked as real array of shape (n_modes, *grid.shape)"""
        if not self.modes:
            return np.zeros((0,) + self.grid.shape)
        return np.stack([m.profile.values.real for m in self.modes])

    @cached_property
    def phis(self) -> np.ndarray:
        """phi_j = mu_j e_j stacked, shape (n_modes, *grid.shape)"""
        shape = (-1,) + (1,) * self.grid.dim
        return self.profiles * self.mu_values.reshape(shape)

    def sample_path(self, seed: int, dt: float, n_steps: int) -> BrownianPath:
        if not dt > 0:
            raise ValueError(f"dt must be positive, got {dt}")
        if n_steps < 1:
            raise ValueError(f"n_steps must be >= 1, got {n_steps}")
        scale = math.sqrt(dt)
        increments = np.zeros((self.n_modes, n_steps))
        for j in range(self.n_modes):
            increments[j] = scale * mode_generator(seed, j).standard_normal(n_steps)
        logger.debug(f"Sampled path seed={seed} modes={self.n_modes} steps={n_steps} dt={dt}")
        return BrownianPath(int(seed) & SEED_MASK, dt, n_steps, increments)

    def combine(self, coefficients: np.ndarray) -> ComplexField:
        """sum_j coefficients[j] * phi_j"""
        if not self.modes:
            return ComplexField.zeros(self.grid)
        return ComplexField(self.grid, np.tensordot(np.asarray(coefficients), self.phis, axes=1))

    def _check_path(self, path: BrownianPath):
        if path.n_modes != self.n_modes:
            raise ValueError(f"path has {path.n_modes} modes, model has {self.n_modes}")

    def w_field(self, path: BrownianPath, step_index: int, fraction: float = 0.0) -> ComplexField:
        """W(t_k + fraction*dt, x)"""
        self._check_path(path)
        return self.combine(path.beta_at(step_index, fraction))

    def increment_field(self, path: BrownianPath, step_index: int) -> ComplexField:
        """Delta W over step k: sum_j phi_j d_beta[j, k]"""
        self._check_path(path)
        path.check_step(step_index, allow_end=False)
        return self.combine(path.increments[:, step_index])

    def mu_field(self) -> ComplexField:
        """mu(x) = 1/2 sum_j |mu_j|^2 e_j(x)^2"""
        if not self.modes:
            return ComplexField.zeros(self.grid)
        weights = 0.5 * np.abs(self.mu_values) ** 2
        return ComplexField(self.grid, np.tensordot(weights, self.profiles**2, axes=1))

    def mu_tilde_field(self) -> ComplexField:
        """mu~(x) = 1/2 sum_j mu_j^2 e_j(x)^2"""
        if not self.modes:
            return ComplexField.zeros(self.grid)
        weights = 0.5 * self.mu_values**2
        return ComplexField(self.grid, np.tensordot(weights, self.profiles**2, axes=1))

    def damping_field(self) -> ComplexField:
        """mu + mu~"""
        return self.mu_field() + self.mu_tilde_field()

    def phi_field(self, j: int) -> ComplexField:
        """phi_j = mu_j e_j, 1-based index"""
        if not 1 <= j <= self.n_modes:
            raise StepIndexError(f"mode index {j} outside [1, {self.n_modes}]")
        return self.modes[j - 1].phi

    def describe(self) -> List[dict]:
        return [m.describe() for m in self.modes]


