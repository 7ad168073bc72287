"""Periodic spectral grid, complex lattice fields and Fourier-multiplier calculus.

Transform convention: the forward transform is unnormalized and the inverse
carries 1/N^d; every quadrature multiplies by the cell volume (Lbox/N)^d.
"""

import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, List, Tuple, Union

import numpy as np
from scipy import fft as sp_fft

from src.config import Config
from src.exceptions import GridMismatchError

logger = logging.getLogger(__name__)

Scalar = Union[int, float, complex]

THETA_PROFILES = ("smooth-step", "bump")
DEFAULT_THETA_PROFILE = "smooth-step"


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid on [0, box_length)^dim"""

    dim: int
    points_per_dim: int
    box_length: float

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ValueError(f"dim must be 1, 2 or 3, got {self.dim}")
        n = self.points_per_dim
        if n < 8 or n & (n - 1):
            raise ValueError(f"points_per_dim must be a power of two >= 8, got {n}")
        if not self.box_length > 0:
            raise ValueError(f"box_length must be positive, got {self.box_length}")

    @property
    def shape(self) -> Tuple[int, ...]:
        return (self.points_per_dim,) * self.dim

    @property
    def total_points(self) -> int:
        return self.points_per_dim**self.dim

    @property
    def spacing(self) -> float:
        return self.box_length / self.points_per_dim

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.dim

    @property
    def box_volume(self) -> float:
        return self.box_length**self.dim

    @property
    def k_max(self) -> float:
        """Nyquist wavenumber magnitude pi*N/Lbox"""
        return math.pi * self.points_per_dim / self.box_length

    @cached_property
    def axis_coordinates(self) -> np.ndarray:
        return np.arange(self.points_per_dim) * self.spacing

    @cached_property
    def coordinates(self) -> Tuple[np.ndarray, ...]:
        axes = [self.axis_coordinates] * self.dim
        return tuple(np.meshgrid(*axes, indexing="ij"))

    @cached_property
    def axis_wavenumbers(self) -> np.ndarray:
        """First-derivative wavenumbers, Nyquist entry zeroed (zero mean per axis)"""
        k = 2.0 * math.pi * sp_fft.fftfreq(self.points_per_dim, d=self.spacing)
        k[self.points_per_dim // 2] = 0.0
        return k

    @cached_property
    def wavenumbers(self) -> Tuple[np.ndarray, ...]:
        axes = [self.axis_wavenumbers] * self.dim
        return tuple(np.meshgrid(*axes, indexing="ij"))

    @cached_property
    def k_squared(self) -> np.ndarray:
        """|k|^2 for second derivatives, Nyquist included"""
        k = 2.0 * math.pi * sp_fft.fftfreq(self.points_per_dim, d=self.spacing)
        axes = np.meshgrid(*([k] * self.dim), indexing="ij")
        return sum(ka**2 for ka in axes)

    @cached_property
    def k_norm(self) -> np.ndarray:
        return np.sqrt(self.k_squared)

    def describe(self) -> dict:
        return {
            "dim": self.dim,
            "points_per_dim": self.points_per_dim,
            "box_length": self.box_length,
        }


@dataclass(frozen=True, eq=False)
class ComplexField:
    """Complex amplitude at every point of a GridSpec"""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.complex128)
        if values.shape != self.grid.shape:
            if values.size != self.grid.total_points:
                raise ValueError(
                    f"field has {values.size} values, grid expects {self.grid.total_points}"
                )
            values = values.reshape(self.grid.shape)
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, grid: GridSpec) -> "ComplexField":
        return cls(grid, np.zeros(grid.shape, dtype=np.complex128))

    @classmethod
    def constant(cls, grid: GridSpec, value: Scalar) -> "ComplexField":
        return cls(grid, np.full(grid.shape, value, dtype=np.complex128))

    @classmethod
    def from_function(cls, grid: GridSpec, fn: Callable[..., np.ndarray]) -> "ComplexField":
        """Sample fn(x1, ..., xd) on the grid coordinates"""
        return cls(grid, np.broadcast_to(fn(*grid.coordinates), grid.shape))

    @classmethod
    def from_spectrum(cls, grid: GridSpec, coefficients: np.ndarray) -> "ComplexField":
        return cls(grid, inverse_fft(coefficients))

    def with_values(self, values: np.ndarray) -> "ComplexField":
        return ComplexField(self.grid, values)

    def spectrum(self) -> np.ndarray:
        return fft(self.values)

    def conj(self) -> "ComplexField":
        return ComplexField(self.grid, np.conj(self.values))

    def abs_squared(self) -> np.ndarray:
        return self.values.real**2 + self.values.imag**2

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))

    def max_abs_imag(self) -> float:
        return float(np.max(np.abs(self.values.imag)))

    def check_same_grid(self, other: "ComplexField"):
        if other.grid != self.grid:
            raise GridMismatchError(f"grid mismatch: {self.grid} vs {other.grid}")

    def _operand(self, other):
        if isinstance(other, ComplexField):
            self.check_same_grid(other)
            return other.values
        return other

    def __add__(self, other) -> "ComplexField":
        return ComplexField(self.grid, self.values + self._operand(other))

    __radd__ = __add__

    def __sub__(self, other) -> "ComplexField":
        return ComplexField(self.grid, self.values - self._operand(other))

    def __rsub__(self, other) -> "ComplexField":
        return ComplexField(self.grid, self._operand(other) - self.values)

    def __mul__(self, other) -> "ComplexField":
        return ComplexField(self.grid, self.values * self._operand(other))

    __rmul__ = __mul__

    def __truediv__(self, other) -> "ComplexField":
        return ComplexField(self.grid, self.values / self._operand(other))

    def __neg__(self) -> "ComplexField":
        return ComplexField(self.grid, -self.values)


def fft(values: np.ndarray) -> np.ndarray:
    return sp_fft.fftn(values, workers=Config.FFT_WORKERS)


def inverse_fft(coefficients: np.ndarray) -> np.ndarray:
    return sp_fft.ifftn(coefficients, workers=Config.FFT_WORKERS)


def apply_multiplier(f: ComplexField, multiplier: np.ndarray) -> ComplexField:
    """Multiply the Fourier coefficients of f and transform back"""
    return ComplexField(f.grid, inverse_fft(fft(f.values) * multiplier))


def laplacian(f: ComplexField) -> ComplexField:
    return apply_multiplier(f, -f.grid.k_squared)


def gradient(f: ComplexField) -> List[ComplexField]:
    f_hat = fft(f.values)
    return [ComplexField(f.grid, inverse_fft(1j * k * f_hat)) for k in f.grid.wavenumbers]


def lp_norm(f: ComplexField, p: float = 2.0) -> float:
    if math.isinf(p) and p > 0:
        return float(np.max(np.abs(f.values)))
    if not p >= 1:
        raise ValueError(f"L^p norm needs p >= 1, got {p}")
    if p == 2:
        return math.sqrt(float(np.sum(f.abs_squared())) * f.grid.cell_volume)
    return float((np.sum(np.abs(f.values) ** p) * f.grid.cell_volume) ** (1.0 / p))


def l2_norm(f: ComplexField) -> float:
    return lp_norm(f, 2.0)


def dirichlet_pairing(f_hat: np.ndarray, g_hat: np.ndarray, grid: GridSpec) -> float:
    """Re <grad f, grad g> from Fourier coefficients; |k|^2 weights keep the Nyquist entry"""
    weighted = grid.k_squared * f_hat * np.conj(g_hat)
    return float(np.sum(weighted).real * grid.cell_volume / grid.total_points)


def gradient_norm_squared(f: ComplexField) -> float:
    """||grad f||^2_{L^2}, the quadratic form the dispersion step conserves"""
    f_hat = fft(f.values)
    return dirichlet_pairing(f_hat, f_hat, f.grid)


def h1_norm(f: ComplexField) -> float:
    return math.sqrt(l2_norm(f) ** 2 + gradient_norm_squared(f))


def inner(f: ComplexField, g: ComplexField) -> complex:
    """<f, g> = sum f * conj(g) * cell volume"""
    f.check_same_grid(g)
    return complex(np.sum(f.values * np.conj(g.values)) * f.grid.cell_volume)


def integrate(values: np.ndarray, grid: GridSpec) -> complex:
    return complex(np.sum(values) * grid.cell_volume)


def spectral_l2_squared(f: ComplexField) -> float:
    """Parseval side of ||f||^2: sum |f_hat|^2 * cell volume / N^d"""
    f_hat = fft(f.values)
    return float(np.sum(np.abs(f_hat) ** 2) * f.grid.cell_volume / f.grid.total_points)


def theta_profile(x: np.ndarray, profile: str = DEFAULT_THETA_PROFILE) -> np.ndarray:
    """Cutoff profile: 1 on |x| <= 1, 0 on |x| >= 2, smooth in between"""
    r = np.abs(np.asarray(x, dtype=float))
    if profile == "smooth-step":
        with np.errstate(divide="ignore", over="ignore"):
            inner_part = np.where(r < 2.0, np.exp(-1.0 / np.maximum(2.0 - r, 1e-300)), 0.0)
            outer_part = np.where(r > 1.0, np.exp(-1.0 / np.maximum(r - 1.0, 1e-300)), 0.0)
        return inner_part / (inner_part + outer_part)
    if profile == "bump":
        s = np.clip(r - 1.0, 0.0, None)
        with np.errstate(divide="ignore"):
            return np.where(s < 1.0, np.exp(1.0 - 1.0 / np.maximum(1.0 - s**2, 1e-300)), 0.0)
    raise ValueError(f"unknown theta profile {profile!r}; expected one of {THETA_PROFILES}")


def theta_cutoff(f: ComplexField, m: int, profile: str = DEFAULT_THETA_PROFILE) -> ComplexField:
    """Fourier multiplier theta(|k|/m)"""
    if int(m) != m or m < 1:
        raise ValueError(f"cutoff level m must be a positive integer, got {m}")
    return apply_multiplier(f, theta_profile(f.grid.k_norm / m, profile))
