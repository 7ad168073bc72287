"""Physical and coupling parameters of the two-component system"""

import logging
from dataclasses import dataclass, field
from typing import List

import numpy as np

from src.noise_model import NoiseModel

logger = logging.getLogger(__name__)

COMPAT_RTOL = 1e-12


@dataclass(frozen=True)
class SystemParams:
    """Masses ell and L, couplings lam (lambda) and kappa, real constant c"""

    ell: float = 1.0
    L: float = 1.0
    lam: complex = 1.0
    kappa: complex = 1.0
    c: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "lam", complex(self.lam))
        object.__setattr__(self, "kappa", complex(self.kappa))
        object.__setattr__(self, "ell", float(self.ell))
        object.__setattr__(self, "L", float(self.L))
        object.__setattr__(self, "c", float(self.c))

    @classmethod
    def compatible(cls, ell: float, L: float, kappa: complex, c: float) -> "SystemParams":
        """Parameters with lambda = c * conj(kappa) by construction"""
        return cls(ell=ell, L=L, lam=c * np.conj(complex(kappa)), kappa=kappa, c=c)

    @property
    def compat_residual(self) -> float:
        """|lambda - c * conj(kappa)|"""
        return float(abs(self.lam - self.c * np.conj(self.kappa)))

    @property
    def is_compatible(self) -> bool:
        scale = max(abs(self.lam), abs(self.c * self.kappa), 1.0)
        return self.compat_residual <= COMPAT_RTOL * scale

    def describe(self) -> dict:
        return {
            "ell": self.ell,
            "L": self.L,
            "lambda_re": self.lam.real,
            "lambda_im": self.lam.imag,
            "kappa_re": self.kappa.real,
            "kappa_im": self.kappa.imag,
            "c": self.c,
        }


@dataclass
class ValidationReport:
    """Outcome of validate(); ok is False when any violation was found"""

    ok: bool
    compat_residual: float
    violations: List[str] = field(default_factory=list)


def validate(params: SystemParams, require_compat: bool = False) -> ValidationReport:
    violations = []
    if not params.ell > 0:
        violations.append(f"ell must be positive, got {params.ell}")
    if not params.L > 0:
        violations.append(f"L must be positive, got {params.L}")
    if params.c == 0:
        violations.append("c must be nonzero")
    residual = params.compat_residual
    if require_compat and not params.is_compatible:
        violations.append(
            f"compatibility lambda = c*conj(kappa) violated: residual {residual:.6g}"
        )
    if violations:
        logger.debug(f"Parameter violations: {'; '.join(violations)}")
    return ValidationReport(ok=not violations, compat_residual=residual, violations=violations)


def h1_regime(params: SystemParams, model: NoiseModel) -> bool:
    """Additional H^1 assumption: Re mu_j = 0 for all j, or c > 0 and Re(mu_j) e_j <= 0"""
    if model.purely_imaginary:
        return True
    if params.c <= 0:
        return False
    return all(np.all(mode.mu.real * mode.profile.values.real <= 0.0) for mode in model.modes)
