"""Mass, energy, interaction and norm diagnostics of the (u, v) pair.

The interaction enters the energy as E = K - Re(lambda <v, u^2>), the
orientation under which the deterministic flow conserves E when
lambda = c * conj(kappa).
"""

import logging
import math
from dataclasses import asdict, dataclass
from fractions import Fraction
from typing import TYPE_CHECKING, Optional, Tuple, Union

import numpy as np

from src.exceptions import DenseDataUnavailableError, ProvenanceError
from src.spectral_grid import (
    ComplexField,
    gradient_norm_squared,
    integrate,
    l2_norm,
    lp_norm,
)
from src.system_params import SystemParams

if TYPE_CHECKING:
    from src.trajectory import TrajectoryRecord

logger = logging.getLogger(__name__)

INTERACTION_ORIENTATION = "E = K - Re(lambda <v, u^2>)"

Exponent = Union[int, float, Fraction]


@dataclass(frozen=True)
class FunctionalSample:
    """Functionals of one state; P_im = Im int u^2 conj(v) closes E for complex lambda"""

    t: float
    Q: float
    K: float
    P: float
    P_im: float
    E: float
    l2_u: float
    l2_v: float
    h1_u: float
    h1_v: float

    def energy_from_parts(self, params: SystemParams) -> float:
        return self.K - (params.lam.real * self.P + params.lam.imag * self.P_im)

    def as_dict(self) -> dict:
        return asdict(self)


def mass_q(u: ComplexField, v: ComplexField, c: float) -> float:
    u.check_same_grid(v)
    return l2_norm(u) ** 2 + c * l2_norm(v) ** 2


def kinetic_k(u: ComplexField, v: ComplexField, params: SystemParams) -> float:
    u.check_same_grid(v)
    grad_u = gradient_norm_squared(u)
    grad_v = gradient_norm_squared(v)
    return grad_u / (2.0 * params.ell) + params.c * grad_v / (4.0 * params.L)


def interaction_integral(u: ComplexField, v: ComplexField) -> complex:
    """int u^2 conj(v)"""
    u.check_same_grid(v)
    return integrate(u.values**2 * np.conj(v.values), u.grid)


def interaction_p(u: ComplexField, v: ComplexField) -> float:
    return interaction_integral(u, v).real


def interaction_term(u: ComplexField, v: ComplexField, params: SystemParams) -> float:
    """Re(lambda <v, u^2>) = Re(conj(lambda) int u^2 conj(v))"""
    return (np.conj(params.lam) * interaction_integral(u, v)).real


def energy_e(u: ComplexField, v: ComplexField, params: SystemParams) -> float:
    return kinetic_k(u, v, params) - interaction_term(u, v, params)


def sample_functionals(
    t: float, u: ComplexField, v: ComplexField, params: SystemParams
) -> FunctionalSample:
    grad_u = gradient_norm_squared(u)
    grad_v = gradient_norm_squared(v)
    l2_u = l2_norm(u)
    l2_v = l2_norm(v)
    kinetic = grad_u / (2.0 * params.ell) + params.c * grad_v / (4.0 * params.L)
    pairing = interaction_integral(u, v)
    energy = kinetic - (np.conj(params.lam) * pairing).real
    return FunctionalSample(
        t=float(t),
        Q=l2_u**2 + params.c * l2_v**2,
        K=kinetic,
        P=pairing.real,
        P_im=pairing.imag,
        E=float(energy),
        l2_u=l2_u,
        l2_v=l2_v,
        h1_u=math.sqrt(l2_u**2 + grad_u),
        h1_v=math.sqrt(l2_v**2 + grad_v),
    )


def _as_fraction(x: Exponent) -> Optional[Fraction]:
    """Exact value of a finite exponent, None for infinity"""
    if isinstance(x, float) and math.isinf(x):
        return None
    if isinstance(x, float):
        return Fraction(x).limit_denominator(10**6)
    return Fraction(x)


def strichartz_violation(p: Exponent, q: Exponent, d: int) -> Optional[str]:
    """None when (p, q) is admissible in dimension d, else the violated relation"""
    if d < 1:
        return f"dimension must be positive, got {d}"
    fp, fq = _as_fraction(p), _as_fraction(q)
    if fp is not None and fp < 2:
        return f"need p >= 2, got p = {p}"
    if fq is not None and fq < 2:
        return f"need q >= 2, got q = {q}"
    two_over_q = Fraction(0) if fq is None else Fraction(2) / fq
    d_over_p = Fraction(0) if fp is None else Fraction(d) / fp
    if two_over_q != Fraction(d, 2) - d_over_p:
        rhs = Fraction(d, 2) - d_over_p
        return f"2/q = d/2 - d/p fails: 2/q = {two_over_q}, d/2 - d/p = {rhs}"
    if d == 2 and (fp is None or fq == 2):
        return "endpoint (p, q) = (inf, 2) is excluded in d = 2"
    return None


def is_strichartz_admissible(p: Exponent, q: Exponent, d: int) -> bool:
    return strichartz_violation(p, q, d) is None


def spacetime_norm(
    record: "TrajectoryRecord",
    which: str,
    q: Exponent,
    p: Exponent,
    d: int,
    with_error: bool = False,
) -> Union[float, Tuple[float, float]]:
    """L^q_t L^p_x norm over the recorded samples (left Riemann sum in time).

    With with_error=True also returns |left - right| Riemann estimate as a
    sub-sampling error indicator.
    """
    violation = strichartz_violation(p, q, d)
    if violation is not None:
        raise ValueError(f"inadmissible Strichartz pair (p={p}, q={q}, d={d}): {violation}")
    if which not in ("u", "v"):
        raise ValueError(f"which must be 'u' or 'v', got {which!r}")
    if record.solver != "direct":
        raise ProvenanceError(
            f"space-time norms of (u, v) need a direct record, got a {record.solver} record"
        )
    if not record.snapshots_first:
        raise DenseDataUnavailableError("record stores no state snapshots")
    p_value = float(p)
    norms = np.array(
        [lp_norm(record.component(i, which), p_value) for i in range(len(record.times))]
    )
    if math.isinf(float(q)):
        value = float(np.max(norms))
        return (value, 0.0) if with_error else value
    q_value = float(q)
    widths = np.diff(np.asarray(record.times))
    powered = norms**q_value
    left = float(np.sum(powered[:-1] * widths)) ** (1.0 / q_value)
    if not with_error:
        return left
    right = float(np.sum(powered[1:] * widths)) ** (1.0 / q_value)
    return left, abs(left - right)


def gn_ratio(f: ComplexField, d: Optional[int] = None) -> float:
    """||f||_{L^3} / (||grad f||^{d/6} ||f||^{1-d/6}); no constant asserted"""
    d = f.grid.dim if d is None else d
    l2 = l2_norm(f)
    if l2 == 0.0:
        raise ValueError("Gagliardo-Nirenberg ratio undefined for the zero field")
    grad = math.sqrt(gradient_norm_squared(f))
    if grad <= 1e-12 * l2 / f.grid.box_length:
        raise ValueError("Gagliardo-Nirenberg ratio undefined for a constant field")
    return lp_norm(f, 3.0) / (grad ** (d / 6.0) * l2 ** (1.0 - d / 6.0))
