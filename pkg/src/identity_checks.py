"""Pathwise residuals for the rescaling equivalence and the mass and energy identities.

Every stochastic integral is a left-point (non-anticipating) sum over the
same Brownian increments the solver consumed. quadrature="corrected" adds
the iterated-integral term 1/2 sum_ij (L^i f_j)(dB_i dB_j - delta_ij dt),
which keeps the sum non-anticipating but lifts its strong order from 1/2
to 1.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np

from src.exceptions import (
    CompatibilityError,
    DenseDataUnavailableError,
    ProvenanceError,
)
from src.noise_model import BrownianPath, NoiseModel
from src.spectral_grid import ComplexField, GridSpec, dirichlet_pairing, fft, l2_norm
from src.system_params import SystemParams
from src.trajectory import TrajectoryRecord

logger = logging.getLogger(__name__)

QUADRATURES = ("left", "corrected")
INTERACTION_VARIANTS = ("ito", "printed")
DEFAULT_QUADRATURE = "corrected"
RELATIVE_FLOOR = 1e-300


@dataclass
class ResidualSeries:
    """lhs, rhs and |lhs - rhs| at the record's sample times"""

    name: str
    times: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    residual: np.ndarray
    dt: float
    components: Dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def build(
        cls,
        name: str,
        times: Sequence[float],
        lhs: Sequence[float],
        rhs: Sequence[float],
        dt: float,
        components: Dict[str, Sequence[float]] = None,
    ) -> "ResidualSeries":
        lhs_arr = np.asarray(lhs, dtype=float)
        rhs_arr = np.asarray(rhs, dtype=float)
        return cls(
            name=name,
            times=np.asarray(times, dtype=float),
            lhs=lhs_arr,
            rhs=rhs_arr,
            residual=np.abs(lhs_arr - rhs_arr),
            dt=dt,
            components={k: np.asarray(v, dtype=float) for k, v in (components or {}).items()},
        )

    @property
    def final(self) -> float:
        return float(self.residual[-1])

    @property
    def max(self) -> float:
        return float(np.max(self.residual))

    def rows(self) -> List[Tuple[float, float, float, float]]:
        columns = (self.times, self.lhs, self.rhs, self.residual)
        return list(zip(*(c.tolist() for c in columns)))


@dataclass
class ConservationReport:
    """Worst relative drift of Q and E over a noise-free record"""

    q_drift: float
    e_drift: float
    n_samples: int
    q_series: np.ndarray = field(repr=False)
    e_series: np.ndarray = field(repr=False)

    def as_dict(self) -> dict:
        return {"q_drift": self.q_drift, "e_drift": self.e_drift, "n_samples": self.n_samples}


def check_provenance(record: TrajectoryRecord, model: NoiseModel, path: BrownianPath):
    if record.grid != model.grid:
        raise ProvenanceError("record grid differs from the noise model grid")
    if record.path_fingerprint != path.fingerprint:
        raise ProvenanceError(
            f"record was produced from a different Brownian path "
            f"(seed {record.seed} vs {path.seed})"
        )


def require_dense(record: TrajectoryRecord):
    if not record.dense:
        raise DenseDataUnavailableError(
            f"identity needs a snapshot at every step; record has {len(record.snapshots_first)} "
            f"snapshots for steps 0..{record.last_step} (record_every={record.record_every})"
        )


def _check_quadrature(quadrature: str):
    if quadrature not in QUADRATURES:
        raise ValueError(f"quadrature must be one of {QUADRATURES}, got {quadrature!r}")


def physical_state(
    record: TrajectoryRecord, index: int, model: NoiseModel, path: BrownianPath
) -> Tuple[ComplexField, ComplexField]:
    """(u, v) at sample index; rescaled snapshots are multiplied by e^W"""
    first, second = record.state(index)
    if record.solver != "rescaled" or model.n_modes == 0:
        return first, second
    exp_w = np.exp(model.w_field(path, record.steps[index]).values)
    return first * exp_w, second * exp_w


def _iterated_weights(increments: np.ndarray, dt: float) -> np.ndarray:
    """dB_i dB_j - delta_ij dt for one step"""
    return np.outer(increments, increments) - dt * np.eye(increments.size)


def equivalence_residual(
    direct: TrajectoryRecord,
    rescaled: TrajectoryRecord,
    model: NoiseModel,
    path: BrownianPath,
) -> ResidualSeries:
    """max(||u - e^W y|| / ||u||, ||v - e^W z|| / ||v||) at shared sample steps"""
    if direct.solver != "direct" or rescaled.solver != "rescaled":
        raise ProvenanceError("expected one direct and one rescaled record")
    for record in (direct, rescaled):
        check_provenance(record, model, path)
    if direct.params != rescaled.params:
        raise ProvenanceError("records were produced with different parameters")
    if direct.seed != rescaled.seed or not math.isclose(direct.dt, rescaled.dt, rel_tol=1e-12):
        raise ProvenanceError("records differ in seed or time step")
    if direct.steps != rescaled.steps:
        raise ProvenanceError("records were sampled at different steps")
    if not direct.snapshots_first or not rescaled.snapshots_first:
        raise DenseDataUnavailableError("equivalence check needs state snapshots in both records")

    rel_u, rel_v = [], []
    for i in range(direct.n_samples):
        u, v = direct.state(i)
        mapped_u, mapped_v = physical_state(rescaled, i, model, path)
        rel_u.append(l2_norm(u - mapped_u) / max(l2_norm(u), RELATIVE_FLOOR))
        rel_v.append(l2_norm(v - mapped_v) / max(l2_norm(v), RELATIVE_FLOOR))
    lhs = np.maximum(rel_u, rel_v)
    logger.debug(f"Equivalence residual: final {lhs[-1]:.3e}, max {np.max(lhs):.3e}")
    return ResidualSeries.build(
        "equivalence",
        direct.times,
        lhs,
        np.zeros_like(lhs),
        direct.dt,
        {"u": rel_u, "v": rel_v},
    )


def mass_identity_residual(
    record: TrajectoryRecord,
    model: NoiseModel,
    path: BrownianPath,
    c: float,
    quadrature: str = DEFAULT_QUADRATURE,
) -> ResidualSeries:
    """Q(t) against Q(0) + 2 sum_j int Re(mu_j) e_j (|u|^2 + c|v|^2) dB_j"""
    _check_quadrature(quadrature)
    check_provenance(record, model, path)
    require_dense(record)
    dt = record.dt
    cell = model.grid.cell_volume
    re_phi = model.phis.real

    lhs, rhs, ito, correction = [], [], [0.0], [0.0]
    q0 = None
    for i, step in enumerate(record.steps):
        u, v = physical_state(record, i, model, path)
        density = u.abs_squared() + c * v.abs_squared()
        q = float(np.sum(density) * cell)
        if q0 is None:
            q0 = q
        lhs.append(q)
        rhs.append(q0 + ito[-1] + correction[-1])
        if step == record.last_step:
            break
        increments = path.increments[:, step]
        flat = re_phi.reshape(model.n_modes, model.grid.total_points)
        weighted = flat * density.reshape(-1)
        integrands = 2.0 * cell * weighted.sum(axis=1)
        ito.append(ito[-1] + float(integrands @ increments))
        if quadrature == "corrected" and model.n_modes:
            # L^i f_j = 4 int Re(phi_i) Re(phi_j) (|u|^2 + c|v|^2)
            generator = 4.0 * cell * (weighted @ flat.T)
            step_correction = 0.5 * float(np.sum(generator * _iterated_weights(increments, dt)))
            correction.append(correction[-1] + step_correction)
        else:
            correction.append(correction[-1])
    logger.debug(
        f"Mass identity residual at t={record.times[-1]:.6g}: {abs(lhs[-1] - rhs[-1]):.3e}"
    )
    return ResidualSeries.build(
        "mass",
        record.times,
        lhs,
        rhs,
        dt,
        {"ito": ito[: len(lhs)], "correction": correction[: len(lhs)]},
    )


@dataclass
class _Direction:
    """A tangent vector (h_u, h_v) with its Fourier coefficients"""

    u: np.ndarray
    v: np.ndarray
    u_hat: np.ndarray
    v_hat: np.ndarray

    @classmethod
    def of(cls, u: np.ndarray, v: np.ndarray) -> "_Direction":
        return cls(u, v, fft(u), fft(v))


class _EnergyForms:
    """First and second derivatives of E = K - Re(conj(lambda) int u^2 conj(v))"""

    def __init__(self, params: SystemParams, grid: GridSpec):
        self.params = params
        self.grid = grid
        self.cell = grid.cell_volume
        self.lam_bar = np.conj(params.lam)

    def _integral(self, values: np.ndarray) -> complex:
        return complex(np.sum(values) * self.cell)

    def kinetic_second(self, h: _Direction, g: _Direction) -> float:
        p = self.params
        grad_u = dirichlet_pairing(h.u_hat, g.u_hat, self.grid)
        grad_v = dirichlet_pairing(h.v_hat, g.v_hat, self.grid)
        return grad_u / p.ell + p.c * grad_v / (2.0 * p.L)

    def kinetic_first(self, X: _Direction, h: _Direction) -> float:
        return self.kinetic_second(h, X)

    def interaction_first(self, X: _Direction, h: _Direction) -> float:
        values = 2.0 * X.u * h.u * np.conj(X.v) + X.u**2 * np.conj(h.v)
        return (self.lam_bar * self._integral(values)).real

    def interaction_second(self, X: _Direction, h: _Direction, g: _Direction) -> float:
        values = 2.0 * (
            h.u * g.u * np.conj(X.v) + X.u * h.u * np.conj(g.v) + X.u * g.u * np.conj(h.v)
        )
        return (self.lam_bar * self._integral(values)).real

    def paired(self, X: _Direction, weight) -> float:
        """Re(conj(lambda) int weight u^2 conj(v))"""
        return (self.lam_bar * self._integral(weight * X.u**2 * np.conj(X.v))).real

    def printed_noise(self, X: _Direction, phi: np.ndarray) -> float:
        """Re int conj(phi) lambda v conj(u)^2"""
        return (self.params.lam * self._integral(np.conj(phi) * X.v * np.conj(X.u) ** 2)).real

    def value(self, X: _Direction) -> float:
        return 0.5 * self.kinetic_second(X, X) - self.paired(X, 1.0)

    def first(self, X: _Direction, h: _Direction) -> float:
        return self.kinetic_first(X, h) - self.interaction_first(X, h)

    def second(self, X: _Direction, h: _Direction, g: _Direction) -> float:
        return self.kinetic_second(h, g) - self.interaction_second(X, h, g)


ENERGY_TERMS = (
    "kinetic_damping",
    "kinetic_ito",
    "interaction_drift",
    "kinetic_noise",
    "interaction_noise",
    "correction",
)


def energy_identity_residual(
    record: TrajectoryRecord,
    model: NoiseModel,
    path: BrownianPath,
    params: SystemParams,
    quadrature: str = DEFAULT_QUADRATURE,
    interaction_terms: str = "ito",
) -> ResidualSeries:
    """E(t) against E(0) plus every Lebesgue and Ito term of the energy evolution.

    Lebesgue integrals use left rectangles; Ito integrals use left-point sums
    on the record's own increments. interaction_terms="printed" replaces the
    interaction contributions by -3 int Re<lam v, mu u^2> ds and
    -3 sum_j int Re(conj(phi_j) <lam v, u^2>) dB_j.
    """
    _check_quadrature(quadrature)
    if interaction_terms not in INTERACTION_VARIANTS:
        raise ValueError(
            f"interaction_terms must be one of {INTERACTION_VARIANTS}, got {interaction_terms!r}"
        )
    if not params.is_compatible:
        raise CompatibilityError(params.compat_residual)
    check_provenance(record, model, path)
    require_dense(record)

    grid = model.grid
    dt = record.dt
    forms = _EnergyForms(params, grid)
    mu = model.mu_field().values
    mu_tilde = model.mu_tilde_field().values
    phis = model.phis
    printed = interaction_terms == "printed"

    totals = {name: 0.0 for name in ENERGY_TERMS}
    history = {name: [] for name in ENERGY_TERMS}
    lhs, rhs = [], []
    e0 = None
    for i, step in enumerate(record.steps):
        u, v = physical_state(record, i, model, path)
        X = _Direction.of(u.values, v.values)
        energy = forms.value(X)
        if e0 is None:
            e0 = energy
        lhs.append(energy)
        rhs.append(e0 + sum(totals.values()))
        for name in ENERGY_TERMS:
            history[name].append(totals[name])
        if step == record.last_step:
            break

        increments = path.increments[:, step]
        damping = _Direction.of(-mu * X.u, -mu * X.v)
        noise = [_Direction.of(phi * X.u, phi * X.v) for phi in phis]

        totals["kinetic_damping"] += forms.kinetic_first(X, damping) * dt
        totals["kinetic_ito"] += 0.5 * sum(forms.kinetic_second(n, n) for n in noise) * dt
        if printed:
            drift = -3.0 * forms.paired(X, mu)
        else:
            drift = -forms.paired(X, mu + 2.0 * mu_tilde)
        totals["interaction_drift"] += drift * dt

        for j, (phi, n) in enumerate(zip(phis, noise)):
            totals["kinetic_noise"] += forms.kinetic_first(X, n) * increments[j]
            if printed:
                term = -3.0 * forms.printed_noise(X, phi)
            else:
                term = -forms.paired(X, 2.0 * phi + np.conj(phi))
            totals["interaction_noise"] += term * increments[j]

        if quadrature == "corrected" and model.n_modes:
            weights = _iterated_weights(increments, dt)
            step_correction = 0.0
            for a in range(model.n_modes):
                for b in range(model.n_modes):
                    if weights[a, b] == 0.0:
                        continue
                    product = phis[a] * phis[b]
                    chained = _Direction.of(product * X.u, product * X.v)
                    generator = forms.second(X, noise[a], noise[b]) + forms.first(X, chained)
                    step_correction += generator * weights[a, b]
            totals["correction"] += 0.5 * step_correction

    logger.debug(
        f"Energy identity residual ({interaction_terms}, {quadrature}) at "
        f"t={record.times[len(lhs) - 1]:.6g}: {abs(lhs[-1] - rhs[-1]):.3e}"
    )
    return ResidualSeries.build("energy", record.times[: len(lhs)], lhs, rhs, dt, history)


def deterministic_conservation(record: TrajectoryRecord) -> ConservationReport:
    """Relative drift of Q and E over a noise-free record"""
    if not record.noise_free:
        raise ValueError("deterministic conservation applies only to noise-free records")
    q = record.column("Q")
    e = record.column("E")
    q_series = np.abs(q - q[0]) / max(abs(q[0]), RELATIVE_FLOOR)
    e_series = np.abs(e - e[0]) / max(abs(e[0]), RELATIVE_FLOOR)
    report = ConservationReport(
        q_drift=float(np.max(q_series)),
        e_drift=float(np.max(e_series)),
        n_samples=record.n_samples,
        q_series=q_series,
        e_series=e_series,
    )
    logger.info(f"Conservation drift: Q {report.q_drift:.3e}, E {report.e_drift:.3e}")
    return report


def observed_orders(residuals: Sequence[float]) -> List[float]:
    """log2 ratios of residuals at successive dt halvings, coarsest first"""
    orders = []
    for coarse, fine in zip(residuals[:-1], residuals[1:]):
        if fine == 0.0:
            orders.append(math.inf if coarse > 0.0 else 0.0)
        else:
            orders.append(math.log2(coarse / fine) if coarse > 0.0 else -math.inf)
    return orders


def monotone_within(residuals: Sequence[float], band: float = 1.5) -> bool:
    """Each refinement level is at most band times the previous one"""
    return all(fine <= band * coarse for coarse, fine in zip(residuals[:-1], residuals[1:]))
