"""Experiment presets, their acceptance rules and the output-writing orchestration"""

import logging
import math
import os
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

import src
from src.dynamics_direct import SolverConfig, pair_norm, run_direct
from src.dynamics_rescaled import run_rescaled
from src.ensemble import derived_seed, martingale_test, run_ensemble, sup_statistic
from src.exceptions import SimulationError
from src.functionals import INTERACTION_ORIENTATION, gn_ratio, mass_q, spacetime_norm
from src.identity_checks import (
    ResidualSeries,
    deterministic_conservation,
    energy_identity_residual,
    equivalence_residual,
    mass_identity_residual,
    monotone_within,
    observed_orders,
)
from src.noise_model import BrownianPath, NoiseModel
from src.outputs import ensure_dir, file_sha256, write_json, write_ndjson, write_timeseries
from src.run_config import RunConfig, RunManifest
from src.spectral_grid import l2_norm, theta_cutoff
from src.system_params import h1_regime
from src.trajectory import TrajectoryRecord

logger = logging.getLogger(__name__)

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

EQUIVALENCE_TOLERANCE = 1e-3
MONOTONE_BAND = 1.5
Q_DRIFT_TOLERANCE = 1e-8
CONSERVATION_RATIO = (3.0, 5.0)
RESIDUAL_FLOOR = 1e-10

STRICHARTZ_PAIRS = {
    1: [(2.0, math.inf), (math.inf, 4.0)],
    2: [(2.0, math.inf), (4.0, 4.0)],
    3: [(2.0, math.inf), (6.0, 2.0)],
}

PRESET_DESCRIPTIONS = {
    "equivalence": "u = e^W y: direct and rescaled solvers on shared paths under dt refinement",
    "mass-identity": "Q evolution against its Ito expansion under coupled dt refinement",
    "energy-identity": "E evolution against its Ito expansion under coupled dt refinement",
    "conservation": "noise-free Q and E drift, with an E-drift refinement order",
    "martingale": "mean-zero test of final Q over an ensemble plus an injected-drift control",
    "blowup-demo": "norm-threshold stopping rule; the detector outcome is reported, not failed",
    "custom": "single run or ensemble with norm diagnostics and no acceptance rule",
}


@dataclass
class ExperimentResult:
    experiment: str
    passed: bool
    details: Dict = field(default_factory=dict)
    seeds: List[int] = field(default_factory=list)
    record: Optional[TrajectoryRecord] = None
    residuals: List[ResidualSeries] = field(default_factory=list)
    path_rows: Optional[List[dict]] = None
    exit_code: Optional[int] = None

    def __post_init__(self):
        if self.exit_code is None:
            self.exit_code = EXIT_PASS if self.passed else EXIT_FAIL

    @property
    def status(self) -> str:
        return "PASS" if self.passed else "FAIL"


@dataclass
class RunOutcome:
    exit_code: int
    status: str
    output_dir: str
    files: Dict[str, str]
    details: Dict


def coupled_paths(
    model: NoiseModel, seed: int, dt: float, n_steps: int, levels: int
) -> List[BrownianPath]:
    """Paths at dt, dt/2, ..., dt/2^(levels-1) built from one finest draw, coarsest first"""
    factor = 2 ** (levels - 1)
    paths = [model.sample_path(seed, dt / factor, n_steps * factor)]
    for _ in range(levels - 1):
        paths.append(paths[-1].coarsen())
    return paths[::-1]


def dense_config(solver: SolverConfig, dt: float) -> SolverConfig:
    return replace(solver, dt=dt, record_every=1, keep_snapshots=True)


def _rms(values: List[float]) -> float:
    return float(np.sqrt(np.mean(np.square(values))))


def _refinement_verdict(
    finals: List[List[float]], gate: float, scale: float
) -> Tuple[bool, Dict]:
    """Per-level RMS over seeds, observed orders and the pass rule"""
    rms = [_rms([per_seed[level] for per_seed in finals]) for level in range(len(finals[0]))]
    orders = observed_orders(rms)
    overall = math.inf
    if rms[0] > 0 and rms[-1] > 0:
        overall = math.log2(rms[0] / rms[-1]) / (len(rms) - 1)
    converged = rms[-1] <= RESIDUAL_FLOOR * max(1.0, scale)
    passed = converged or (overall >= gate and monotone_within(rms, MONOTONE_BAND))
    return passed, {
        "rms_residuals": rms,
        "observed_orders": orders,
        "overall_order": overall,
        "order_gate": gate,
        "below_floor": converged,
    }


def _identity_preset(config: RunConfig, which: str) -> ExperimentResult:
    model = config.build_model()
    u0, v0 = config.initial_fields()
    seeds = [derived_seed(config.seed, i) for i in range(config.n_paths)]
    dts = [config.solver.dt / 2**level for level in range(config.levels)]
    finals: List[List[float]] = []
    shown: Tuple[Optional[TrajectoryRecord], Optional[ResidualSeries]] = (None, None)
    scale = 1.0
    for index, seed in enumerate(seeds):
        per_level = []
        paths = coupled_paths(model, seed, config.solver.dt, config.solver.n_steps, config.levels)
        for path in paths:
            solver = dense_config(config.solver, path.dt)
            record = run_direct(u0, v0, config.params, model, path, solver)
            if which == "mass":
                series = mass_identity_residual(
                    record, model, path, config.params.c, config.quadrature
                )
            else:
                series = energy_identity_residual(
                    record, model, path, config.params, config.quadrature, config.interaction_terms
                )
            scale = max(scale, abs(series.lhs[0]))
            per_level.append(series.final)
            if index == 0:
                shown = (record, series)
        finals.append(per_level)
        logger.debug(f"{which} identity seed {seed}: finals {per_level}")
    passed, details = _refinement_verdict(finals, config.order_gate, scale)
    details.update(
        {
            "dts": dts,
            "per_seed_finals": finals,
            "quadrature": config.quadrature,
            "interaction_terms": config.interaction_terms if which == "energy" else None,
        }
    )
    record, series = shown
    return ExperimentResult(config.experiment, passed, details, seeds, record, [series])


def mass_identity_preset(config: RunConfig, workers: Optional[int] = None) -> ExperimentResult:
    return _identity_preset(config, "mass")


def energy_identity_preset(config: RunConfig, workers: Optional[int] = None) -> ExperimentResult:
    return _identity_preset(config, "energy")


def equivalence_preset(config: RunConfig, workers: Optional[int] = None) -> ExperimentResult:
    model = config.build_model()
    u0, v0 = config.initial_fields()
    seeds = [derived_seed(config.seed, i) for i in range(config.n_paths)]
    finals: List[List[float]] = []
    shown = None
    for index, seed in enumerate(seeds):
        per_level = []
        paths = coupled_paths(model, seed, config.solver.dt, config.solver.n_steps, config.levels)
        for path in paths:
            solver = dense_config(config.solver, path.dt)
            direct = run_direct(u0, v0, config.params, model, path, solver)
            rescaled = run_rescaled(u0, v0, config.params, model, path, solver)
            series = equivalence_residual(direct, rescaled, model, path)
            per_level.append(series.final)
            if index == 0:
                shown = (direct, series)
        finals.append(per_level)
    rms = [_rms([f[level] for f in finals]) for level in range(config.levels)]
    monotone = monotone_within(rms, MONOTONE_BAND)
    passed = rms[-1] <= EQUIVALENCE_TOLERANCE and monotone
    details = {
        "dts": [config.solver.dt / 2**level for level in range(config.levels)],
        "rms_residuals": rms,
        "observed_orders": observed_orders(rms),
        "monotone_within_band": monotone,
        "tolerance": EQUIVALENCE_TOLERANCE,
        "per_seed_finals": finals,
    }
    record, series = shown
    return ExperimentResult(config.experiment, passed, details, seeds, record, [series])


def energy_drift_verdict(coarse: float, fine: float) -> Tuple[bool, float]:
    """E drift ratio for dt and dt/2 inside CONSERVATION_RATIO, or a coarse drift at the floor"""
    if coarse <= RESIDUAL_FLOOR:
        return True, math.inf if fine == 0.0 else coarse / fine
    ratio = coarse / fine if fine > 0.0 else math.inf
    low, high = CONSERVATION_RATIO
    return low <= ratio <= high, ratio


def conservation_preset(
config: RunConfig, workers: Optional[int] = None) -> ExperimentResult:
    model = config.build_model()
    u0, v0 = config.initial_fields()
    reports = []
    records = []
    for dt in (config.solver.dt, config.solver.dt / 2):
        solver = replace(config.solver, dt=dt)
        path = model.sample_path(config.seed, dt, solver.n_steps)
        record = run_direct(u0, v0, config.params, model, path, solver)
        records.append(record)
        reports.append(deterministic_conservation(record))
    q_ok = reports[0].q_drift <= Q_DRIFT_TOLERANCE
    e_coarse, e_fine = reports[0].e_drift, reports[1].e_drift
    e_order = observed_orders([e_coarse, e_fine])[0]
    e_ok, e_ratio = energy_drift_verdict(e_coarse, e_fine)
    details = {
        "dts": [r.dt for r in records],
        "q_drift": [r.q_drift for r in reports],
        "e_drift": [r.e_drift for r in reports],
        "e_order": e_order,
        "q_tolerance": Q_DRIFT_TOLERANCE,
        "e_ratio": e_ratio,
        "e_ratio_band": list(CONSERVATION_RATIO),
    }
    record = records[0]
    q, e = record.column("Q"), record.column("E")
    residuals = [
        ResidualSeries.build("mass", record.times, q, np.full_like(q, q[0]), record.dt),
        ResidualSeries.build("energy", record.times, e, np.full_like(e, e[0]), record.dt),
    ]
    passed = q_ok and e_ok
    return ExperimentResult(config.experiment, passed, details, [config.seed], record, residuals)


def martingale_preset(config: RunConfig, workers: Optional[int] = None) -> ExperimentResult:
    model = config.build_model()
    u0, v0 = config.initial_fields()
    summary = run_ensemble(
        u0, v0, config.params, model, config.solver, config.n_paths, config.seed, workers,
        config.solver_kind,
    )
    q0 = mass_q(u0, v0, config.params.c)
    main = martingale_test(summary, q0)
    control = martingale_test(summary, q0, drift_rate=config.drift_rate)
    details = {
        "q0": q0,
        "test": main.as_dict(),
        "negative_control": control.as_dict(),
        "n_excluded": main.n_excluded,
        "aggregates": summary.aggregates(),
        "sup_statistic": sup_statistic(summary).as_dict(),
    }
    passed = main.passed and not control.passed
    rows = [row.as_dict() for row in summary.rows]
    return _with_first_path(config, model, u0, v0, passed, details, summary, rows)


def _with_first_path(config, model, u0, v0, passed, details, summary, rows) -> ExperimentResult:
    seed = derived_seed(config.seed, 0)
    path = model.sample_path(seed, config.solver.dt, config.solver.n_steps)
    solver = replace(config.solver, keep_snapshots=False)
    record = run_direct(u0, v0, config.params, model, path, solver)
    seeds = [row.seed for row in summary.rows]
    return ExperimentResult(config.experiment, passed, details, seeds, record, [], rows)


def _single_run(
    config: RunConfig, model: NoiseModel, u0, v0
) -> Tuple[TrajectoryRecord, BrownianPath]:
    path = model.sample_path(config.seed, config.solver.dt, config.solver.n_steps)
    runner = run_rescaled if config.solver_kind == "rescaled" else run_direct
    return runner(u0, v0, config.params, model, path, config.solver), path


def blowup_demo_preset(config: RunConfig, workers: Optional[int] = None) -> ExperimentResult:
    model = config.build_model()
    u0, v0 = config.initial_fields()
    record, _ = _single_run(config, model, u0, v0)
    details = {
        "triggered": record.blowup_detected,
        "blowup_step": record.blowup_step,
        "blowup_time": None if record.blowup_step is None else record.blowup_step * record.dt,
        "threshold": record.blowup_threshold,
        "initial_norm": pair_norm(u0, v0, config.solver.norm_kind),
        "norm_kind": config.solver.norm_kind,
        "final_time": record.times[-1],
    }
    return ExperimentResult(config.experiment, True, details, [config.seed], record)


def _norm_diagnostics(config: RunConfig, record: TrajectoryRecord) -> Dict:
    diagnostics: Dict = {}
    if record.snapshots_first and record.solver == "direct":
        dim = config.grid.dim
        norms = {}
        for p, q in STRICHARTZ_PAIRS[dim]:
            for which in ("u", "v"):
                value, error = spacetime_norm(record, which, q, p, dim, with_error=True)
                norms[f"{which}:L^{q:g}_t L^{p:g}_x"] = {"value": value, "subsampling_error": error}
        diagnostics["spacetime_norms"] = norms
        u_final, _ = record.final_state()
        try:
            diagnostics["gn_ratio_u"] = gn_ratio(u_final)
        except ValueError as exc:
            diagnostics["gn_ratio_u"] = None
            logger.debug(f"GN ratio skipped: {exc}")
        level = max(1, int(config.grid.k_max // 2))
        tail = u_final - theta_cutoff(u_final, level, config.theta_profile)
        diagnostics["theta_tail_l2"] = {"m": level, "value": l2_norm(tail)}
    return diagnostics


def custom_preset(config: RunConfig, workers: Optional[int] = None) -> ExperimentResult:
    model = config.build_model()
    u0, v0 = config.initial_fields()
    details: Dict = {
        "compat_residual": config.params.compat_residual,
        "h1_regime": h1_regime(config.params, model),
    }
    if config.n_paths > 1:
        summary = run_ensemble(
            u0, v0, config.params, model, config.solver, config.n_paths, config.seed, workers,
            config.solver_kind,
        )
        details["aggregates"] = summary.aggregates()
        details["sup_statistic"] = sup_statistic(summary).as_dict()
        rows = [row.as_dict() for row in summary.rows]
        return _with_first_path(config, model, u0, v0, True, details, summary, rows)
    record, _ = _single_run(config, model, u0, v0)
    details["blowup_step"] = record.blowup_step
    details["final"] = record.samples[-1].as_dict()
    details.update(_norm_diagnostics(config, record))
    return ExperimentResult(config.experiment, True, details, [config.seed], record)


PRESETS: Dict[str, Callable[..., ExperimentResult]] = {
    "equivalence": equivalence_preset,
    "mass-identity": mass_identity_preset,
    "energy-identity": energy_identity_preset,
    "conservation": conservation_preset,
    "martingale": martingale_preset,
    "blowup-demo": blowup_demo_preset,
    "custom": custom_preset,
}


def scheme_descriptors(config: RunConfig) -> Dict:
    return {
        "direct": "strang: half dispersion, RK4 nonlinear, exact noise-damping exponential",
        "rescaled": "RK4 method of lines, W linear in beta between grid times",
        "transforms": "scipy.fft, forward unnormalized, inverse 1/N^d",
        "theta_profile": config.theta_profile,
        "pairing_orientation": INTERACTION_ORIENTATION,
        "stability_factor": config.solver.stability_factor,
        "overflow_cap": config.solver.overflow_cap,
        "quadrature": config.quadrature,
        "interaction_terms": config.interaction_terms,
    }


def run_experiment(config: RunConfig, workers: Optional[int] = None) -> RunOutcome:
    """Run the configured preset and write manifest, verdict and data files"""
    out_dir = ensure_dir(config.output_dir)
    started = time.perf_counter()
    logger.info(f"Running {config.experiment} into {out_dir}")
    try:
        result = PRESETS[config.experiment](config, workers)
    except SimulationError as exc:
        logger.error(f"{config.experiment} failed numerically: {exc}")
        result = ExperimentResult(
            config.experiment,
            False,
            {"error": str(exc), "error_type": type(exc).__name__},
            [config.seed],
            exit_code=EXIT_NUMERICAL,
        )
    elapsed = time.perf_counter() - started

    files: Dict[str, str] = {}
    if result.record is not None:
        files["timeseries.csv"] = write_timeseries(
            os.path.join(out_dir, "timeseries.csv"), result.record, result.residuals
        )
    if result.path_rows is not None:
        ndjson_path = os.path.join(out_dir, "paths.ndjson")
        files["paths.ndjson"] = write_ndjson(ndjson_path, result.path_rows)
    verdict = {
        "experiment": config.experiment,
        "status": result.status,
        "exit_code": result.exit_code,
        "details": result.details,
    }
    files["verdict.json"] = write_json(os.path.join(out_dir, "verdict.json"), verdict)

    manifest = RunManifest(
        config_hash=config.config_hash,
        experiment=config.experiment,
        seeds=result.seeds,
        schemes=scheme_descriptors(config),
        version=src.__version__,
        timings={"total_seconds": elapsed},
        files={name: file_sha256(path) for name, path in files.items()},
        config=config.canonical(),
    )
    files["manifest.json"] = write_json(os.path.join(out_dir, "manifest.json"), manifest.as_dict())
    logger.info(f"{config.experiment}: {result.status} (exit {result.exit_code}) in {elapsed:.2f}s")
    return RunOutcome(result.exit_code, result.status, out_dir, files, result.details)
