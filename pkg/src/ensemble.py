"""Monte Carlo driver over independent Brownian paths.

Path i draws its seed from a SeedSequence over (base_seed, i), so any row can
be regenerated on its own and different base seeds give unrelated paths.
Rows come back from Pool.map in path order and every aggregate is an ordered
fold over them, which keeps the summary independent of the worker count.
"""

import logging
import math
import multiprocessing as mp
from dataclasses import asdict, dataclass, field, replace
from typing import List, Optional, Tuple

import numpy as np

from src.config import resolve_workers
from src.dynamics_direct import SolverConfig, run_direct
from src.dynamics_rescaled import run_rescaled
from src.exceptions import SimulationError
from src.noise_model import SEED_MASK, NoiseModel
from src.spectral_grid import ComplexField
from src.system_params import SystemParams

logger = logging.getLogger(__name__)

STATUSES = ("completed", "blowup", "failed")
DEFAULT_Z_LIMIT = 3.0


def derived_seed(base_seed: int, path_index: int) -> int:
    """64-bit seed of path path_index, hashed from the pair (base_seed, path_index)"""
    entropy = [int(base_seed) & SEED_MASK, int(path_index)]
    return int(np.random.SeedSequence(entropy).generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class PathRow:
    """Summary of one trajectory; failures are rows with status 'failed'"""

    path_index: int
    seed: int
    status: str
    final_t: float
    final_q: float
    final_e: float
    sup_q: float
    sup_kinetic: float
    sup_h1: float
    blowup_step: Optional[int] = None
    error: Optional[str] = None

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Aggregate:
    mean: float
    se: float
    max: float
    count: int


def aggregate(values: List[float]) -> Aggregate:
    """Mean, standard error and max, folded in the given order"""
    data = np.asarray(values, dtype=float)
    if data.size == 0:
        return Aggregate(math.nan, math.nan, math.nan, 0)
    mean = float(np.mean(data))
    se = float(np.std(data, ddof=1) / math.sqrt(data.size)) if data.size > 1 else 0.0
    return Aggregate(mean, se, float(np.max(data)), int(data.size))


@dataclass
class EnsembleSummary:
    n_paths: int
    base_seed: int
    solver: str
    t_final: float
    rows: List[PathRow] = field(default_factory=list)

    @property
    def completed(self) -> List[PathRow]:
        return [r for r in self.rows if r.status == "completed"]

    @property
    def n_blowup(self) -> int:
        return sum(1 for r in self.rows if r.status == "blowup")

    @property
    def n_failed(self) -> int:
        return sum(1 for r in self.rows if r.status == "failed")

    def column(self, name: str, completed_only: bool = True) -> List[float]:
        rows = self.completed if completed_only else [r for r in self.rows if r.status != "failed"]
        return [getattr(r, name) for r in rows]

    def aggregate(self, name: str, completed_only: bool = True) -> Aggregate:
        return aggregate(self.column(name, completed_only))

    def aggregates(self) -> dict:
        block = {name: asdict(self.aggregate(name)) for name in ("final_q", "final_e")}
        for name in ("sup_q", "sup_kinetic", "sup_h1"):
            block[name] = asdict(self.aggregate(name, completed_only=False))
        block["n_paths"] = self.n_paths
        block["n_completed"] = len(self.completed)
        block["n_blowup"] = self.n_blowup
        block["n_failed"] = self.n_failed
        block["blowup_steps"] = [r.blowup_step for r in self.rows if r.blowup_step is not None]
        return block


def _failed_row(index: int, seed: int, error: Exception) -> PathRow:
    nan = math.nan
    return PathRow(index, seed, "failed", nan, nan, nan, nan, nan, nan, None, str(error))


def _run_path(task: Tuple) -> PathRow:
    index, seed, u0, v0, params, model, config, solver = task
    try:
        path = model.sample_path(seed, config.dt, config.n_steps)
        runner = run_rescaled if solver == "rescaled" else run_direct
        record = runner(u0, v0, params, model, path, config)
    except SimulationError as exc:
        logger.warning(f"Path {index} (seed {seed}) failed: {exc}")
        return _failed_row(index, seed, exc)
    last = record.samples[-1]
    h1_squared = record.column("h1_u") ** 2 + record.column("h1_v") ** 2
    return PathRow(
        path_index=index,
        seed=seed,
        status="blowup" if record.blowup_detected else "completed",
        final_t=last.t,
        final_q=last.Q,
        final_e=last.E,
        sup_q=record.sup("Q"),
        sup_kinetic=record.sup("K"),
        sup_h1=float(np.max(h1_squared)),
        blowup_step=record.blowup_step,
    )


def run_ensemble(
    u0: ComplexField,
    v0: ComplexField,
    params: SystemParams,
    model: NoiseModel,
    config: SolverConfig,
    n_paths: int,
    base_seed: int,
    workers: Optional[int] = None,
    solver: str = "direct",
) -> EnsembleSummary:
    if n_paths < 1:
        raise ValueError(f"n_paths must be >= 1, got {n_paths}")
    workers = resolve_workers(workers)
    path_config = replace(config, keep_snapshots=False)
    tasks = [
        (i, derived_seed(base_seed, i), u0, v0, params, model, path_config, solver)
        for i in range(n_paths)
    ]
    logger.info(f"Ensemble: {n_paths} paths, base seed {base_seed}, {workers} worker(s)")
    if workers == 1:
        rows = [_run_path(task) for task in tasks]
    else:
        with mp.Pool(processes=min(workers, n_paths)) as pool:
            rows = pool.map(_run_path, tasks)
    summary = EnsembleSummary(n_paths, base_seed, solver, config.t_final, rows)
    logger.info(
        f"Ensemble finished: {len(summary.completed)} completed, "
        f"{summary.n_blowup} blow-up, {summary.n_failed} failed"
    )
    return summary


@dataclass(frozen=True)
class MartingaleReport:
    mean: float
    q0: float
    se: float
    z: float
    passed: bool
    n_used: int
    reason: str = ""
    n_excluded: int = 0

    def as_dict(self) -> dict:
        return asdict(self)


def martingale_test(
    summary: EnsembleSummary,
    q0: float,
    drift_rate: float = 0.0,
    z_limit: float = DEFAULT_Z_LIMIT,
    drift_tolerance: Optional[float] = None,
) -> MartingaleReport:
    """z = (mean final Q - q0) / SE over completed paths; pass iff |z| <= z_limit.

    drift_rate adds drift_rate * t * q0 to every final Q (negative control). A
    gap below drift_tolerance counts as scheme drift and passes regardless of
    SE. Blown-up and failed paths are left out and counted in n_excluded.
    """
    rows = summary.completed
    excluded = len(summary.rows) - len(rows)
    if excluded:
        logger.warning(f"Martingale test excludes {excluded} of {len(summary.rows)} paths")
    if not rows:
        return MartingaleReport(
            math.nan, q0, math.nan, math.nan, False, 0, "no completed paths", excluded
        )
    finals = [r.final_q + drift_rate * r.final_t * q0 for r in rows]
    stats = aggregate(finals)
    gap = stats.mean - q0
    tolerance = 1e-7 * max(1.0, abs(q0)) if drift_tolerance is None else drift_tolerance
    if abs(gap) <= tolerance:
        return MartingaleReport(
            stats.mean, q0, stats.se, 0.0, True, stats.count, "within scheme drift", excluded
        )
    if stats.se == 0.0:
        return MartingaleReport(
            stats.mean, q0, 0.0, math.inf, False, stats.count, "deterministic drift with zero SE",
            excluded,
        )
    z = gap / stats.se
    passed = abs(z) <= z_limit
    reason = "" if passed else f"|z| = {abs(z):.3g} exceeds {z_limit}"
    return MartingaleReport(stats.mean, q0, stats.se, z, passed, stats.count, reason, excluded)


@dataclass(frozen=True)
class SupStatistic:
    """E sup_t Q and E sup_t K estimates; boundedness indicators only"""

    value: float
    se: float
    kinetic: float
    kinetic_se: float
    h1: float
    h1_se: float

    def as_dict(self) -> dict:
        return asdict(self)


def sup_statistic(summary: EnsembleSummary) -> SupStatistic:
    """Mean of per-path sup-over-time columns; blown-up paths count up to their stopping step"""
    q = summary.aggregate("sup_q", completed_only=False)
    kinetic = summary.aggregate("sup_kinetic", completed_only=False)
    h1 = summary.aggregate("sup_h1", completed_only=False)
    return SupStatistic(q.mean, q.se, kinetic.mean, kinetic.se, h1.mean, h1.se)
