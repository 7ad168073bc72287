"""Trajectory records shared by both integrators and the diagnostics"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from src.functionals import FunctionalSample
from src.spectral_grid import ComplexField, GridSpec
from src.system_params import SystemParams

logger = logging.getLogger(__name__)

SOLVERS = ("direct", "rescaled")


@dataclass
class TrajectoryRecord:
    """Sampled times, optional state snapshots and functional time series.

    For the direct solver the snapshot components are (u, v); for the
    rescaled solver they are (y, z) while the functional samples are taken on
    the physical fields e^W y, e^W z.
    """

    solver: str
    grid: GridSpec
    params: SystemParams
    seed: int
    dt: float
    n_steps: int
    record_every: int
    path_fingerprint: str
    noise_free: bool
    norm_kind: str = "L2"
    blowup_threshold: float = float("inf")
    steps: List[int] = field(default_factory=list)
    times: List[float] = field(default_factory=list)
    samples: List[FunctionalSample] = field(default_factory=list)
    snapshots_first: List[np.ndarray] = field(default_factory=list, repr=False)
    snapshots_second: List[np.ndarray] = field(default_factory=list, repr=False)
    blowup_step: Optional[int] = None

    def append(
        self,
        step: int,
        t: float,
        sample: FunctionalSample,
        first: Optional[ComplexField] = None,
        second: Optional[ComplexField] = None,
    ):
        self.steps.append(int(step))
        self.times.append(float(t))
        self.samples.append(sample)
        if first is not None and second is not None:
            self.snapshots_first.append(first.values.copy())
            self.snapshots_second.append(second.values.copy())

    @property
    def n_samples(self) -> int:
        return len(self.times)

    @property
    def last_step(self) -> int:
        return self.steps[-1] if self.steps else 0

    @property
    def completed(self) -> bool:
        return self.blowup_step is None and self.last_step == self.n_steps

    @property
    def blowup_detected(self) -> bool:
        return self.blowup_step is not None

    @property
    def dense(self) -> bool:
        """A snapshot exists for every step 0..last_step"""
        return (
            len(self.snapshots_first) == self.n_samples
            and self.steps == list(range(self.last_step + 1))
        )

    def state(self, index: int) -> Tuple[ComplexField, ComplexField]:
        return (
            ComplexField(self.grid, self.snapshots_first[index]),
            ComplexField(self.grid, self.snapshots_second[index]),
        )

    def component(self, index: int, which: str) -> ComplexField:
        first, second = self.state(index)
        return first if which == "u" else second

    def final_state(self) -> Tuple[ComplexField, ComplexField]:
        return self.state(-1)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(s, name) for s in self.samples])

    def sup(self, name: str) -> float:
        values = self.column(name)
        return float(np.max(values)) if values.size else 0.0

    def provenance(self) -> dict:
        return {
            "solver": self.solver,
            "grid": self.grid.describe(),
            "params": self.params.describe(),
            "seed": self.seed,
            "dt": self.dt,
            "path_fingerprint": self.path_fingerprint,
        }
