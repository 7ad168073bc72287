"""Exception hierarchy shared by the solvers, diagnostics and entry points"""

from typing import List, Optional


class SimulationError(Exception):
    """Base class for every error raised by the simulator"""


class GridMismatchError(SimulationError, ValueError):
    """Fields live on different grids"""


class StepIndexError(SimulationError, IndexError):
    """A step or mode index is outside the valid range"""


class AmplitudeOverflowError(SimulationError):
    """Re W exceeded the configured cap, so e^W would leave the safe range"""

    def __init__(self, max_real_w: float, cap: float):
        self.max_real_w = max_real_w
        self.cap = cap
        super().__init__(f"max Re W = {max_real_w:.6g} exceeds overflow cap {cap:.6g}")


class NonFiniteStateError(SimulationError):
    """A solver produced NaN or Inf values"""

    def __init__(self, step: int, t: float):
        self.step = step
        self.t = t
        super().__init__(f"non-finite state at step {step} (t={t:.6g})")


class StabilityError(SimulationError):
    """The explicit time step exceeds the stability bound"""

    def __init__(self, dt: float, bound: float):
        self.dt = dt
        self.bound = bound
        super().__init__(f"dt = {dt:.6g} exceeds the explicit stability bound {bound:.6g}")


class ProvenanceError(SimulationError):
    """Records being compared were not produced from the same inputs"""


class DenseDataUnavailableError(SimulationError):
    """An identity needs a snapshot at every step but the record is sub-sampled"""


class CompatibilityError(SimulationError):
    """Parameters violate lambda = c * conj(kappa)"""

    def __init__(self, residual: float):
        self.residual = residual
        super().__init__(
            f"compatibility lambda = c*conj(kappa) violated (residual {residual:.6g})"
        )


class ConfigError(SimulationError):
    """Run configuration is invalid; carries every violation found"""

    def __init__(self, violations: List[str], source: Optional[str] = None):
        self.violations = list(violations)
        self.source = source
        where = f" in {source}" if source else ""
        summary = "; ".join(self.violations)
        super().__init__(f"{len(self.violations)} configuration violation(s){where}: {summary}")
