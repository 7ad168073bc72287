"""INI run configuration: parsing, validation and the reproducibility manifest"""

import configparser
import hashlib
import json
import logging
import math
import os
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

from src import config as settings
from src.dynamics_direct import NORM_KINDS, SolverConfig
from src.dynamics_rescaled import stability_bound
from src.exceptions import ConfigError
from src.noise_model import NoiseMode, NoiseModel, cosine_mode, gaussian_mode
from src.spectral_grid import DEFAULT_THETA_PROFILE, THETA_PROFILES, ComplexField, GridSpec
from src.system_params import SystemParams, validate

logger = logging.getLogger(__name__)

EXPERIMENTS = (
    "equivalence",
    "mass-identity",
    "energy-identity",
    "conservation",
    "martingale",
    "blowup-demo",
    "custom",
)
COMPAT_EXPERIMENTS = ("mass-identity", "energy-identity", "conservation", "martingale")
REFINEMENT_EXPERIMENTS = ("equivalence", "mass-identity", "energy-identity")
INITIAL_PROFILES = ("gaussian", "plane-wave", "zero")
REQUIRED_SECTIONS = ("grid", "params", "solver", "experiment")

_MISSING = object()


@dataclass(frozen=True)
class NoiseModeSpec:
    """One [noise.<name>] block"""

    name: str
    mu: complex
    family: str
    parameters: Tuple[Tuple[str, float], ...] = ()

    def build(self, grid: GridSpec) -> NoiseMode:
        p = dict(self.parameters)
        if self.family == "cosine":
            return cosine_mode(grid, self.mu, int(p.get("wavenumber", 1)), int(p.get("axis", 0)))
        center = p.get("center", grid.box_length / 2.0)
        return gaussian_mode(grid, self.mu, center, p.get("width", 1.0))

    def describe(self) -> dict:
        return {
            "name": self.name,
            "mu_re": self.mu.real,
            "mu_im": self.mu.imag,
            "family": self.family,
            **dict(self.parameters),
        }


@dataclass(frozen=True)
class InitialSpec:
    """Initial data: u0 and v0 share the profile, each with its own amplitude"""

    profile: str = "gaussian"
    u_amplitude: float = 1.0
    v_amplitude: float = 0.5
    width: float = 1.0
    center: Optional[float] = None
    wavenumber: int = 1

    def build(self, grid: GridSpec) -> Tuple[ComplexField, ComplexField]:
        if self.profile == "zero":
            return ComplexField.zeros(grid), ComplexField.zeros(grid)
        if self.profile == "plane-wave":
            k = 2.0 * math.pi * self.wavenumber / grid.box_length
            phase = sum(k * x for x in grid.coordinates)
            shape = np.exp(1j * phase)
        else:
            center = grid.box_length / 2.0 if self.center is None else self.center
            r2 = sum((x - center) ** 2 for x in grid.coordinates)
            shape = np.exp(-r2 / (2.0 * self.width**2))
        return (
            ComplexField(grid, self.u_amplitude * shape),
            ComplexField(grid, self.v_amplitude * shape),
        )


@dataclass(frozen=True)
class RunConfig:
    grid: GridSpec
    params: SystemParams
    noise: Tuple[NoiseModeSpec, ...]
    initial: InitialSpec
    solver: SolverConfig
    experiment: str
    seed: int = 0
    n_paths: int = 1
    output_dir: str = settings.Config.OUTPUT_DIR
    levels: int = 3
    quadrature: str = "corrected"
    interaction_terms: str = "ito"
    solver_kind: str = "direct"
    order_gate: float = 0.8
    drift_rate: float = 1.0
    theta_profile: str = DEFAULT_THETA_PROFILE
    source: Optional[str] = field(default=None, compare=False)

    def build_model(self) -> NoiseModel:
        return NoiseModel(self.grid, tuple(spec.build(self.grid) for spec in self.noise))

    def initial_fields(self) -> Tuple[ComplexField, ComplexField]:
        return self.initial.build(self.grid)

    def canonical(self) -> Dict[str, Any]:
        """Plain, order-stable description of every input that affects outputs"""
        solver = asdict(self.solver)
        return {
            "grid": self.grid.describe(),
            "params": self.params.describe(),
            "noise": [spec.describe() for spec in self.noise],
            "initial": asdict(self.initial),
            "solver": solver,
            "experiment": {
                "name": self.experiment,
                "seed": self.seed,
                "n_paths": self.n_paths,
                "levels": self.levels,
                "quadrature": self.quadrature,
                "interaction_terms": self.interaction_terms,
                "solver": self.solver_kind,
                "order_gate": self.order_gate,
                "drift_rate": self.drift_rate,
                "theta_profile": self.theta_profile,
            },
        }

    @property
    def config_hash(self) -> str:
        payload = json.dumps(self.canonical(), sort_keys=True, default=str)
        return hashlib.sha256(payload.encode()).hexdigest()


@dataclass
class RunManifest:
    """Everything needed to reproduce the output files of one run"""

    config_hash: str
    experiment: str
    seeds: List[int]
    schemes: Dict[str, Any]
    version: str
    timings: Dict[str, float] = field(default_factory=dict)
    files: Dict[str, str] = field(default_factory=dict)
    config: Dict[str, Any] = field(default_factory=dict)

    def as_dict(self) -> dict:
        return asdict(self)


class _Reader:
    """Typed access to a ConfigParser that records violations instead of raising"""

    def __init__(self, parser: configparser.ConfigParser):
        self.parser = parser
        self.violations: List[str] = []

    def get(self, section: str, key: str, convert: Callable = str, default: Any = _MISSING):
        if not self.parser.has_section(section) or not self.parser.has_option(section, key):
            if default is _MISSING:
                self.violations.append(f"[{section}] missing key '{key}'")
                return None
            return default
        raw = self.parser.get(section, key).strip()
        try:
            return convert(raw)
        except ValueError:
            self.violations.append(f"[{section}] {key} = {raw!r} is not a valid {convert.__name__}")
            return None

    def real(self, section: str, key: str, default: float) -> float:
        """Float value; the default stands in after a recorded type error"""
        value = self.get(section, key, float, default)
        return default if value is None else value

    def integer(self, section: str, key: str, default: int) -> int:
        value = self.get(section, key, int, default)
        return default if value is None else value

    def choice(self, section: str, key: str, options: Tuple[str, ...], default: str) -> str:
        value = self.get(section, key, str, default)
        if value not in options:
            allowed = ", ".join(options)
            self.violations.append(f"[{section}] {key} must be one of {allowed}, got {value!r}")
            return default
        return value


def _optional_float(raw: str) -> Optional[float]:
    return None if raw.lower() in ("", "none", "auto") else float(raw)


def _boolean(raw: str) -> bool:
    lowered = raw.lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(raw)


def _parse_noise(reader: _Reader) -> List[NoiseModeSpec]:
    names = reader.get("noise", "modes", str, "")
    specs = []
    for name in [n.strip() for n in names.split(",") if n.strip()]:
        section = f"noise.{name}"
        if not reader.parser.has_section(section):
            reader.violations.append(f"noise mode '{name}' has no [{section}] section")
            continue
        mu = complex(reader.real(section, "mu_re", 0.0), reader.real(section, "mu_im", 0.0))
        family = reader.choice(section, "family", ("cosine", "gaussian"), "cosine")
        if family == "cosine":
            parameters = (
                ("wavenumber", float(reader.integer(section, "wavenumber", 1))),
                ("axis", float(reader.integer(section, "axis", 0))),
            )
        else:
            parameters = (("width", reader.real(section, "width", 1.0)),)
            center = reader.get(section, "center", float, None)
            if center is not None:
                parameters = (("center", center),) + parameters
        specs.append(NoiseModeSpec(name, mu, family, parameters))
    return specs


def parse_config(path: str, overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """Read, override and validate an INI run configuration.

    Raises ConfigError carrying every violation found, not just the first.
    """
    if not os.path.isfile(path):
        raise ConfigError([f"config file not found: {path}"], source=path)
    try:
        with open(path, encoding="utf-8") as handle:
            text = handle.read()
    except UnicodeDecodeError as exc:
        raise ConfigError([f"unreadable config: {exc}"], source=path) from exc
    return parse_config_text(text, overrides, source=path)


def parse_config_text(
    text: str, overrides: Optional[Dict[str, Any]] = None, source: str = "<text>"
) -> RunConfig:
    """Same as parse_config for INI content already in memory"""
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError([f"unreadable config: {exc}"], source=source) from exc

    reader = _Reader(parser)
    for section in REQUIRED_SECTIONS:
        if not parser.has_section(section):
            reader.violations.append(f"missing section [{section}]")

    grid = None
    dim = reader.get("grid", "dim", int, 1)
    points = reader.get("grid", "points", int)
    box = reader.get("grid", "box_length", float)
    if None not in (dim, points, box):
        try:
            grid = GridSpec(dim, points, box)
        except ValueError as exc:
            reader.violations.append(f"[grid] {exc}")

    params = SystemParams(
        ell=reader.real("params", "ell", 1.0),
        L=reader.real("params", "L", 1.0),
        lam=complex(
            reader.real("params", "lambda_re", 1.0),
            reader.real("params", "lambda_im", 0.0),
        ),
        kappa=complex(
            reader.real("params", "kappa_re", 1.0),
            reader.real("params", "kappa_im", 0.0),
        ),
        c=reader.real("params", "c", 1.0),
    )

    experiment = reader.choice("experiment", "name", EXPERIMENTS, "custom")
    report = validate(params, require_compat=experiment in COMPAT_EXPERIMENTS)
    reader.violations.extend(f"[params] {v}" for v in report.violations)

    noise = _parse_noise(reader)
    initial = InitialSpec(
        profile=reader.choice("initial", "profile", INITIAL_PROFILES, "gaussian"),
        u_amplitude=reader.get("initial", "u_amplitude", float, 1.0),
        v_amplitude=reader.get("initial", "v_amplitude", float, 0.5),
        width=reader.get("initial", "width", float, 1.0),
        center=reader.get("initial", "center", _optional_float, None),
        wavenumber=reader.get("initial", "wavenumber", int, 1),
    )
    if initial.width is not None and not initial.width > 0:
        reader.violations.append(f"[initial] width must be positive, got {initial.width}")

    solver = None
    dt = overrides.get("dt", reader.get("solver", "dt", float))
    t_final = reader.get("solver", "t_final", float)
    if dt is not None and t_final is not None:
        try:
            solver = SolverConfig(
                dt=float(dt),
                t_final=t_final,
                record_every=reader.integer("solver", "record_every", 1),
                blowup_threshold=reader.get("solver", "blowup_threshold", _optional_float, None),
                norm_kind=reader.choice("solver", "norm", NORM_KINDS, "L2"),
                keep_snapshots=reader.get("solver", "keep_snapshots", _boolean, True),
                stability_factor=reader.real("solver", "stability_factor", 0.5),
                overflow_cap=reader.real("solver", "overflow_cap", 50.0),
            )
        except ValueError as exc:
            reader.violations.append(f"[solver] {exc}")

    levels = reader.integer("experiment", "levels", 3)
    if experiment in REFINEMENT_EXPERIMENTS and levels < 2:
        reader.violations.append(
            f"[experiment] levels must be >= 2 for {experiment}, got {levels}"
        )
    n_paths = int(overrides.get("paths", reader.integer("experiment", "n_paths", 1)))
    if n_paths < 1:
        reader.violations.append(f"[experiment] n_paths must be >= 1, got {n_paths}")
    if experiment == "martingale" and n_paths < 2:
        reader.violations.append("[experiment] martingale needs n_paths >= 2")
    if experiment == "conservation" and noise:
        reader.violations.append("[experiment] conservation runs without noise modes")

    theta = reader.choice("experiment", "theta_profile", THETA_PROFILES, DEFAULT_THETA_PROFILE)
    config_fields = dict(
        seed=int(overrides.get("seed", reader.integer("experiment", "seed", 0))),
        n_paths=n_paths,
        output_dir=str(
            overrides.get(
                "out", reader.get("experiment", "output_dir", str, settings.Config.OUTPUT_DIR)
            )
        ),
        levels=levels,
        quadrature=reader.choice("experiment", "quadrature", ("left", "corrected"), "corrected"),
        interaction_terms=reader.choice(
            "experiment", "interaction_terms", ("ito", "printed"), "ito"
        ),
        solver_kind=reader.choice("experiment", "solver", ("direct", "rescaled"), "direct"),
        order_gate=reader.get("experiment", "order_gate", float, 0.8),
        drift_rate=reader.get("experiment", "drift_rate", float, 1.0),
        theta_profile=theta,
    )

    model = None
    if grid is not None:
        try:
            model = NoiseModel(grid, tuple(spec.build(grid) for spec in noise))
        except ValueError as exc:
            reader.violations.append(f"[noise] {exc}")

    needs_rescaled = experiment == "equivalence" or config_fields["solver_kind"] == "rescaled"
    masses_ok = params.ell > 0 and params.L > 0
    if needs_rescaled and masses_ok and grid is not None and solver is not None:
        bound = stability_bound(grid, params, solver.stability_factor)
        if solver.dt > bound:
            reader.violations.append(
                f"[solver] dt = {solver.dt:.6g} exceeds the rescaled-solver stability bound "
                f"{bound:.6g} (factor {solver.stability_factor})"
            )

    if reader.violations:
        logger.error(f"Config {source}: {len(reader.violations)} violation(s)")
        raise ConfigError(reader.violations, source=source)

    logger.info(f"Loaded config {source}: experiment={experiment}, modes={model.n_modes}")
    return RunConfig(
        grid=grid,
        params=params,
        noise=tuple(noise),
        initial=initial,
        solver=solver,
        experiment=experiment,
        source=source,
        **config_fields,
    )
