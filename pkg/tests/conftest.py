#!/usr/bin/env python3
"""
Test suite configuration and shared fixtures for the stochastic NLS tests.
Contains small grids, compatible parameters, initial data and an INI writer.
"""

import textwrap

import numpy as np
import pytest

from src.dynamics_direct import SolverConfig
from src.noise_model import NoiseModel, cosine_mode
from src.spectral_grid import ComplexField, GridSpec
from src.system_params import SystemParams

BASE_INI = """
[grid]
dim = 1
points = {points}
box_length = 20.0

[params]
ell = 1.0
L = 1.0
kappa_re = 1.0
lambda_re = 1.0
c = 1.0

{noise}

[initial]
profile = gaussian
u_amplitude = 1.0
v_amplitude = 0.5

[solver]
dt = {dt}
t_final = {t_final}
{solver_extra}

[experiment]
name = {experiment}
seed = 3
output_dir = {out}
{experiment_extra}
"""

IMAGINARY_NOISE = """
[noise]
modes = low

[noise.low]
family = cosine
wavenumber = 1
mu_im = 0.4
"""


@pytest.fixture
def grid():
    return GridSpec(1, 64, 20.0)


@pytest.fixture
def small_grid():
    return GridSpec(1, 32, 20.0)


@pytest.fixture
def params():
    return SystemParams.compatible(ell=1.0, L=1.0, kappa=1.0, c=1.0)


def gaussian_pair(grid, u_amplitude=1.0, v_amplitude=0.5, width=1.0):
    center = grid.box_length / 2.0
    shape = np.exp(-((grid.coordinates[0] - center) ** 2) / (2.0 * width**2))
    return ComplexField(grid, u_amplitude * shape), ComplexField(grid, v_amplitude * shape)


@pytest.fixture
def pair(grid):
    return gaussian_pair(grid)


@pytest.fixture
def quiet_model(grid):
    return NoiseModel.deterministic(grid)


@pytest.fixture
def imaginary_model(grid):
    return NoiseModel(grid, (cosine_mode(grid, 0.4j, wavenumber=1),))


@pytest.fixture
def solver_config():
    return SolverConfig(dt=0.01, t_final=0.2)


@pytest.fixture
def write_ini(tmp_path):
    """Write an INI file built from BASE_INI and return its path"""

    def _write(
        experiment="custom",
        noise="",
        dt=0.01,
        t_final=0.2,
        points=64,
        solver_extra="",
        experiment_extra="",
        name="run.ini",
        out=None,
    ):
        text = BASE_INI.format(
            points=points,
            noise=noise,
            dt=dt,
            t_final=t_final,
            solver_extra=textwrap.dedent(solver_extra),
            experiment=experiment,
            out=out or str(tmp_path / "out"),
            experiment_extra=textwrap.dedent(experiment_extra),
        )
        path = tmp_path / name
        path.write_text(text)
        return str(path)

    return _write
