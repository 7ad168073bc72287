#!/usr/bin/env python3
"""
Unit tests for the Strang split-step integrator.
Tests the substeps, conservation without noise, sampling, blow-up detection and input checks.
"""

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from src.dynamics_direct import (
    PairState,
    SolverConfig,
    dispersion_step,
    noise_damping_step,
    noise_factor,
    nonlinear_step,
    pair_norm,
    run_direct,
    strang_step,
)
from src.exceptions import GridMismatchError
from src.functionals import energy_e, mass_q
from src.noise_model import NoiseModel, cosine_mode
from src.spectral_grid import ComplexField, GridSpec, l2_norm
from src.system_params import SystemParams


def run(u, v, params, model, config, seed=0):
    path = model.sample_path(seed, config.dt, config.n_steps)
    return run_direct(u, v, params, model, path, config)


class TestSolverConfig:
    """Test solver configuration validation"""

    def test_step_count(self):
        """Test n_steps from dt and t_final"""
        assert SolverConfig(dt=0.01, t_final=0.5).n_steps == 50
        assert SolverConfig(dt=0.01, t_final=0.5).with_dt(0.005).n_steps == 100

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"dt": 0.0, "t_final": 1.0},
            {"dt": 0.3, "t_final": 1.0},
            {"dt": 2.0, "t_final": 1.0},
            {"dt": 0.1, "t_final": 1.0, "record_every": 0},
            {"dt": 0.1, "t_final": 1.0, "norm_kind": "L4"},
            {"dt": 0.1, "t_final": 1.0, "blowup_threshold": -1.0},
        ],
    )
    def test_invalid(self, kwargs):
        """Test invalid settings are rejected"""
        with pytest.raises(ValueError):
            SolverConfig(**kwargs)


class TestSubsteps:
    """Test the individual split-step stages"""

    def test_dispersion_preserves_l2(self, pair, params):
        """Test the exact dispersion substep is unitary"""
        u, v = pair
        state = dispersion_step(PairState(u, v), params, 0.3)
        assert l2_norm(state.u) == pytest.approx(l2_norm(u), rel=1e-12)
        assert l2_norm(state.v) == pytest.approx(l2_norm(v), rel=1e-12)

    def test_substep_duration_checked(self, pair, params):
        """Test non-positive durations are rejected"""
        u, v = pair
        with pytest.raises(ValueError):
            dispersion_step(PairState(u, v), params, 0.0)
        with pytest.raises(ValueError):
            nonlinear_step(PairState(u, v), params, -0.1)

    def test_nonlinear_conserves_local_mass(self, pair, params):
        """Test the quadratic flow keeps |u|^2 + c|v|^2 pointwise for compatible couplings"""
        u, v = pair
        state = nonlinear_step(PairState(u, v), params, 0.01)
        before = u.abs_squared() + params.c * v.abs_squared()
        after = state.u.abs_squared() + params.c * state.v.abs_squared()
        assert np.allclose(after, before, rtol=1e-9, atol=1e-12)

    def test_nonlinear_step_matches_ode_solver(self, grid, params):
        """Test one RK4 substep against a tight solve_ivp reference on constant fields"""
        u = ComplexField.constant(grid, 1.0 + 0.5j)
        v = ComplexField.constant(grid, 0.3 - 0.2j)
        tau = 0.01

        def rhs(_, y):
            a, b = y[0] + 1j * y[1], y[2] + 1j * y[3]
            da = -1j * params.lam * b * np.conj(a)
            db = -1j * params.kappa * a * a
            return [da.real, da.imag, db.real, db.imag]

        reference = solve_ivp(rhs, (0.0, tau), [1.0, 0.5, 0.3, -0.2], rtol=1e-12, atol=1e-14)
        end = reference.y[:, -1]
        a, b = end[0] + 1j * end[1], end[2] + 1j * end[3]
        state = nonlinear_step(PairState(u, v), params, tau)
        assert np.allclose(state.u.values, a, atol=1e-9)
        assert np.allclose(state.v.values, b, atol=1e-9)

    def test_imaginary_noise_factor_is_unimodular(self, imaginary_model):
        """Test exp(dW - (mu + mu~) dt) has modulus one for imaginary noise"""
        path = imaginary_model.sample_path(4, 0.01, 3)
        factor = noise_factor(imaginary_model, path, 1)
        assert np.allclose(np.abs(factor.values), 1.0)

    def test_noise_step_without_modes(self, pair, quiet_model):
        """Test the noise substep is the identity without modes"""
        u, v = pair
        path = quiet_model.sample_path(0, 0.01, 2)
        state = noise_damping_step(PairState(u, v), quiet_model, path, 1)
        assert np.array_equal(state.u.values, u.values)

    def test_strang_step_time(self, pair, params, quiet_model):
        """Test a full step advances time to (k + 1) dt"""
        u, v = pair
        path = quiet_model.sample_path(0, 0.02, 5)
        state = strang_step(PairState(u, v), params, quiet_model, path, 2)
        assert state.t == pytest.approx(0.06)


class TestDeterministicRun:
    """Test noise-free trajectories"""

    def test_conserves_mass_and_energy(self, pair, params, quiet_model):
        """Test Q is conserved and E nearly conserved without noise"""
        u, v = pair
        record = run(u, v, params, quiet_model, SolverConfig(dt=0.01, t_final=0.5))
        q = record.column("Q")
        e = record.column("E")
        assert np.max(np.abs(q - q[0])) / q[0] < 1e-8
        assert np.max(np.abs(e - e[0])) / abs(e[0]) < 1e-2
        assert record.completed
        assert record.noise_free

    def test_energy_drift_second_order(self, pair, params, quiet_model):
        """Test halving dt reduces the worst E drift by about four"""
        u, v = pair
        drifts = []
        for dt in (0.02, 0.01):
            record = run(u, v, params, quiet_model, SolverConfig(dt=dt, t_final=1.0))
            e = record.column("E")
            drifts.append(np.max(np.abs(e - e[0])))
        assert 2.8 < drifts[0] / drifts[1] < 5.5

    def test_functionals_match_final_state(self, pair, params, quiet_model):
        """Test recorded samples are functionals of the stored snapshots"""
        u, v = pair
        record = run(u, v, params, quiet_model, SolverConfig(dt=0.01, t_final=0.1))
        u_t, v_t = record.final_state()
        assert record.samples[-1].Q == pytest.approx(mass_q(u_t, v_t, params.c))
        assert record.samples[-1].E == pytest.approx(energy_e(u_t, v_t, params))


class TestStochasticRun:
    """Test runs with noise"""

    def test_reproducible(self, pair, params, imaginary_model):
        """Test the same seed reproduces the final state exactly"""
        u, v = pair
        config = SolverConfig(dt=0.01, t_final=0.1)
        a = run(u, v, params, imaginary_model, config, seed=17)
        b = run(u, v, params, imaginary_model, config, seed=17)
        assert np.array_equal(a.snapshots_first[-1], b.snapshots_first[-1])
        c = run(u, v, params, imaginary_model, config, seed=18)
        assert not np.array_equal(a.snapshots_first[-1], c.snapshots_first[-1])

    def test_imaginary_noise_conserves_mass(self, pair, params, imaginary_model):
        """Test Q is pathwise conserved when every mu_j is imaginary"""
        u, v = pair
        record = run(u, v, params, imaginary_model, SolverConfig(dt=0.01, t_final=0.3), seed=5)
        q = record.column("Q")
        assert np.max(np.abs(q - q[0])) / q[0] < 1e-8

    def test_constant_real_mode_is_geometric(self, grid, pair):
        """Test Q(t) = Q(0) exp(2 mu beta - 2 mu^2 t) for a constant real mode without coupling"""
        mu = 0.3
        model = NoiseModel(grid, (cosine_mode(grid, mu, wavenumber=0),))
        params = SystemParams(lam=0.0, kappa=0.0)
        config = SolverConfig(dt=0.01, t_final=0.2)
        path = model.sample_path(21, config.dt, config.n_steps)
        u, v = pair
        record = run_direct(u, v, params, model, path, config)
        beta = path.beta[0]
        expected = record.samples[0].Q * np.exp(2 * mu * beta - 2 * mu**2 * np.array(record.times))
        assert np.allclose(record.column("Q"), expected, rtol=1e-10)


class TestSamplingAndBlowup:
    """Test record cadence and the blow-up detector"""

    def test_record_every(self, pair, params, quiet_model):
        """Test subsampled steps always include the final step"""
        u, v = pair
        record = run(u, v, params, quiet_model, SolverConfig(dt=0.01, t_final=0.23, record_every=5))
        assert record.steps == [0, 5, 10, 15, 20, 23]
        assert not record.dense

    def test_blowup_at_step_zero(self, pair, params, quiet_model):
        """Test a threshold below the initial norm stops at step 0"""
        u, v = pair
        config = SolverConfig(dt=0.01, t_final=0.1, blowup_threshold=0.5 * pair_norm(u, v))
        record = run(u, v, params, quiet_model, config)
        assert record.blowup_step == 0
        assert record.blowup_detected
        assert not record.completed
        assert record.n_samples == 1

    def test_default_threshold(self, pair, params, quiet_model):
        """Test the default threshold is relative to the initial norm"""
        u, v = pair
        record = run(u, v, params, quiet_model, SolverConfig(dt=0.01, t_final=0.05))
        assert record.blowup_threshold == pytest.approx(1e3 * pair_norm(u, v))

    def test_h1_norm_kind(self, pair, params, quiet_model):
        """Test the H1 detector norm"""
        u, v = pair
        threshold = 0.5 * (pair_norm(u, v, "H1") + pair_norm(u, v, "L2"))
        config = SolverConfig(dt=0.01, t_final=0.05, blowup_threshold=threshold, norm_kind="H1")
        record = run(u, v, params, quiet_model, config)
        assert record.blowup_step == 0


class TestInputChecks:
    """Test argument validation"""

    def test_path_dt_mismatch(self, pair, params, quiet_model):
        """Test a path sampled at another dt is rejected"""
        u, v = pair
        path = quiet_model.sample_path(0, 0.02, 10)
        with pytest.raises(ValueError):
            run_direct(u, v, params, quiet_model, path, SolverConfig(dt=0.01, t_final=0.1))

    def test_short_path(self, pair, params, quiet_model):
        """Test a path with too few steps is rejected"""
        u, v = pair
        path = quiet_model.sample_path(0, 0.01, 5)
        with pytest.raises(ValueError):
            run_direct(u, v, params, quiet_model, path, SolverConfig(dt=0.01, t_final=0.1))

    def test_grid_mismatch(self, pair, params):
        """Test initial data on another grid is rejected"""
        u, v = pair
        model = NoiseModel.deterministic(GridSpec(1, 32, 20.0))
        path = model.sample_path(0, 0.01, 10)
        with pytest.raises(GridMismatchError):
            run_direct(u, v, params, model, path, SolverConfig(dt=0.01, t_final=0.1))
