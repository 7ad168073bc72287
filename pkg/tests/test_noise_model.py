#!/usr/bin/env python3
"""
Unit tests for the noise model and Brownian paths.
Tests mode profiles, reproducible sampling, coarsening and derived fields.
"""

import numpy as np
import pytest

from src.exceptions import GridMismatchError, StepIndexError
from src.noise_model import (
    BrownianPath,
    NoiseMode,
    NoiseModel,
    cosine_mode,
    gaussian_mode,
)
from src.spectral_grid import ComplexField, GridSpec


class TestNoiseModes:
    """Test mode construction"""

    def test_cosine_profile(self, grid):
        """Test cosine profile values and parameters"""
        mode = cosine_mode(grid, 0.5j, wavenumber=2)
        x = grid.coordinates[0]
        assert np.allclose(mode.profile.values, np.cos(4.0 * np.pi * x / grid.box_length))
        assert mode.describe()["wavenumber"] == 2.0
        assert mode.describe()["mu_im"] == 0.5

    def test_constant_mode(self, grid):
        """Test wavenumber 0 gives the constant profile"""
        mode = cosine_mode(grid, 1.0, wavenumber=0)
        assert np.allclose(mode.profile.values, 1.0)

    def test_cosine_axis_out_of_range(self, grid):
        """Test an axis beyond the grid dimension is rejected"""
        with pytest.raises(ValueError):
            cosine_mode(grid, 1.0, axis=1)

    def test_gaussian_mode_peak(self, grid):
        """Test Gaussian bump peaks at its centre"""
        mode = gaussian_mode(grid, 0.1, center=10.0, width=1.0)
        values = mode.profile.values.real
        assert grid.coordinates[0][np.argmax(values)] == pytest.approx(10.0)
        with pytest.raises(ValueError):
            gaussian_mode(grid, 0.1, center=10.0, width=0.0)

    def test_complex_profile_rejected(self, grid):
        """Test a complex-valued profile is rejected"""
        with pytest.raises(ValueError):
            NoiseMode(1.0, ComplexField.constant(grid, 1.0j))

    def test_phi(self, grid):
        """Test phi = mu e"""
        mode = cosine_mode(grid, 2.0 - 1.0j)
        assert np.allclose(mode.phi.values, (2.0 - 1.0j) * mode.profile.values)


class TestBrownianPath:
    """Test path sampling and coarsening"""

    def test_reproducible(self, imaginary_model):
        """Test same seed gives identical increments"""
        a = imaginary_model.sample_path(42, 0.01, 50)
        b = imaginary_model.sample_path(42, 0.01, 50)
        assert np.array_equal(a.increments, b.increments)
        assert a.fingerprint == b.fingerprint

    def test_seed_changes_path(self, imaginary_model):
        """Test different seeds give different increments"""
        a = imaginary_model.sample_path(1, 0.01, 50)
        b = imaginary_model.sample_path(2, 0.01, 50)
        assert not np.array_equal(a.increments, b.increments)
        assert a.fingerprint != b.fingerprint

    def test_mode_streams_are_independent_of_mode_count(self, grid):
        """Test adding a mode leaves the existing mode's increments unchanged"""
        one = NoiseModel(grid, (cosine_mode(grid, 0.3j),))
        two = NoiseModel(grid, (cosine_mode(grid, 0.3j), cosine_mode(grid, 0.1j, 2)))
        a = one.sample_path(9, 0.01, 20)
        b = two.sample_path(9, 0.01, 20)
        assert np.array_equal(a.increments[0], b.increments[0])

    def test_increment_variance(self, imaginary_model):
        """Test increments have variance close to dt"""
        path = imaginary_model.sample_path(123, 0.02, 20000)
        assert np.var(path.increments) == pytest.approx(0.02, rel=0.05)
        assert abs(np.mean(path.increments)) < 5 * np.sqrt(0.02 / 20000)

    def test_beta_is_cumulative(self, imaginary_model):
        """Test beta starts at 0 and sums increments"""
        path = imaginary_model.sample_path(5, 0.01, 10)
        assert path.beta[0, 0] == 0.0
        assert np.allclose(path.beta[:, -1], path.increments.sum(axis=1))
        assert path.t_final == pytest.approx(0.1)

    def test_beta_interpolation(self, imaginary_model):
        """Test fractional times interpolate linearly"""
        path = imaginary_model.sample_path(5, 0.01, 10)
        mid = path.beta_at(3, 0.5)
        assert np.allclose(mid, 0.5 * (path.beta[:, 3] + path.beta[:, 4]))
        with pytest.raises(StepIndexError):
            path.beta_at(10, 0.5)
        with pytest.raises(StepIndexError):
            path.beta_at(11)

    def test_coarsen(self, imaginary_model):
        """Test coarsening sums increment pairs and keeps beta at shared times"""
        fine = imaginary_model.sample_path(8, 0.005, 40)
        coarse = fine.coarsen()
        assert coarse.dt == pytest.approx(0.01)
        assert coarse.n_steps == 20
        assert np.allclose(coarse.beta, fine.beta[:, ::2])

    def test_coarsen_odd_rejected(self, imaginary_model):
        """Test an odd step count cannot be coarsened"""
        with pytest.raises(ValueError):
            imaginary_model.sample_path(8, 0.01, 5).coarsen()

    def test_increments_read_only(self, imaginary_model):
        """Test a sampled path cannot be mutated"""
        path = imaginary_model.sample_path(8, 0.01, 5)
        with pytest.raises(ValueError):
            path.increments[0, 0] = 1.0

    def test_shape_checked(self):
        """Test increment shape must match n_steps"""
        with pytest.raises(ValueError):
            BrownianPath(0, 0.1, 4, np.zeros((1, 3)))

    def test_invalid_sampling_arguments(self, imaginary_model):
        """Test non-positive dt and step counts are rejected"""
        with pytest.raises(ValueError):
            imaginary_model.sample_path(0, 0.0, 10)
        with pytest.raises(ValueError):
            imaginary_model.sample_path(0, 0.1, 0)


class TestNoiseModel:
    """Test model-level fields"""

    def test_imaginary_noise_has_no_damping(self, imaginary_model):
        """Test mu + mu~ vanishes when every mu_j is imaginary"""
        assert imaginary_model.purely_imaginary
        assert np.allclose(imaginary_model.damping_field().values, 0.0)

    def test_real_noise_damping(self, grid):
        """Test mu + mu~ = sum Re(mu_j)^2 e_j^2 for real coefficients"""
        model = NoiseModel(grid, (cosine_mode(grid, 0.5, wavenumber=0),))
        assert np.allclose(model.mu_field().values, 0.125)
        assert np.allclose(model.mu_tilde_field().values, 0.125)
        assert np.allclose(model.damping_field().values, 0.25)

    def test_w_field(self, imaginary_model):
        """Test W is zero at t = 0 and equals sum phi_j beta_j later"""
        path = imaginary_model.sample_path(3, 0.01, 10)
        assert np.allclose(imaginary_model.w_field(path, 0).values, 0.0)
        expected = imaginary_model.phi_field(1).values * path.beta[0, 7]
        assert np.allclose(imaginary_model.w_field(path, 7).values, expected)

    def test_w_field_ensemble_mean_is_zero(self, grid):
        """Test the mean of W(T) over 200 seeds sits within 3 standard errors of zero"""
        model = NoiseModel(grid, (cosine_mode(grid, 0.5, wavenumber=1),))
        samples = np.array(
            [model.w_field(model.sample_path(seed, 0.01, 50), 50).values for seed in range(200)]
        )
        mean = samples.mean(axis=0)
        se = samples.std(axis=0, ddof=1) / np.sqrt(len(samples))
        assert np.all(se > 0.0)
        assert np.all(np.abs(mean) <= 3.0 * se)

    def test_increment_field(self, imaginary_model):
        """Test Delta W over one step"""
        path = imaginary_model.sample_path(3, 0.01, 10)
        expected = imaginary_model.phi_field(1).values * path.increments[0, 4]
        assert np.allclose(imaginary_model.increment_field(path, 4).values, expected)
        with pytest.raises(StepIndexError):
            imaginary_model.increment_field(path, 10)

    def test_path_mode_count_checked(self, grid, imaginary_model):
        """Test a path with the wrong number of modes is rejected"""
        path = NoiseModel.deterministic(grid).sample_path(3, 0.01, 10)
        with pytest.raises(ValueError):
            imaginary_model.w_field(path, 1)

    def test_phi_field_index(self, imaginary_model):
        """Test mode indices are 1-based"""
        with pytest.raises(StepIndexError):
            imaginary_model.phi_field(0)
        with pytest.raises(StepIndexError):
            imaginary_model.phi_field(2)

    def test_deterministic_model(self, grid):
        """Test the empty model"""
        model = NoiseModel.deterministic(grid)
        assert model.n_modes == 0
        assert model.is_deterministic
        assert np.allclose(model.damping_field().values, 0.0)
        assert model.sample_path(0, 0.1, 3).increments.shape == (0, 3)

    def test_modes_must_share_grid(self, grid):
        """Test a mode on another grid is rejected"""
        other = GridSpec(1, 32, 20.0)
        with pytest.raises(GridMismatchError):
            NoiseModel(grid, (cosine_mode(other, 0.1j),))
