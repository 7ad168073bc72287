#!/usr/bin/env python3
"""
Unit tests for system parameters.
Tests the compatibility relation, validation and the H1 regime predicate.
"""

import logging

import pytest

from src.noise_model import NoiseModel, cosine_mode, gaussian_mode
from src.system_params import SystemParams, h1_regime, validate


class TestSystemParams:
    """Test parameter construction"""

    def test_compatible_constructor(self):
        """Test lambda = c conj(kappa) by construction"""
        params = SystemParams.compatible(ell=1.0, L=0.5, kappa=1.0 + 2.0j, c=3.0)
        assert params.lam == pytest.approx(3.0 - 6.0j)
        assert params.compat_residual == pytest.approx(0.0)
        assert params.is_compatible

    def test_incompatible(self):
        """Test residual of an incompatible set"""
        params = SystemParams(lam=1.0, kappa=1.0j, c=1.0)
        assert params.compat_residual == pytest.approx(abs(1.0 + 1.0j))
        assert not params.is_compatible

    def test_types_are_normalised(self):
        """Test integer inputs are stored as float and complex"""
        params = SystemParams(ell=1, L=2, lam=3, kappa=3, c=1)
        assert isinstance(params.lam, complex)
        assert isinstance(params.L, float)

    def test_describe(self):
        """Test describe splits complex couplings"""
        described = SystemParams(lam=1.0 - 2.0j).describe()
        assert described["lambda_re"] == 1.0
        assert described["lambda_im"] == -2.0


class TestValidate:
    """Test parameter validation"""

    def test_valid(self):
        """Test a compatible set passes with compatibility required"""
        report = validate(SystemParams.compatible(1.0, 1.0, 1.0, 1.0), require_compat=True)
        assert report.ok
        assert report.violations == []

    def test_collects_every_violation(self):
        """Test every violation is reported"""
        report = validate(SystemParams(ell=0.0, L=-1.0, lam=2.0, kappa=1.0, c=0.0), True)
        assert not report.ok
        assert len(report.violations) == 4

    def test_violations_are_logged(self, caplog):
        """Test violations are logged at debug level and a valid set logs nothing"""
        with caplog.at_level(logging.DEBUG, logger="src.system_params"):
            validate(SystemParams.compatible(1.0, 1.0, 1.0, 1.0))
            assert caplog.records == []
            validate(SystemParams(ell=0.0))
        assert len(caplog.records) == 1
        assert "ell must be positive" in caplog.records[0].getMessage()

    def test_compatibility_optional(self):
        """Test incompatibility is only a violation when required"""
        params = SystemParams(lam=2.0, kappa=1.0, c=1.0)
        assert validate(params).ok
        assert not validate(params, require_compat=True).ok


class TestH1Regime:
    """Test the H1 noise assumption"""

    def test_imaginary_noise(self, grid):
        """Test purely imaginary coefficients satisfy the assumption"""
        model = NoiseModel(grid, (cosine_mode(grid, 0.7j),))
        assert h1_regime(SystemParams(c=-1.0), model)

    def test_sign_changing_real_noise(self, grid):
        """Test a real coefficient on a sign-changing profile fails"""
        model = NoiseModel(grid, (cosine_mode(grid, 0.3),))
        assert not h1_regime(SystemParams(c=1.0), model)

    def test_nonpositive_real_part(self, grid):
        """Test Re(mu) e <= 0 everywhere with c > 0 passes"""
        model = NoiseModel(grid, (gaussian_mode(grid, -0.3 + 0.2j, center=10.0, width=2.0),))
        assert h1_regime(SystemParams(c=1.0), model)
        assert not h1_regime(SystemParams(c=-1.0), model)
