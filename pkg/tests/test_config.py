#!/usr/bin/env python3
"""
Unit tests for configuration module.
Tests configuration loading, defaults, and environment variable handling.
"""

import os
from importlib import reload
from unittest.mock import patch

import pytest

from src.config import (
    Config,
    DevelopmentConfig,
    ProductionConfig,
    TestingConfig,
    resolve_workers,
)


@pytest.fixture
def reloaded_config():
    """Reload src.config inside the test and restore it afterwards"""
    from src import config

    yield lambda: reload(config)
    reload(config)


class TestConfig:
    """Test base configuration"""

    def test_config_defaults(self):
        """Test default configuration values"""
        assert Config.DEBUG is False
        assert Config.TESTING is False
        assert Config.FFT_WORKERS == 1
        assert Config.LOG_LEVEL == "INFO"

    def test_config_output_dir_default(self):
        """Test default output directory"""
        assert Config.OUTPUT_DIR == "runs"

    @patch.dict(os.environ, {"SNLS_OUTPUT_DIR": "/tmp/snls-out"})
    def test_config_output_dir_env(self, reloaded_config):
        """Test output directory from environment"""
        module = reloaded_config()
        assert module.Config.OUTPUT_DIR == "/tmp/snls-out"

    @patch.dict(os.environ, {"LOG_LEVEL": "DEBUG"})
    def test_config_log_level_env(self, reloaded_config):
        """Test log level from environment"""
        module = reloaded_config()
        assert module.Config.LOG_LEVEL == "DEBUG"

    @patch.dict(os.environ, {"SNLS_API_PORT": "8123"})
    def test_config_api_port_env(self, reloaded_config):
        """Test API port from environment"""
        module = reloaded_config()
        assert module.Config.API_PORT == 8123


class TestResolveWorkers:
    """Test ensemble worker resolution"""

    def test_override_wins(self):
        """Test explicit override is used"""
        assert resolve_workers(3) == 3

    @patch.dict(os.environ, {"SNLS_WORKERS": "6"})
    def test_environment_value(self):
        """Test SNLS_WORKERS is read when no override is given"""
        assert resolve_workers() == 6

    def test_minimum_one(self):
        """Test worker count never drops below one"""
        assert resolve_workers(0) == 1
        assert resolve_workers(-4) == 1


class TestDevelopmentConfig:
    """Test development configuration"""

    def test_development_debug(self):
        """Test development mode has debug enabled"""
        assert DevelopmentConfig.DEBUG is True


class TestProductionConfig:
    """Test production configuration"""

    def test_production_debug(self):
        """Test production mode has debug disabled"""
        assert ProductionConfig.DEBUG is False


class TestTestingConfig:
    """Test testing configuration"""

    def test_testing_flag(self):
        """Test testing flag is enabled"""
        assert TestingConfig.TESTING is True

    def test_testing_single_worker(self):
        """Test testing runs ensembles inline"""
        assert TestingConfig.WORKERS == 1
        assert TestingConfig.OUTPUT_DIR == "test-runs"


class TestConfigMapping:
    """Test configuration mapping"""

    def test_config_mapping_keys(self):
        """Test configuration mapping has expected keys"""
        from src.config import config

        assert set(config) == {"development", "production", "testing", "default"}

    def test_config_mapping_values(self):
        """Test configuration mapping has correct values"""
        from src import config as module

        mapping = module.config
        assert mapping["development"] is module.DevelopmentConfig
        assert mapping["production"] is module.ProductionConfig
        assert mapping["testing"] is module.TestingConfig
        assert mapping["default"] is module.DevelopmentConfig
