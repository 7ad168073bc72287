import os
from dotenv import load_dotenv

load_dotenv()


class Config:
    """Base configuration"""

    DEBUG = False
    TESTING = False

    # Ensemble execution
    WORKERS = int(os.getenv("SNLS_WORKERS", "1"))
    FFT_WORKERS = 1  # one transform thread per trajectory; parallelism lives in the ensemble

    # Outputs
    OUTPUT_DIR = os.getenv("SNLS_OUTPUT_DIR", "runs")

    # Service surface
    API_HOST = os.getenv("SNLS_API_HOST", "127.0.0.1")
    API_PORT = int(os.getenv("SNLS_API_PORT", "5000"))

    # Logging
    LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO")


class DevelopmentConfig(Config):
    """Development configuration"""

    DEBUG = True


class ProductionConfig(Config):
    """Production configuration"""

    DEBUG = False


class TestingConfig(Config):
    """Testing configuration"""

    TESTING = True
    WORKERS = 1
    OUTPUT_DIR = "test-runs"


config = {
    "development": DevelopmentConfig,
    "production": ProductionConfig,
    "testing": TestingConfig,
    "default": DevelopmentConfig,
}


def resolve_workers(override=None) -> int:
    """Worker count: explicit override, else the SNLS_WORKERS environment value"""
    if override is not None:
        workers = int(override)
    else:
        workers = int(os.getenv("SNLS_WORKERS", str(Config.WORKERS)))
    return max(1, workers)
