import logging
from contextlib import asynccontextmanager
from typing import Dict, Optional

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

import src
from src.config import Config
from src.exceptions import ConfigError
from src.experiments import EXIT_NUMERICAL, PRESET_DESCRIPTIONS, RunOutcome, run_experiment
from src.outputs import jsonable
from src.run_config import COMPAT_EXPERIMENTS, parse_config_text

# Configure logging
logging.basicConfig(
    level=Config.LOG_LEVEL, format="%(asctime)s - %(name)s - %(levelname)s - %(message)s"
)
logger = logging.getLogger(__name__)

# Finished runs by id, newest last
runs: Dict[str, dict] = {}


@asynccontextmanager
async def lifespan(app: FastAPI):
    logger.info("Starting stochastic NLS API")
    yield
    logger.info(f"Shutting down stochastic NLS API ({len(runs)} run(s) this session)")


app = FastAPI(
    title="Stochastic NLS API",
    description="Run and verify stochastic two-component NLS experiments",
    version=src.__version__,
    lifespan=lifespan,
)

app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)


class ConfigPayload(BaseModel):
    config: str


class RunRequest(ConfigPayload):
    seed: Optional[int] = None
    paths: Optional[int] = None
    dt: Optional[float] = None
    out: Optional[str] = None
    workers: Optional[int] = None


def _parse(payload: ConfigPayload, overrides: Optional[dict] = None):
    try:
        return parse_config_text(payload.config, overrides, source="<request>")
    except ConfigError as exc:
        raise HTTPException(status_code=400, detail={"violations": exc.violations}) from exc


def _outcome_body(run_id: str, experiment: str, outcome: RunOutcome) -> dict:
    return jsonable(
        {
            "run_id": run_id,
            "experiment": experiment,
            "status": outcome.status,
            "exit_code": outcome.exit_code,
            "output_dir": outcome.output_dir,
            "files": sorted(outcome.files),
            "details": outcome.details,
        }
    )


# ========================
# Preset Endpoints
# ========================


@app.get("/api/presets", tags=["Presets"])
async def get_presets():
    """List experiment presets"""
    return [
        {
            "name": name,
            "description": description,
            "requires_compatibility": name in COMPAT_EXPERIMENTS,
        }
        for name, description in PRESET_DESCRIPTIONS.items()
    ]


# ========================
# Config Endpoints
# ========================


@app.post("/api/config/verify", tags=["Config"])
async def verify_config(payload: ConfigPayload):
    """Validate an INI run configuration"""
    config = _parse(payload)
    return {
        "valid": True,
        "experiment": config.experiment,
        "config_hash": config.config_hash,
        "config": jsonable(config.canonical()),
    }


# ========================
# Run Endpoints
# ========================


@app.post("/api/runs", tags=["Runs"])
def create_run(request: RunRequest):
    """Run an experiment synchronously and return its verdict; numerical failures are a 500"""
    overrides = {"seed": request.seed, "paths": request.paths, "dt": request.dt, "out": request.out}
    config = _parse(request, overrides)
    outcome = run_experiment(config, workers=request.workers)
    run_id = f"{config.config_hash[:12]}-{config.seed}"
    body = _outcome_body(run_id, config.experiment, outcome)
    runs[run_id] = body
    if outcome.exit_code == EXIT_NUMERICAL:
        raise HTTPException(status_code=500, detail=body)
    return body


@app.get("/api/runs", tags=["Runs"])
async def list_runs():
    """List runs finished in this session"""
    return [
        {"run_id": run_id, "experiment": body["experiment"], "status": body["status"]}
        for run_id, body in runs.items()
    ]


@app.get("/api/runs/{run_id}", tags=["Runs"])
async def get_run(run_id: str):
    """Get one finished run"""
    if run_id in runs:
        return runs[run_id]
    raise HTTPException(status_code=404, detail=f"No run {run_id}")


# ========================
# Health Check
# ========================


@app.get("/api/health", tags=["Health"])
async def health_check():
    """Health check endpoint"""
    return {"status": "healthy", "runs": len(runs)}


# ========================
# Root Endpoint
# ========================


@app.get("/", tags=["Root"])
async def root():
    """Root endpoint - API information"""
    return {
        "name": "Stochastic NLS API",
        "version": src.__version__,
        "description": "Run and verify stochastic two-component NLS experiments",
        "docs": "/docs",
        "redoc": "/redoc",
    }
