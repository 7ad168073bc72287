"""Writers for the run outputs: time-series CSV, per-path NDJSON, JSON blocks"""

import csv
import hashlib
import json
import logging
import math
import os
from typing import Any, Dict, Iterable, Optional

import numpy as np

from src.identity_checks import ResidualSeries
from src.trajectory import TrajectoryRecord

logger = logging.getLogger(__name__)

TIMESERIES_COLUMNS = (
    "t",
    "Q",
    "E",
    "K",
    "P",
    "l2_u",
    "l2_v",
    "h1_u",
    "h1_v",
    "mass_residual",
    "energy_residual",
    "equivalence_residual",
)
RESIDUAL_COLUMNS = {
    "mass": "mass_residual",
    "energy": "energy_residual",
    "equivalence": "equivalence_residual",
}


def _cell(value: Optional[float]) -> str:
    return "" if value is None else repr(float(value))


def jsonable(value: Any) -> Any:
    """Recursively convert numpy scalars and non-finite floats for strict JSON"""
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, complex):
        return {"re": value.real, "im": value.imag}
    return value


def write_timeseries(
    path: str, record: TrajectoryRecord, residuals: Iterable[ResidualSeries] = ()
) -> str:
    """One row per recorded sample; residual columns stay empty when not computed"""
    by_column: Dict[str, np.ndarray] = {}
    for series in residuals:
        column = RESIDUAL_COLUMNS[series.name]
        if series.residual.size != record.n_samples:
            raise ValueError(
                f"{series.name} residual has {series.residual.size} rows, "
                f"record has {record.n_samples} samples"
            )
        by_column[column] = series.residual
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(TIMESERIES_COLUMNS)
        for i, sample in enumerate(record.samples):
            row = [_cell(getattr(sample, name)) for name in TIMESERIES_COLUMNS[:9]]
            for column in TIMESERIES_COLUMNS[9:]:
                values = by_column.get(column)
                row.append(_cell(None if values is None else values[i]))
            writer.writerow(row)
    logger.debug(f"Wrote {record.n_samples} rows to {path}")
    return path


def write_ndjson(path: str, rows: Iterable[dict]) -> str:
    with open(path, "w", newline="\n", encoding="utf-8") as handle:
        for row in rows:
            handle.write(json.dumps(jsonable(row), sort_keys=True, allow_nan=False) + "\n")
    return path


def write_json(path: str, payload: dict) -> str:
    with open(path, "w", newline="\n", encoding="utf-8") as handle:
        json.dump(jsonable(payload), handle, indent=2, sort_keys=True, allow_nan=False)
        handle.write("\n")
    return path


def file_sha256(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def ensure_dir(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path
