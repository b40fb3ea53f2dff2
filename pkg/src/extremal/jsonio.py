"""Deterministic JSON output and the shipped schema files."""

from __future__ import annotations

import json
import math
from enum import Enum
from importlib import resources
from pathlib import Path

import numpy as np

SCHEMA_VERSION = "1.0"
SCHEMA_FILES = {
    "solution": "solution.schema.json",
    "extremal": "extremal.schema.json",
    "certificates": "certificates.schema.json",
    "ensemble": "ensemble.schema.json",
    "reproduce": "reproduce.schema.json",
    "poly_family": "poly_family.schema.json",
    "timing": "timing.schema.json",
}


def plain(obj):
    """Convert to JSON-ready builtins; non-finite floats become None."""
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [plain(v) for v in obj.tolist()]
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, Path):
        return str(obj)
    return obj


def dumps(data) -> str:
    return json.dumps(plain(data), indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_json(file: str | Path, data) -> Path:
    file = Path(file)
    file.write_text(dumps(data))
    return file


def schema_for(kind: str) -> dict:
    """Parsed schema for a document ``kind``."""
    name = SCHEMA_FILES[kind]
    text = resources.files("extremal").joinpath("schemas", name).read_text()
    return json.loads(text)


__all__ = ["SCHEMA_FILES", "SCHEMA_VERSION", "dumps", "plain", "schema_for", "write_json"]
