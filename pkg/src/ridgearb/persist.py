"""Checkpoints, run manifests and stable JSON writing.

Floats are written with Python's shortest round-trip repr, so a reload
reproduces every bit.
"""

from __future__ import annotations

import csv
import hashlib
import json
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from ridgearb.strategy import RidgeletStrategy

CHECKPOINT_VERSION = 1
MANIFEST_VERSION = 1
# manifest keys that vary between otherwise identical runs
VOLATILE_KEYS = ("created_at", "wall_time", "output_dir", "manifest_hash")


def _default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if hasattr(obj, "to_dict"):
        return obj.to_dict()
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):
        return obj.value
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_default, allow_nan=True) + "\n"


def write_json(path: str | Path, obj) -> None:
    Path(path).write_text(dumps(obj))


def read_json(path: str | Path):
    return json.loads(Path(path).read_text())


def sha256_file(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def save_checkpoint(path: str | Path, strategy: RidgeletStrategy, **extra) -> None:
    doc = {"version": CHECKPOINT_VERSION, **strategy.to_dict(), **extra}
    write_json(path, doc)


def load_checkpoint(path: str | Path) -> RidgeletStrategy:
    doc = read_json(path)
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {doc.get('version')!r}")
    return RidgeletStrategy.from_dict(doc)


def manifest_hash(manifest: dict) -> str:
    stable = {k: v for k, v in manifest.items() if k not in VOLATILE_KEYS}
    return hashlib.sha256(dumps(stable).encode()).hexdigest()


def write_manifest(path: str | Path, manifest: dict) -> dict:
    doc = {"version": MANIFEST_VERSION, **manifest}
    doc["created_at"] = datetime.now(timezone.utc).isoformat()
    doc["manifest_hash"] = manifest_hash(doc)
    write_json(path, doc)
    return doc


def write_trace(path: str | Path, trace, k_schedule, steps_per_k: int) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "k", "value"])
        for idx, value in enumerate(trace):
            writer.writerow([idx + 1, repr(float(k_schedule[idx // steps_per_k])), repr(float(value))])


def read_trace(path: str | Path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return {key: np.array([float(r[key]) for r in rows]) for key in ("step", "k", "value")}
