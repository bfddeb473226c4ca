"""CSV, report and manifest writers."""

from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .dynamics import SAMPLE_COLUMNS, TrajectoryRecord

COLLISION_COLUMNS = ("t", "wall", "r", "theta", "kappa", "x", "y", "vx_in", "vy_in", "vx_out", "vy_out")
RICCATI_COLUMNS = ("t", "u", "y", "ydot", "blowup_flag", "collision_flag")
COCYCLE_COLUMNS = ("a", "b", "c", "d")


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def write_csv(path: Path, columns: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_cell(v) for v in row])
    return path


def read_csv(path: Path) -> tuple[list[str], np.ndarray]:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path} is empty")
    header = [h.strip() for h in rows[0]]
    data = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float).reshape(-1, len(header))
    return header, data


def trajectory_rows(record: TrajectoryRecord):
    if record.samples is None:
        return []
    return [(r[0], r[1], r[2], r[3], r[4], int(r[5])) for r in record.samples]


def collision_rows(record: TrajectoryRecord):
    for ev in record.events:
        yield (
            ev.time, ev.wall_index, ev.r, ev.theta, ev.kappa, ev.position[0], ev.position[1],
            ev.v_in[0], ev.v_in[1], ev.v_out[0], ev.v_out[1],
        )


def write_trajectory(path: Path, record: TrajectoryRecord) -> Path:
    return write_csv(path, SAMPLE_COLUMNS, trajectory_rows(record))


def write_collisions(path: Path, record: TrajectoryRecord) -> Path:
    return write_csv(path, COLLISION_COLUMNS, collision_rows(record))


def read_cocycle(path: Path) -> list[np.ndarray]:
    """2x2 matrices from a CSV with columns a, b, c, d."""
    header, data = read_csv(path)
    missing = [c for c in COCYCLE_COLUMNS if c not in header]
    if missing:
        raise ValueError(f"cocycle file lacks column {missing[0]!r}")
    idx = [header.index(c) for c in COCYCLE_COLUMNS]
    return [row[idx].reshape(2, 2) for row in data]


def jsonable(obj):
    """Plain JSON types; non-finite floats become the strings 'inf', '-inf', 'nan'."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isfinite(v):
            return v
        return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")
    if isinstance(obj, Path):
        return str(obj)
    return obj


def write_json(path: Path, data) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(jsonable(data), indent=2, sort_keys=True, allow_nan=False) + "\n")
    return path


def sha256(path: Path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def write_manifest(
    path: Path, *, version: str, command: str, config: dict, seed, wall_time: float,
    outputs: Sequence[Path], status: str, error: str | None = None,
) -> Path:
    """Run manifest with checksums of every artifact that exists."""
    path = Path(path)
    files = {}
    for out in outputs:
        out = Path(out)
        if out.is_file():
            try:
                key = str(out.relative_to(path.parent))
            except ValueError:
                key = str(out)
            files[key] = sha256(out)
    data = {
        "tool": "hypbill",
        "version": version,
        "command": command,
        "config": config,
        "seed": seed,
        "wall_time_s": round(wall_time, 6),
        "outputs": files,
        "status": status,
    }
    if error is not None:
        data["error"] = error
    return write_json(path, data)
