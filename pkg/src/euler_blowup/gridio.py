"""Grid dump format shared by the field, elliptic and plotting tools.

A dump is a pair of files: <base>.f64 holding raw little-endian 8-byte
floats, row-major with x1 fastest (C order of an [ny, nx] array), and
<base>.meta, a flat key=value text sidecar with nx, ny, x_min, x_max,
y_min, y_max, t and field_name.
"""

from __future__ import annotations

import hashlib
from pathlib import Path

import numpy as np

_META_KEYS = ("nx", "ny", "x_min", "x_max", "y_min", "y_max", "t", "field_name")


def write_grid_dump(base, field: np.ndarray, *, x_min: float, x_max: float,
                    y_min: float, y_max: float, t: float,
                    field_name: str) -> tuple[Path, Path]:
    base = Path(base)
    arr = np.ascontiguousarray(np.asarray(field, dtype="<f8"))
    if arr.ndim != 2:
        raise ValueError("grid dumps are 2-D")
    ny, nx = arr.shape
    data_path = base.with_suffix(".f64")
    meta_path = base.with_suffix(".meta")
    data_path.write_bytes(arr.tobytes(order="C"))
    meta = {
        "nx": nx, "ny": ny, "x_min": x_min, "x_max": x_max,
        "y_min": y_min, "y_max": y_max, "t": t, "field_name": field_name,
    }
    lines = [f"{k}={_fmt(meta[k])}" for k in _META_KEYS]
    meta_path.write_text("\n".join(lines) + "\n")
    return data_path, meta_path


def _fmt(v) -> str:
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def read_grid_dump(base) -> tuple[np.ndarray, dict]:
    base = Path(base)
    meta_path = base.with_suffix(".meta")
    data_path = base.with_suffix(".f64")
    meta: dict = {}
    for line in meta_path.read_text().splitlines():
        if not line.strip():
            continue
        k, _, v = line.partition("=")
        meta[k] = v if k == "field_name" else float(v)
    nx, ny = int(meta["nx"]), int(meta["ny"])
    raw = np.frombuffer(data_path.read_bytes(), dtype="<f8")
    if raw.size != nx * ny:
        raise IOError(
            f"grid dump {data_path} holds {raw.size} values, expected {nx * ny}"
        )
    meta["nx"], meta["ny"] = nx, ny
    return raw.reshape(ny, nx).copy(), meta


def sha256_of(path) -> str:
    h = hashlib.sha256()
    h.update(Path(path).read_bytes())
    return h.hexdigest()
