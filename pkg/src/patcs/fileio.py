"""On-disk formats: raw float64 arrays with a key=value sidecar, 16-bit PNG previews."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

ARRAY_SUFFIX = ".f64"
META_SUFFIX = ".meta"


def _paths(path):
    path = Path(path)
    if path.suffix in (ARRAY_SUFFIX, META_SUFFIX):
        path = path.with_suffix("")
    return path.with_suffix(ARRAY_SUFFIX), path.with_suffix(META_SUFFIX)


def save_array(path, values, **meta):
    """Write ``values`` as little-endian row-major float64 plus a ``.meta`` sidecar."""
    data_path, meta_path = _paths(path)
    values = np.ascontiguousarray(values, dtype="<f8")
    data_path.parent.mkdir(parents=True, exist_ok=True)
    data_path.write_bytes(values.tobytes(order="C"))
    lines = [f"shape={','.join(str(s) for s in values.shape)}"]
    for key in sorted(meta):
        val = meta[key]
        if val is None:
            continue
        if isinstance(val, float):
            val = repr(val)
        lines.append(f"{key}={val}")
    meta_path.write_text("\n".join(lines) + "\n")
    return data_path


def read_meta(path) -> dict:
    _, meta_path = _paths(path)
    if not meta_path.exists():
        raise FileNotFoundError(str(meta_path))
    meta = {}
    for line in meta_path.read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise ValueError(f"malformed sidecar line in {meta_path}: {line!r}")
        meta[key.strip()] = val.strip()
    if "shape" not in meta:
        raise ValueError(f"sidecar {meta_path} lacks a shape entry")
    return meta


def load_array(path):
    """Return ``(values, meta)``; numeric sidecar entries are converted to float."""
    data_path, _ = _paths(path)
    meta = read_meta(path)
    if not data_path.exists():
        raise FileNotFoundError(str(data_path))
    shape = tuple(int(s) for s in meta["shape"].split(","))
    raw = np.frombuffer(data_path.read_bytes(), dtype="<f8")
    if raw.size != int(np.prod(shape)):
        raise ValueError(f"{data_path}: {raw.size} values but sidecar shape {shape}")
    out = {}
    for key, val in meta.items():
        if key == "shape":
            out[key] = shape
            continue
        try:
            out[key] = float(val)
        except ValueError:
            out[key] = val
    return raw.reshape(shape).astype(float), out


def export_png(path, values):
    """Linear min-max normalization to 16-bit grayscale."""
    values = np.asarray(values, dtype=float)
    lo, hi = float(values.min()), float(values.max())
    scaled = np.zeros_like(values) if hi <= lo else (values - lo) / (hi - lo)
    pixels = np.round(scaled * 65535).astype(np.uint16)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(pixels).save(path)
    return Path(path)
