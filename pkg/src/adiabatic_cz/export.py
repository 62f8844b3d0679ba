"""Deterministic CSV/JSON writers shared by the modules and the CLI.

Numbers are written with 12 significant digits, ``.`` as decimal mark and
LF line endings, so that reruns produce byte-identical files.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from pathlib import Path

import numpy as np

SIGNIFICANT_DIGITS = 12


def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if np.isnan(v):
            return "nan"
        if v == 0.0:
            return "0"  # drops the sign of -0.0
        return f"{v:.{SIGNIFICANT_DIGITS}g}"
    return str(value)


def tool_version() -> str:
    from . import __version__

    return __version__


def device_hash(device) -> str:
    """Short SHA-256 of the canonical preset JSON."""
    text = json.dumps(device.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def metadata(device=None, seed=None, **extra) -> dict:
    meta = {"tool_version": tool_version()}
    meta["preset_hash"] = device_hash(device) if device is not None else "none"
    meta["seed"] = "none" if seed is None else int(seed)
    meta.update(extra)
    return meta


def csv_text(header, rows, meta: dict | None = None) -> str:
    buf = io.StringIO()
    for key, value in (meta or {}).items():
        buf.write(f"# {key}={fmt(value)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def write_csv(path, header, rows, meta: dict | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(csv_text(header, rows, meta))
    return path


def read_csv(path_or_text, *, text: bool = False):
    """Return ``(meta, header, rows)``; rows are lists of strings."""
    content = path_or_text if text else Path(path_or_text).read_text(encoding="utf-8")
    meta, lines = {}, []
    for line in content.splitlines():
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition("=")
            meta[key.strip()] = value.strip()
        elif line.strip():
            lines.append(line)
    if not lines:
        return meta, [], []
    reader = csv.reader(lines)
    header = [h.strip() for h in next(reader)]
    return meta, header, [row for row in reader]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return None if not np.isfinite(v) else float(fmt(v))
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, complex):
        return [_jsonable(obj.real), _jsonable(obj.imag)]
    return obj


def json_text(data) -> str:
    return json.dumps(_jsonable(data), indent=2, sort_keys=True) + "\n"


def write_json(path, data) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(json_text(data))
    return path
