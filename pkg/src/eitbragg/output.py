"""CSV and run-manifest writers.

CSV files are UTF-8, comma separated, start with ``#`` comment lines (tool
version, config hash, free-form notes) and then one header row where every
column names its unit in brackets. Numbers use 15 significant digits, so an
identical config gives byte-identical files.
"""

from __future__ import annotations

import json
import threading
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__

_locks: dict[str, threading.Lock] = {}
_locks_guard = threading.Lock()


def _lock_for(path: Path) -> threading.Lock:
    with _locks_guard:
        return _locks.setdefault(str(path.resolve()), threading.Lock())


def _fmt(x) -> str:
    return format(float(x), ".15g")


def write_csv(path, columns: dict[str, np.ndarray], config_hash: str = "",
              comments: list[str] | None = None) -> Path:
    """Write equal-length columns; keys are header labels such as ``"R [1]"``."""
    path = Path(path)
    names = list(columns)
    for name in names:
        if "[" not in name or not name.endswith("]"):
            raise ValueError(f"column {name!r} does not declare a unit")
    arrays = [np.asarray(columns[n]).ravel() for n in names]
    if len({len(a) for a in arrays}) > 1:
        raise ValueError("columns have different lengths")
    lines = [f"# eitbragg {__version__}", f"# config_sha256 {config_hash}"]
    lines += [f"# {c}" for c in comments or []]
    lines.append(",".join(names))
    for row in zip(*arrays):
        lines.append(",".join(_fmt(v) for v in row))
    with _lock_for(path):
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    return path


def read_csv(path) -> tuple[list[str], np.ndarray]:
    """(header labels, 2-D data) of a file written by :func:`write_csv`."""
    lines = [ln for ln in Path(path).read_text(encoding="utf-8").splitlines()
             if not ln.startswith("#")]
    header = lines[0].split(",")
    data = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
    return header, data.reshape(-1, len(header))


def csv_body(path) -> str:
    """File contents without the comment lines."""
    return "\n".join(ln for ln in Path(path).read_text(encoding="utf-8").splitlines()
                     if not ln.startswith("#"))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return _jsonable(obj.item())
    if isinstance(obj, float) and not np.isfinite(obj):
        return str(obj)
    return obj


def write_manifest(path, config, body: dict) -> Path:
    """JSON manifest; only ``created_utc`` varies between identical runs."""
    path = Path(path)
    doc = {
        "tool": "eitbragg",
        "version": __version__,
        "config_sha256": config.config_hash(),
        "created_utc": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "config": config.model_dump(mode="json"),
    }
    doc.update(_jsonable(body))
    with _lock_for(path):
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path
