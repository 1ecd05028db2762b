"""Deterministic report emission: JSON, CSV, the versioned section dump,
and a run manifest with content hashes.

Re-running with the same config and seed must reproduce every emitted
artifact byte for byte; floats are written with Python's shortest
round-trip repr and JSON keys are ordered.
"""

import hashlib
import json
import struct
import time
from dataclasses import dataclass, is_dataclass, asdict
from pathlib import Path

import numpy as np

from . import __version__
from .errors import IoError
from .spaces import Euclidean, Hyperbolic2, MetricTree, SpdManifold
from .tree import tree_to_json

MAGIC = b"NPCH1"
_SPACE_TAGS = {"euclidean": 0, "hyperbolic2": 1, "spd": 2, "tree": 3}


def _to_jsonable(obj):
    if is_dataclass(obj) and not isinstance(obj, type):
        return _to_jsonable(asdict(obj))
    if isinstance(obj, dict):
        return {str(k): _to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return _to_jsonable(obj.tolist())
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if isinstance(obj, (bool, int, float, str)) or obj is None:
        return obj
    return repr(obj)


def json_bytes(obj):
    return (json.dumps(_to_jsonable(obj), sort_keys=True, indent=2) + "\n").encode()


def csv_bytes(header, rows):
    lines = [",".join(header)]
    for row in rows:
        cells = []
        for x in row:
            if isinstance(x, (float, np.floating)):
                cells.append(repr(float(x)))
            else:
                cells.append(str(x))
        lines.append(",".join(cells))
    return ("\n".join(lines) + "\n").encode()


def section_bytes(section):
    """Versioned little-endian dump: magic, space tag, grid dims, points."""
    g = section.grid
    space = section.space
    if isinstance(space, Euclidean):
        tag, extra = _SPACE_TAGS["euclidean"], space.dim
        payload = np.asarray(section.values, dtype="<f8").tobytes()
    elif isinstance(space, Hyperbolic2):
        tag, extra = _SPACE_TAGS["hyperbolic2"], 0
        z = np.asarray(section.values)
        payload = np.stack([z.real, z.imag], axis=-1).astype("<f8").tobytes()
    elif isinstance(space, SpdManifold):
        tag, extra = _SPACE_TAGS["spd"], space.n
        payload = np.asarray(section.values, dtype="<f8").tobytes()
    elif isinstance(space, MetricTree):
        tag, extra = _SPACE_TAGS["tree"], 0
        e, o = section.values
        payload = e.astype("<u4").tobytes() + o.astype("<f8").tobytes()
    else:
        raise IoError(f"cannot serialize sections over {space!r}")
    head = MAGIC + struct.pack("<BIIId", tag, extra, g.n_t + 1, g.n_theta, g.T)
    return head + payload


@dataclass
class RunManifest:
    config: dict
    version: str
    wall_time_s: float
    checks: dict
    hashes: dict


def emit_reports(results, out_dir, config=None, checks=None, t0=None):
    """Write the artifact set and a manifest with sha256 hashes.

    results maps filename -> bytes (already rendered); the manifest is
    deterministic except for its wall-time field.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create output directory: {exc}", path=str(out)) from exc
    hashes = {}
    for name, blob in sorted(results.items()):
        path = out / name
        try:
            path.write_bytes(blob)
        except OSError as exc:
            raise IoError(f"cannot write {path}: {exc}", path=str(path)) from exc
        hashes[name] = hashlib.sha256(blob).hexdigest()
    manifest = RunManifest(
        config=_to_jsonable(config or {}),
        version=__version__,
        wall_time_s=(time.perf_counter() - t0) if t0 is not None else 0.0,
        checks=_to_jsonable(checks or {}),
        hashes=hashes,
    )
    (out / "manifest.json").write_bytes(json_bytes(manifest))
    return manifest


def space_to_json(space):
    if isinstance(space, Euclidean):
        return {"kind": "euclidean", "dim": space.dim}
    if isinstance(space, Hyperbolic2):
        return {"kind": "hyperbolic2"}
    if isinstance(space, SpdManifold):
        return {"kind": "spd", "n": space.n}
    if isinstance(space, MetricTree):
        return {"kind": "tree", "tree": tree_to_json(space)}
    raise IoError(f"cannot serialize space {space!r}")
