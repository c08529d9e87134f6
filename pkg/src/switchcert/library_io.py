"""JSON serialization for primitive libraries.

The on-disk format stores matrices as row-major nested lists of IEEE-754
doubles.  ``library_fingerprint`` hashes the canonical serialization so
certificates can be pinned to the exact library they were computed for.
"""
from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .primitives import Primitive, PrimitiveLibrary, PrimitiveMap, QuadraticLyapunov

FORMAT_NAME = "switchcert-library"
FORMAT_VERSION = 1


def primitive_to_dict(primitive: Primitive) -> dict:
    m = primitive.map
    return {
        "id": primitive.id,
        "fixed_point": m.fixed_point.tolist(),
        "linear": m.linear.tolist(),
        "quadratic": None if m.quadratic is None else m.quadratic.tolist(),
        "disturbance_gain": m.disturbance_gain.tolist(),
        "lyapunov_weight": primitive.lyapunov.weight.tolist(),
        "basin_level": primitive.basin_level,
        "contraction_rate": primitive.contraction_rate,
    }


def primitive_from_dict(data: dict) -> Primitive:
    try:
        fixed_point = np.array(data["fixed_point"], dtype=float)
        pm = PrimitiveMap(
            linear=np.array(data["linear"], dtype=float),
            fixed_point=fixed_point,
            disturbance_gain=np.array(data["disturbance_gain"], dtype=float),
            quadratic=None if data.get("quadratic") is None else np.array(data["quadratic"], dtype=float),
        )
        lyap = QuadraticLyapunov(weight=np.array(data["lyapunov_weight"], dtype=float), center=fixed_point)
        return Primitive(
            id=data["id"],
            map=pm,
            lyapunov=lyap,
            basin_level=data["basin_level"],
            contraction_rate=data["contraction_rate"],
        )
    except KeyError as exc:
        raise ValueError(f"primitive entry is missing field {exc}") from exc


def library_to_dict(library: PrimitiveLibrary) -> dict:
    return {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "state_dim": library.state_dim,
        "dist_dim": library.dist_dim,
        "primitives": [primitive_to_dict(p) for p in library],
    }


def library_from_dict(data: dict) -> PrimitiveLibrary:
    if not isinstance(data, dict) or "primitives" not in data:
        raise ValueError("library document must be an object with a 'primitives' array")
    if data.get("format", FORMAT_NAME) != FORMAT_NAME:
        raise ValueError(f"unrecognized library format {data.get('format')!r}")
    library = PrimitiveLibrary(tuple(primitive_from_dict(entry) for entry in data["primitives"]))
    for key, want in (("state_dim", library.state_dim), ("dist_dim", library.dist_dim)):
        if key in data and data[key] != want:
            raise ValueError(f"declared {key}={data[key]} does not match primitives ({want})")
    return library


def canonical_json(data: dict) -> str:
    return json.dumps(data, sort_keys=True, separators=(",", ":"))


def library_fingerprint(library: PrimitiveLibrary) -> str:
    """Content hash of the canonical serialization (sha256 hex digest)."""
    return hashlib.sha256(canonical_json(library_to_dict(library)).encode("ascii")).hexdigest()


def save_library(library: PrimitiveLibrary, path: str | Path) -> None:
    Path(path).write_text(json.dumps(library_to_dict(library), indent=2, sort_keys=True) + "\n")


def load_library(path: str | Path) -> PrimitiveLibrary:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path} is not valid JSON: {exc}") from exc
    return library_from_dict(data)
