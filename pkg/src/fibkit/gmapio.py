"""Reading and writing grid maps in the portable .gmap container.

Layout: a one-line JSON header, a blank line, then the displacement
payload.  The payload is the sample array as little-endian 64-bit
floats, component-major (all samples of displacement component 0, then
component 1, ...), each component in C order over the grid axes with the
last axis fastest.  Inline payloads are base64; alternatively the header
may point at a raw sidecar file with the same bytes.

The header's ``kind`` field fixes the reference class:

========== ===========
kind       reference
========== ===========
diffeo     identity
fibration  coordproj
section    lift
vectorfield zero
========== ===========
"""

from __future__ import annotations

import base64
import json
import os

import numpy as np

from .errors import ShapeMismatch
from .gridmap import (GridMap, Reference, coordproj_reference,
                      identity_reference, lift_reference, zero_reference)
from .torus import TorusShape

FORMAT_VERSION = 1

_KIND_FOR_REFERENCE = {"identity": "diffeo", "coordproj": "fibration",
                       "lift": "section", "zero": "vectorfield"}


def _reference_for_kind(kind: str, src_dim: int, dst_dim: int) -> Reference:
    if kind == "diffeo":
        if dst_dim != src_dim:
            raise ShapeMismatch("diffeo payload must have dst_dim == src_dim")
        return identity_reference(src_dim)
    if kind == "fibration":
        return coordproj_reference(dst_dim)
    if kind == "section":
        return lift_reference(src_dim, dst_dim)
    if kind == "vectorfield":
        return zero_reference(dst_dim)
    raise ValueError(f"unknown map kind {kind!r}")


def map_kind(f: GridMap) -> str:
    """The portable kind of a map, or a ValueError for internal classes."""
    name = f.reference_name
    if name not in _KIND_FOR_REFERENCE:
        raise ValueError(
            f"maps with reference class {name!r} have no portable form")
    return _KIND_FOR_REFERENCE[name]


def _payload_bytes(f: GridMap) -> bytes:
    arr = np.moveaxis(np.asarray(f.displacement), -1, 0)
    return np.ascontiguousarray(arr, dtype="<f8").tobytes()


def write_gmap(f: GridMap, path: str, sidecar: bool = False) -> None:
    """Serialize a map. With ``sidecar=True`` the payload goes to path+'.bin'."""
    header = {
        "version": FORMAT_VERSION,
        "kind": map_kind(f),
        "reference": f.reference_name,
        "src_dim": f.src.dim,
        "dst_dim": f.dst.dim,
        "periods_src": list(f.src.periods),
        "periods_dst": list(f.dst.periods),
        "grid": list(f.grid),
        "interp": f.interp,
        "payload": "sidecar" if sidecar else "inline",
    }
    raw = _payload_bytes(f)
    text = json.dumps(header, sort_keys=True, separators=(", ", ": "))
    with open(path, "wb") as fh:
        fh.write(text.encode("utf-8"))
        fh.write(b"\n\n")
        if sidecar:
            fh.write(os.path.basename(path).encode("utf-8") + b".bin\n")
        else:
            fh.write(base64.b64encode(raw))
            fh.write(b"\n")
    if sidecar:
        with open(path + ".bin", "wb") as fh:
            fh.write(raw)


def read_gmap(path: str) -> GridMap:
    """Load a map written by :func:`write_gmap`, bit-exactly."""
    with open(path, "rb") as fh:
        blob = fh.read()
    try:
        head, payload = blob.split(b"\n\n", 1)
    except ValueError as exc:
        raise ValueError(f"{path}: missing header separator") from exc
    header = json.loads(head.decode("utf-8"))
    version = header.get("version")
    if version != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported format version {version}")
    src = TorusShape(int(header["src_dim"]), tuple(header["periods_src"]))
    dst = TorusShape(int(header["dst_dim"]), tuple(header["periods_dst"]))
    grid = tuple(int(n) for n in header["grid"])
    reference = _reference_for_kind(header["kind"], src.dim, dst.dim)
    declared = header.get("reference")
    if declared is not None and declared != reference.name(src.dim):
        raise ValueError(
            f"{path}: reference {declared!r} contradicts kind "
            f"{header['kind']!r}")
    if header.get("payload", "inline") == "sidecar":
        name = payload.strip().decode("utf-8")
        with open(os.path.join(os.path.dirname(path) or ".", name), "rb") as fh:
            raw = fh.read()
    else:
        raw = base64.b64decode(payload.strip())
    count = int(np.prod(grid)) * dst.dim
    flat = np.frombuffer(raw, dtype="<f8", count=count)
    arr = flat.reshape((dst.dim,) + grid)
    disp = np.moveaxis(arr, 0, -1)
    return GridMap(src, dst, reference, grid, disp, header["interp"])
