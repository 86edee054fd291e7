"""CSV tables, binary vorticity snapshots and run manifests.

CSV files are UTF-8, comma separated, with one header row and numbers in
``repr``-exact ``.17g`` form, so they are locale independent and byte
reproducible.
"""

from __future__ import annotations

import datetime as _dt
import hashlib
import json
import os
import struct
from pathlib import Path

import numpy as np

from .errors import DataFormatError, MissingInputError

SNAPSHOT_MAGIC = b"FNVS"
SNAPSHOT_VERSION = 1
_HEADER = struct.Struct("<4sIIdddQ")


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    return format(float(v), ".17g")


def write_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    return path


def read_csv(path):
    """Return ``(header, data)`` with ``data`` a float array of shape ``(rows, columns)``."""
    path = Path(path)
    if not path.exists():
        raise MissingInputError(f"missing input file: {path}")
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise DataFormatError(path, 1, "empty file")
    header = [h.strip() for h in lines[0].split(",")]
    rows = []
    for i, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != len(header):
            raise DataFormatError(path, i, f"expected {len(header)} fields, found {len(parts)}")
        try:
            rows.append([float(p) for p in parts])
        except ValueError as exc:
            raise DataFormatError(path, i, str(exc)) from None
    data = np.array(rows, dtype=np.float64).reshape(len(rows), len(header))
    if not np.all(np.isfinite(data)):
        bad = int(np.nonzero(~np.all(np.isfinite(data), axis=1))[0][0]) + 2
        raise DataFormatError(path, bad, "non-finite value")
    return header, data


def write_snapshot(path, state, nu, alpha, seed):
    """Little-endian header ``(magic, version, N, t, nu, alpha, seed)`` then complex128 half-plane coefficients."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    coeffs = np.ascontiguousarray(state.coeffs, dtype="<c16")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(SNAPSHOT_MAGIC, SNAPSHOT_VERSION, state.N, state.t, nu, alpha, int(seed)))
        fh.write(coeffs.tobytes())
    return path


def read_snapshot(path):
    """Return ``(state, meta)`` where ``meta`` holds ``nu``, ``alpha`` and ``seed``."""
    from .nse2d import VorticityState

    path = Path(path)
    if not path.exists():
        raise MissingInputError(f"missing snapshot: {path}")
    raw = path.read_bytes()
    if len(raw) < _HEADER.size:
        raise DataFormatError(path, None, "truncated header")
    magic, version, n, t, nu, alpha, seed = _HEADER.unpack_from(raw)
    if magic != SNAPSHOT_MAGIC or version != SNAPSHOT_VERSION:
        raise DataFormatError(path, None, "not a filtnoise snapshot")
    count = n * (n // 2 + 1)
    body = raw[_HEADER.size:]
    if len(body) != 16 * count:
        raise DataFormatError(path, None, f"expected {16 * count} payload bytes, found {len(body)}")
    coeffs = np.frombuffer(body, dtype="<c16").reshape(n, n // 2 + 1).astype(complex)
    return VorticityState(coeffs, n, t), {"nu": nu, "alpha": alpha, "seed": seed}


def sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def write_manifest(outdir, command, config, inputs, outputs, started):
    from . import __version__, _backend

    outdir = Path(outdir)
    rel = lambda p: os.path.relpath(p, outdir)  # noqa: E731
    doc = {
        "command": command,
        "version": __version__,
        "backend": _backend.NAME,
        "config": config,
        "started": started,
        "finished": now(),
        "inputs": {str(p): sha256(p) for p in inputs},
        "outputs": {rel(p): sha256(p) for p in sorted(map(str, outputs))},
    }
    path = outdir / "manifest.json"
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def verify_manifest(outdir):
    """Names of outputs whose digest no longer matches; empty when intact."""
    outdir = Path(outdir)
    doc = json.loads((outdir / "manifest.json").read_text(encoding="utf-8"))
    bad = []
    for name, digest in doc["outputs"].items():
        p = outdir / name
        if not p.exists() or sha256(p) != digest:
            bad.append(name)
    return bad


def now():
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def write_json(path, doc):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True, default=_json_default) + "\n", encoding="utf-8")
    return path


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(type(o).__name__)
