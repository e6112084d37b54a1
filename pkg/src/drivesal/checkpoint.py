"""Checkpoint files.

Layout: an 8-byte little-endian header length ``n``, ``n`` bytes of UTF-8
JSON, then every tensor as little-endian float64 in header order. The header
lists names and shapes plus free-form metadata (seed, config, kind). Output
is byte-identical for identical inputs.
"""

import json
import struct
from pathlib import Path

import numpy as np

from .errors import FormatError

FORMAT = "drivesal-checkpoint/1"


def save_checkpoint(path, params, meta=None):
    names = list(params)
    arrays = [np.asarray(getattr(params[n], "data", params[n]), dtype="<f8") for n in names]
    header = {
        "format": FORMAT,
        "tensors": [{"name": n, "shape": list(a.shape)} for n, a in zip(names, arrays)],
        "meta": meta or {},
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for a in arrays:
            fh.write(np.ascontiguousarray(a).tobytes())


def load_checkpoint(path):
    """Return ``(params, meta)`` with params an ordered ``{name: ndarray}``."""
    data = Path(path).read_bytes()
    if len(data) < 8:
        raise FormatError(f"{path}: truncated checkpoint")
    (n,) = struct.unpack("<Q", data[:8])
    try:
        header = json.loads(data[8:8 + n].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError):
        raise FormatError(f"{path}: bad checkpoint header") from None
    if header.get("format") != FORMAT:
        raise FormatError(f"{path}: not a {FORMAT} file")
    params = {}
    pos = 8 + n
    for t in header["tensors"]:
        count = int(np.prod(t["shape"], dtype=np.int64))
        end = pos + 8 * count
        if end > len(data):
            raise FormatError(f"{path}: data for {t['name']} is truncated")
        params[t["name"]] = np.frombuffer(data[pos:end], dtype="<f8").astype(np.float64).reshape(t["shape"])
        pos = end
    if pos != len(data):
        raise FormatError(f"{path}: {len(data) - pos} trailing bytes")
    return params, header["meta"]
