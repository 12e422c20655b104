"""Binary parameter checkpoints.

Layout::

    8 bytes   magic b"JCEMCKPT"
    8 bytes   header length N, unsigned little-endian
    N bytes   UTF-8 JSON header (sorted keys): format_version, seed, meta
              (architecture hyperparameters etc.) and a tensor index
              [{name, shape, offset, count}] with offsets in float64 units
    rest      every tensor's values as little-endian float64, in index order
              (sorted by parameter path), C order

Reading and writing are bit-exact.
"""

from __future__ import annotations

import json
import os
import struct
from pathlib import Path
from typing import Any

import numpy as np

from .layers import Parameters

MAGIC = b"JCEMCKPT"
FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


def to_bytes(params: Parameters, meta: dict[str, Any]) -> bytes:
    index = []
    chunks = []
    offset = 0
    for name, t in params.items():
        count = int(t.size)
        index.append({"name": name, "shape": list(t.shape), "offset": offset, "count": count})
        chunks.append(np.ascontiguousarray(t.data, dtype="<f8").tobytes())
        offset += count
    header = {"format_version": FORMAT_VERSION, "seed": params.seed, "meta": meta, "tensors": index}
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return MAGIC + struct.pack("<Q", len(blob)) + blob + b"".join(chunks)


def from_bytes(raw: bytes) -> tuple[Parameters, dict[str, Any]]:
    if raw[:8] != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    (n,) = struct.unpack("<Q", raw[8:16])
    header = json.loads(raw[16:16 + n].decode("utf-8"))
    if header.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {header.get('format_version')}")
    payload = np.frombuffer(raw, dtype="<f8", offset=16 + n)
    params = Parameters(seed=header["seed"])
    for entry in header["tensors"]:
        start, count = entry["offset"], entry["count"]
        if start + count > payload.size:
            raise CheckpointError(f"truncated checkpoint at tensor {entry['name']}")
        values = payload[start:start + count].astype(np.float64).reshape(entry["shape"])
        params.set(entry["name"], values)
    return params, header["meta"]


def save(path: str | os.PathLike, params: Parameters, meta: dict[str, Any]) -> None:
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(to_bytes(params, meta))
    os.replace(tmp, path)


def load(path: str | os.PathLike) -> tuple[Parameters, dict[str, Any]]:
    return from_bytes(Path(path).read_bytes())
