"""Binary parameter checkpoints.

Layout, all integers little-endian::

    b"ITHP1"
    uint64 header length, then that many bytes of UTF-8 JSON
        {"config": {...}, "arrays": [{"name": ..., "shape": [...]}, ...], "extra": {...}}
    for each array in header order:
        uint64 element count, then that many float64 values (row-major)
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .model import ITHPConfig

MAGIC = b"ITHP1"


class CheckpointError(ValueError):
    pass


def dumps(cfg: ITHPConfig, params: dict[str, np.ndarray], extra: dict | None = None) -> bytes:
    header = {
        "config": cfg.to_dict(),
        "arrays": [{"name": k, "shape": list(v.shape)} for k, v in params.items()],
        "extra": extra or {},
    }
    head = json.dumps(header, sort_keys=True).encode("utf-8")
    chunks = [MAGIC, struct.pack("<Q", len(head)), head]
    for value in params.values():
        flat = np.ascontiguousarray(value, dtype="<f8").ravel()
        chunks.append(struct.pack("<Q", flat.size))
        chunks.append(flat.tobytes())
    return b"".join(chunks)


def loads(blob: bytes) -> tuple[ITHPConfig, dict[str, np.ndarray], dict]:
    if not blob.startswith(MAGIC):
        raise CheckpointError("not an ITHP1 checkpoint (bad magic)")
    try:
        return _parse(blob, len(MAGIC))
    except (struct.error, KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, CheckpointError):
            raise
        raise CheckpointError(f"corrupt checkpoint: {exc!r}") from exc


def _parse(blob: bytes, pos: int):
    (head_len,) = struct.unpack_from("<Q", blob, pos)
    pos += 8
    if pos + head_len > len(blob):
        raise CheckpointError("truncated header")
    header = json.loads(blob[pos : pos + head_len].decode("utf-8"))
    pos += head_len
    params = {}
    for entry in header["arrays"]:
        (count,) = struct.unpack_from("<Q", blob, pos)
        pos += 8
        shape = tuple(entry["shape"])
        if count != int(np.prod(shape, dtype=np.int64)):
            raise CheckpointError(f"array {entry['name']}: {count} values for shape {shape}")
        if pos + 8 * count > len(blob):
            raise CheckpointError(f"array {entry['name']}: truncated data")
        data = np.frombuffer(blob, dtype="<f8", count=count, offset=pos)
        pos += 8 * count
        params[entry["name"]] = data.reshape(shape).astype(np.float64)
    if pos != len(blob):
        raise CheckpointError(f"{len(blob) - pos} trailing bytes after last array")
    return ITHPConfig.from_dict(header["config"]), params, header.get("extra", {})


def save(path, cfg: ITHPConfig, params: dict[str, np.ndarray], extra: dict | None = None) -> None:
    Path(path).write_bytes(dumps(cfg, params, extra))


def load(path) -> tuple[ITHPConfig, dict[str, np.ndarray], dict]:
    return loads(Path(path).read_bytes())
