"""Minimal EMBA archive writer.

Byte layout (little-endian):
  bytes 0-3   magic "EMBA"
  bytes 4-5   version (u16) = 1
  bytes 6-9   dim (u32)
  bytes 10-17 entry count (u64)
  byte  18    dtype tag (u8), 0 = float32
  bytes 19-26 manifest byte length (u64)
  then UTF-8 JSON manifest: array of {entry_id, kind, class_id, payload}
  then entry_count x dim float32 values, row-major, in manifest order.

This is a producer-side implementation of the documented format; the
classifier package owns the reference reader.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

MAGIC = b"EMBA"
VERSION = 1
DTYPE_FLOAT32 = 0
_HEADER = struct.Struct("<4sHIQBQ")

KINDS = ("crop", "image", "label_prompt", "descriptor_prompt", "hybrid_prompt")


@dataclass(frozen=True)
class Entry:
    entry_id: str
    kind: str
    class_id: str
    vector: np.ndarray
    payload: dict | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown entry kind {self.kind!r}")


def write_entries(entries: list[Entry], dim: int, path) -> int:
    """Write entries in order; returns bytes written."""
    manifest = json.dumps(
        [
            {
                "entry_id": e.entry_id,
                "kind": e.kind,
                "class_id": e.class_id,
                "payload": e.payload,
            }
            for e in entries
        ],
        ensure_ascii=False,
    ).encode("utf-8")
    header = _HEADER.pack(
        MAGIC, VERSION, dim, len(entries), DTYPE_FLOAT32, len(manifest)
    )
    if entries:
        stack = np.stack([e.vector for e in entries]).astype("<f4")
        if stack.shape != (len(entries), dim):
            raise ValueError("entry vectors disagree with declared dim")
    else:
        stack = np.zeros((0, dim), dtype="<f4")
    payload = np.ascontiguousarray(stack).tobytes()
    with open(path, "wb") as fp:
        fp.write(header)
        fp.write(manifest)
        fp.write(payload)
    return len(header) + len(manifest) + len(payload)
