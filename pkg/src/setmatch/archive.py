"""The EMBA embedding-archive file format.

Layout (all little-endian):
  bytes 0-3   magic "EMBA"
  bytes 4-5   version (u16) = 1
  bytes 6-9   dim (u32)
  bytes 10-17 entry count (u64)
  byte  18    dtype tag (u8), 0 = float32
  bytes 19-26 manifest byte length (u64)
  then UTF-8 JSON manifest: array of {entry_id, kind, class_id, payload}
  then entry_count x dim float32 values, row-major, in manifest order.

Producers store vectors already normalized; the loader verifies norms
(warning by default, hard error with strict_norm=True) instead of fixing
them, so payload corruption stays detectable.
"""
from __future__ import annotations

import io
import json
import struct
import warnings
from dataclasses import dataclass, field

import numpy as np

from .crops import CropRect
from .data import DescriptorSet, FeatureSet
from .errors import (
    BadMagic,
    DimMismatch,
    IoFailure,
    NormViolation,
    NormViolationWarning,
    TruncatedPayload,
    UnsupportedVersion,
)

MAGIC = b"EMBA"
VERSION = 1
DTYPE_FLOAT32 = 0
_HEADER = struct.Struct("<4sHIQBQ")

KINDS = ("crop", "image", "label_prompt", "descriptor_prompt", "hybrid_prompt")
PROMPT_KINDS = ("label_prompt", "descriptor_prompt", "hybrid_prompt")

NORM_CHECK_ATOL = 1e-3


@dataclass(frozen=True)
class ManifestRecord:
    entry_id: str
    kind: str
    class_id: str = ""
    payload: dict | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown entry kind {self.kind!r}")

    def as_dict(self) -> dict:
        return {
            "entry_id": self.entry_id,
            "kind": self.kind,
            "class_id": self.class_id,
            "payload": self.payload,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ManifestRecord":
        return cls(
            entry_id=str(d["entry_id"]),
            kind=str(d["kind"]),
            class_id=str(d.get("class_id") or ""),
            payload=d.get("payload"),
        )


@dataclass(frozen=True)
class EmbeddingArchive:
    dim: int
    records: tuple = field(default_factory=tuple)
    vectors: np.ndarray = None

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be positive")
        records = tuple(self.records)
        object.__setattr__(self, "records", records)
        vecs = self.vectors
        if vecs is None:
            vecs = np.zeros((0, self.dim), dtype=np.float32)
        vecs = np.asarray(vecs, dtype=np.float32)
        if vecs.ndim != 2 or vecs.shape[1] != self.dim:
            raise DimMismatch("vector stack shape must be (entries, dim)")
        if vecs.shape[0] != len(records):
            raise DimMismatch("manifest length must equal vector count")
        object.__setattr__(self, "vectors", vecs)

    def __len__(self) -> int:
        return len(self.records)


def write_archive(archive: EmbeddingArchive, destination) -> int:
    """Serialize an archive to a binary file object; returns bytes written."""
    manifest = json.dumps(
        [r.as_dict() for r in archive.records], ensure_ascii=False
    ).encode("utf-8")
    header = _HEADER.pack(
        MAGIC, VERSION, archive.dim, len(archive.records), DTYPE_FLOAT32, len(manifest)
    )
    payload = np.ascontiguousarray(archive.vectors, dtype="<f4").tobytes()
    try:
        destination.write(header)
        destination.write(manifest)
        destination.write(payload)
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    return len(header) + len(manifest) + len(payload)


def write_archive_file(archive: EmbeddingArchive, path) -> int:
    with open(path, "wb") as fp:
        return write_archive(archive, fp)


def _read_exact(source, n: int, what: str) -> bytes:
    data = source.read(n)
    if data is None or len(data) != n:
        raise TruncatedPayload(f"archive truncated while reading {what}")
    return data


def read_archive(source, strict_norm: bool = False) -> EmbeddingArchive:
    """Parse an archive from a binary stream, verifying all invariants."""
    raw = _read_exact(source, _HEADER.size, "header")
    magic, version, dim, count, dtype, manifest_len = _HEADER.unpack(raw)
    if magic != MAGIC:
        raise BadMagic(f"expected {MAGIC!r}, found {magic!r}")
    if version != VERSION:
        raise UnsupportedVersion(f"unsupported archive version {version}")
    if dtype != DTYPE_FLOAT32:
        raise UnsupportedVersion(f"unsupported dtype tag {dtype}")
    if dim < 1:
        raise TruncatedPayload("header declares dim < 1")
    manifest_raw = _read_exact(source, manifest_len, "manifest")
    try:
        manifest = json.loads(manifest_raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise TruncatedPayload(f"bad manifest JSON: {exc}") from exc
    if not isinstance(manifest, list) or len(manifest) != count:
        raise TruncatedPayload(
            f"header declares {count} entries, manifest has "
            f"{len(manifest) if isinstance(manifest, list) else 'non-list'}"
        )
    records = tuple(ManifestRecord.from_dict(d) for d in manifest)
    payload = _read_exact(source, count * dim * 4, "vector payload")
    vectors = np.frombuffer(payload, dtype="<f4").reshape(count, dim).copy()
    if count:
        norms = np.linalg.norm(vectors.astype(np.float64), axis=1)
        bad = np.abs(norms - 1.0) > NORM_CHECK_ATOL
        if np.any(bad):
            msg = (
                f"{int(bad.sum())} of {count} vectors violate unit norm "
                f"(worst |norm-1| = {float(np.max(np.abs(norms - 1.0))):.3g})"
            )
            if strict_norm:
                raise NormViolation(msg)
            warnings.warn(msg, NormViolationWarning)
    return EmbeddingArchive(dim=dim, records=records, vectors=vectors)


def read_archive_file(path, strict_norm: bool = False) -> EmbeddingArchive:
    with open(path, "rb") as fp:
        return read_archive(fp, strict_norm=strict_norm)


def roundtrip_equal(a: EmbeddingArchive, b: EmbeddingArchive) -> bool:
    return (
        a.dim == b.dim
        and a.records == b.records
        and np.array_equal(a.vectors, b.vectors)
    )


# --- extraction helpers: turn manifest records into classifier inputs ---

def group_id(entry_id: str) -> str:
    """Image/group id of a crop entry; convention: '<group>#<suffix>'."""
    return entry_id.split("#", 1)[0]


def label_embeddings(archive: EmbeddingArchive) -> dict:
    out = {}
    for rec, vec in zip(archive.records, archive.vectors):
        if rec.kind == "label_prompt":
            out[rec.class_id] = vec
    return out


def _prompt_text(rec: ManifestRecord) -> str:
    if isinstance(rec.payload, dict) and "text" in rec.payload:
        return str(rec.payload["text"])
    return rec.entry_id


def descriptor_sets(archive: EmbeddingArchive, source: str = "combined") -> dict:
    """Per-class DescriptorSets from prompt entries.

    source='combined' uses hybrid prompts whose descriptor source is the
    class itself (the Eq.-2-style combined prompts); source='descriptor'
    uses the bare descriptor-only prompts.
    """
    if source not in ("combined", "descriptor"):
        raise ValueError("source must be 'combined' or 'descriptor'")
    pairs: dict = {}
    for rec, vec in zip(archive.records, archive.vectors):
        if source == "combined":
            if rec.kind != "hybrid_prompt":
                continue
            desc_class = (rec.payload or {}).get("descriptor_class", rec.class_id)
            if desc_class != rec.class_id:
                continue
        elif rec.kind != "descriptor_prompt":
            continue
        pairs.setdefault(rec.class_id, []).append((_prompt_text(rec), vec))
    return {
        cls: DescriptorSet.from_pairs(cls, items) for cls, items in pairs.items()
    }


def feature_sets(archive: EmbeddingArchive) -> list:
    """Group kind=crop entries by image id into (FeatureSet, class_id) pairs.

    Groups appear in first-seen manifest order; class_id is the ground-truth
    label carried on the crop records ('' when absent).
    """
    groups: dict = {}
    order = []
    for rec, vec in zip(archive.records, archive.vectors):
        if rec.kind != "crop":
            continue
        gid = group_id(rec.entry_id)
        if gid not in groups:
            groups[gid] = {"vecs": [], "rects": [], "class_id": rec.class_id}
            order.append(gid)
        rect = None
        if isinstance(rec.payload, dict) and "x0" in rec.payload:
            rect = CropRect.from_dict(rec.payload)
        groups[gid]["vecs"].append(vec)
        groups[gid]["rects"].append(rect)
    out = []
    for gid in order:
        g = groups[gid]
        rects = None if any(r is None for r in g["rects"]) else tuple(g["rects"])
        fs = FeatureSet(vectors=np.stack(g["vecs"]), source_id=gid, crop_rects=rects)
        out.append((fs, g["class_id"]))
    return out


def image_queries(archive: EmbeddingArchive) -> list:
    """kind=image entries as (entry_id, class_id, vector) in manifest order."""
    return [
        (rec.entry_id, rec.class_id, vec)
        for rec, vec in zip(archive.records, archive.vectors)
        if rec.kind == "image"
    ]
