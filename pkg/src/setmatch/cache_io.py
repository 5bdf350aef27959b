"""Save/load trained class caches through the embedding-archive format.

Each cache entry vector becomes a kind=crop record whose entry_id encodes
class and entry group: '<class>#entry<i>#k<j>'.  Selected features no longer
carry their source rects, so the stored rect is the full-image placeholder.
"""
from __future__ import annotations

import re

import numpy as np

from .archive import EmbeddingArchive, ManifestRecord
from .cache import ClassCache
from .data import FeatureSet
from .errors import EmptyInput

_ENTRY_RE = re.compile(r"^(?P<cls>.*)#entry(?P<entry>\d+)#k(?P<k>\d+)$")
_FULL_RECT = {"x0": 0.0, "y0": 0.0, "x1": 1.0, "y1": 1.0}


def caches_to_archive(caches: dict) -> EmbeddingArchive:
    records = []
    vectors = []
    dim = None
    for cls in sorted(caches):
        for i, entry in enumerate(caches[cls].entries):
            for k, vec in enumerate(entry.vectors):
                records.append(
                    ManifestRecord(
                        entry_id=f"{cls}#entry{i:04d}#k{k:03d}",
                        kind="crop",
                        class_id=cls,
                        payload=dict(_FULL_RECT),
                    )
                )
                vectors.append(vec)
                dim = len(vec)
    if dim is None:
        raise EmptyInput("no cache entries to serialize")
    return EmbeddingArchive(dim=dim, records=tuple(records), vectors=np.stack(vectors))


def caches_from_archive(archive: EmbeddingArchive) -> dict:
    grouped: dict = {}
    for rec, vec in zip(archive.records, archive.vectors):
        if rec.kind != "crop":
            continue
        m = _ENTRY_RE.match(rec.entry_id)
        if not m:
            raise EmptyInput(f"not a cache archive entry id: {rec.entry_id!r}")
        cls = rec.class_id or m.group("cls")
        grouped.setdefault(cls, {}).setdefault(int(m.group("entry")), []).append(
            (int(m.group("k")), vec)
        )
    caches = {}
    for cls, entries in grouped.items():
        cache = ClassCache(class_id=cls)
        for i in sorted(entries):
            members = [vec for _, vec in sorted(entries[i], key=lambda kv: kv[0])]
            cache.entries.append(
                FeatureSet(vectors=np.stack(members), source_id=f"{cls}#entry{i:04d}")
            )
        caches[cls] = cache
    return caches
