"""Domain types for embeddings and embedding sets.

All vectors live in one shared image/text space and are stored unit-norm as
float32, so cosine similarity is a plain dot product everywhere downstream.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimMismatch, EmptyInput, ZeroVector

UNIT_NORM_ATOL = 1e-4


def normalize(values) -> np.ndarray:
    """Scale a raw vector to unit L2 norm (float32, direction preserved)."""
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise ZeroVector("expected a non-empty 1-D vector")
    if not np.all(np.isfinite(v)):
        raise ZeroVector("vector has non-finite entries")
    norm = np.linalg.norm(v)
    if norm == 0.0:
        raise ZeroVector("all-zero vector cannot be normalized")
    return (v / norm).astype(np.float32)


def check_unit(matrix: np.ndarray, atol: float = UNIT_NORM_ATOL) -> bool:
    norms = np.linalg.norm(np.asarray(matrix, dtype=np.float64), axis=-1)
    return bool(np.all(np.abs(norms - 1.0) <= atol))


def _as_matrix(vectors) -> np.ndarray:
    m = np.asarray(vectors, dtype=np.float32)
    if m.ndim == 1:
        m = m[None, :]
    if m.ndim != 2 or m.shape[0] == 0 or m.shape[1] == 0:
        raise EmptyInput("expected a non-empty 2-D stack of vectors")
    if not np.all(np.isfinite(m)):
        raise ZeroVector("non-finite entries in vector stack")
    return m


@dataclass(frozen=True)
class FeatureSet:
    """Ordered crop embeddings of one image: X = {v_1..v_M} as an (M, dim) stack."""

    vectors: np.ndarray
    source_id: str = ""
    crop_rects: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "vectors", _as_matrix(self.vectors))
        if self.crop_rects is not None:
            rects = tuple(self.crop_rects)
            if len(rects) != len(self.vectors):
                raise DimMismatch("crop_rects length must match member count")
            object.__setattr__(self, "crop_rects", rects)

    def __len__(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


@dataclass(frozen=True)
class DescriptorSet:
    """Per-class descriptor embeddings D_c with their source texts."""

    class_id: str
    texts: tuple = field(default_factory=tuple)
    vectors: np.ndarray = None

    def __post_init__(self):
        texts = tuple(self.texts)
        if len(texts) != len(set(texts)):
            raise ValueError(f"duplicate descriptor texts for class {self.class_id!r}")
        object.__setattr__(self, "texts", texts)
        object.__setattr__(self, "vectors", _as_matrix(self.vectors))
        if len(texts) != len(self.vectors):
            raise DimMismatch("texts and embeddings must have equal length")

    @classmethod
    def from_pairs(cls, class_id: str, pairs) -> "DescriptorSet":
        """Build a set from (text, vector) pairs, dropping duplicate texts."""
        seen, texts, vecs = set(), [], []
        for text, vec in pairs:
            if text in seen:
                continue
            seen.add(text)
            texts.append(text)
            vecs.append(np.asarray(vec, dtype=np.float32))
        if not texts:
            raise EmptyInput(f"no descriptors for class {class_id!r}")
        return cls(class_id=class_id, texts=tuple(texts), vectors=np.stack(vecs))

    def __len__(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]
