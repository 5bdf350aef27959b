"""Embedding backbones.

The default backbone is a small deterministic stand-in: fixed random
projections of resized pixels for images and of hashed character
trigrams for text. It needs no weights on disk, runs anywhere, and is
bit-reproducible, which is what the archive contract requires. A real
vision-language encoder can be swapped in behind the same interface.
"""
from __future__ import annotations

import hashlib
from typing import Protocol

import numpy as np
from PIL import Image

from .errors import ModelLoadFailure

_TEXT_BUCKETS = 512


def unit_f32(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    norm = float(np.linalg.norm(v))
    if norm == 0.0 or not np.isfinite(norm):
        raise ValueError("cannot normalize a zero or non-finite vector")
    return (v / norm).astype(np.float32)


class Embedder(Protocol):
    dim: int
    input_resolution: int

    def embed_image(self, pixels: np.ndarray) -> np.ndarray: ...

    def embed_text(self, text: str) -> np.ndarray: ...


class ToyBackbone:
    """Seeded projection backbone with a shared image/text space."""

    def __init__(self, dim: int = 64, seed: int = 0,
                 input_resolution: int = 32):
        self.dim = dim
        self.input_resolution = input_resolution
        rng = np.random.default_rng(np.random.Philox(key=seed))
        n_pix = input_resolution * input_resolution * 3
        self._image_proj = rng.standard_normal((dim, n_pix)) / np.sqrt(n_pix)
        self._text_proj = rng.standard_normal(
            (dim, _TEXT_BUCKETS)
        ) / np.sqrt(_TEXT_BUCKETS)

    def embed_image(self, pixels: np.ndarray) -> np.ndarray:
        img = Image.fromarray(np.asarray(pixels, dtype=np.uint8), mode="RGB")
        size = (self.input_resolution, self.input_resolution)
        resized = img.resize(size, resample=Image.Resampling.BICUBIC)
        flat = np.asarray(resized, dtype=np.float64).reshape(-1) / 255.0
        return unit_f32(self._image_proj @ flat)

    def embed_text(self, text: str) -> np.ndarray:
        counts = np.zeros(_TEXT_BUCKETS, dtype=np.float64)
        padded = f"  {text.lower()} "
        for i in range(len(padded) - 2):
            digest = hashlib.sha256(padded[i:i + 3].encode("utf-8")).digest()
            counts[int.from_bytes(digest[:4], "little") % _TEXT_BUCKETS] += 1.0
        return unit_f32(self._text_proj @ counts)


def load_backbone(model_id: str) -> Embedder:
    """Resolve a model id like 'toy-64' to an embedder."""
    if model_id.startswith("toy-"):
        try:
            dim = int(model_id.removeprefix("toy-"))
        except ValueError:
            raise ModelLoadFailure(f"bad toy model id: {model_id!r}") from None
        if dim < 1:
            raise ModelLoadFailure(f"bad toy dimension in {model_id!r}")
        return ToyBackbone(dim=dim)
    raise ModelLoadFailure(f"unknown model id: {model_id!r}")
