"""Seeded, machine-independent generation of random-crop rectangles.

Crop geometry is the only source of randomness in the engine, so it is kept
deterministic: a counter-based Philox generator keyed by
``sha256(image_id) XOR seed`` produces identical plans on every platform.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

_MASK64 = (1 << 64) - 1
_MAX_ASPECT_RESAMPLES = 32

DEFAULT_CROP_COUNT = 9
DEFAULT_MIN_SCALE = 0.10
DEFAULT_MAX_SCALE = 0.75
DEFAULT_ASPECT_RANGE = (0.75, 4.0 / 3.0)


@dataclass(frozen=True)
class CropRect:
    """Axis-aligned rectangle in relative [0, 1] image coordinates."""

    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self):
        if not (0.0 <= self.x0 < self.x1 <= 1.0 and 0.0 <= self.y0 < self.y1 <= 1.0):
            raise ValueError(f"rect not contained in unit square: {self}")

    @property
    def area(self) -> float:
        return (self.x1 - self.x0) * (self.y1 - self.y0)

    def as_dict(self) -> dict:
        return {"x0": self.x0, "y0": self.y0, "x1": self.x1, "y1": self.y1}

    @classmethod
    def from_dict(cls, d: dict) -> "CropRect":
        return cls(float(d["x0"]), float(d["y0"]), float(d["x1"]), float(d["y1"]))


@dataclass(frozen=True)
class CropPlan:
    image_id: str
    seed: int
    rects: tuple = field(default_factory=tuple)

    def as_dict(self) -> dict:
        return {
            "image_id": self.image_id,
            "seed": self.seed,
            "rects": [r.as_dict() for r in self.rects],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CropPlan":
        return cls(
            image_id=str(d["image_id"]),
            seed=int(d["seed"]),
            rects=tuple(CropRect.from_dict(r) for r in d["rects"]),
        )


def _rng_for(image_id: str, seed: int) -> np.random.Generator:
    digest = hashlib.sha256(image_id.encode("utf-8")).digest()
    key = (int.from_bytes(digest[:8], "little") ^ seed) & _MASK64
    return np.random.Generator(np.random.Philox(key=key))


def generate_crop_plan(
    image_id: str,
    seed: int,
    count: int = DEFAULT_CROP_COUNT,
    min_scale: float = DEFAULT_MIN_SCALE,
    max_scale: float = DEFAULT_MAX_SCALE,
    aspect_range: tuple = DEFAULT_ASPECT_RANGE,
    include_full_image: bool = False,
) -> CropPlan:
    """Sample ``count`` crop rectangles for one image.

    Area is uniform in [min_scale, max_scale], aspect (width/height) is
    log-uniform in ``aspect_range``, position is uniform among offsets that
    keep the rect inside the unit square.  If no aspect in range fits at the
    drawn area, the aspect is resampled up to 32 times and then falls back
    to a square crop of that area.
    """
    if not (0.0 < min_scale <= max_scale <= 1.0):
        raise ValueError("require 0 < min_scale <= max_scale <= 1")
    if count < 1:
        raise ValueError("count must be >= 1")
    a_lo, a_hi = aspect_range
    if not (0.0 < a_lo <= a_hi):
        raise ValueError("aspect bounds must be positive and ordered")

    rng = _rng_for(image_id, seed)
    rects = []
    if include_full_image:
        rects.append(CropRect(0.0, 0.0, 1.0, 1.0))
    for _ in range(count):
        area = rng.uniform(min_scale, max_scale)
        w = h = math.sqrt(area)  # fallback: square crop of the drawn area
        for _ in range(_MAX_ASPECT_RESAMPLES):
            aspect = math.exp(rng.uniform(math.log(a_lo), math.log(a_hi)))
            cand_w = math.sqrt(area * aspect)
            cand_h = math.sqrt(area / aspect)
            if cand_w <= 1.0 and cand_h <= 1.0:
                w, h = cand_w, cand_h
                break
        x0 = rng.uniform(0.0, 1.0 - w) if w < 1.0 else 0.0
        y0 = rng.uniform(0.0, 1.0 - h) if h < 1.0 else 0.0
        rects.append(CropRect(x0, y0, min(x0 + w, 1.0), min(y0 + h, 1.0)))
    return CropPlan(image_id=image_id, seed=seed, rects=tuple(rects))


def write_plans(plans, path) -> None:
    with open(path, "w", encoding="utf-8") as fp:
        json.dump([p.as_dict() for p in plans], fp, indent=1)
        fp.write("\n")


def read_plans(path) -> list:
    with open(path, "r", encoding="utf-8") as fp:
        raw = json.load(fp)
    return [CropPlan.from_dict(d) for d in raw]
