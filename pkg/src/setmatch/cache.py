"""Local-aware class caches, EMD affinity, dual-modality fusion, and TTA.

A cache entry is one training image's selected feature set: for every
descriptor-only prompt of the class, the training crop most similar to it.
At inference the cache-side evidence A_c = exp(-beta * sum of EMDs) is fused
with the zero-shot text term as alpha * A_c - EMD(X, D_c).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .data import FeatureSet, _as_matrix
from .errors import EmptyInput, KeyMismatch, MissingPromptSet
from .ot import Marginals, SinkhornConfig, cosine_cost, sinkhorn_emd
from .zeroshot import (
    SCORE_FUSED,
    ClassificationResult,
    argmax_class,
    class_emds,
)


@dataclass(frozen=True)
class DescriptorOnlyPromptSet:
    """Embeddings of a class's descriptor-only prompts I_c = {i_1..i_K}."""

    class_id: str
    vectors: np.ndarray = None

    def __post_init__(self):
        object.__setattr__(self, "vectors", _as_matrix(self.vectors))

    def __len__(self) -> int:
        return self.vectors.shape[0]


@dataclass
class ClassCache:
    """Per-class list of selected feature sets; entropies accompany TTA entries."""

    class_id: str
    entries: list = field(default_factory=list)
    entropies: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class FusionConfig:
    alpha: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("alpha must be nonnegative")
        if self.beta <= 0:
            raise ValueError("beta must be positive")


@dataclass(frozen=True)
class TtaConfig:
    capacity: int = 3
    admission: float = 0.5
    temperature: float = 1.0

    def __post_init__(self):
        if self.capacity < 1:
            raise ValueError("capacity must be >= 1")
        if self.admission < 0:
            raise ValueError("admission threshold must be nonnegative")
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")


def select_cache_entry(
    crop_features: FeatureSet, prompts: DescriptorOnlyPromptSet
) -> FeatureSet:
    """For each descriptor prompt, pick the most similar crop (lowest index on ties)."""
    if len(crop_features) == 0 or len(prompts) == 0:
        raise EmptyInput("need at least one crop and one prompt")
    sims = prompts.vectors.astype(np.float64) @ crop_features.vectors.T.astype(
        np.float64
    )
    picks = np.argmax(sims, axis=1)  # argmax returns the lowest index on ties
    return FeatureSet(
        vectors=crop_features.vectors[picks], source_id=crop_features.source_id
    )


def build_cache(training_set, prompts: dict) -> dict:
    """Group selected feature sets by class, in training-set order.

    training_set: iterable of (FeatureSet, class label); prompts maps each
    label to its DescriptorOnlyPromptSet.
    """
    caches: dict = {}
    for crop_features, label in training_set:
        if label not in prompts:
            raise MissingPromptSet(f"no descriptor-only prompts for class {label!r}")
        entry = select_cache_entry(crop_features, prompts[label])
        caches.setdefault(label, ClassCache(class_id=label)).entries.append(entry)
    return caches


def class_emd_sum(
    query: FeatureSet, cache: ClassCache, sinkhorn: SinkhornConfig
) -> float:
    """Sum of EMDs between the query set and every cached feature set.

    An empty cache yields +inf, which the affinity maps to zero evidence.
    """
    if len(query) == 0:
        raise EmptyInput("query feature set is empty")
    if len(cache) == 0:
        return math.inf
    total = 0.0
    for entry in cache.entries:
        # cosine_cost only touches .vectors/.dim, so a FeatureSet works as the
        # descriptor side here
        plan = sinkhorn_emd(
            cosine_cost(query, entry),
            Marginals.uniform(len(query), len(entry)),
            sinkhorn,
        )
        total += plan.achieved_cost
    return total


def affinity(emd_sum: float, beta: float) -> float:
    """Cache evidence A_c = exp(-beta * EMD_c); the +inf sentinel maps to 0."""
    if beta <= 0:
        raise ValueError("beta must be positive")
    if math.isinf(emd_sum):
        return 0.0
    return math.exp(-beta * emd_sum)


def fused_scores(
    query: FeatureSet,
    caches: dict,
    descriptor_sets: dict,
    fusion: FusionConfig,
    sinkhorn: SinkhornConfig,
) -> dict:
    if set(caches) != set(descriptor_sets):
        raise KeyMismatch("cache and descriptor-set class keys disagree")
    text_emds = class_emds(query, descriptor_sets, sinkhorn)
    scores = {}
    for cls in sorted(descriptor_sets):
        a = affinity(class_emd_sum(query, caches[cls], sinkhorn), fusion.beta)
        scores[cls] = fusion.alpha * a - text_emds[cls]
    return scores


def classify_fused(
    query: FeatureSet,
    caches: dict,
    descriptor_sets: dict,
    fusion: FusionConfig = FusionConfig(),
    sinkhorn: SinkhornConfig = SinkhornConfig(),
) -> ClassificationResult:
    """Dual-modality prediction: argmax of alpha * A_c - EMD(X, D_c)."""
    scores = fused_scores(query, caches, descriptor_sets, fusion, sinkhorn)
    return ClassificationResult(argmax_class(scores), scores, SCORE_FUSED)


def prediction_entropy(scores: dict, temperature: float = 1.0) -> float:
    """Shannon entropy of the softmax over per-class scores."""
    vals = np.asarray([scores[c] for c in sorted(scores)], dtype=np.float64)
    vals = vals / temperature
    vals -= vals.max()
    p = np.exp(vals)
    p /= p.sum()
    nz = p[p > 0]
    return float(-(nz * np.log(nz)).sum())


def empty_caches(class_ids) -> dict:
    return {cls: ClassCache(class_id=cls) for cls in class_ids}


def tta_step(
    query: FeatureSet,
    state: dict,
    prompts: dict,
    descriptor_sets: dict,
    fusion: FusionConfig = FusionConfig(),
    sinkhorn: SinkhornConfig = SinkhornConfig(),
    tta: TtaConfig = TtaConfig(),
) -> tuple:
    """One streaming adaptation step (batch size 1).

    Classifies against the current caches, then, if the prediction entropy is
    below the admission threshold, inserts a cache entry built under the
    predicted class's prompts.  Over capacity, the stored entry with the
    highest admission entropy is evicted (most-confident evidence kept).
    """
    result = classify_fused(query, state, descriptor_sets, fusion, sinkhorn)
    entropy = prediction_entropy(result.per_class_scores, tta.temperature)
    if entropy < tta.admission:
        pred = result.predicted_class
        if pred not in prompts:
            raise MissingPromptSet(f"no descriptor-only prompts for class {pred!r}")
        cache = state[pred]
        cache.entries.append(select_cache_entry(query, prompts[pred]))
        cache.entropies.append(entropy)
        if len(cache.entries) > tta.capacity:
            worst = int(np.argmax(cache.entropies))
            del cache.entries[worst]
            del cache.entropies[worst]
    return result, state
