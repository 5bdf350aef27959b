"""Zero-shot classifiers: label-only, descriptor-mean, and set-matching EMD."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import DescriptorSet, FeatureSet
from .errors import EmptyClassList, EmptyDescriptorSet
from .ot import Marginals, SinkhornConfig, cosine_cost, sinkhorn_emd

SCORE_COSINE = "cosine"
SCORE_MEAN_COSINE = "mean_cosine"
SCORE_NEG_EMD = "neg_emd"
SCORE_FUSED = "fused"


@dataclass(frozen=True)
class ClassificationResult:
    predicted_class: str
    per_class_scores: dict
    score_kind: str


def argmax_class(scores: dict) -> str:
    """Highest-scoring class; exact ties go to the lexicographically first id."""
    if not scores:
        raise EmptyClassList("no candidate classes")
    best = None
    best_score = -np.inf
    for cls in sorted(scores):
        s = scores[cls]
        if best is None or s > best_score:
            best, best_score = cls, s
    return best


def classify_label_only(image_embedding, label_embeddings: dict) -> ClassificationResult:
    """Nearest label prompt by cosine similarity."""
    if not label_embeddings:
        raise EmptyClassList("no label embeddings supplied")
    img = np.asarray(image_embedding, dtype=np.float64)
    scores = {
        cls: float(img @ np.asarray(vec, dtype=np.float64))
        for cls, vec in label_embeddings.items()
    }
    return ClassificationResult(argmax_class(scores), scores, SCORE_COSINE)


def classify_descriptor_mean(image_embedding, descriptor_sets: dict) -> ClassificationResult:
    """Mean cosine similarity to each class's combined-prompt embeddings.

    The supplied embeddings must already encode the combined
    'a photo of {class} which has {descriptor}' prompts; no text is built here.
    """
    if not descriptor_sets:
        raise EmptyClassList("no descriptor sets supplied")
    img = np.asarray(image_embedding, dtype=np.float64)
    scores = {}
    for cls, ds in descriptor_sets.items():
        if len(ds) == 0:
            raise EmptyDescriptorSet(f"class {cls!r} has no descriptors")
        scores[cls] = float(np.mean(ds.vectors.astype(np.float64) @ img))
    return ClassificationResult(argmax_class(scores), scores, SCORE_MEAN_COSINE)


def class_emds(
    query: FeatureSet, descriptor_sets: dict, sinkhorn: SinkhornConfig
) -> dict:
    """Per-class EMD between the query's crop set and each descriptor set."""
    if not descriptor_sets:
        raise EmptyClassList("no descriptor sets supplied")
    out = {}
    for cls in sorted(descriptor_sets):
        ds = descriptor_sets[cls]
        plan = sinkhorn_emd(
            cosine_cost(query, ds), Marginals.uniform(len(query), len(ds)), sinkhorn
        )
        out[cls] = plan.achieved_cost
    return out


def classify_dnd(
    query: FeatureSet,
    descriptor_sets: dict,
    sinkhorn: SinkhornConfig = SinkhornConfig(),
) -> ClassificationResult:
    """Set-matching prediction: the class whose descriptor set is nearest in EMD."""
    emds = class_emds(query, descriptor_sets, sinkhorn)
    scores = {cls: -v for cls, v in emds.items()}
    return ClassificationResult(argmax_class(scores), scores, SCORE_NEG_EMD)
