"""Prompt text construction.

All templates are fixed strings so manifest records reconstruct exactly
from (template, class, descriptor).
"""
from __future__ import annotations

import numpy as np

LABEL_TEMPLATE = "a photo of a {cls}"
COMBINED_TEMPLATE = "a photo of a {cls} which has {descriptor}"
QUESTION_TEMPLATE = (
    "What are useful features for distinguishing a {cls} in a photo?"
)


def label_prompt_text(class_id: str) -> str:
    return LABEL_TEMPLATE.format(cls=class_id)


def combined_prompt_text(class_id: str, descriptor: str) -> str:
    return COMBINED_TEMPLATE.format(cls=class_id, descriptor=descriptor)


def descriptor_question(class_id: str) -> str:
    """Question to hand to an external annotator when authoring a
    descriptor file. No model is called here."""
    return QUESTION_TEMPLATE.format(cls=class_id)


def cross_pairs(classes: list[str], seed: int, donors_per_class: int = 5):
    """Seeded (class, donor) pairs for cross hybrid prompts.

    Each class borrows descriptors from up to `donors_per_class` other
    classes, chosen deterministically from the seed.
    """
    rng = np.random.default_rng(np.random.Philox(key=seed))
    pairs = []
    for cls in classes:
        others = [c for c in classes if c != cls]
        take = min(donors_per_class, len(others))
        picks = rng.choice(len(others), size=take, replace=False)
        pairs.extend((cls, others[int(i)]) for i in sorted(picks))
    return pairs
