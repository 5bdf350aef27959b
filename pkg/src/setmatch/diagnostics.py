"""Prompt-sensitivity diagnostics.

Measures how much predictions and similarities depend on class labels versus
fine-grained descriptors: accuracy under label-only / descriptor-only /
hybrid prompts (with a strict joint-correctness criterion) and the
intra-vs-cross hybrid similarity deltas, reported in cosine x 100 units.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import EmptySuite, MissingCrossHybrids, NoHybrids
from .zeroshot import argmax_class, classify_label_only

SIM_SCALE = 100.0  # similarity statistics are reported as cosine x 100


@dataclass(frozen=True)
class HybridPrompt:
    label_class: str
    descriptor_class: str
    vector: np.ndarray

    @property
    def intra(self) -> bool:
        return self.label_class == self.descriptor_class


@dataclass(frozen=True)
class PromptSuite:
    """Label, descriptor-only, and hybrid prompt embeddings for every class."""

    label_prompts: dict
    descriptor_only: dict
    hybrids: tuple

    def __post_init__(self):
        if not self.label_prompts:
            raise EmptySuite("suite has no label prompts")
        classes = set(self.label_prompts)
        for h in self.hybrids:
            if h.label_class not in classes or h.descriptor_class not in classes:
                raise EmptySuite(
                    f"hybrid tag references unknown class "
                    f"({h.label_class!r}, {h.descriptor_class!r})"
                )
        object.__setattr__(self, "hybrids", tuple(self.hybrids))

    @property
    def classes(self) -> list:
        return sorted(self.label_prompts)


@dataclass(frozen=True)
class DiagnosticReport:
    acc_label_only: float
    acc_descriptor_only: float
    acc_hybrid_strict: float
    mean_intra_sim: float
    mean_cross_sim: float
    delta_sim: float
    delta_label_sim: float
    per_class: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return asdict(self)


def eval_prompt_types(test_embeddings, suite: PromptSuite, descriptor_agg: str = "mean"):
    """Accuracy with label-only prompts and with descriptor-only prompts."""
    if not test_embeddings:
        raise EmptySuite("empty test set")
    if descriptor_agg not in ("mean", "max"):
        raise ValueError("descriptor_agg must be 'mean' or 'max'")
    agg = np.mean if descriptor_agg == "mean" else np.max
    label_hits = 0
    desc_hits = 0
    for img, true_class in test_embeddings:
        img = np.asarray(img, dtype=np.float64)
        pred = classify_label_only(img, suite.label_prompts).predicted_class
        label_hits += pred == true_class
        scores = {
            cls: float(agg(np.asarray(vecs, dtype=np.float64) @ img))
            for cls, vecs in suite.descriptor_only.items()
        }
        desc_hits += argmax_class(scores) == true_class
    n = len(test_embeddings)
    return label_hits / n, desc_hits / n


def eval_hybrid_strict(test_embeddings, suite: PromptSuite) -> float:
    """Accuracy where the winning hybrid must match the true class on BOTH tags."""
    if not test_embeddings:
        raise EmptySuite("empty test set")
    if not suite.hybrids:
        raise NoHybrids("suite has no hybrid prompts")
    intra_classes = {h.label_class for h in suite.hybrids if h.intra}
    missing = set(suite.label_prompts) - intra_classes
    if missing:
        raise NoHybrids(f"classes without intra hybrids: {sorted(missing)}")
    mat = np.stack([np.asarray(h.vector, dtype=np.float64) for h in suite.hybrids])
    hits = 0
    for img, true_class in test_embeddings:
        sims = mat @ np.asarray(img, dtype=np.float64)
        win = suite.hybrids[int(np.argmax(sims))]
        hits += win.label_class == true_class and win.descriptor_class == true_class
    return hits / len(test_embeddings)


def similarity_deltas(test_embeddings, suite: PromptSuite):
    """Mean intra/cross hybrid similarities, their gap, and the label-prompt gap.

    All four statistics are in cosine x 100 units.  Cross similarity is taken
    over hybrids whose label matches the true class but whose descriptor was
    borrowed from another class.
    """
    if not test_embeddings:
        raise EmptySuite("empty test set")
    intra_by_class: dict = {}
    cross_by_class: dict = {}
    for h in suite.hybrids:
        (intra_by_class if h.intra else cross_by_class).setdefault(
            h.label_class, []
        ).append(np.asarray(h.vector, dtype=np.float64))
    needed = {true for _, true in test_embeddings}
    missing = needed - set(intra_by_class) | needed - set(cross_by_class)
    if missing:
        raise MissingCrossHybrids(
            f"classes lacking intra or cross hybrids: {sorted(missing)}"
        )
    classes = suite.classes
    intra_vals, cross_vals, label_deltas = [], [], []
    for img, true_class in test_embeddings:
        img = np.asarray(img, dtype=np.float64)
        intra_vals.append(
            float(np.mean(np.stack(intra_by_class[true_class]) @ img)) * SIM_SCALE
        )
        cross_vals.append(
            float(np.mean(np.stack(cross_by_class[true_class]) @ img)) * SIM_SCALE
        )
        own = float(np.asarray(suite.label_prompts[true_class], np.float64) @ img)
        others = [
            float(np.asarray(suite.label_prompts[c], np.float64) @ img)
            for c in classes
            if c != true_class
        ]
        if not others:
            raise MissingCrossHybrids("label-similarity delta needs >= 2 classes")
        label_deltas.append((own - float(np.mean(others))) * SIM_SCALE)
    mean_intra = float(np.mean(intra_vals))
    mean_cross = float(np.mean(cross_vals))
    return mean_intra, mean_cross, mean_intra - mean_cross, float(np.mean(label_deltas))


def run_diagnostics(
    test_embeddings, suite: PromptSuite, descriptor_agg: str = "mean"
) -> DiagnosticReport:
    acc_label, acc_desc = eval_prompt_types(test_embeddings, suite, descriptor_agg)
    acc_strict = eval_hybrid_strict(test_embeddings, suite)
    mean_intra, mean_cross, delta_sim, delta_label = similarity_deltas(
        test_embeddings, suite
    )
    per_class = {}
    for cls in suite.classes:
        subset = [(img, t) for img, t in test_embeddings if t == cls]
        if not subset:
            continue
        ci, cc, cd, cl = similarity_deltas(subset, suite)
        per_class[cls] = {
            "count": len(subset),
            "mean_intra_sim": ci,
            "mean_cross_sim": cc,
            "delta_sim": cd,
            "delta_label_sim": cl,
        }
    return DiagnosticReport(
        acc_label_only=acc_label,
        acc_descriptor_only=acc_desc,
        acc_hybrid_strict=acc_strict,
        mean_intra_sim=mean_intra,
        mean_cross_sim=mean_cross,
        delta_sim=delta_sim,
        delta_label_sim=delta_label,
        per_class=per_class,
    )


def suite_from_archive(archive) -> PromptSuite:
    """Assemble a PromptSuite from an archive's prompt-kind entries."""
    label_prompts = {}
    descriptor_only: dict = {}
    hybrids = []
    for rec, vec in zip(archive.records, archive.vectors):
        if rec.kind == "label_prompt":
            label_prompts[rec.class_id] = vec
        elif rec.kind == "descriptor_prompt":
            descriptor_only.setdefault(rec.class_id, []).append(vec)
        elif rec.kind == "hybrid_prompt":
            desc_class = (rec.payload or {}).get("descriptor_class", rec.class_id)
            hybrids.append(HybridPrompt(rec.class_id, str(desc_class), vec))
    return PromptSuite(
        label_prompts=label_prompts,
        descriptor_only={c: np.stack(v) for c, v in descriptor_only.items()},
        hybrids=tuple(hybrids),
    )
