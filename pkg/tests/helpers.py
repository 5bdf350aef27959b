import numpy as np

from setmatch.archive import EmbeddingArchive, ManifestRecord
from setmatch.data import DescriptorSet, FeatureSet, normalize


def unit(v) -> np.ndarray:
    return normalize(np.asarray(v, dtype=np.float64))


def random_unit_rows(rng, count, dim) -> np.ndarray:
    return np.stack([unit(rng.normal(size=dim)) for _ in range(count)])


def make_feature_set(rng, count, dim, source_id="q") -> FeatureSet:
    return FeatureSet(vectors=random_unit_rows(rng, count, dim), source_id=source_id)


def make_descriptor_set(rng, class_id, count, dim) -> DescriptorSet:
    return DescriptorSet(
        class_id=class_id,
        texts=tuple(f"{class_id} trait {i}" for i in range(count)),
        vectors=random_unit_rows(rng, count, dim),
    )


def random_archive(rng, n_entries, dim) -> EmbeddingArchive:
    kinds = ["crop", "image", "label_prompt", "descriptor_prompt", "hybrid_prompt"]
    records = []
    for i in range(n_entries):
        kind = kinds[int(rng.integers(len(kinds)))]
        if kind == "crop":
            payload = {"x0": 0.0, "y0": 0.1, "x1": 0.5, "y1": 0.9}
        else:
            payload = {"text": f"prompt {i}"}
        records.append(
            ManifestRecord(
                entry_id=f"img{i}#crop0" if kind == "crop" else f"e{i}",
                kind=kind,
                class_id=f"class_{int(rng.integers(3))}",
                payload=payload,
            )
        )
    vectors = (
        random_unit_rows(rng, n_entries, dim)
        if n_entries
        else np.zeros((0, dim), dtype=np.float32)
    )
    return EmbeddingArchive(dim=dim, records=tuple(records), vectors=vectors)


def two_class_fixture(dim=8, n_queries=4, noise=0.0, seed=7):
    """Archive with 2 orthogonal-basis classes: label/descriptor/hybrid
    prompts plus crop sets aligned to class 'a' (every query is an 'a')."""
    gen = np.random.default_rng(seed)
    basis = np.eye(dim, dtype=np.float32)
    desc = {"a": basis[0:3], "b": basis[3:6]}
    records, vectors = [], []

    def add(entry_id, kind, class_id, payload, vec):
        records.append(ManifestRecord(entry_id, kind, class_id, payload))
        vectors.append(np.asarray(vec, dtype=np.float32))

    for cls in ("a", "b"):
        add(f"label#{cls}", "label_prompt", cls,
            {"text": f"a photo of a {cls}"}, unit(desc[cls].sum(axis=0)))
        for k in range(3):
            add(f"donly#{cls}#{k}", "descriptor_prompt", cls,
                {"text": f"{cls} trait {k}"}, desc[cls][k])
            add(f"hyb#{cls}#{k}", "hybrid_prompt", cls,
                {"text": f"a photo of a {cls} which has trait {k}",
                 "descriptor_class": cls}, desc[cls][k])
        other = "b" if cls == "a" else "a"
        add(f"hybx#{cls}#{other}", "hybrid_prompt", cls,
            {"text": f"a photo of a {cls} with borrowed trait",
             "descriptor_class": other}, unit(desc[other][0] + 0.1 * basis[6]))
    for q in range(n_queries):
        full = unit(desc["a"].sum(axis=0) + noise * gen.normal(size=dim))
        add(f"img{q}", "image", "a", None, full)
        for k in range(3):
            vec = unit(desc["a"][k] + noise * gen.normal(size=dim))
            add(f"img{q}#crop{k}", "crop", "a",
                {"x0": 0.0, "y0": 0.0, "x1": 0.5, "y1": 0.5}, vec)
    return EmbeddingArchive(dim=dim, records=tuple(records),
                            vectors=np.stack(vectors))
