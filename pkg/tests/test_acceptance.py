"""Acceptance suite: one test per binding criterion, at its stated tolerance.

Run with `pytest tests/test_acceptance.py -v -s` to see one pass line per
criterion.
"""
import io
import time

import numpy as np
import pytest

from setmatch.archive import read_archive, roundtrip_equal, write_archive
from setmatch.cache import (
    ClassCache,
    DescriptorOnlyPromptSet,
    FusionConfig,
    TtaConfig,
    classify_fused,
    empty_caches,
    select_cache_entry,
    tta_step,
)
from setmatch.crops import generate_crop_plan
from setmatch.data import DescriptorSet, FeatureSet, normalize
from setmatch.diagnostics import similarity_deltas
from setmatch.errors import BadMagic, TruncatedPayload, UnsupportedVersion
from setmatch.ot import (
    Marginals,
    SinkhornConfig,
    cosine_cost,
    exact_emd,
    sinkhorn_emd,
)
from setmatch.zeroshot import classify_dnd

from helpers import make_descriptor_set, make_feature_set, random_archive, unit
from test_diagnostics import planted_suite, planted_test_set

TIGHT = SinkhornConfig(epsilon=1e-3, max_iters=500, marginal_tol=1e-6)
FAST = SinkhornConfig()


def _passed(name):
    print(f"PASS: {name}")


def test_ot_oracle_agreement():
    rng = np.random.default_rng(1)
    start = time.monotonic()
    worst = 0.0
    for _ in range(200):
        m, n = int(rng.integers(1, 5)), int(rng.integers(1, 5))
        cost = rng.uniform(0.0, 2.0, (m, n))
        marg = Marginals.uniform(m, n)
        approx = sinkhorn_emd(cost, marg, TIGHT).achieved_cost
        exact = exact_emd(cost, marg).achieved_cost
        worst = max(worst, abs(approx - exact))
    elapsed = time.monotonic() - start
    assert worst <= 5e-3, f"worst |sinkhorn - exact| = {worst:.2e}"
    assert elapsed < 10.0, f"took {elapsed:.1f}s"
    _passed(f"OT oracle agreement (worst {worst:.2e}, {elapsed:.1f}s)")


def test_marginal_feasibility():
    rng = np.random.default_rng(2)
    for _ in range(1000):
        m, n = int(rng.integers(1, 5)), int(rng.integers(1, 5))
        marg = Marginals.uniform(m, n)
        plan = sinkhorn_emd(rng.uniform(0.0, 2.0, (m, n)), marg, FAST)
        assert np.max(np.abs(plan.matrix.sum(axis=1) - marg.mu)) <= 1e-9
        assert np.max(np.abs(plan.matrix.sum(axis=0) - marg.nu)) <= 1e-9
        assert abs(plan.matrix.sum() - 1.0) <= 1e-9
        assert np.all(plan.matrix >= 0.0)
    _passed("marginal feasibility (1000 instances)")


def test_cost_shift_and_permutation_invariance():
    rng = np.random.default_rng(3)
    for _ in range(100):
        m, n = int(rng.integers(1, 5)), int(rng.integers(1, 5))
        cost = rng.uniform(0.0, 1.0, (m, n))
        marg = Marginals.uniform(m, n)
        k = float(rng.uniform(0.1, 1.0))
        base = exact_emd(cost, marg).achieved_cost
        assert abs(exact_emd(cost + k, marg).achieved_cost - base - k) <= 1e-6
        s_base = sinkhorn_emd(cost, marg, FAST).achieved_cost
        assert abs(
            sinkhorn_emd(cost + k, marg, FAST).achieved_cost - s_base - k
        ) <= 1e-6
        perm = rng.permutation(m)
        assert abs(exact_emd(cost[perm], marg).achieved_cost - base) <= 1e-6
    _passed("cost-shift equivariance and permutation invariance (100 instances)")


def test_fused_reduces_to_dnd():
    rng = np.random.default_rng(4)
    for trial in range(100):
        dsets = {
            f"c{i}": make_descriptor_set(rng, f"c{i}", 3, 8) for i in range(3)
        }
        query = make_feature_set(rng, 3, 8, f"q{trial}")
        dnd = classify_dnd(query, dsets, FAST).predicted_class
        caches = {
            c: ClassCache(c, entries=[make_feature_set(rng, 2, 8)]) for c in dsets
        }
        with_cache = classify_fused(query, caches, dsets,
                                    FusionConfig(alpha=0.0), FAST)
        assert with_cache.predicted_class == dnd
        empty = classify_fused(query, empty_caches(dsets), dsets,
                               FusionConfig(alpha=3.0), FAST)
        assert empty.predicted_class == dnd
    _passed("Eq.5/Eq.8 reduction (alpha=0 and empty caches, 100 fixtures)")


def test_synthetic_separability():
    rng = np.random.default_rng(5)
    dim = 32
    n_desc = 9
    bases = {f"class{c}": np.eye(dim, dtype=np.float32)[c * n_desc:(c + 1) * n_desc]
             for c in range(3)}
    dsets = {
        c: DescriptorSet(c, tuple(f"{c}-d{i}" for i in range(n_desc)), b)
        for c, b in bases.items()
    }
    hits = 0
    for q in range(300):
        cls = f"class{q % 3}"
        crops = []
        for k in range(9):
            target = bases[cls][int(rng.integers(n_desc))].astype(np.float64)
            while True:
                v = normalize(target + rng.normal(0.0, 0.12, dim))
                if float(v.astype(np.float64) @ target) >= 0.9:
                    break
            crops.append(v)
        query = FeatureSet(vectors=np.stack(crops), source_id=f"q{q}")
        hits += classify_dnd(query, dsets, FAST).predicted_class == cls
    assert hits == 300, f"accuracy {hits}/300"
    _passed("synthetic separability (300/300 correct)")


def test_cache_selection_oracle():
    rng = np.random.default_rng(6)
    for trial in range(500):
        h = int(rng.integers(1, 9))
        k = int(rng.integers(1, 9))
        dim = 6
        # quantized coordinates force frequent exact ties
        crops_raw = rng.integers(-2, 3, (h, dim)).astype(np.float64)
        crops_raw[np.all(crops_raw == 0, axis=1), 0] = 1.0
        prompts_raw = rng.integers(-2, 3, (k, dim)).astype(np.float64)
        prompts_raw[np.all(prompts_raw == 0, axis=1), 0] = 1.0
        crops = FeatureSet(
            vectors=np.stack([normalize(r) for r in crops_raw]),
            source_id=f"t{trial}",
        )
        prompts = DescriptorOnlyPromptSet(
            "c", np.stack([normalize(r) for r in prompts_raw])
        )
        entry = select_cache_entry(crops, prompts)
        for j in range(k):
            sims = [
                float(prompts.vectors[j].astype(np.float64)
                      @ crops.vectors[i].astype(np.float64))
                for i in range(h)
            ]
            best = sims.index(max(sims))
            assert np.array_equal(entry.vectors[j], crops.vectors[best])
    _passed("cache-selection oracle (500 instances incl. ties)")


def test_fusion_flip_point():
    e0 = np.eye(3, dtype=np.float32)[0]
    e1 = np.eye(3, dtype=np.float32)[1]
    mid = np.array([np.cos(0.3), np.sin(0.3), 0.0], dtype=np.float32)
    query = FeatureSet(vectors=mid[None, :], source_id="q")
    dsets = {
        "a": DescriptorSet("a", ("da",), e0[None, :]),
        "b": DescriptorSet("b", ("db",), e1[None, :]),
    }
    caches = {"a": ClassCache("a"), "b": ClassCache("b", entries=[query])}
    emd_a = exact_emd(
        cosine_cost(query, dsets["a"]), Marginals.uniform(1, 1)
    ).achieved_cost
    emd_b = exact_emd(
        cosine_cost(query, dsets["b"]), Marginals.uniform(1, 1)
    ).achieved_cost
    affinity_a, affinity_b = 0.0, 1.0  # empty cache vs exact self-match
    alpha_star = (emd_b - emd_a) / (affinity_b - affinity_a)

    def predict(alpha):
        return classify_fused(
            query, caches, dsets, FusionConfig(alpha=alpha), TIGHT
        ).predicted_class

    lo, hi = 0.0, 2.0
    assert predict(lo) == "a" and predict(hi) == "b"
    for _ in range(60):
        alpha = (lo + hi) / 2.0
        if predict(alpha) == "a":
            lo = alpha
        else:
            hi = alpha
    assert abs(hi - alpha_star) <= 1e-6, f"flip at {hi}, expected {alpha_star}"
    _passed(f"fusion flip-point (|{hi:.8f} - {alpha_star:.8f}| <= 1e-6)")


def test_tta_determinism_and_capacity():
    rng = np.random.default_rng(7)
    dim = 8
    basis = np.eye(dim, dtype=np.float32)
    dsets = {
        "a": DescriptorSet("a", ("a1", "a2"), basis[0:2]),
        "b": DescriptorSet("b", ("b1", "b2"), basis[2:4]),
        "c": DescriptorSet("c", ("c1", "c2"), basis[4:6]),
    }
    prompts = {
        cls: DescriptorOnlyPromptSet(cls, ds.vectors) for cls, ds in dsets.items()
    }
    offsets = {"a": 0, "b": 2, "c": 4}
    stream = []
    for i in range(200):
        cls = ["a", "b", "c"][int(rng.integers(3))]
        vecs = basis[offsets[cls]:offsets[cls] + 2] + rng.normal(
            0.0, 0.08, (2, dim)
        ).astype(np.float32)
        vecs = vecs / np.linalg.norm(vecs, axis=1, keepdims=True)
        stream.append(FeatureSet(vectors=vecs, source_id=f"s{i}"))
    tta = TtaConfig(capacity=3, admission=0.8, temperature=0.1)

    def replay(admission):
        cfg = TtaConfig(capacity=3, admission=admission, temperature=0.1)
        state = empty_caches(dsets)
        preds = []
        for fs in stream:
            res, state = tta_step(fs, state, prompts, dsets, FusionConfig(),
                                  FAST, cfg)
            preds.append(res.predicted_class)
            assert all(len(c) <= cfg.capacity for c in state.values())
        return preds, state

    preds1, state1 = replay(tta.admission)
    preds2, state2 = replay(tta.admission)
    assert preds1 == preds2
    for cls in state1:
        assert state1[cls].entropies == state2[cls].entropies
        for x, y in zip(state1[cls].entries, state2[cls].entries):
            assert np.array_equal(x.vectors, y.vectors)
    assert any(len(c) > 0 for c in state1.values()), "stream admitted nothing"
    zero_preds, zero_state = replay(0.0)
    assert all(len(c) == 0 for c in zero_state.values())
    dnd_preds = [classify_dnd(fs, dsets, FAST).predicted_class for fs in stream]
    assert zero_preds == dnd_preds
    _passed("TTA determinism, capacity bound, and zero-admission reduction")


def test_diagnostics_arithmetic():
    stats = similarity_deltas(planted_test_set(), planted_suite())
    expected = (30.0, 25.0, 5.0, 30.0)
    for got, want in zip(stats, expected):
        assert got == pytest.approx(want, abs=1e-9)
    rng = np.random.default_rng(8)
    for _ in range(25):
        from setmatch.diagnostics import HybridPrompt, PromptSuite

        classes = [f"c{i}" for i in range(3)]
        suite = PromptSuite(
            label_prompts={c: unit(rng.normal(size=6)) for c in classes},
            descriptor_only={c: unit(rng.normal(size=6))[None, :]
                             for c in classes},
            hybrids=tuple(
                HybridPrompt(c, d, unit(rng.normal(size=6)))
                for c in classes for d in classes
            ),
        )
        test = [(unit(rng.normal(size=6)), classes[int(rng.integers(3))])
                for _ in range(6)]
        mean_intra, mean_cross, delta, _ = similarity_deltas(test, suite)
        assert delta == pytest.approx(mean_intra - mean_cross, abs=1e-9)
    _passed("diagnostics arithmetic (planted fixture + delta consistency)")


def test_crop_plan_statistics():
    areas = []
    for i in range(1000):
        plan = generate_crop_plan(f"stat-{i}", seed=2024, count=1,
                                  min_scale=0.10, max_scale=0.75)
        r = plan.rects[0]
        assert 0.0 <= r.x0 < r.x1 <= 1.0 and 0.0 <= r.y0 < r.y1 <= 1.0
        assert 0.10 - 1e-9 <= r.area <= 0.75 + 1e-9
        areas.append(r.area)
    mean = float(np.mean(areas))
    assert 0.40 <= mean <= 0.45, f"mean area {mean:.4f}"
    _passed(f"crop-plan statistics (mean area {mean:.4f}, 0 violations)")


def test_archive_roundtrip_and_corruption():
    rng = np.random.default_rng(9)
    for _ in range(50):
        archive = random_archive(rng, int(rng.integers(0, 10)),
                                 int(rng.integers(1, 12)))
        buf = io.BytesIO()
        write_archive(archive, buf)
        assert roundtrip_equal(archive, read_archive(io.BytesIO(buf.getvalue())))
    data = bytearray(buf.getvalue())
    good = bytes(data)
    data[:4] = b"XXXX"
    with pytest.raises(BadMagic):
        read_archive(io.BytesIO(bytes(data)))
    data[:4] = b"EMBA"
    data[4] = 9
    with pytest.raises(UnsupportedVersion):
        read_archive(io.BytesIO(bytes(data)))
    with pytest.raises(TruncatedPayload):
        read_archive(io.BytesIO(good[:-3]))
    _passed("archive round-trip bit-exact + corrupted-header errors")
