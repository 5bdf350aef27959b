"""Batch command-line surface.

Subcommands wire embedding archives, crop plans, caches, and configs into
JSON-line reports.  Every run is replay-deterministic: all randomness flows
from --seed and floats are serialized with 9 significant digits.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import archive as archive_mod
from . import cache as cache_mod
from . import cache_io, crops, diagnostics
from .errors import SetMatchError
from .ot import Marginals, SinkhornConfig, exact_emd
from .zeroshot import classify_descriptor_mean, classify_dnd, classify_label_only

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2


class UsageError(Exception):
    """Invalid configuration or inputs; maps to exit code 2."""


def _round_floats(obj):
    if isinstance(obj, float):
        if math.isinf(obj) or math.isnan(obj):
            return repr(obj)
        return float(f"{obj:.9g}")
    if isinstance(obj, dict):
        return {k: _round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v) for v in obj]
    return obj


def dump_json(obj) -> str:
    return json.dumps(_round_floats(obj), sort_keys=True)


def _worker_count() -> int:
    raw = os.environ.get("SETMATCH_THREADS", "").strip()
    try:
        return max(1, int(raw)) if raw else 1
    except ValueError:
        return 1


def _ordered_map(fn, items):
    workers = _worker_count()
    if workers == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _load_archive(path, strict_norm=False):
    try:
        return archive_mod.read_archive_file(path, strict_norm=strict_norm)
    except (OSError, SetMatchError, ValueError) as exc:
        raise UsageError(f"cannot load archive {path}: {exc}") from exc


def _sinkhorn_from_args(args) -> SinkhornConfig:
    try:
        return SinkhornConfig(args.epsilon, args.max_iters, args.marginal_tol)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _add_sinkhorn_args(p):
    p.add_argument("--epsilon", type=float, default=0.05)
    p.add_argument("--max-iters", type=int, default=200)
    p.add_argument("--marginal-tol", type=float, default=1e-6)


def _write_report(path, lines):
    with open(path, "w", encoding="utf-8") as fp:
        for line in lines:
            fp.write(line + "\n")


def _accuracy_summary(pairs) -> str:
    labeled = [(p, t) for p, t in pairs if t]
    if not labeled:
        return f"{len(pairs)} queries classified (no ground-truth labels)"
    hits = sum(p == t for p, t in labeled)
    pct = 100.0 * hits / len(labeled)
    return f"accuracy: {pct:.2f}% ({hits}/{len(labeled)})"


def _descriptor_sets(args):
    source = "combined" if args.text_kind == "combined" else "descriptor"
    dsets = archive_mod.descriptor_sets(_load_archive(args.descriptors), source)
    if not dsets:
        raise UsageError(f"no {source} prompt entries in {args.descriptors}")
    return dsets


def _prompt_sets(archive):
    grouped = {}
    for rec, vec in zip(archive.records, archive.vectors):
        if rec.kind == "descriptor_prompt":
            grouped.setdefault(rec.class_id, []).append(vec)
    return {
        cls: cache_mod.DescriptorOnlyPromptSet(cls, np.stack(vecs))
        for cls, vecs in grouped.items()
    }


# --- subcommands ---

def cmd_crops_gen(args) -> int:
    try:
        with open(args.images, "r", encoding="utf-8") as fp:
            ids = [line.strip() for line in fp if line.strip()]
        if not ids:
            raise UsageError(f"no image ids in {args.images}")
        plans = [
            crops.generate_crop_plan(
                image_id,
                args.seed,
                count=args.m,
                min_scale=args.min_scale,
                max_scale=args.max_scale,
                aspect_range=(args.aspect_lo, args.aspect_hi),
                include_full_image=args.include_full_image,
            )
            for image_id in ids
        ]
    except (OSError, ValueError) as exc:
        raise UsageError(str(exc)) from exc
    crops.write_plans(plans, args.out)
    print(f"wrote {len(plans)} crop plans to {args.out}")
    return EXIT_OK


def cmd_classify_zeroshot(args) -> int:
    archive = _load_archive(args.archive)
    queries = archive_mod.image_queries(archive)
    if not queries:
        raise UsageError("archive has no kind=image entries")
    if args.mode == "label":
        labels = archive_mod.label_embeddings(archive)
        if not labels:
            raise UsageError("archive has no label_prompt entries")
        classify = lambda vec: classify_label_only(vec, labels)  # noqa: E731
    else:
        dsets = archive_mod.descriptor_sets(archive, "combined")
        if not dsets:
            raise UsageError("archive has no combined-prompt entries")
        classify = lambda vec: classify_descriptor_mean(vec, dsets)  # noqa: E731
    results = _ordered_map(classify, [vec for _, _, vec in queries])
    lines, pairs = [], []
    for (entry_id, true_class, _), res in zip(queries, results):
        pairs.append((res.predicted_class, true_class))
        lines.append(dump_json({
            "entry_id": entry_id,
            "predicted_class": res.predicted_class,
            "true_class": true_class,
            "scores": res.per_class_scores,
            "score_kind": res.score_kind,
        }))
    _write_report(args.report, lines)
    print(_accuracy_summary(pairs))
    return EXIT_OK


def _classify_sets(queries, classify, report_path):
    results = _ordered_map(classify, [fs for fs, _ in queries])
    lines, pairs = [], []
    for (fs, true_class), res in zip(queries, results):
        pairs.append((res.predicted_class, true_class))
        lines.append(dump_json({
            "entry_id": fs.source_id,
            "predicted_class": res.predicted_class,
            "true_class": true_class,
            "scores": res.per_class_scores,
            "score_kind": res.score_kind,
        }))
    _write_report(report_path, lines)
    print(_accuracy_summary(pairs))


def cmd_classify_dnd(args) -> int:
    queries = archive_mod.feature_sets(_load_archive(args.archive))
    if not queries:
        raise UsageError("archive has no kind=crop entries")
    dsets = _descriptor_sets(args)
    cfg = _sinkhorn_from_args(args)
    _classify_sets(queries, lambda fs: classify_dnd(fs, dsets, cfg), args.report)
    return EXIT_OK


def cmd_cache_build(args) -> int:
    train_archive = _load_archive(args.archive)
    training = archive_mod.feature_sets(train_archive)
    if not training:
        raise UsageError("training archive has no kind=crop entries")
    prompts_archive = (
        _load_archive(args.prompts) if args.prompts else train_archive
    )
    prompts = _prompt_sets(prompts_archive)
    if not prompts:
        raise UsageError("no descriptor_prompt entries for cache construction")
    missing = {label for _, label in training if label not in prompts}
    if missing:
        raise UsageError(f"training labels without prompt sets: {sorted(missing)}")
    caches = cache_mod.build_cache(training, prompts)
    archive_mod.write_archive_file(cache_io.caches_to_archive(caches), args.out)
    sizes = {cls: len(c) for cls, c in sorted(caches.items())}
    print(f"built caches: {dump_json(sizes)} -> {args.out}")
    return EXIT_OK


def _fusion_from_args(args):
    try:
        return cache_mod.FusionConfig(args.alpha, args.beta)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def cmd_classify_fewshot(args) -> int:
    queries = archive_mod.feature_sets(_load_archive(args.archive))
    if not queries:
        raise UsageError("archive has no kind=crop entries")
    dsets = _descriptor_sets(args)
    caches = cache_io.caches_from_archive(_load_archive(args.cache))
    for cls in dsets:
        caches.setdefault(cls, cache_mod.ClassCache(class_id=cls))
    extra = set(caches) - set(dsets)
    if extra:
        raise UsageError(f"cache classes without descriptor sets: {sorted(extra)}")
    fusion = _fusion_from_args(args)
    cfg = _sinkhorn_from_args(args)
    _classify_sets(
        queries,
        lambda fs: cache_mod.classify_fused(fs, caches, dsets, fusion, cfg),
        args.report,
    )
    if args.alpha_grid:
        labeled = [(fs, t) for fs, t in queries if t]
        if labeled:
            print("alpha grid search:")
            for alpha in args.alpha_grid:
                f = cache_mod.FusionConfig(alpha, args.beta)
                hits = sum(
                    cache_mod.classify_fused(fs, caches, dsets, f, cfg)
                    .predicted_class == t
                    for fs, t in labeled
                )
                print(f"  alpha={alpha:g}: {100.0 * hits / len(labeled):.2f}%")
    return EXIT_OK


def cmd_tta_run(args) -> int:
    stream_archive = _load_archive(args.archive)
    stream = archive_mod.feature_sets(stream_archive)
    if not stream:
        raise UsageError("archive has no kind=crop entries")
    dsets = _descriptor_sets(args)
    prompts_archive = _load_archive(args.prompts if args.prompts else args.descriptors)
    prompts = _prompt_sets(prompts_archive)
    if set(prompts) < set(dsets):
        raise UsageError("every candidate class needs a descriptor-only prompt set")
    fusion = _fusion_from_args(args)
    cfg = _sinkhorn_from_args(args)
    try:
        tta = cache_mod.TtaConfig(args.capacity, args.admission, args.temperature)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    state = cache_mod.empty_caches(dsets)
    lines, pairs = [], []
    for fs, true_class in stream:
        res, state = cache_mod.tta_step(fs, state, prompts, dsets, fusion, cfg, tta)
        pairs.append((res.predicted_class, true_class))
        lines.append(dump_json({
            "entry_id": fs.source_id,
            "predicted_class": res.predicted_class,
            "true_class": true_class,
            "scores": res.per_class_scores,
            "score_kind": res.score_kind,
        }))
    _write_report(args.report, lines)
    print(_accuracy_summary(pairs))
    sizes = {cls: len(c) for cls, c in sorted(state.items())}
    print(f"final cache sizes: {dump_json(sizes)}")
    if args.save_cache:
        if any(sizes.values()):
            archive_mod.write_archive_file(
                cache_io.caches_to_archive(state), args.save_cache
            )
        else:
            print("no cache entries admitted; nothing saved")
    return EXIT_OK


def cmd_diagnose_prompts(args) -> int:
    archive = _load_archive(args.archive)
    try:
        suite = diagnostics.suite_from_archive(archive)
    except SetMatchError as exc:
        raise UsageError(str(exc)) from exc
    test = [
        (vec, cls) for _, cls, vec in archive_mod.image_queries(archive) if cls
    ]
    if not test:
        raise UsageError("archive has no labeled kind=image entries")
    report = diagnostics.run_diagnostics(test, suite, args.descriptor_agg)
    with open(args.report, "w", encoding="utf-8") as fp:
        fp.write(dump_json(report.as_dict()) + "\n")
    print(f"acc label-only:      {100.0 * report.acc_label_only:.2f}%")
    print(f"acc descriptor-only: {100.0 * report.acc_descriptor_only:.2f}%")
    print(f"acc hybrid strict:   {100.0 * report.acc_hybrid_strict:.2f}%")
    print(
        f"intra {report.mean_intra_sim:.2f}  cross {report.mean_cross_sim:.2f}  "
        f"delta {report.delta_sim:.2f}  delta-label {report.delta_label_sim:.2f}"
    )
    return EXIT_OK


def cmd_oracle_emd(args) -> int:
    try:
        with open(args.cost, "r", encoding="utf-8") as fp:
            raw = json.load(fp)
        cost = np.asarray(raw["cost"] if isinstance(raw, dict) else raw, dtype=float)
        if cost.ndim != 2:
            raise UsageError("cost must be a 2-D matrix")
    except (OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
        raise UsageError(f"cannot load cost matrix: {exc}") from exc
    plan = exact_emd(cost, Marginals.uniform(*cost.shape))
    print(dump_json({"value": plan.achieved_cost, "plan": plan.matrix.tolist()}))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="setmatch", description="set-to-set cross-modal classification engine"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("crops-gen", help="generate deterministic crop plans")
    p.add_argument("--images", required=True, help="text file of image ids")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--m", type=int, default=crops.DEFAULT_CROP_COUNT)
    p.add_argument("--min-scale", type=float, default=crops.DEFAULT_MIN_SCALE)
    p.add_argument("--max-scale", type=float, default=crops.DEFAULT_MAX_SCALE)
    p.add_argument("--aspect-lo", type=float, default=crops.DEFAULT_ASPECT_RANGE[0])
    p.add_argument("--aspect-hi", type=float, default=crops.DEFAULT_ASPECT_RANGE[1])
    p.add_argument("--include-full-image", action="store_true")
    p.set_defaults(func=cmd_crops_gen)

    p = sub.add_parser("classify-zeroshot", help="label or descriptor-mean zero-shot")
    p.add_argument("--archive", required=True)
    p.add_argument("--mode", choices=("label", "descriptor-mean"), default="label")
    p.add_argument("--report", required=True)
    p.set_defaults(func=cmd_classify_zeroshot)

    p = sub.add_parser("classify-dnd", help="min-EMD set-matching zero-shot")
    p.add_argument("--archive", required=True)
    p.add_argument("--descriptors", required=True)
    p.add_argument("--report", required=True)
    p.add_argument("--text-kind", choices=("combined", "descriptor"),
                   default="combined")
    _add_sinkhorn_args(p)
    p.set_defaults(func=cmd_classify_dnd)

    p = sub.add_parser("cache-build", help="build local-aware caches from few shots")
    p.add_argument("--archive", required=True, help="training crops archive")
    p.add_argument("--prompts", help="archive with descriptor_prompt entries "
                   "(defaults to --archive)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_cache_build)

    p = sub.add_parser("classify-fewshot", help="fused cache + text classification")
    p.add_argument("--archive", required=True)
    p.add_argument("--cache", required=True)
    p.add_argument("--descriptors", required=True)
    p.add_argument("--report", required=True)
    p.add_argument("--text-kind", choices=("combined", "descriptor"),
                   default="combined")
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--alpha-grid", type=float, nargs="*", default=None,
                   help="report accuracy across alphas, e.g. 0.25 0.5 1 2 4")
    _add_sinkhorn_args(p)
    p.set_defaults(func=cmd_classify_fewshot)

    p = sub.add_parser("tta-run", help="streaming test-time adaptation")
    p.add_argument("--archive", required=True, help="query stream archive")
    p.add_argument("--descriptors", required=True)
    p.add_argument("--prompts", help="descriptor-only prompt archive "
                   "(defaults to --descriptors)")
    p.add_argument("--report", required=True)
    p.add_argument("--text-kind", choices=("combined", "descriptor"),
                   default="combined")
    p.add_argument("--capacity", type=int, default=3)
    p.add_argument("--admission", type=float, default=0.5)
    p.add_argument("--temperature", type=float, default=1.0)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--save-cache")
    _add_sinkhorn_args(p)
    p.set_defaults(func=cmd_tta_run)

    p = sub.add_parser("diagnose-prompts", help="prompt-sensitivity report")
    p.add_argument("--archive", required=True)
    p.add_argument("--report", required=True)
    p.add_argument("--descriptor-agg", choices=("mean", "max"), default="mean")
    p.set_defaults(func=cmd_diagnose_prompts)

    p = sub.add_parser("oracle-emd", help="exact transport on a JSON cost matrix")
    p.add_argument("--cost", required=True)
    p.set_defaults(func=cmd_oracle_emd)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # runtime failure
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
