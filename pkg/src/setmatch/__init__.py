"""setmatch: set-to-set cross-modal classification via entropic optimal transport."""

from .archive import (
    EmbeddingArchive,
    ManifestRecord,
    read_archive,
    read_archive_file,
    write_archive,
    write_archive_file,
)
from .cache import (
    ClassCache,
    DescriptorOnlyPromptSet,
    FusionConfig,
    TtaConfig,
    affinity,
    build_cache,
    class_emd_sum,
    classify_fused,
    select_cache_entry,
    tta_step,
)
from .crops import CropPlan, CropRect, generate_crop_plan
from .data import DescriptorSet, FeatureSet, normalize
from .diagnostics import (
    DiagnosticReport,
    PromptSuite,
    eval_hybrid_strict,
    eval_prompt_types,
    run_diagnostics,
    similarity_deltas,
)
from .estimators import FusedCacheClassifier, SetMatchClassifier
from .ot import (
    Marginals,
    SinkhornConfig,
    TransportPlan,
    cosine_cost,
    exact_emd,
    round_to_feasible,
    sinkhorn_emd,
)
from .zeroshot import (
    ClassificationResult,
    classify_descriptor_mean,
    classify_dnd,
    classify_label_only,
)

__version__ = "0.1.0"

__all__ = [
    "EmbeddingArchive",
    "ManifestRecord",
    "read_archive",
    "read_archive_file",
    "write_archive",
    "write_archive_file",
    "ClassCache",
    "DescriptorOnlyPromptSet",
    "FusionConfig",
    "TtaConfig",
    "affinity",
    "build_cache",
    "class_emd_sum",
    "classify_fused",
    "select_cache_entry",
    "tta_step",
    "CropPlan",
    "CropRect",
    "generate_crop_plan",
    "DescriptorSet",
    "FeatureSet",
    "normalize",
    "DiagnosticReport",
    "PromptSuite",
    "eval_hybrid_strict",
    "eval_prompt_types",
    "run_diagnostics",
    "similarity_deltas",
    "FusedCacheClassifier",
    "SetMatchClassifier",
    "Marginals",
    "SinkhornConfig",
    "TransportPlan",
    "cosine_cost",
    "exact_emd",
    "round_to_feasible",
    "sinkhorn_emd",
    "ClassificationResult",
    "classify_descriptor_mean",
    "classify_dnd",
    "classify_label_only",
]
