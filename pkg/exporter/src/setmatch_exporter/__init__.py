"""setmatch-exporter: produce EMBA embedding archives from image folders,
crop plans, and descriptor files."""
from .backbone import Embedder, ToyBackbone, load_backbone
from .emba import Entry, write_entries
from .errors import (
    BadDescriptorFile,
    ExporterError,
    MissingImage,
    ModelLoadFailure,
)
from .export import (
    discover_images,
    export_embeddings,
    load_crop_plans,
    load_descriptor_file,
    pixel_rect,
)
from .prompts import (
    combined_prompt_text,
    cross_pairs,
    descriptor_question,
    label_prompt_text,
)

__all__ = [
    "BadDescriptorFile",
    "Embedder",
    "Entry",
    "ExporterError",
    "MissingImage",
    "ModelLoadFailure",
    "ToyBackbone",
    "combined_prompt_text",
    "cross_pairs",
    "descriptor_question",
    "discover_images",
    "export_embeddings",
    "label_prompt_text",
    "load_backbone",
    "load_crop_plans",
    "load_descriptor_file",
    "pixel_rect",
    "write_entries",
]
