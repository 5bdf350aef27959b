"""Archive export: crop plans + images + descriptor files -> EMBA."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image

from .backbone import Embedder, load_backbone
from .emba import Entry, write_entries
from .errors import BadDescriptorFile, MissingImage
from .prompts import combined_prompt_text, cross_pairs, label_prompt_text

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")


def load_descriptor_file(path) -> dict[str, list[str]]:
    try:
        with open(path, encoding="utf-8") as fp:
            raw = json.load(fp)
    except (OSError, json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise BadDescriptorFile(f"cannot read descriptor file: {exc}") from exc
    if not isinstance(raw, dict) or not raw:
        raise BadDescriptorFile("descriptor file must map classes to lists")
    out = {}
    for cls, items in raw.items():
        if (not isinstance(items, list) or not items
                or not all(isinstance(d, str) and d for d in items)):
            raise BadDescriptorFile(
                f"class {cls!r} needs a non-empty list of descriptor strings"
            )
        out[str(cls)] = [str(d) for d in items]
    return out


def load_crop_plans(path) -> dict[str, list[dict]]:
    """Crop-plan JSON keyed by image id."""
    with open(path, encoding="utf-8") as fp:
        plans = json.load(fp)
    return {p["image_id"]: p["rects"] for p in plans}


def discover_images(root) -> list[tuple[str, str, Path]]:
    """(image_id, class_id, path) triples; layout is <root>/<class>/<file>.

    image_id is '<class>/<stem>', sorted for a stable export order.
    """
    root = Path(root)
    found = []
    for class_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        for img in sorted(class_dir.iterdir()):
            if img.suffix.lower() in IMAGE_SUFFIXES:
                found.append((f"{class_dir.name}/{img.stem}", class_dir.name, img))
    return found


def pixel_rect(rect: dict, width: int, height: int) -> tuple[int, int, int, int]:
    """Relative rect to pixel indices, rounded half to even; at least 1 px."""
    x0 = round(rect["x0"] * width)
    x1 = round(rect["x1"] * width)
    y0 = round(rect["y0"] * height)
    y1 = round(rect["y1"] * height)
    x0, y0 = max(0, min(x0, width - 1)), max(0, min(y0, height - 1))
    x1, y1 = max(x0 + 1, min(x1, width)), max(y0 + 1, min(y1, height))
    return x0, y0, x1, y1


def _prompt_entries(descriptors: dict[str, list[str]], embedder: Embedder,
                    cross_seed: int, donors_per_class: int) -> list[Entry]:
    entries = []
    classes = sorted(descriptors)
    for cls in classes:
        text = label_prompt_text(cls)
        entries.append(Entry(f"label#{cls}", "label_prompt", cls,
                             embedder.embed_text(text), {"text": text}))
        for k, desc in enumerate(descriptors[cls]):
            entries.append(Entry(f"donly#{cls}#{k}", "descriptor_prompt", cls,
                                 embedder.embed_text(desc), {"text": desc}))
        for k, desc in enumerate(descriptors[cls]):
            text = combined_prompt_text(cls, desc)
            entries.append(Entry(
                f"hyb#{cls}#{k}", "hybrid_prompt", cls,
                embedder.embed_text(text),
                {"text": text, "descriptor_class": cls},
            ))
    pick = np.random.default_rng(np.random.Philox(key=cross_seed))
    for cls, donor in cross_pairs(classes, cross_seed, donors_per_class):
        k = int(pick.integers(len(descriptors[donor])))
        text = combined_prompt_text(cls, descriptors[donor][k])
        entries.append(Entry(
            f"hybx#{cls}#{donor}#{k}", "hybrid_prompt", cls,
            embedder.embed_text(text),
            {"text": text, "descriptor_class": donor},
        ))
    return entries


def _image_entries(images, plans, embedder: Embedder) -> list[Entry]:
    planned = set(plans)
    found = {image_id for image_id, _, _ in images}
    if planned != found:
        missing = sorted((planned - found) | (found - planned))
        raise MissingImage(
            f"crop plan and image folder disagree on: {', '.join(missing)}"
        )
    entries = []
    for image_id, cls, path in images:
        pixels = np.asarray(Image.open(path).convert("RGB"))
        height, width = pixels.shape[:2]
        entries.append(Entry(image_id, "image", cls,
                             embedder.embed_image(pixels), None))
        for k, rect in enumerate(plans[image_id]):
            x0, y0, x1, y1 = pixel_rect(rect, width, height)
            entries.append(Entry(
                f"{image_id}#crop{k}", "crop", cls,
                embedder.embed_image(pixels[y0:y1, x0:x1]), dict(rect),
            ))
    return entries


def export_embeddings(images_dir, crop_plan_path, descriptor_path,
                      model_id: str, out_path, cross_seed: int = 0,
                      donors_per_class: int = 5) -> int:
    """Export one archive; returns the number of entries written."""
    embedder = load_backbone(model_id)
    descriptors = load_descriptor_file(descriptor_path)
    images = discover_images(images_dir)
    for _, cls, path in images:
        if cls not in descriptors:
            raise BadDescriptorFile(
                f"image folder {path.parent.name!r} has no descriptors"
            )
    plans = load_crop_plans(crop_plan_path)
    entries = _prompt_entries(descriptors, embedder, cross_seed,
                              donors_per_class)
    entries.extend(_image_entries(images, plans, embedder))
    write_entries(entries, embedder.dim, out_path)
    return len(entries)
