import json

import numpy as np
import pytest
from PIL import Image

from setmatch.cli import main as setmatch_main

from toydata import CLASSES, M_RANDOM

@pytest.fixture(scope="session")
def toy_dataset(tmp_path_factory):
    """10 PNG images (2 classes x 5), descriptor JSON, and a crop plan
    generated through the classifier package's crops-gen command."""
    root = tmp_path_factory.mktemp("toy")
    images = root / "images"
    rng = np.random.default_rng(99)
    image_ids = []
    for cls in CLASSES:
        (images / cls).mkdir(parents=True)
        for i in range(5):
            pixels = rng.integers(0, 256, (24, 20, 3), dtype=np.uint8)
            Image.fromarray(pixels, mode="RGB").save(
                images / cls / f"{cls}{i}.png"
            )
            image_ids.append(f"{cls}/{cls}{i}")

    descriptors = {
        "heron": ["a long sinuous neck", "grey-blue plumage",
                  "a dagger-shaped bill"],
        "ibis": ["a downcurved bill", "white body feathers",
                 "a bare dark face"],
    }
    desc_path = root / "descriptors.json"
    desc_path.write_text(json.dumps(descriptors))

    ids_path = root / "ids.txt"
    ids_path.write_text("".join(f"{i}\n" for i in image_ids))
    plan_path = root / "plan.json"
    code = setmatch_main([
        "crops-gen", "--images", str(ids_path), "--seed", "11",
        "--m", str(M_RANDOM), "--include-full-image", "--out", str(plan_path),
    ])
    assert code == 0
    return {
        "images": images,
        "descriptors": desc_path,
        "descriptor_map": descriptors,
        "plan": plan_path,
        "image_ids": image_ids,
    }


@pytest.fixture(scope="session")
def exported(toy_dataset, tmp_path_factory):
    from setmatch_exporter import export_embeddings

    out = tmp_path_factory.mktemp("export") / "toy.emba"
    count = export_embeddings(
        toy_dataset["images"], toy_dataset["plan"],
        toy_dataset["descriptors"], "toy-64", out,
    )
    return {"path": out, "count": count}
