"""Shared fixtures: a small hand-built benchmark written with plain files.

Nothing here imports the toolkit; individual tests that cross-check against
it import it themselves.
"""
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

SIZE = 24


def benchmark_arrays(n_categories=2, per_category=3):
    """Deterministic (image_id, category, box, scores) tuples.

    Scores are ~0.8 higher inside the box than outside, so any threshold in
    the gap recovers the object exactly.
    """
    rng = np.random.default_rng(20240823)
    out = []
    for c in range(n_categories):
        for i in range(per_category):
            image_id = f"cat{c}_img{i}"
            w = int(rng.integers(6, 12))
            h = int(rng.integers(6, 12))
            x0 = int(rng.integers(2, SIZE - w - 2))
            y0 = int(rng.integers(2, SIZE - h - 2))
            scores = rng.random((SIZE, SIZE)) * 0.2
            scores[y0:y0 + h, x0:x0 + w] += 0.8
            out.append((image_id, f"cat{c}", (x0, y0, x0 + w, y0 + h), scores))
    return out


@pytest.fixture(scope="session")
def bench(tmp_path_factory):
    root = tmp_path_factory.mktemp("client_bench")
    arrays = benchmark_arrays()
    manifest = ["image_id,category_id,width,height"]
    boxes = ["image_id,x0,y0,x1,y1"]
    masks_root = root / "masks"
    masks_root.mkdir()
    for image_id, category, (x0, y0, x1, y1), _ in arrays:
        manifest.append(f"{image_id},{category},{SIZE},{SIZE}")
        boxes.append(f"{image_id},{x0},{y0},{x1},{y1}")
        mask = np.zeros((SIZE, SIZE), dtype=np.uint8)
        mask[y0:y1, x0:x1] = 255
        Image.fromarray(mask, mode="L").save(masks_root / f"{image_id}.png")
    (root / "manifest.csv").write_text("\n".join(manifest) + "\n", encoding="utf-8")
    (root / "boxes.csv").write_text("\n".join(boxes) + "\n", encoding="utf-8")
    return {
        "root": root,
        "manifest": root / "manifest.csv",
        "boxes": root / "boxes.csv",
        "masks": masks_root,
        "arrays": arrays,
    }
