import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def two_half_planes(h=8, w=8, left=(20.0, 0.0, 0.0), right=(80.0, 0.0, 0.0)):
    planes = np.empty((h, w, 3))
    planes[:, : w // 2] = left
    planes[:, w // 2:] = right
    return planes


def vertical_split(h, w, col):
    labels = np.zeros((h, w), dtype=np.int64)
    labels[:, col:] = 1
    return labels


def block_scene(seed=0, h=24, w=32):
    """Three flat colour blocks with mild noise, plus their label map."""
    r = np.random.default_rng(seed)
    gt = np.zeros((h, w), dtype=np.int64)
    gt[:, w // 2:] = 1
    gt[h // 2:, : w // 2] = 2
    colours = np.array([[200, 40, 40], [40, 160, 60], [50, 60, 200]], dtype=float)
    img = colours[gt] + r.normal(0, 4, size=(h, w, 3))
    return np.clip(np.rint(img), 0, 255).astype(np.uint8), gt


@pytest.fixture
def scene():
    return block_scene()


@pytest.fixture
def dataset(tmp_path):
    """Directory pair holding two images; the first has five annotations."""
    from segvol.io import write_label_png, write_rgb

    images, gt = tmp_path / "images", tmp_path / "gt"
    images.mkdir()
    gt.mkdir()
    for i, stem in enumerate(("101", "7")):
        img, labels = block_scene(seed=i)
        write_rgb(images / f"{stem}.png", img)
        n = 5 if i == 0 else 1
        for a in range(n):
            ann = labels.copy()
            if a % 2:
                ann[ann == 2] = 0
            write_label_png(gt / f"{stem}-{a + 1}.png", ann)
    return images, gt
