"""Deterministic stand-in image corpora for offline runs.

The benchmark is designed for the real MNIST/FMNIST IDX files, but those
are not always available (no network, no local copies).  This module draws
seeded procedural look-alikes at 28x28: pixel-font digits for the MNIST
stand-in and code-drawn garment silhouettes for the FMNIST one, both with
per-image jitter (shift, thickness, intensity, noise) so that train/test
generalization is non-trivial.  The garment classes deliberately overlap
more than the digits do, mirroring the relative difficulty of the real
datasets.

Everything is a pure function of (name, count, seed); use data.save_idx to
materialize a corpus as IDX files for the CLI.
"""
from __future__ import annotations

import numpy as np

from .data import Dataset

_DIGIT_GLYPHS = [
    (" ### ", "#   #", "#  ##", "# # #", "##  #", "#   #", " ### "),
    ("  #  ", " ##  ", "  #  ", "  #  ", "  #  ", "  #  ", " ### "),
    (" ### ", "#   #", "    #", "   # ", "  #  ", " #   ", "#####"),
    (" ### ", "#   #", "    #", "  ## ", "    #", "#   #", " ### "),
    ("   # ", "  ## ", " # # ", "#  # ", "#####", "   # ", "   # "),
    ("#####", "#    ", "#### ", "    #", "    #", "#   #", " ### "),
    (" ### ", "#    ", "#    ", "#### ", "#   #", "#   #", " ### "),
    ("#####", "    #", "   # ", "  #  ", " #   ", " #   ", " #   "),
    (" ### ", "#   #", "#   #", " ### ", "#   #", "#   #", " ### "),
    (" ### ", "#   #", "#   #", " ####", "    #", "    #", " ### "),
]


def _glyph_mask(glyph) -> np.ndarray:
    return np.array([[c == "#" for c in row] for row in glyph], dtype=float)


def _garment_masks() -> list[np.ndarray]:
    """14x14 silhouettes for the ten garment classes.

    The top-wear classes (t-shirt, pullover, coat, shirt) deliberately share
    one torso template and differ only in small details, and the footwear
    classes share a low profile, mirroring the confusability that makes the
    real garment dataset much harder than the digits.
    """

    def torso():
        m = np.zeros((14, 14))
        m[3:12, 4:10] = 1
        m[3:7, 1:4] = 1
        m[3:7, 10:13] = 1
        return m

    def shoe():
        m = np.zeros((14, 14))
        m[8:12, 1:13] = 1
        return m

    shapes = []

    tshirt = torso()
    shapes.append(tshirt)

    trouser = np.zeros((14, 14))
    trouser[2:4, 4:10] = 1
    trouser[4:13, 4:6] = 1
    trouser[4:13, 8:10] = 1
    shapes.append(trouser)

    pullover = torso()
    pullover[7:11, 1:4] = 1  # long sleeves
    pullover[7:11, 10:13] = 1
    shapes.append(pullover)

    dress = np.zeros((14, 14))
    for r in range(2, 13):
        half = 1 + (r - 2) // 2
        dress[r, 7 - half : 7 + half] = 1
    shapes.append(dress)

    coat = torso()
    coat[7:12, 1:4] = 1
    coat[7:12, 10:13] = 1
    coat[3:12, 7] = 0  # open front
    shapes.append(coat)

    sandal = shoe()
    sandal[8:10, 3:5] = 0  # strap gaps
    sandal[8:10, 7:9] = 0
    shapes.append(sandal)

    shirt = torso()
    shirt[4:11:2, 7] = 0  # button line
    shapes.append(shirt)

    sneaker = shoe()
    sneaker[6:8, 1:8] = 1  # higher toe box
    shapes.append(sneaker)

    bag = np.zeros((14, 14))
    bag[5:12, 2:12] = 1
    bag[2:5, 5] = 1
    bag[2:5, 8] = 1
    bag[2, 5:9] = 1
    shapes.append(bag)

    boot = shoe()
    boot[2:9, 5:9] = 1  # shaft
    shapes.append(boot)

    return shapes


def _upscale(mask: np.ndarray, factor: int) -> np.ndarray:
    return np.kron(mask, np.ones((factor, factor)))


def _box_blur(img: np.ndarray) -> np.ndarray:
    padded = np.pad(img, 1, mode="constant")
    out = np.zeros_like(img)
    for di in range(3):
        for dj in range(3):
            out += padded[di : di + img.shape[0], dj : dj + img.shape[1]]
    return out / 9.0


def _dilate(img: np.ndarray) -> np.ndarray:
    padded = np.pad(img, 1, mode="constant")
    out = img.copy()
    for di, dj in ((0, 1), (1, 0), (2, 1), (1, 2)):
        out = np.maximum(out, padded[di : di + img.shape[0], dj : dj + img.shape[1]])
    return out


def _place(mask: np.ndarray, dy: int, dx: int) -> np.ndarray:
    h, w = mask.shape
    out = np.zeros((28, 28))
    top = (28 - h) // 2 + dy
    left = (28 - w) // 2 + dx
    top, left = np.clip(top, 0, 28 - h), np.clip(left, 0, 28 - w)
    out[top : top + h, left : left + w] = mask
    return out


def _render(
    base: np.ndarray,
    rng: np.random.Generator,
    noise: float,
    shift: int,
    blur_passes: int,
    occlusion: int = 0,
) -> np.ndarray:
    img = base
    if rng.random() < 0.5:
        img = _dilate(img)
    img = _place(img, int(rng.integers(-shift, shift + 1)), int(rng.integers(-shift, shift + 1)))
    if occlusion > 0:
        top = int(rng.integers(0, 28 - occlusion))
        left = int(rng.integers(0, 28 - occlusion))
        img[top : top + occlusion, left : left + occlusion] = 0.0
    for _ in range(blur_passes):
        img = _box_blur(img)
    img = img * rng.uniform(0.8, 1.0)
    img = img + rng.normal(0.0, noise, img.shape)
    return np.clip(img, 0.0, 1.0)


def synthetic_dataset(name: str, count: int, seed: int) -> Dataset:
    """Seeded look-alike corpus; name is "mnist" (digits) or "fmnist"."""
    name = name.lower()
    if name == "mnist":
        # digits are well-centered, like the centroid-normalized originals
        bases = [_upscale(_glyph_mask(g), 3) for g in _DIGIT_GLYPHS]
        noise, shift, blur_passes, occlusion = 0.03, 1, 1, 0
    elif name == "fmnist":
        bases = [_upscale(m, 2) for m in _garment_masks()]
        noise, shift, blur_passes, occlusion = 0.30, 3, 3, 9
    else:
        raise ValueError(f"unknown synthetic dataset {name!r}")

    rng = np.random.default_rng(seed)
    labels = rng.integers(0, 10, size=count)
    images = np.stack(
        [_render(bases[lbl], rng, noise, shift, blur_passes, occlusion) for lbl in labels]
    )[..., None]
    return Dataset(images, labels.astype(np.int64), name)
