"""MNIST/FMNIST ingestion from IDX files and deterministic subset selection.

IDX is the classic big-endian container: images carry magic 0x00000803 and
dims (count, rows, cols), labels carry magic 0x00000801 and a count.  Pixels
are unsigned bytes normalized to [0, 1] by exact division by 255.

The benchmark trains on tiny stratified subsets (50 train / 30 test by
default), so `subset` balances classes to within one example per class and
keeps the splits disjoint and reproducible per seed.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801
N_CLASSES = 10


class IdxParseError(ValueError):
    """Base for IDX container problems."""


class IdxMagicError(IdxParseError):
    pass


class IdxTruncatedError(IdxParseError):
    pass


class IdxCountMismatchError(IdxParseError):
    pass


@dataclass(frozen=True)
class Dataset:
    """Images (N, H, W, 1) in [0, 1] with integer labels below 10."""

    images: np.ndarray
    labels: np.ndarray
    name: str

    def __post_init__(self):
        if len(self.images) != len(self.labels):
            raise IdxCountMismatchError(
                f"{len(self.images)} images vs {len(self.labels)} labels"
            )
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= N_CLASSES):
            raise ValueError("labels must lie in [0, 10)")

    def __len__(self):
        return len(self.images)


def _read_exact(fh, n: int, path, what: str) -> bytes:
    buf = fh.read(n)
    if len(buf) != n:
        raise IdxTruncatedError(f"{path}: truncated while reading {what}")
    return buf


def load_idx(images_path, labels_path, name: str = "mnist") -> Dataset:
    """Parse an IDX image/label file pair into a normalized Dataset."""
    with open(images_path, "rb") as fh:
        magic, count, rows, cols = struct.unpack(
            ">IIII", _read_exact(fh, 16, images_path, "image header")
        )
        if magic != IDX_IMAGE_MAGIC:
            raise IdxMagicError(f"{images_path}: bad image magic {magic:#010x}")
        raw = _read_exact(fh, count * rows * cols, images_path, "pixel data")
    pixels = np.frombuffer(raw, dtype=np.uint8).reshape(count, rows, cols, 1)

    with open(labels_path, "rb") as fh:
        magic, label_count = struct.unpack(
            ">II", _read_exact(fh, 8, labels_path, "label header")
        )
        if magic != IDX_LABEL_MAGIC:
            raise IdxMagicError(f"{labels_path}: bad label magic {magic:#010x}")
        raw = _read_exact(fh, label_count, labels_path, "label data")
    labels = np.frombuffer(raw, dtype=np.uint8).astype(np.int64)

    if label_count != count:
        raise IdxCountMismatchError(
            f"{count} images in {images_path} vs {label_count} labels in {labels_path}"
        )
    return Dataset(pixels.astype(float) / 255.0, labels, name)


def save_idx(ds: Dataset, images_path, labels_path) -> None:
    """Serialize back to IDX; exact inverse of load_idx's normalization."""
    count = len(ds)
    rows, cols = ds.images.shape[1], ds.images.shape[2]
    pixels = np.rint(ds.images * 255.0).astype(np.uint8)
    with open(images_path, "wb") as fh:
        fh.write(struct.pack(">IIII", IDX_IMAGE_MAGIC, count, rows, cols))
        fh.write(pixels.tobytes())
    with open(labels_path, "wb") as fh:
        fh.write(struct.pack(">II", IDX_LABEL_MAGIC, count))
        fh.write(ds.labels.astype(np.uint8).tobytes())


def _class_quotas(n: int, rng: np.random.Generator) -> np.ndarray:
    """Split n across 10 classes with counts differing by at most one."""
    quotas = np.full(N_CLASSES, n // N_CLASSES)
    extras = rng.permutation(N_CLASSES)[: n % N_CLASSES]
    quotas[extras] += 1
    return quotas


def subset(ds: Dataset, n_train: int, n_test: int, seed: int) -> tuple[Dataset, Dataset]:
    """Stratified, disjoint, seed-deterministic train/test subsets."""
    if n_train + n_test > len(ds):
        raise ValueError(
            f"requested {n_train}+{n_test} examples from a {len(ds)}-image dataset"
        )
    rng = np.random.default_rng(seed)
    train_quota = _class_quotas(n_train, rng)
    test_quota = _class_quotas(n_test, rng)

    train_idx, test_idx = [], []
    for cls in range(N_CLASSES):
        pool = np.flatnonzero(ds.labels == cls)
        need = int(train_quota[cls] + test_quota[cls])
        if len(pool) < need:
            raise ValueError(
                f"class {cls} has {len(pool)} examples, need {need} for the split"
            )
        picked = rng.permutation(pool)[:need]
        train_idx.extend(picked[: train_quota[cls]])
        test_idx.extend(picked[train_quota[cls] :])

    train_idx = np.sort(np.asarray(train_idx, dtype=np.int64))
    test_idx = np.sort(np.asarray(test_idx, dtype=np.int64))
    make = lambda idx: Dataset(ds.images[idx], ds.labels[idx], ds.name)
    return make(train_idx), make(test_idx)
