"""Dataset ingestion and preparation.

Reads the big-endian IDX container (images magic 0x00000803, labels magic
0x00000801) and a header-less grayscale CSV (label first, then side*side
bytes per row).  `filter_pair` selects a two-class subset, relabels it to
-1/+1, splits train/test with a seeded shuffle, and block-average downscales
every byte image onto an s x s grid of [0, 1] intensities.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .encoders import ImageGrid
from .errors import DataError

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


@dataclass(frozen=True)
class RawDataset:
    """Byte images straight from disk, one label per image."""

    images: tuple
    labels: tuple
    side: int

    def __post_init__(self):
        if len(self.images) != len(self.labels):
            raise DataError(
                f"{len(self.images)} images but {len(self.labels)} labels"
            )
        for im in self.images:
            if im.shape != (self.side, self.side):
                raise DataError(
                    f"image shape {im.shape} does not match side {self.side}"
                )

    def __len__(self):
        return len(self.images)


@dataclass(frozen=True)
class PairDataset:
    """Two-class subset with labels in {-1, +1} and [0, 1] pixel grids."""

    images: tuple
    labels: tuple
    class_pair: tuple

    def __post_init__(self):
        if len(self.images) != len(self.labels):
            raise DataError(
                f"{len(self.images)} images but {len(self.labels)} labels"
            )
        if any(lab not in (-1, 1) for lab in self.labels):
            raise DataError("pair labels must be -1 or +1")
        sides = {im.side for im in self.images}
        if len(sides) > 1:
            raise DataError(f"mixed grid sides {sorted(sides)}")

    @property
    def side(self) -> int:
        return self.images[0].side

    def __len__(self):
        return len(self.images)


@dataclass(frozen=True)
class SplitSpec:
    """Train/test sizes plus the shuffle seed."""

    n_train: int = 200
    n_test: int = 200
    seed: int = 0
    balanced: bool = True

    def __post_init__(self):
        if self.n_train < 1 or self.n_test < 1:
            raise DataError("n_train and n_test must be >= 1")


def _read_exact(f, count, path, what):
    buf = f.read(count)
    if len(buf) != count:
        raise DataError(f"{path}: truncated {what} ({len(buf)} of {count} bytes)")
    return buf


def load_idx(images_path, labels_path) -> RawDataset:
    """Parse an IDX image/label file pair into a RawDataset."""
    with open(images_path, "rb") as f:
        magic, count, rows, cols = struct.unpack(
            ">iiii", _read_exact(f, 16, images_path, "header")
        )
        if magic != IDX_IMAGES_MAGIC:
            raise DataError(
                f"{images_path}: bad image magic 0x{magic:08x}, "
                f"expected 0x{IDX_IMAGES_MAGIC:08x}"
            )
        if rows != cols:
            raise DataError(f"{images_path}: non-square images {rows}x{cols}")
        raw = _read_exact(f, count * rows * cols, images_path, "pixel data")
        if f.read(1):
            raise DataError(f"{images_path}: trailing bytes after pixel data")
    with open(labels_path, "rb") as f:
        magic, n_labels = struct.unpack(
            ">ii", _read_exact(f, 8, labels_path, "header")
        )
        if magic != IDX_LABELS_MAGIC:
            raise DataError(
                f"{labels_path}: bad label magic 0x{magic:08x}, "
                f"expected 0x{IDX_LABELS_MAGIC:08x}"
            )
        label_bytes = _read_exact(f, n_labels, labels_path, "label data")
        if f.read(1):
            raise DataError(f"{labels_path}: trailing bytes after label data")
    if count != n_labels:
        raise DataError(
            f"image count {count} does not match label count {n_labels}"
        )
    pixels = np.frombuffer(raw, dtype=np.uint8)
    images = []
    for i in range(count):
        im = pixels[i * rows * cols : (i + 1) * rows * cols].reshape(rows, cols)
        im.setflags(write=False)
        images.append(im)
    return RawDataset(tuple(images), tuple(int(b) for b in label_bytes), rows)


def load_gray_csv(path, side) -> RawDataset:
    """Parse a header-less CSV of `label, pixel byte * side**2` rows."""
    images, labels = [], []
    expected = side * side + 1
    with open(path, "r", encoding="ascii") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            fields = line.split(",")
            if len(fields) != expected:
                raise DataError(
                    f"{path}:{lineno}: expected {expected} fields, "
                    f"got {len(fields)}"
                )
            try:
                values = [int(v) for v in fields]
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: non-integer field") from exc
            pix = values[1:]
            if any(not 0 <= v <= 255 for v in pix):
                raise DataError(f"{path}:{lineno}: pixel byte outside 0-255")
            im = np.asarray(pix, dtype=np.uint8).reshape(side, side)
            im.setflags(write=False)
            images.append(im)
            labels.append(values[0])
    return RawDataset(tuple(images), tuple(labels), side)


def _block_edges(source_side: int, s: int) -> list:
    # near-equal partition; .5 edge positions round up
    return [int(np.floor(k * source_side / s + 0.5)) for k in range(s + 1)]


def downscale(image: np.ndarray, s: int) -> ImageGrid:
    """Block-average a square byte image onto an s x s grid in [0, 1]."""
    image = np.asarray(image)
    if image.ndim != 2 or image.shape[0] != image.shape[1]:
        raise DataError(f"expected a square image, got shape {image.shape}")
    source = image.shape[0]
    if s > source:
        raise DataError(f"cannot downscale side {source} to larger side {s}")
    edges = _block_edges(source, s)
    out = np.empty((s, s))
    pix = image.astype(np.float64)
    for i in range(s):
        for j in range(s):
            block = pix[edges[i] : edges[i + 1], edges[j] : edges[j + 1]]
            out[i, j] = block.mean() / 255.0
    return ImageGrid(s, out)


def filter_pair(raw: RawDataset, c0, c1, split: SplitSpec, side: int = 3):
    """Select the (c0, c1) subset, relabel to -1/+1, split, and downscale.

    Returns (train, test) PairDatasets with disjoint samples.  Balanced
    splits draw n/2 per class and require even n_train and n_test.
    """
    if c0 == c1:
        raise DataError(f"class pair must be distinct, got ({c0}, {c1})")
    idx0 = [i for i, lab in enumerate(raw.labels) if lab == c0]
    idx1 = [i for i, lab in enumerate(raw.labels) if lab == c1]
    if not idx0 or not idx1:
        raise DataError(f"class pair ({c0}, {c1}) not fully present")

    rng = np.random.default_rng(split.seed)
    order0 = [idx0[i] for i in rng.permutation(len(idx0))]
    order1 = [idx1[i] for i in rng.permutation(len(idx1))]

    if split.balanced:
        if split.n_train % 2 or split.n_test % 2:
            raise DataError(
                "balanced split needs even n_train and n_test, got "
                f"{split.n_train}/{split.n_test}"
            )
        h_tr, h_te = split.n_train // 2, split.n_test // 2
        for cls, pool in ((c0, order0), (c1, order1)):
            if len(pool) < h_tr + h_te:
                raise DataError(
                    f"class {cls} has {len(pool)} samples, "
                    f"needs {h_tr + h_te}"
                )
        train_idx = order0[:h_tr] + order1[:h_tr]
        test_idx = order0[h_tr : h_tr + h_te] + order1[h_tr : h_tr + h_te]
    else:
        pool = order0 + order1
        pool = [pool[i] for i in rng.permutation(len(pool))]
        need = split.n_train + split.n_test
        if len(pool) < need:
            raise DataError(f"{len(pool)} pair samples, needs {need}")
        train_idx = pool[: split.n_train]
        test_idx = pool[split.n_train : need]

    # final mix so neither split is ordered by class
    train_idx = [train_idx[i] for i in rng.permutation(len(train_idx))]
    test_idx = [test_idx[i] for i in rng.permutation(len(test_idx))]

    def build(indices):
        images = tuple(downscale(raw.images[i], side) for i in indices)
        labels = tuple(-1 if raw.labels[i] == c0 else 1 for i in indices)
        return PairDataset(images, labels, (c0, c1))

    return build(train_idx), build(test_idx)
