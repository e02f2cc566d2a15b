"""IDX dataset ingestion (MNIST / Fashion-MNIST / Kuzushiji-MNIST files).

The container is big-endian: a u32 magic (0x00000803 for u8 image tensors
with 3 dims, 0x00000801 for u8 label vectors), the dimension sizes as u32,
then the row-major payload. Pixels map to [0, 1] by division by 255; parsing
is lossless, so re-encoding a parsed dataset reproduces the source bytes.
"""

from __future__ import annotations

import gzip
import os
import struct
from dataclasses import dataclass

import numpy as np

from .errors import DatasetError, FormatError

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801

DATA_DIR_ENV = "DRN_DATA_DIR"

SPLIT_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


def _read_bytes(path) -> bytes:
    if str(path).endswith(".gz"):
        with gzip.open(path, "rb") as f:
            return f.read()
    with open(path, "rb") as f:
        return f.read()


def parse_idx(path) -> np.ndarray:
    """Parse one IDX file into its raw uint8 tensor.

    Accepts image files (magic 0x00000803, shape (n, rows, cols)) and label
    files (magic 0x00000801, shape (n,)); anything else is a format error
    naming the bad offset.
    """
    data = _read_bytes(path)
    if len(data) < 4:
        raise FormatError(f"{path}: truncated header at offset 0")
    (magic,) = struct.unpack_from(">I", data, 0)
    if magic == IMAGES_MAGIC:
        ndim = 3
    elif magic == LABELS_MAGIC:
        ndim = 1
    else:
        raise FormatError(f"{path}: bad magic 0x{magic:08x} at offset 0")
    header = 4 + 4 * ndim
    if len(data) < header:
        raise FormatError(f"{path}: truncated dimension header at offset {len(data)}")
    shape = struct.unpack_from(f">{ndim}I", data, 4)
    count = int(np.prod(shape))
    if len(data) != header + count:
        raise FormatError(
            f"{path}: payload has {len(data) - header} bytes at offset {header}, "
            f"expected {count} for shape {shape}")
    return np.frombuffer(data, dtype=np.uint8, offset=header).reshape(shape)


def write_idx(path, array):
    """Inverse of parse_idx: write a uint8 tensor as an IDX file."""
    array = np.ascontiguousarray(array, dtype=np.uint8)
    if array.ndim == 3:
        magic = IMAGES_MAGIC
    elif array.ndim == 1:
        magic = LABELS_MAGIC
    else:
        raise FormatError(f"can only write 1-d label or 3-d image tensors, got ndim={array.ndim}")
    with open(path, "wb") as f:
        f.write(struct.pack(">I", magic))
        f.write(struct.pack(f">{array.ndim}I", *array.shape))
        f.write(array.tobytes())


@dataclass(frozen=True)
class IdxDataset:
    """images: (n, rows*cols) float64 in [0, 1]; labels: (n,) ints 0..9."""

    images: np.ndarray
    labels: np.ndarray
    split: str
    image_shape: tuple[int, int]

    def __post_init__(self):
        if self.images.shape[0] != self.labels.shape[0]:
            raise DatasetError(
                f"{self.images.shape[0]} images but {self.labels.shape[0]} labels")

    def __len__(self) -> int:
        return self.images.shape[0]


def load_pair(images_path, labels_path, split: str) -> IdxDataset:
    """Load an images/labels file pair into a flattened, scaled dataset."""
    raw_images = parse_idx(images_path)
    raw_labels = parse_idx(labels_path)
    if raw_images.ndim != 3:
        raise DatasetError(f"{images_path} is not an image file")
    if raw_labels.ndim != 1:
        raise DatasetError(f"{labels_path} is not a label file")
    if raw_images.shape[0] != raw_labels.shape[0]:
        raise DatasetError(
            f"{images_path} has {raw_images.shape[0]} items but "
            f"{labels_path} has {raw_labels.shape[0]}")
    n, rows, cols = raw_images.shape
    images = raw_images.reshape(n, rows * cols).astype(np.float64) / 255.0
    return IdxDataset(images, raw_labels.astype(np.int64), split, (rows, cols))


def _find_file(directory, stem):
    for name in (stem, stem + ".gz"):
        path = os.path.join(directory, name)
        if os.path.exists(path):
            return path
    return None


def resolve_dataset_dir(dataset: str, data_dir: str | None = None) -> str:
    """Map a dataset id (or direct path) to the directory holding its files.

    Ids resolve under data_dir, which defaults to the DRN_DATA_DIR
    environment variable; a path that already contains the files is used
    as-is.
    """
    if os.path.isdir(dataset) and _find_file(dataset, SPLIT_FILES["train"][0]):
        return dataset
    root = data_dir or os.environ.get(DATA_DIR_ENV, ".")
    return os.path.join(root, dataset)


def load_split(directory, split: str) -> IdxDataset:
    images_stem, labels_stem = SPLIT_FILES[split]
    images_path = _find_file(directory, images_stem)
    labels_path = _find_file(directory, labels_stem)
    if images_path is None or labels_path is None:
        raise DatasetError(
            f"missing {split} files in {directory!r} "
            f"(need {images_stem}[.gz] and {labels_stem}[.gz])")
    return load_pair(images_path, labels_path, split)


def dataset_available(dataset: str, data_dir: str | None = None) -> bool:
    directory = resolve_dataset_dir(dataset, data_dir)
    return all(
        _find_file(directory, stem) is not None
        for pair in SPLIT_FILES.values() for stem in pair)
