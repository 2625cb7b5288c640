"""Datasets: IDX files, synthetic Gaussian blobs, and current encoding.

Inputs are encoded as constant currents equal to the pixel intensity
scaled to [0, 1], held for every timestep.
"""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from hosnn.errors import BadMagicError, ConfigError, CorruptFileError, CountMismatchError

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


@dataclass
class Dataset:
    x: np.ndarray  # [N, dim] currents in [0, 1]
    y: np.ndarray  # [N] labels in [0, class_count)
    class_count: int
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=int)
        if len(self.x) != len(self.y):
            raise CountMismatchError(f"{len(self.x)} inputs but {len(self.y)} labels")
        if self.x.size and (self.x.min() < 0 or self.x.max() > 1):
            raise ConfigError("encoded currents must lie in [0, 1]")
        if self.y.size and (self.y.min() < 0 or self.y.max() >= self.class_count):
            raise ConfigError("labels out of range")

    def __len__(self):
        return len(self.y)

    @property
    def dim(self) -> int:
        return self.x.shape[1]

    def subset(self, idx) -> "Dataset":
        return Dataset(self.x[idx], self.y[idx], self.class_count, dict(self.meta))

    def head(self, n: int) -> "Dataset":
        return self.subset(slice(0, n))


def _read_bytes(path) -> bytes:
    path = Path(path)
    raw = path.read_bytes()
    if raw[:2] == b"\x1f\x8b":
        try:
            raw = gzip.decompress(raw)
        except (OSError, EOFError) as exc:
            raise CorruptFileError(f"{path}: {exc}") from exc
    return raw


def _parse_idx(raw: bytes, expected_magic: int, name: str) -> np.ndarray:
    if len(raw) < 4:
        raise CorruptFileError(f"{name}: file too short for an IDX header")
    (magic,) = struct.unpack(">I", raw[:4])
    if magic != expected_magic:
        raise BadMagicError(f"{name}: magic 0x{magic:08x}, expected 0x{expected_magic:08x}")
    ndim = magic & 0xFF
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise CorruptFileError(f"{name}: truncated header")
    dims = struct.unpack(f">{ndim}I", raw[4:header])
    size = int(np.prod(dims))
    if len(raw) - header < size:
        raise CorruptFileError(f"{name}: payload has {len(raw) - header} bytes, header promises {size}")
    return np.frombuffer(raw, dtype=np.uint8, count=size, offset=header).reshape(dims)


def load_idx(images_path, labels_path, class_count: int = 10) -> Dataset:
    """Read an IDX image/label pair (optionally gzipped); pixels become x / 255."""
    images = _parse_idx(_read_bytes(images_path), IDX_IMAGES_MAGIC, str(images_path))
    labels = _parse_idx(_read_bytes(labels_path), IDX_LABELS_MAGIC, str(labels_path))
    if len(images) != len(labels):
        raise CountMismatchError(f"{len(images)} images but {len(labels)} labels")
    x = images.reshape(len(images), -1).astype(float) / 255.0
    return Dataset(x, labels.astype(int), class_count, {"source": "idx", "shape": images.shape[1:], "scale": 1 / 255})


def write_idx(path, array, compress: bool = False) -> None:
    """Write a uint8 array as IDX (3-D images or 1-D labels)."""
    arr = np.asarray(array, dtype=np.uint8)
    magic = 0x00000800 | arr.ndim
    payload = struct.pack(">I", magic) + struct.pack(f">{arr.ndim}I", *arr.shape) + arr.tobytes()
    if compress:
        payload = gzip.compress(payload, mtime=0)
    Path(path).write_bytes(payload)


def synth_blobs(n_classes: int = 2, n_per_class: int = 100, dim: int = 20, separation: float = 4.0, seed: int = 0) -> Dataset:
    """Gaussian clusters with unit spread, squashed into [0, 1] by a logistic.

    Class centres sit at distance ``separation`` from the origin along
    random directions; ``separation=0`` makes every class the same cloud.
    """
    if n_classes < 1 or n_per_class < 1 or dim < 1:
        raise ConfigError("blob sizes must be positive")
    rng = np.random.default_rng(seed)
    dirs = rng.standard_normal((n_classes, dim))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    centres = separation * dirs
    y = np.repeat(np.arange(n_classes), n_per_class)
    z = centres[y] + rng.standard_normal((len(y), dim))
    x = 1.0 / (1.0 + np.exp(-z / 2.0))
    order = rng.permutation(len(y))
    return Dataset(x[order], y[order], n_classes, {"source": "blobs", "separation": separation, "seed": seed})


def train_test_split(ds: Dataset, test_fraction: float = 0.25, seed: int = 0):
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(ds))
    n_test = int(round(test_fraction * len(ds)))
    return ds.subset(order[n_test:]), ds.subset(order[:n_test])


FASHION_DIR = Path(__file__).resolve().parents[2] / "data"


def load_fashion_subset(split: str = "train", root=None) -> Dataset:
    """FashionMNIST subset shipped in ``data/`` (see scripts/build_fashion_subset.py)."""
    root = Path(root) if root is not None else FASHION_DIR
    return load_idx(root / f"fashion-{split}-images-idx3-ubyte.gz", root / f"fashion-{split}-labels-idx1-ubyte.gz")
