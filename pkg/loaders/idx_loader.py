import struct

from typing import Tuple

import numpy as np

from data.dataset import Dataset

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801


class IdxLoadError(ValueError):
    """Raised for malformed IDX files; no partial dataset is ever returned."""


def _read_idx(path: str, expected_magic: int, expected_ndim: int) -> Tuple[Tuple[int, ...], bytes]:
    try:
        with open(path, "rb") as file:
            raw = file.read()
    except FileNotFoundError as e:
        raise IdxLoadError(f"IDX file not found: {path}") from e

    if len(raw) < 4:
        raise IdxLoadError(f"truncated IDX header: {path}")
    (magic,) = struct.unpack(">I", raw[:4])
    if magic != expected_magic:
        raise IdxLoadError(f"wrong magic number {magic:#010x} in {path}, expected {expected_magic:#010x}")

    header_size = 4 + 4 * expected_ndim
    if len(raw) < header_size:
        raise IdxLoadError(f"truncated IDX header: {path}")
    dims = struct.unpack(f">{expected_ndim}I", raw[4:header_size])
    payload = raw[header_size:]
    if len(payload) != int(np.prod(dims)):
        raise IdxLoadError(f"{path}: header announces {int(np.prod(dims))} bytes, file holds {len(payload)}")
    return dims, payload


def load_idx(images_path: str, labels_path: str, num_classes: int = 10) -> Dataset:
    """Read an IDX image/label pair (e.g. Fashion-MNIST); pixels map from [0, 255] to [-1, 1]."""
    image_dims, image_bytes = _read_idx(images_path, IMAGES_MAGIC, 3)
    label_dims, label_bytes = _read_idx(labels_path, LABELS_MAGIC, 1)

    count, rows, cols = image_dims
    if label_dims[0] != count:
        raise IdxLoadError(f"{count} images but {label_dims[0]} labels")

    pixels = np.frombuffer(image_bytes, dtype=np.uint8).reshape(count, rows * cols).astype(np.float64)
    labels = np.frombuffer(label_bytes, dtype=np.uint8).astype(np.int64)
    if labels.size and labels.max() >= num_classes:
        raise IdxLoadError(f"label {labels.max()} out of range for {num_classes} classes")
    try:
        return Dataset(pixels / 127.5 - 1.0, labels, num_classes)
    except ValueError as e:
        raise IdxLoadError(str(e)) from e
