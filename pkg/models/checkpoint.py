"""Binary parameter checkpoints.

Layout, all integers little-endian uint32:
    magic b"HFCK", entry count, then per entry:
    name length, utf-8 name, ndim, dims..., raw float64 little-endian values (row-major).
"""
import struct

from typing import BinaryIO

import numpy as np

from models.parameter_set import ParameterSet

MAGIC = b"HFCK"


class CheckpointError(ValueError):
    pass


def dump_parameters(params: ParameterSet) -> bytes:
    chunks = [MAGIC, struct.pack("<I", len(params))]
    for name, value in params.items():
        encoded = name.encode("utf-8")
        chunks.append(struct.pack("<I", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<I", value.ndim))
        chunks.append(struct.pack(f"<{value.ndim}I", *value.shape))
        chunks.append(np.ascontiguousarray(value, dtype="<f8").tobytes())
    return b"".join(chunks)


def _read(stream: BinaryIO, size: int) -> bytes:
    data = stream.read(size)
    if len(data) != size:
        raise CheckpointError(f"truncated checkpoint: wanted {size} bytes, got {len(data)}")
    return data


def load_parameters_from(stream: BinaryIO) -> ParameterSet:
    if _read(stream, 4) != MAGIC:
        raise CheckpointError("not a parameter checkpoint (bad magic)")
    (count,) = struct.unpack("<I", _read(stream, 4))
    tensors = {}
    for _ in range(count):
        (name_length,) = struct.unpack("<I", _read(stream, 4))
        name = _read(stream, name_length).decode("utf-8")
        (ndim,) = struct.unpack("<I", _read(stream, 4))
        shape = struct.unpack(f"<{ndim}I", _read(stream, 4 * ndim))
        size = int(np.prod(shape)) if shape else 1
        tensors[name] = np.frombuffer(_read(stream, 8 * size), dtype="<f8").reshape(shape).astype(np.float64)
    return ParameterSet(tensors)


def save_parameters(params: ParameterSet, path: str) -> None:
    with open(path, "wb") as file:
        file.write(dump_parameters(params))


def load_parameters(path: str) -> ParameterSet:
    with open(path, "rb") as file:
        return load_parameters_from(file)
