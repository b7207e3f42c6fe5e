"""
The weights container format.

Layout (little-endian):

- magic `b"PYRGMWTS"` (8 bytes)
- format version (`uint32`)
- parameter count (`uint32`)
- per parameter: name length (`uint16`), UTF-8 name, rank (`uint8`), one `uint32` per dimension,
  then the row-major `float64` data

A text manifest, one `name shape` line per parameter, is written next to the container.
"""

import struct
from pathlib import Path
from typing import Dict, Tuple, Union

import numpy as np

from pyrgm.errors import CorruptionError, FormatError
from pyrgm.formats import atomic_write

MAGIC = b"PYRGMWTS"
"""The first bytes of every container."""

FORMAT_VERSION = 1
"""The version written by this module, and the only one it reads."""

PathLike = Union[str, Path]


def manifest_path(path: PathLike) -> Path:
    """
    Return the manifest path of a container.

    Arguments:
        path: The container path.

    Returns:
        The same path with a `.manifest.txt` suffix.
    """
    path = Path(path)
    return path.with_name(path.name + ".manifest.txt")


def encode_weights(params: Dict[str, np.ndarray]) -> bytes:
    """
    Encode named arrays into container bytes.

    Arguments:
        params: Arrays by name, in the order they must be stored.

    Returns:
        The encoded bytes.
    """
    chunks = [MAGIC, struct.pack("<II", FORMAT_VERSION, len(params))]
    for name, array in params.items():
        encoded = name.encode("utf-8")
        array = np.ascontiguousarray(array, dtype="<f8")
        chunks.append(struct.pack("<H", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<B", array.ndim))
        chunks.append(struct.pack(f"<{array.ndim}I", *array.shape))
        chunks.append(array.tobytes(order="C"))
    return b"".join(chunks)


class _Reader:
    def __init__(self, data: bytes, source: str) -> None:
        self.data = data
        self.offset = 0
        self.source = source

    def take(self, size: int) -> bytes:
        if self.offset + size > len(self.data):
            raise CorruptionError(f"{self.source}: truncated at byte {len(self.data)}, needed {self.offset + size}")
        chunk = self.data[self.offset : self.offset + size]
        self.offset += size
        return chunk

    def unpack(self, fmt: str) -> Tuple:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def decode_weights(data: bytes, source: str = "<bytes>") -> Dict[str, np.ndarray]:
    """
    Decode container bytes.

    Arguments:
        data: The bytes.
        source: A label for error messages (usually the file path).

    Raises:
        FormatError: When the magic or the version does not match.
        CorruptionError: When the data is truncated, has trailing bytes, or repeats a name.

    Returns:
        Arrays by name, in stored order.
    """
    reader = _Reader(data, source)
    if data[: len(MAGIC)] != MAGIC:
        raise FormatError(f"{source}: not a pyrgm weights file (bad magic)")
    reader.take(len(MAGIC))
    version, count = reader.unpack("<II")
    if version != FORMAT_VERSION:
        raise FormatError(f"{source}: unsupported weights format version {version}, expected {FORMAT_VERSION}")

    params: Dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_length,) = reader.unpack("<H")
        try:
            name = reader.take(name_length).decode("utf-8")
        except UnicodeDecodeError as error:
            raise CorruptionError(f"{source}: parameter name is not UTF-8") from error
        (rank,) = reader.unpack("<B")
        shape = reader.unpack(f"<{rank}I")
        size = int(np.prod(shape, dtype=np.int64))
        values = np.frombuffer(reader.take(size * 8), dtype="<f8").astype(np.float64).reshape(shape)
        if name in params:
            raise CorruptionError(f"{source}: duplicate parameter {name!r}")
        params[name] = values
    if reader.offset != len(data):
        raise CorruptionError(f"{source}: {len(data) - reader.offset} trailing bytes")
    return params


def save_weights(path: PathLike, params: Dict[str, np.ndarray]) -> None:
    """
    Write a container and its manifest.

    Arguments:
        path: The container path.
        params: Arrays by name.
    """
    with atomic_write(path, binary=True) as stream:
        stream.write(encode_weights(params))
    with atomic_write(manifest_path(path)) as stream:
        stream.write(f"# pyrgm weights, format version {FORMAT_VERSION}\n")
        for name, array in params.items():
            shape = "x".join(str(dim) for dim in np.shape(array)) or "scalar"
            stream.write(f"{name} {shape}\n")


def load_weights(path: PathLike) -> Dict[str, np.ndarray]:
    """
    Read a container.

    Arguments:
        path: The container path.

    Raises:
        OSError: When the file cannot be read; the message names the path.

    Returns:
        Arrays by name.
    """
    try:
        data = Path(path).read_bytes()
    except OSError as error:
        raise OSError(f"cannot read weights file {path}: {error.strerror}") from error
    return decode_weights(data, str(path))
