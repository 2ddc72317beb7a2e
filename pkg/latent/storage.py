"""Little-endian binary container used for memory files and rep tables.

Layout::

    magic      4 bytes   b"L2DM" (memory) / b"L2DR" (item rep table)
    version    u16
    dtype      u8        0 = f32, 1 = f16
    dim        u32
    count      u64       rows in the matrix block
    catalog    u64 key count, then per key: u32 byte length + UTF-8 bytes
    labels     u32 x count   (item of each row / support of each item)
    matrix     count x dim, row-major, in the stored dtype
    crc32      u32 over every preceding byte
"""
import io
import logging
import struct
import zlib
from dataclasses import dataclass

import numpy as np

from .exceptions import (
    BadMagicError, ChecksumError, DtypeError, TruncatedFileError, VersionMismatchError,
)

logger = logging.getLogger("general_logger")

FORMAT_VERSION = 1
MEMORY_MAGIC = b"L2DM"
TABLE_MAGIC = b"L2DR"

DTYPE_TAGS = {"f32": 0, "f16": 1}
STORAGE_DTYPES = {"f32": np.dtype("<f4"), "f16": np.dtype("<f2")}

_HEADER = struct.Struct("<4sHBIQ")
_U32 = struct.Struct("<I")
_U64 = struct.Struct("<Q")


@dataclass(frozen=True)
class Container:
    dtype: str
    dim: int
    keys: tuple
    labels: np.ndarray
    matrix: np.ndarray


def storage_round(matrix, dtype):
    """Round a float32 matrix through the storage dtype, returning float32"""
    if dtype not in STORAGE_DTYPES:
        raise DtypeError(f"unknown storage dtype {dtype!r}")
    matrix = np.ascontiguousarray(matrix, dtype=np.float32)
    if dtype == "f32":
        return matrix
    return matrix.astype(np.float16).astype(np.float32)


def encode_container(magic, dtype, dim, keys, labels, matrix):
    """Serialize a container to bytes (CRC32 trailer included)"""
    if dtype not in DTYPE_TAGS:
        raise DtypeError(f"unknown storage dtype {dtype!r}")
    count = int(matrix.shape[0])
    buf = io.BytesIO()
    buf.write(_HEADER.pack(magic, FORMAT_VERSION, DTYPE_TAGS[dtype], dim, count))
    buf.write(_U64.pack(len(keys)))
    for key in keys:
        raw = key.encode("utf-8")
        buf.write(_U32.pack(len(raw)))
        buf.write(raw)
    buf.write(np.ascontiguousarray(labels, dtype="<u4").tobytes())
    buf.write(np.ascontiguousarray(matrix).astype(STORAGE_DTYPES[dtype]).tobytes())
    payload = buf.getvalue()
    return payload + _U32.pack(zlib.crc32(payload) & 0xFFFFFFFF)


def write_container(path, magic, dtype, dim, keys, labels, matrix):
    data = encode_container(magic, dtype, dim, keys, labels, matrix)
    with open(path, "wb") as f:
        f.write(data)
    logger.info(f"Saved {magic.decode()} container to {path} ({len(data)} bytes, {dtype})")
    return len(data)


class _Reader:
    def __init__(self, data, path):
        self.data = data
        self.path = path
        self.pos = 0

    def take(self, size, what):
        end = self.pos + size
        if end > len(self.data):
            raise TruncatedFileError(f"{self.path}: truncated while reading {what}")
        chunk = self.data[self.pos:end]
        self.pos = end
        return chunk


def decode_container(data, magic, path="<bytes>"):
    """Parse container bytes, validating magic, version, length and CRC32"""
    if len(data) < len(magic):
        raise TruncatedFileError(f"{path}: file shorter than its magic")
    if data[:len(magic)] != magic:
        raise BadMagicError(f"{path}: bad magic {bytes(data[:4])!r}, expected {magic!r}")
    reader = _Reader(data, path)
    _, version, tag, dim, count = _HEADER.unpack(reader.take(_HEADER.size, "header"))
    if version != FORMAT_VERSION:
        raise VersionMismatchError(f"{path}: format version {version}, expected {FORMAT_VERSION}")
    dtype = next((name for name, t in DTYPE_TAGS.items() if t == tag), None)
    if dtype is None:
        raise DtypeError(f"{path}: unknown dtype tag {tag}")

    (key_count,) = _U64.unpack(reader.take(_U64.size, "catalog size"))
    keys = []
    for i in range(key_count):
        (length,) = _U32.unpack(reader.take(_U32.size, f"catalog key {i}"))
        raw = reader.take(length, f"catalog key {i}")
        try:
            keys.append(raw.decode("utf-8"))
        except UnicodeDecodeError as e:
            # a valid file never holds bad UTF-8; treat as corruption
            raise ChecksumError(f"{path}: catalog key {i} is not UTF-8") from e

    labels = np.frombuffer(reader.take(4 * count, "labels"), dtype="<u4").astype(np.int64)
    storage = STORAGE_DTYPES[dtype]
    raw_matrix = reader.take(storage.itemsize * count * dim, "matrix")
    (stored_crc,) = _U32.unpack(reader.take(_U32.size, "checksum"))
    if reader.pos != len(data):
        raise ChecksumError(f"{path}: {len(data) - reader.pos} trailing bytes after checksum")
    actual_crc = zlib.crc32(data[:reader.pos - _U32.size]) & 0xFFFFFFFF
    if actual_crc != stored_crc:
        raise ChecksumError(f"{path}: CRC32 {actual_crc:08x} != stored {stored_crc:08x}")

    matrix = np.frombuffer(raw_matrix, dtype=storage).astype(np.float32).reshape(count, dim)
    return Container(dtype=dtype, dim=dim, keys=tuple(keys), labels=labels, matrix=matrix)


def read_container(path, magic):
    with open(path, "rb") as f:
        data = f.read()
    return decode_container(data, magic, path)
