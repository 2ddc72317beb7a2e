"""Memory set: (hidden state, ground-truth item) pairs with a per-item index."""
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .exceptions import ConfigError, DuplicateSampleError, MemoryFormatError, RecordFormatError
from .storage import MEMORY_MAGIC, read_container, storage_round, write_container
from .utils import as_vector, read_jsonl, write_jsonl

logger = logging.getLogger("general_logger")

SEED_MASK = (1 << 64) - 1


@dataclass(frozen=True)
class MemoryRecord:
    sample_id: int
    vector: object
    item: str


class ItemCatalog:
    """Bidirectional item key <-> dense ItemId map with per-item frequency."""

    def __init__(self, keys, freq):
        self.keys = tuple(keys)
        self._ids = {key: i for i, key in enumerate(self.keys)}
        if len(self._ids) != len(self.keys):
            raise MemoryFormatError("catalog holds duplicate item keys")
        self.freq = np.asarray(freq, dtype=np.int64)
        self.freq.flags.writeable = False

    def __len__(self):
        return len(self.keys)

    def __contains__(self, key):
        return key in self._ids

    def id_of(self, key):
        return self._ids.get(key)

    def key_of(self, item_id):
        return self.keys[item_id]

    def frequency(self, key):
        """|M(v)| for a key, 0 for keys outside the catalog"""
        item_id = self._ids.get(key)
        return 0 if item_id is None else int(self.freq[item_id])

    def __eq__(self, other):
        return (isinstance(other, ItemCatalog) and self.keys == other.keys
                and np.array_equal(self.freq, other.freq))

    __hash__ = None


@dataclass(frozen=True, eq=False)
class MemorySet:
    dim: int
    matrix: np.ndarray
    item_of_row: np.ndarray
    item_index: tuple
    catalog: ItemCatalog
    dtype: str = "f32"
    sq_norms: np.ndarray = field(default=None, repr=False)
    # derived, per-memory results (the global rep table); never the data itself
    derived: dict = field(default_factory=dict, repr=False)

    @property
    def count(self):
        return int(self.matrix.shape[0])

    def __len__(self):
        return self.count

    @property
    def nbytes(self):
        """Bytes the rows occupy in the stored dtype"""
        width = 2 if self.dtype == "f16" else 4
        return self.count * self.dim * width

    def rows_of(self, key):
        item_id = self.catalog.id_of(key)
        return np.empty(0, dtype=np.int64) if item_id is None else self.item_index[item_id]

    def equals(self, other):
        """Bit-level equality of rows, row items and catalog order"""
        return (self.dim == other.dim and self.dtype == other.dtype
                and self.matrix.tobytes() == other.matrix.tobytes()
                and np.array_equal(self.item_of_row, other.item_of_row)
                and self.catalog == other.catalog)


def _freeze(array):
    array.flags.writeable = False
    return array


def assemble_memory(matrix, item_of_row, keys, dim, dtype="f32"):
    """Build the index structures around a row matrix; arrays become read-only"""
    matrix = np.ascontiguousarray(matrix, dtype=np.float32).reshape(-1, dim)
    item_of_row = np.asarray(item_of_row, dtype=np.int64)
    freq = np.bincount(item_of_row, minlength=len(keys)) if len(keys) else np.zeros(0, np.int64)
    if len(freq) != len(keys) or (len(keys) and freq.min() < 1):
        raise MemoryFormatError("every cataloged item needs at least one memory row")

    order = np.argsort(item_of_row, kind="stable")
    bounds = np.cumsum(freq)[:-1]
    item_index = tuple(_freeze(rows) for rows in np.split(order, bounds)) if len(keys) else ()

    sq_norms = np.einsum("ij,ij->i", matrix, matrix, dtype=np.float32)
    return MemorySet(
        dim=dim,
        matrix=_freeze(matrix),
        item_of_row=_freeze(item_of_row),
        item_index=item_index,
        catalog=ItemCatalog(keys, freq),
        dtype=dtype,
        sq_norms=_freeze(sq_norms),
    )


def build_memory(records, dim, dtype="f32"):
    """Build an immutable MemorySet from a finite stream of MemoryRecords.

    Row order equals ingestion order and ItemIds are assigned by first
    appearance. Any bad record rejects the whole build.
    """
    if dim < 1:
        raise ConfigError(f"dim must be positive, got {dim}")
    seen = set()
    keys = []
    ids = {}
    rows = []
    item_of_row = []
    for record in records:
        sample_id = record.sample_id
        if sample_id in seen:
            raise DuplicateSampleError(f"duplicate sample_id {sample_id}")
        seen.add(sample_id)
        rows.append(as_vector(record.vector, dim, f"sample_id {sample_id}"))
        item_id = ids.get(record.item)
        if item_id is None:
            item_id = ids[record.item] = len(keys)
            keys.append(record.item)
        item_of_row.append(item_id)

    matrix = np.stack(rows) if rows else np.zeros((0, dim), dtype=np.float32)
    memory = assemble_memory(storage_round(matrix, dtype), item_of_row, keys, dim, dtype)
    logger.info(f"Built memory: {memory.count} rows, {len(keys)} items, dim {dim}, {dtype}")
    return memory


def save_memory(memory, path):
    return write_container(path, MEMORY_MAGIC, memory.dtype, memory.dim,
                           memory.catalog.keys, memory.item_of_row, memory.matrix)


def load_memory(path):
    container = read_container(path, MEMORY_MAGIC)
    if len(container.labels) and container.labels.max() >= len(container.keys):
        raise MemoryFormatError(f"{path}: row item id outside the catalog")
    memory = assemble_memory(container.matrix, container.labels, container.keys,
                             container.dim, container.dtype)
    logger.info(f"Loaded memory {path}: {memory.count} rows, {len(memory.catalog)} items")
    return memory


def parse_record(obj, where):
    """Turn one decoded JSONL object into a MemoryRecord"""
    try:
        sample_id = obj["sample_id"]
        item = obj["item"]
        vector = obj["vector"]
    except KeyError as e:
        raise RecordFormatError(f"{where}: missing field {e.args[0]!r}") from e
    if isinstance(sample_id, bool) or not isinstance(sample_id, int) or sample_id < 0:
        raise RecordFormatError(f"{where}: sample_id must be an unsigned integer")
    if not isinstance(item, str) or not item:
        raise RecordFormatError(f"{where}: item must be a non-empty string")
    if not isinstance(vector, list):
        raise RecordFormatError(f"{where}: vector must be an array")
    return MemoryRecord(sample_id, vector, item)


def read_records(path):
    for lineno, obj in read_jsonl(path):
        yield parse_record(obj, f"{path}:{lineno}")


def write_records(path, records):
    return write_jsonl(path, (
        {"sample_id": int(r.sample_id), "item": r.item,
         "vector": np.asarray(r.vector, dtype=np.float32).tolist()}
        for r in records
    ))


def reservoir_sample(records, capacity, seed):
    """Uniform fixed-capacity sample of a stream (Algorithm R).

    Each element survives with probability capacity/N. The result is
    returned in stream order, so a memory built from it keeps ingestion order.
    """
    if capacity < 1:
        raise ConfigError(f"capacity must be >= 1, got {capacity}")
    rng = np.random.default_rng(int(seed) & SEED_MASK)
    reservoir = []
    positions = []
    for i, record in enumerate(records):
        if i < capacity:
            reservoir.append(record)
            positions.append(i)
            continue
        j = int(rng.integers(0, i + 1))
        if j < capacity:
            reservoir[j] = record
            positions[j] = i
    order = sorted(range(len(reservoir)), key=positions.__getitem__)
    return [reservoir[k] for k in order]


def capacity_for_fraction(stream_length, fraction):
    if not 0 < fraction <= 1:
        raise ConfigError(f"fraction must be in (0, 1], got {fraction}")
    # round first: 100 * 0.3 is 30.000000000000004 in binary floating point
    return max(1, math.ceil(round(stream_length * fraction, 9)))


@dataclass(frozen=True)
class MemoryStats:
    count: int
    items: int
    dim: int
    dtype: str
    freq_min: int
    freq_median: float
    freq_max: int
    nbytes: int

    def as_dict(self):
        return asdict(self)


def memory_stats(memory):
    freq = memory.catalog.freq
    empty = len(freq) == 0
    return MemoryStats(
        count=memory.count,
        items=len(memory.catalog),
        dim=memory.dim,
        dtype=memory.dtype,
        freq_min=0 if empty else int(freq.min()),
        freq_median=0.0 if empty else float(np.median(freq)),
        freq_max=0 if empty else int(freq.max()),
        nbytes=memory.nbytes,
    )
