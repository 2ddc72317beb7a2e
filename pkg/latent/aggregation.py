"""Per-item representations: global means and query-local means."""
import logging
from dataclasses import dataclass

import numpy as np

from .exceptions import DtypeError, EmptyMemoryError, MemoryFormatError
from .memory import ItemCatalog
from .storage import TABLE_MAGIC, read_container, write_container

logger = logging.getLogger("general_logger")

# rows gathered per reduceat call when building the global table
GROUP_BLOCK_ROWS = 65536


@dataclass(frozen=True)
class NeighborSet:
    """Top-M memory rows for one query, ascending by (distance, row)."""
    rows: np.ndarray
    distances: np.ndarray

    def __len__(self):
        return int(self.rows.shape[0])


@dataclass(frozen=True, eq=False)
class ItemRepTable:
    dim: int
    item_ids: np.ndarray
    reps: np.ndarray
    support: np.ndarray
    catalog: ItemCatalog = None

    def __len__(self):
        return int(self.item_ids.shape[0])

    @property
    def nbytes(self):
        return int(self.reps.nbytes)


def _empty_table(dim, catalog):
    return ItemRepTable(dim, np.zeros(0, np.int64), np.zeros((0, dim), np.float32),
                        np.zeros(0, np.int64), catalog)


def _group_means(matrix, rows, item_of_row, dim, catalog):
    """Mean of the given rows per item, accumulated in float64.

    Rows are ordered by (item, row) before summing, so the same row set gives
    bit-identical means however it was produced.
    """
    rows = np.asarray(rows, dtype=np.int64)
    if rows.size == 0:
        return _empty_table(dim, catalog)
    items = item_of_row[rows]
    order = np.lexsort((rows, items))
    rows, items = rows[order], items[order]
    item_ids, starts, support = np.unique(items, return_index=True, return_counts=True)

    means = np.empty((len(item_ids), dim), dtype=np.float32)
    first = 0
    while first < len(item_ids):
        # take whole items until the block is full (always at least one item)
        row_start = starts[first]
        last = int(np.searchsorted(starts, row_start + GROUP_BLOCK_ROWS, side="right"))
        last = max(last, first + 1)
        row_end = starts[last] if last < len(item_ids) else len(rows)
        block = matrix[rows[row_start:row_end]]
        sums = np.add.reduceat(block, starts[first:last] - row_start, axis=0, dtype=np.float64)
        means[first:last] = sums / support[first:last, None]
        first = last

    means.flags.writeable = False
    return ItemRepTable(dim, item_ids, means, support.astype(np.int64), catalog)


def global_representations(memory):
    """h_v = mean of every memory row labelled v, for every cataloged item"""
    if memory.count == 0:
        raise EmptyMemoryError()
    table = _group_means(memory.matrix, np.arange(memory.count), memory.item_of_row,
                         memory.dim, memory.catalog)
    logger.info(f"Global representations: {len(table)} items over {memory.count} rows")
    return table


def cached_global_representations(memory):
    """Global table computed once per memory and kept alongside it"""
    table = memory.derived.get("global")
    if table is None:
        table = memory.derived.setdefault("global", global_representations(memory))
    return table


def local_representations(memory, neighbors):
    """Per-item means over the query's neighbor rows only"""
    return _group_means(memory.matrix, neighbors.rows, memory.item_of_row,
                        memory.dim, memory.catalog)


def save_rep_table(table, path):
    """Export a whole-catalog table; reps are always stored f32 whatever the memory dtype"""
    if table.catalog is None:
        raise MemoryFormatError("a rep table needs its catalog to be exported")
    if not np.array_equal(table.item_ids, np.arange(len(table.catalog))):
        raise MemoryFormatError("only a table covering the whole catalog can be exported")
    return write_container(path, TABLE_MAGIC, "f32", table.dim, table.catalog.keys,
                           table.support, table.reps)


def load_rep_table(path):
    container = read_container(path, TABLE_MAGIC)
    if container.dtype != "f32":
        # exported means must equal the ones local mode recomputes from memory
        raise DtypeError(f"{path}: rep tables must be stored f32, found {container.dtype}")
    if len(container.keys) != len(container.labels):
        raise MemoryFormatError(f"{path}: {len(container.keys)} keys for {len(container.labels)} rows")
    if len(container.labels) and container.labels.min() < 1:
        raise MemoryFormatError(f"{path}: rep table holds an item with zero support")
    catalog = ItemCatalog(container.keys, container.labels)
    reps = container.matrix
    reps.flags.writeable = False
    logger.info(f"Loaded rep table {path}: {len(catalog)} items, dim {container.dim}")
    return ItemRepTable(container.dim, np.arange(len(catalog), dtype=np.int64), reps,
                        container.labels, catalog)
