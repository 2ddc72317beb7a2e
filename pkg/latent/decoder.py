"""Top-K item decoding by L2 matching against memory-derived representations."""
import logging
import time
import traceback
from collections import defaultdict
from contextlib import contextmanager, nullcontext
from dataclasses import dataclass

import numpy as np

from .aggregation import NeighborSet, local_representations
from .exceptions import ConfigError, DimensionMismatchError, EmptyMemoryError, LatentError, RecordFormatError
from .utils import as_vector, format_score, ordered_map, read_jsonl

logger = logging.getLogger("general_logger")

MODES = ("global", "local")
BACKFILLS = ("global-backfill", "truncate")
DEFAULT_EPSILON = 1e-9
DEFAULT_BLOCK_ROWS = 65536

_F32_EPS = float(np.finfo(np.float32).eps)


@dataclass(frozen=True)
class Query:
    query_id: int
    vector: object


@dataclass(frozen=True)
class DecodeConfig:
    mode: str = "global"
    K: int = 20
    M: int = None
    backfill: str = "global-backfill"
    epsilon: float = DEFAULT_EPSILON
    block_rows: int = DEFAULT_BLOCK_ROWS

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.backfill not in BACKFILLS:
            raise ConfigError(f"backfill must be one of {BACKFILLS}, got {self.backfill!r}")
        if self.K < 1:
            raise ConfigError(f"K must be >= 1, got {self.K}")
        if self.mode == "local" and (self.M is None or self.M < 1):
            raise ConfigError("local mode needs M >= 1")
        if not self.epsilon > 0:
            raise ConfigError(f"epsilon must be positive, got {self.epsilon}")
        if self.block_rows < 1:
            raise ConfigError(f"block_rows must be >= 1, got {self.block_rows}")


@dataclass(frozen=True)
class RankedEntry:
    item: int
    score: float
    distance: float


@dataclass(frozen=True)
class RankedList:
    """Top-K answer for one query.

    Entries are ordered by ascending distance, ties by ascending ItemId. In
    local mode with backfill, the trailing ``backfilled`` entries come from
    the global ranking and always follow every locally ranked entry.
    """
    query_id: int
    entries: tuple
    mode: str = "global"
    backfilled: int = 0

    def __len__(self):
        return len(self.entries)

    @property
    def items(self):
        return [e.item for e in self.entries]

    def rank_of(self, item_id):
        """1-based rank of an item, None when absent"""
        for rank, entry in enumerate(self.entries, start=1):
            if entry.item == item_id:
                return rank
        return None


@dataclass(frozen=True)
class DecodeFailure:
    query_id: object
    code: str
    message: str


class PhaseTimer:
    """Accumulates wall time per decode phase on a monotonic clock."""

    def __init__(self):
        self.totals = defaultdict(float)

    @contextmanager
    def phase(self, name):
        start = time.perf_counter()
        try:
            yield
        finally:
            self.totals[name] += time.perf_counter() - start


def _phase(timer, name):
    return timer.phase(name) if timer is not None else nullcontext()


def l2_distance(a, b):
    a = np.asarray(a, dtype=np.float32)
    b = np.asarray(b, dtype=np.float32)
    if a.shape != b.shape or a.ndim != 1:
        raise DimensionMismatchError(f"vector lengths differ: {a.shape} vs {b.shape}")
    diff = a.astype(np.float64) - b.astype(np.float64)
    return float(np.sqrt(diff @ diff))


def similarity_score(distance, epsilon=DEFAULT_EPSILON):
    """S = 1 / (distance + epsilon); finite at distance 0"""
    if distance < 0:
        raise ValueError(f"distance must be non-negative, got {distance}")
    return 1.0 / (distance + epsilon)


def l2_distances_direct(matrix, q):
    """Exact distances from q to every row by direct subtraction (float64)"""
    diff = np.asarray(matrix, dtype=np.float64) - np.asarray(q, dtype=np.float64)
    return np.sqrt(np.einsum("ij,ij->i", diff, diff))


def squared_distances_expanded(block, block_sq_norms, q, q_sq_norm):
    """||x||^2 + ||q||^2 - 2 x.q over a row block, float32"""
    sq = block_sq_norms - np.float32(2.0) * (block @ q) + np.float32(q_sq_norm)
    return np.maximum(sq, np.float32(0.0))


def _query_vector(memory_dim, query):
    return as_vector(query.vector, memory_dim, f"query {query.query_id}")


def top_m_neighbors(memory, query, M, block_rows=DEFAULT_BLOCK_ROWS):
    """Exact top-M rows by L2 distance, ties broken by ascending row index.

    Rows are scanned in blocks with the expanded distance form; every row
    whose approximate distance is within the float32 error bound of the
    running M-th best is kept and re-scored exactly, so the answer equals a
    full sort on exact distances.
    """
    if memory.count == 0:
        raise EmptyMemoryError()
    if M < 1:
        raise ConfigError(f"M must be >= 1, got {M}")
    q = _query_vector(memory.dim, query)
    n = memory.count

    if M >= n:
        rows = np.arange(n, dtype=np.int64)
    else:
        q_sq = float(q.astype(np.float64) @ q.astype(np.float64))
        max_sq = float(memory.sq_norms.max())
        tol = np.float32(4.0 * memory.dim * _F32_EPS * (q_sq + max_sq) + 1e-30)
        rows = np.zeros(0, dtype=np.int64)
        approx = np.zeros(0, dtype=np.float32)
        for start in range(0, n, block_rows):
            end = min(start + block_rows, n)
            block_sq = squared_distances_expanded(
                memory.matrix[start:end], memory.sq_norms[start:end], q, q_sq)
            rows = np.concatenate([rows, np.arange(start, end, dtype=np.int64)])
            approx = np.concatenate([approx, block_sq])
            if approx.shape[0] > M:
                kth = np.partition(approx, M - 1)[M - 1]
                keep = approx <= kth + tol
                rows, approx = rows[keep], approx[keep]

    exact = l2_distances_direct(memory.matrix[rows], q)
    order = np.lexsort((rows, exact))[:M]
    return NeighborSet(rows=rows[order], distances=exact[order])


def rank_table(q, table, limit, epsilon, exclude=()):
    """The limit rep-table items nearest to q as RankedEntries, ties by ItemId"""
    if limit <= 0 or len(table) == 0:
        return []
    distances = l2_distances_direct(table.reps, q)
    item_ids = table.item_ids
    if len(exclude):
        keep = ~np.isin(item_ids, np.asarray(list(exclude), dtype=np.int64))
        distances, item_ids = distances[keep], item_ids[keep]
    order = np.lexsort((item_ids, distances))[:limit]
    return [RankedEntry(int(item_ids[i]), similarity_score(float(distances[i]), epsilon),
                        float(distances[i])) for i in order]


def decode_global(query, table, K, epsilon=DEFAULT_EPSILON, timer=None):
    if len(table) == 0:
        raise EmptyMemoryError("empty representation table")
    if K < 1:
        raise ConfigError(f"K must be >= 1, got {K}")
    q = _query_vector(table.dim, query)
    with _phase(timer, "ranking"):
        entries = rank_table(q, table, K, epsilon)
    return RankedList(query.query_id, tuple(entries), mode="global")


def decode_local(query, memory, global_table, cfg, timer=None):
    if cfg.mode != "local":
        raise ConfigError("decode_local needs a local-mode DecodeConfig")
    if cfg.M is None or cfg.M < 1:
        raise ConfigError("local mode needs M >= 1")
    with _phase(timer, "neighbor_scan"):
        neighbors = top_m_neighbors(memory, query, cfg.M, cfg.block_rows)
    with _phase(timer, "aggregation"):
        local_table = local_representations(memory, neighbors)
    q = _query_vector(memory.dim, query)
    with _phase(timer, "ranking"):
        entries = rank_table(q, local_table, cfg.K, cfg.epsilon)
        backfilled = 0
        if len(entries) < cfg.K and cfg.backfill == "global-backfill" and global_table is not None:
            listed = [e.item for e in entries]
            extra = rank_table(q, global_table, cfg.K - len(entries), cfg.epsilon, exclude=listed)
            entries.extend(extra)
            backfilled = len(extra)
    logger.debug(f"Query {query.query_id}: {len(neighbors)} neighbors, "
                 f"{len(local_table)} local items, {backfilled} backfilled")
    return RankedList(query.query_id, tuple(entries), mode="local", backfilled=backfilled)


def decode(query, memory, global_table, cfg, timer=None):
    """Decode one query in the configured mode"""
    if cfg.mode == "local":
        return decode_local(query, memory, global_table, cfg, timer)
    return decode_global(query, global_table, cfg.K, cfg.epsilon, timer)


def _decode_or_failure(query, memory, global_table, cfg):
    query_id = getattr(query, "query_id", None)
    try:
        return decode(query, memory, global_table, cfg)
    except LatentError as e:
        logger.warning(f"Query {query_id} failed: {e}")
        return DecodeFailure(query_id, e.code, str(e))
    except Exception as e:
        logger.error(f"Query {query_id} raised: {str(e)}")
        logger.error(traceback.format_exc())
        return DecodeFailure(query_id, "internal", str(e))


def batch_decode(queries, memory, global_table, cfg, threads=1):
    """Decode every query; output order matches input order.

    Failed queries yield a DecodeFailure in place rather than aborting.
    """
    results = ordered_map(lambda q: _decode_or_failure(q, memory, global_table, cfg),
                          queries, threads)
    failures = sum(isinstance(r, DecodeFailure) for r in results)
    logger.info(f"Decoded {len(results) - failures} queries ({failures} failed, "
                f"mode={cfg.mode}, K={cfg.K}, threads={threads})")
    return results


def check_query_id(query_id, where):
    if isinstance(query_id, bool) or not isinstance(query_id, int) or query_id < 0:
        raise RecordFormatError(f"{where}: query_id must be an unsigned integer")
    return query_id


def parse_query(obj, where):
    try:
        query_id = obj["query_id"]
        vector = obj["vector"]
    except KeyError as e:
        raise RecordFormatError(f"{where}: missing field {e.args[0]!r}") from e
    return Query(check_query_id(query_id, where), vector)


def read_queries(path):
    return [parse_query(obj, f"{path}:{lineno}") for lineno, obj in read_jsonl(path)]


def ranked_record(ranked, catalog):
    """Output record for one RankedList (scores at 9 significant digits)"""
    record = {
        "query_id": ranked.query_id,
        "mode": ranked.mode,
        "ranked": [{"item_key": catalog.key_of(e.item), "score": format_score(e.score)}
                   for e in ranked.entries],
    }
    if ranked.mode == "local":
        record["backfilled"] = ranked.backfilled
    return record


def failure_record(failure):
    return {"query_id": failure.query_id,
            "error": {"code": failure.code, "message": failure.message}}


def result_record(result, catalog):
    if isinstance(result, DecodeFailure):
        return failure_record(result)
    return ranked_record(result, catalog)
