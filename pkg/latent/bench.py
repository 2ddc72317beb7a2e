"""Synthetic hidden-state data and decode latency benchmarks."""
import logging
import os
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .aggregation import cached_global_representations
from .decoder import DecodeFailure, PhaseTimer, Query, batch_decode, decode, top_m_neighbors
from .evaluation import EvalSample
from .exceptions import BenchmarkError, ConfigError
from .memory import SEED_MASK, MemoryRecord, assemble_memory
from .utils import ordered_map

logger = logging.getLogger("general_logger")

PHASES = ("neighbor_scan", "aggregation", "ranking")
MIN_REPETITIONS = 3


@dataclass(frozen=True)
class SynthSpec:
    num_items: int
    dim: int
    samples_per_item: int
    noise_sigma: float = 0.0
    query_count: int = 0
    seed: int = 42
    # noise_sigma is a multiple of the mean nearest-centroid distance
    sigma_relative: bool = False
    # sub-centroids per item; rows of an item are spread over its aspects
    aspects_per_item: int = 1

    def __post_init__(self):
        if self.num_items < 2:
            raise ConfigError(f"num_items must be >= 2, got {self.num_items}")
        if self.dim < 2:
            raise ConfigError(f"dim must be >= 2, got {self.dim}")
        if self.samples_per_item < 1:
            raise ConfigError(f"samples_per_item must be >= 1, got {self.samples_per_item}")
        if self.noise_sigma < 0:
            raise ConfigError(f"noise_sigma must be non-negative, got {self.noise_sigma}")
        if self.query_count < 0:
            raise ConfigError(f"query_count must be non-negative, got {self.query_count}")
        if self.aspects_per_item < 1:
            raise ConfigError(f"aspects_per_item must be >= 1, got {self.aspects_per_item}")


@dataclass(frozen=True)
class SynthData:
    keys: tuple
    centroids: np.ndarray      # items x aspects x dim
    sigma: float
    matrix: np.ndarray
    item_of_row: np.ndarray
    samples: list


def item_key(item):
    return f"item-{item:05d}"


def mean_centroid_separation(centers):
    """Mean distance from each center to its nearest other center"""
    sq = np.einsum("ij,ij->i", centers, centers)
    d2 = sq[:, None] + sq[None, :] - 2.0 * centers @ centers.T
    np.fill_diagonal(d2, np.inf)
    return float(np.sqrt(np.maximum(d2.min(axis=1), 0.0)).mean())


def synth_data(spec):
    """Gaussian clusters around centroids drawn uniformly in the unit hypercube"""
    rng = np.random.default_rng(int(spec.seed) & SEED_MASK)
    V, A, d = spec.num_items, spec.aspects_per_item, spec.dim
    centroids = rng.random((V, A, d))
    sigma = spec.noise_sigma
    if spec.sigma_relative:
        sigma *= mean_centroid_separation(centroids.mean(axis=1))

    item_of_row = np.repeat(np.arange(V, dtype=np.int64), spec.samples_per_item)
    aspect_of_row = np.tile(np.arange(spec.samples_per_item) % A, V)
    noise = rng.normal(0.0, 1.0, size=(len(item_of_row), d)) * sigma
    matrix = (centroids[item_of_row, aspect_of_row] + noise).astype(np.float32)

    query_items = rng.integers(0, V, size=spec.query_count)
    query_aspects = rng.integers(0, A, size=spec.query_count)
    query_noise = rng.normal(0.0, 1.0, size=(spec.query_count, d)) * sigma
    query_vectors = (centroids[query_items, query_aspects] + query_noise).astype(np.float32)
    samples = [EvalSample(Query(i, query_vectors[i]), item_key(int(v)))
               for i, v in enumerate(query_items)]

    logger.info(f"Synthesized {len(matrix)} rows over {V} items (dim {d}, sigma {sigma:.6g}, "
                f"{A} aspects/item) and {spec.query_count} queries")
    return SynthData(tuple(item_key(v) for v in range(V)), centroids, sigma, matrix,
                     item_of_row, samples)


def synth_dataset(spec):
    """(MemorySet, eval samples); deterministic given spec.seed"""
    data = synth_data(spec)
    memory = assemble_memory(data.matrix, data.item_of_row, data.keys, spec.dim)
    return memory, data.samples


def synth_records(data):
    for row, vector in enumerate(data.matrix):
        yield MemoryRecord(row, vector, data.keys[data.item_of_row[row]])


@dataclass
class LatencyReport:
    threads: int
    queries: int
    repetitions: int
    mode: str
    phase_seconds: dict = field(default_factory=dict)
    p50_ms: float = 0.0
    p95_ms: float = 0.0
    qps: float = 0.0
    resident_bytes: int = 0
    outputs_identical: bool = None

    def as_record(self):
        return asdict(self)


def _timed_decode(query, memory, table, cfg):
    timer = PhaseTimer()
    start = time.perf_counter()
    try:
        result = decode(query, memory, table, cfg, timer)
    except Exception as e:
        result = DecodeFailure(query.query_id, getattr(e, "code", "internal"), str(e))
    return result, time.perf_counter() - start, timer.totals


def bench_decode(memory, queries, cfg, repetitions, threads=1, verify=True):
    """Latency of decoding every query, repeated; the first repetition is warm-up.

    With verify, the benchmarked results are compared with an uninstrumented
    batch_decode of the same queries.
    """
    if repetitions < MIN_REPETITIONS:
        raise BenchmarkError(f"repetitions >= {MIN_REPETITIONS} required, got {repetitions}")
    table = cached_global_representations(memory)
    queries = list(queries)

    latencies = []
    phases = {name: 0.0 for name in PHASES}
    wall = 0.0
    results = []
    for rep in range(repetitions):
        start = time.perf_counter()
        timed = ordered_map(lambda q: _timed_decode(q, memory, table, cfg), queries, threads)
        elapsed = time.perf_counter() - start
        results = [r for r, _, _ in timed]
        if rep == 0:
            continue
        wall += elapsed
        for _, seconds, totals in timed:
            latencies.append(seconds)
            for name, value in totals.items():
                phases[name] += value

    measured = len(latencies)
    report = LatencyReport(
        threads=threads,
        queries=len(queries),
        repetitions=repetitions,
        mode=cfg.mode,
        phase_seconds={name: (total / measured if measured else 0.0) for name, total in phases.items()},
        p50_ms=float(np.percentile(latencies, 50) * 1000) if measured else 0.0,
        p95_ms=float(np.percentile(latencies, 95) * 1000) if measured else 0.0,
        qps=measured / wall if wall > 0 else 0.0,
        resident_bytes=int(memory.matrix.nbytes + memory.sq_norms.nbytes + table.nbytes),
    )
    if verify:
        reference = batch_decode(queries, memory, table, cfg, threads=1)
        report.outputs_identical = reference == results
    logger.info(f"Bench ({cfg.mode}, threads={threads}): p50 {report.p50_ms:.3f} ms, "
                f"p95 {report.p95_ms:.3f} ms, {report.qps:.1f} q/s")
    return report


def default_thread_counts():
    return sorted({1, os.cpu_count() or 1})


def random_memory(rows, dim, seed, items=100):
    rng = np.random.default_rng(int(seed) & SEED_MASK)
    matrix = rng.random((rows, dim), dtype=np.float32)
    item_of_row = np.arange(rows, dtype=np.int64) % items
    keys = tuple(item_key(v) for v in range(min(items, rows)))
    return assemble_memory(matrix, item_of_row, keys, dim)


def scan_scaling(base_rows, dim, M=50, queries=5, repetitions=MIN_REPETITIONS, seed=42,
                 block_rows=65536):
    """Mean per-query neighbor-scan seconds at N, 2N and 4N rows"""
    if repetitions < MIN_REPETITIONS:
        raise BenchmarkError(f"repetitions >= {MIN_REPETITIONS} required, got {repetitions}")
    rng = np.random.default_rng(int(seed) & SEED_MASK)
    sample_queries = [Query(i, v) for i, v in enumerate(rng.random((queries, dim), dtype=np.float32))]
    timings = []
    for factor in (1, 2, 4):
        memory = random_memory(base_rows * factor, dim, seed + factor)
        samples = []
        for rep in range(repetitions):
            start = time.perf_counter()
            for q in sample_queries:
                top_m_neighbors(memory, q, M, block_rows)
            if rep:
                samples.append((time.perf_counter() - start) / queries)
        timings.append((memory.count, float(np.median(samples))))
        logger.info(f"Scan at N={memory.count}: {timings[-1][1] * 1000:.3f} ms/query")
    return timings


def scales_linearly(timings, band=1.5):
    """True when per-row scan cost stays within band of the smallest N's"""
    base_n, base_t = timings[0]
    per_row = base_t / base_n
    return all(1 / band <= (t / n) / per_row <= band for n, t in timings)


def format_latency_table(reports):
    header = (f"{'threads':>7} {'queries':>7} {'mode':>6} {'scan_ms':>9} {'agg_ms':>9} "
              f"{'rank_ms':>9} {'p50_ms':>9} {'p95_ms':>9} {'q/s':>10} {'resident_MB':>11} {'identical':>9}")
    lines = [header]
    for r in reports:
        ph = r.phase_seconds
        lines.append(
            f"{r.threads:>7} {r.queries:>7} {r.mode:>6} {ph.get('neighbor_scan', 0) * 1000:>9.3f} "
            f"{ph.get('aggregation', 0) * 1000:>9.3f} {ph.get('ranking', 0) * 1000:>9.3f} "
            f"{r.p50_ms:>9.3f} {r.p95_ms:>9.3f} {r.qps:>10.1f} {r.resident_bytes / 2**20:>11.2f} "
            f"{str(r.outputs_identical):>9}")
    return "\n".join(lines) + "\n"
