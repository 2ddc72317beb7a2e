"""Full-ranking evaluation: Recall@K / NDCG@K, sparse/dense cohorts, M sweep."""
import logging
import math
from dataclasses import dataclass, replace

from .decoder import DecodeConfig, DecodeFailure, batch_decode, parse_query
from .exceptions import ConfigError, RecordFormatError
from .utils import format_score, read_jsonl

logger = logging.getLogger("general_logger")

DEFAULT_THRESHOLD = 5


@dataclass(frozen=True)
class EvalSample:
    query: object
    truth: str


@dataclass(frozen=True)
class MetricsReport:
    cohort: str
    sample_count: int
    metrics: dict
    missing_truth: int = 0
    failed: int = 0
    M: int = None

    def recall(self, K):
        return self.metrics[K][0]

    def ndcg(self, K):
        return self.metrics[K][1]


def recall_at_k(ranked, truth, K):
    """1 if the truth ItemId is within the first K entries, else 0"""
    if truth is None:
        return 0
    rank = ranked.rank_of(truth)
    return int(rank is not None and rank <= K)


def ndcg_at_k(ranked, truth, K):
    """1/log2(rank + 1) for a 1-based rank within K; IDCG is 1 for one truth"""
    if truth is None:
        return 0.0
    rank = ranked.rank_of(truth)
    if rank is None or rank > K:
        return 0.0
    return 1.0 / math.log2(rank + 1)


def _check_ks(Ks):
    Ks = sorted(set(int(k) for k in Ks))
    if not Ks:
        raise ConfigError("Ks must not be empty")
    if Ks[0] < 1:
        raise ConfigError(f"every K must be >= 1, got {Ks[0]}")
    return Ks


def score_results(samples, results, catalog, Ks, cohort="all", M=None):
    """Aggregate decoded results into a MetricsReport.

    Hits are exact integer tallies and NDCG gains are summed with fsum, so the
    report does not depend on sample order.
    """
    Ks = _check_ks(Ks)
    hits = {K: 0 for K in Ks}
    gains = {K: [] for K in Ks}
    missing = 0
    failed = 0
    for sample, result in zip(samples, results):
        truth = catalog.id_of(sample.truth)
        if truth is None:
            missing += 1
            continue
        if isinstance(result, DecodeFailure):
            failed += 1
            continue
        for K in Ks:
            hits[K] += recall_at_k(result, truth, K)
            gains[K].append(ndcg_at_k(result, truth, K))

    n = len(samples)
    metrics = {K: ((hits[K] / n, math.fsum(gains[K]) / n) if n else (0.0, 0.0)) for K in Ks}
    return MetricsReport(cohort, n, metrics, missing_truth=missing, failed=failed, M=M)


def _decode_all(samples, memory, table, cfg, Ks, threads):
    cfg = replace(cfg, K=max(_check_ks(Ks)))
    return batch_decode([s.query for s in samples], memory, table, cfg, threads)


def evaluate(samples, memory, table, cfg, Ks, threads=1, cohort="all"):
    """Mean Recall@K / NDCG@K over samples, decoding once at max(Ks).

    Samples whose truth is not in the catalog count as misses and are tallied
    in ``missing_truth``.
    """
    results = _decode_all(samples, memory, table, cfg, Ks, threads)
    M = cfg.M if cfg.mode == "local" else None
    report = score_results(samples, results, memory.catalog, Ks, cohort, M)
    logger.info(f"Evaluated {report.sample_count} samples ({cohort}, mode={cfg.mode}): "
                f"{report.missing_truth} truths outside the catalog, {report.failed} failures")
    return report


def is_sparse(sample, catalog, threshold):
    return catalog.frequency(sample.truth) <= threshold


def cohort_split(samples, catalog, threshold=DEFAULT_THRESHOLD):
    """(sparse, dense): sparse iff freq[truth] <= threshold; absent truth is sparse"""
    if threshold < 1:
        raise ConfigError(f"threshold must be >= 1, got {threshold}")
    sparse, dense = [], []
    for sample in samples:
        (sparse if is_sparse(sample, catalog, threshold) else dense).append(sample)
    return sparse, dense


def evaluate_cohorts(samples, memory, table, cfg, Ks, threshold=DEFAULT_THRESHOLD, threads=1):
    """Reports for all samples and for the sparse and dense cohorts, one decode pass"""
    if threshold < 1:
        raise ConfigError(f"threshold must be >= 1, got {threshold}")
    results = _decode_all(samples, memory, table, cfg, Ks, threads)
    catalog = memory.catalog
    M = cfg.M if cfg.mode == "local" else None
    sparse_idx = [i for i, s in enumerate(samples) if is_sparse(s, catalog, threshold)]
    sparse_set = set(sparse_idx)
    dense_idx = [i for i in range(len(samples)) if i not in sparse_set]
    reports = [score_results(samples, results, catalog, Ks, "all", M)]
    for cohort, idx in (("sparse", sparse_idx), ("dense", dense_idx)):
        reports.append(score_results([samples[i] for i in idx], [results[i] for i in idx],
                                     catalog, Ks, cohort, M))
    logger.info(f"Cohorts at threshold {threshold}: {len(sparse_idx)} sparse, {len(dense_idx)} dense")
    return reports


def sweep_m(samples, memory, global_table, Ms, Ks, base_cfg=None, threads=1):
    """One local-mode evaluation per M (ascending); returns [(M, MetricsReport)]"""
    Ms = [int(M) for M in Ms]
    if not Ms:
        raise ConfigError("Ms must not be empty")
    if Ms != sorted(Ms) or Ms[0] < 1:
        raise ConfigError(f"Ms must be ascending and >= 1, got {Ms}")
    base_cfg = base_cfg or DecodeConfig()
    rows = []
    for M in Ms:
        cfg = DecodeConfig(mode="local", K=max(_check_ks(Ks)), M=M, backfill=base_cfg.backfill,
                           epsilon=base_cfg.epsilon, block_rows=base_cfg.block_rows)
        rows.append((M, evaluate(samples, memory, global_table, cfg, Ks, threads)))
    return rows


def parse_eval_sample(obj, where):
    query = parse_query(obj, where)
    truth = obj.get("item")
    if not isinstance(truth, str) or not truth:
        raise RecordFormatError(f"{where}: item (ground truth) must be a non-empty string")
    return EvalSample(query, truth)


def read_eval_samples(path):
    return [parse_eval_sample(obj, f"{path}:{lineno}") for lineno, obj in read_jsonl(path)]


def report_records(reports, header=None):
    """One machine-readable record per (report, K)"""
    records = []
    for report in reports:
        for K, (recall, ndcg) in sorted(report.metrics.items()):
            record = {
                "cohort": report.cohort,
                "K": K,
                "recall": format_score(recall),
                "ndcg": format_score(ndcg),
                "samples": report.sample_count,
                "missing_truth": report.missing_truth,
                "failed": report.failed,
            }
            if report.M is not None:
                record["M"] = report.M
            if header:
                record["config"] = header
            records.append(record)
    return records


def format_report_table(reports, header):
    """Human-readable report: header lines, then one row per (report, K)"""
    lines = [f"# {key}: {value}" for key, value in header.items()]
    lines.append(f"{'cohort':<8} {'M':>8} {'samples':>8} {'missing':>8} {'failed':>8} {'K':>5} "
                 f"{'Recall':>10} {'NDCG':>10}")
    for report in reports:
        M = "-" if report.M is None else str(report.M)
        for K, (recall, ndcg) in sorted(report.metrics.items()):
            lines.append(f"{report.cohort:<8} {M:>8} {report.sample_count:>8} {report.missing_truth:>8} "
                         f"{report.failed:>8} {K:>5} {recall:>10.6f} {ndcg:>10.6f}")
    return "\n".join(lines) + "\n"
