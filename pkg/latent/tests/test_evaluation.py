import math
import os
import random
import tempfile

import numpy as np
from django.test import SimpleTestCase

from latent.aggregation import global_representations
from latent.bench import SynthSpec, synth_dataset
from latent.decoder import DecodeConfig, Query, RankedEntry, RankedList
from latent.evaluation import (
    EvalSample, cohort_split, evaluate, evaluate_cohorts, format_report_table, ndcg_at_k,
    read_eval_samples, recall_at_k, report_records, sweep_m,
)
from latent.exceptions import ConfigError, RecordFormatError
from latent.memory import ItemCatalog

from .factories import make_memory


def ranked_of(items):
    return RankedList(0, tuple(RankedEntry(item, 1.0, 0.0) for item in items))


def sample(query_id, vector, truth):
    return EvalSample(Query(query_id, vector), truth)


class RankMetricTests(SimpleTestCase):
    def test_rank_three(self):
        ranked = ranked_of([7, 8, 9, 10, 11])
        self.assertEqual(recall_at_k(ranked, 9, 5), 1)
        self.assertEqual(recall_at_k(ranked, 9, 2), 0)
        self.assertEqual(recall_at_k(ranked, 42, 5), 0)

    def test_ndcg_closed_form(self):
        ranked = ranked_of(range(20))
        self.assertEqual(ndcg_at_k(ranked, 0, 1), 1.0)
        self.assertAlmostEqual(ndcg_at_k(ranked, 1, 2), 0.63093, places=5)
        self.assertEqual(ndcg_at_k(ranked, 10, 10), 0.0)

    def test_every_rank_and_cutoff(self):
        ranked = ranked_of(range(20))
        for rank in range(1, 21):
            for K in (1, 5, 10, 20):
                inside = rank <= K
                self.assertEqual(recall_at_k(ranked, rank - 1, K), int(inside))
                expected = 1.0 / math.log2(rank + 1) if inside else 0.0
                self.assertEqual(ndcg_at_k(ranked, rank - 1, K), expected)

    def test_missing_truth_is_a_miss(self):
        ranked = ranked_of([0, 1])
        self.assertEqual(recall_at_k(ranked, None, 5), 0)
        self.assertEqual(ndcg_at_k(ranked, None, 5), 0.0)


class EvaluateTests(SimpleTestCase):
    def setUp(self):
        self.memory = make_memory([[0, 0], [10, 10], [0, 1]], ["A", "B", "A"])
        self.table = global_representations(self.memory)

    def test_single_sample_ranked_first(self):
        report = evaluate([sample(0, [0, 0.5], "A")], self.memory, self.table, DecodeConfig(), [20])
        self.assertEqual(report.recall(20), 1.0)
        self.assertEqual(report.ndcg(20), 1.0)
        self.assertEqual(report.sample_count, 1)

    def test_absent_truth_counts_as_miss(self):
        samples = [sample(0, [0, 0.5], "A"), sample(1, [0, 0.5], "Z")]
        report = evaluate(samples, self.memory, self.table, DecodeConfig(), [20])
        self.assertEqual(report.recall(20), 0.5)
        self.assertEqual(report.missing_truth, 1)

    def test_failed_decode_counts_as_miss(self):
        samples = [sample(0, [0, 0.5], "A"), sample(1, [0, 0.5, 1], "A")]
        report = evaluate(samples, self.memory, self.table, DecodeConfig(), [1])
        self.assertEqual(report.recall(1), 0.5)
        self.assertEqual(report.failed, 1)

    def test_cohorts_both_populated(self):
        rng = np.random.default_rng(17)
        vectors = np.vstack([rng.normal(0, 0.1, size=(2, 2)), rng.normal(5, 0.1, size=(10, 2))])
        memory = make_memory(vectors, ["rare"] * 2 + ["popular"] * 10)
        table = global_representations(memory)
        samples = [sample(i, [0, 0] if i % 3 else [5, 5], "rare" if i % 3 else "popular")
                   for i in range(12)]
        samples.append(sample(12, [5, 5], "rare"))
        all_, sparse, dense = evaluate_cohorts(samples, memory, table, DecodeConfig(), [1], threshold=5)
        self.assertEqual((sparse.sample_count, dense.sample_count), (9, 4))
        self.assertEqual(sparse.sample_count + dense.sample_count, all_.sample_count)
        self.assertEqual((sparse.recall(1), dense.recall(1)), (8 / 9, 1.0))
        hits = sparse.recall(1) * sparse.sample_count + dense.recall(1) * dense.sample_count
        self.assertAlmostEqual(all_.recall(1) * all_.sample_count, hits)

    def test_ks_validation(self):
        with self.assertRaises(ConfigError):
            evaluate([], self.memory, self.table, DecodeConfig(), [])
        with self.assertRaises(ConfigError):
            evaluate([], self.memory, self.table, DecodeConfig(), [0, 5])


class MetricPropertyTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        spec = SynthSpec(num_items=40, dim=8, samples_per_item=6, noise_sigma=0.8,
                         sigma_relative=True, query_count=150, seed=3)
        cls.memory, cls.samples = synth_dataset(spec)
        cls.table = global_representations(cls.memory)

    def test_ndcg_bounded_by_recall(self):
        for cfg in (DecodeConfig(), DecodeConfig(mode="local", K=20, M=30)):
            report = evaluate(self.samples, self.memory, self.table, cfg, [1, 5, 10, 20])
            for K in report.metrics:
                self.assertTrue(0 <= report.ndcg(K) <= report.recall(K) <= 1)

    def test_non_decreasing_in_k(self):
        report = evaluate(self.samples, self.memory, self.table, DecodeConfig(), [1, 2, 5, 10, 20, 40])
        Ks = sorted(report.metrics)
        for low, high in zip(Ks, Ks[1:]):
            self.assertLessEqual(report.recall(low), report.recall(high))
            self.assertLessEqual(report.ndcg(low), report.ndcg(high))

    def test_sample_order_does_not_matter(self):
        shuffled = list(self.samples)
        random.Random(5).shuffle(shuffled)
        first = evaluate(self.samples, self.memory, self.table, DecodeConfig(), [1, 10])
        second = evaluate(shuffled, self.memory, self.table, DecodeConfig(), [1, 10], threads=4)
        self.assertEqual(first.metrics, second.metrics)

    def test_cohort_reports(self):
        catalog = self.memory.catalog
        all_, sparse, dense = evaluate_cohorts(self.samples, self.memory, self.table,
                                               DecodeConfig(), [10], threshold=6)
        self.assertEqual([r.cohort for r in (all_, sparse, dense)], ["all", "sparse", "dense"])
        self.assertEqual(sparse.sample_count, len(self.samples))
        self.assertEqual(dense.sample_count, 0)
        self.assertEqual(all_.metrics, sparse.metrics)
        self.assertEqual(dense.metrics, {10: (0.0, 0.0)})
        self.assertEqual(catalog.frequency(self.samples[0].truth), 6)


class CohortSplitTests(SimpleTestCase):
    def setUp(self):
        self.catalog = ItemCatalog(["rare", "popular"], [1, 100])

    def test_by_frequency(self):
        rare, popular = sample(0, [0], "rare"), sample(1, [0], "popular")
        sparse, dense = cohort_split([rare, popular], self.catalog, threshold=5)
        self.assertEqual((sparse, dense), ([rare], [popular]))

    def test_absent_truth_is_sparse(self):
        sparse, dense = cohort_split([sample(0, [0], "unknown")], self.catalog, 5)
        self.assertEqual((len(sparse), len(dense)), (1, 0))

    def test_threshold_at_max_frequency(self):
        samples = [sample(i, [0], key) for i, key in enumerate(["rare", "popular"] * 5)]
        sparse, dense = cohort_split(samples, self.catalog, threshold=100)
        self.assertEqual((len(sparse), dense), (10, []))

    def test_partition(self):
        rng = np.random.default_rng(12)
        catalog = ItemCatalog([f"k{i}" for i in range(30)], rng.integers(1, 20, size=30))
        samples = [sample(i, [0], f"k{v}") for i, v in enumerate(rng.integers(0, 35, size=200))]
        sparse, dense = cohort_split(samples, catalog, 7)
        self.assertEqual(len(sparse) + len(dense), len(samples))
        self.assertFalse({id(s) for s in sparse} & {id(s) for s in dense})

    def test_threshold_must_be_positive(self):
        with self.assertRaises(ConfigError):
            cohort_split([], self.catalog, 0)


class SweepTests(SimpleTestCase):
    def setUp(self):
        spec = SynthSpec(num_items=30, dim=6, samples_per_item=10, noise_sigma=0.7,
                         sigma_relative=True, query_count=80, seed=9)
        self.memory, self.samples = synth_dataset(spec)
        self.table = global_representations(self.memory)

    def test_m_covering_memory_equals_global(self):
        [(M, row)] = sweep_m(self.samples, self.memory, self.table, [self.memory.count], [1, 10, 20])
        glob = evaluate(self.samples, self.memory, self.table, DecodeConfig(), [1, 10, 20])
        self.assertEqual(M, self.memory.count)
        self.assertEqual(row.metrics, glob.metrics)

    def test_single_neighbor_on_noise_free_data(self):
        memory, samples = synth_dataset(SynthSpec(num_items=25, dim=4, samples_per_item=3,
                                                  query_count=60, seed=1))
        [(_, row)] = sweep_m(samples, memory, global_representations(memory), [1], [1])
        self.assertEqual(row.recall(1), 1.0)

    def test_rows_match_per_m_evaluation(self):
        rows = sweep_m(self.samples, self.memory, self.table, [8, 64, 256], [1, 10])
        self.assertEqual([M for M, _ in rows], [8, 64, 256])
        for M, row in rows:
            cfg = DecodeConfig(mode="local", K=10, M=M)
            self.assertEqual(row.metrics, evaluate(self.samples, self.memory, self.table, cfg, [1, 10]).metrics)
            self.assertEqual(row.M, M)

    def test_ms_must_ascend(self):
        with self.assertRaises(ConfigError):
            sweep_m(self.samples, self.memory, self.table, [64, 8], [1])


class ReportOutputTests(SimpleTestCase):
    def test_records_and_table(self):
        memory = make_memory([[0, 0], [5, 5]], ["A", "B"])
        report = evaluate([sample(0, [0, 0], "A")], memory, global_representations(memory),
                          DecodeConfig(), [1, 2])
        header = {"mode": "global", "threshold": 5}
        records = report_records([report], header)
        self.assertEqual([(r["cohort"], r["K"], r["recall"]) for r in records],
                         [("all", 1, 1.0), ("all", 2, 1.0)])
        self.assertEqual(records[0]["config"], header)
        text = format_report_table([report], header)
        self.assertTrue(text.startswith("# mode: global\n# threshold: 5\n"))
        self.assertEqual(len(text.splitlines()), 5)
        self.assertEqual(text.splitlines()[2].split()[4], "failed")

    def test_table_shows_failed_decodes(self):
        memory = make_memory([[0, 0], [5, 5]], ["A", "B"])
        samples = [sample(0, [0, 0], "A"), sample(1, [0, 0, 0], "A")]
        report = evaluate(samples, memory, global_representations(memory), DecodeConfig(), [1])
        row = format_report_table([report], {}).splitlines()[1].split()
        self.assertEqual(row[:6], ["all", "-", "2", "0", "1", "1"])
        self.assertEqual(float(row[6]), 0.5)


class ReadEvalSamplesTests(SimpleTestCase):
    def test_truth_field_required(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "queries.jsonl")
            with open(path, "w", encoding="utf-8") as f:
                f.write('{"query_id": 0, "vector": [1, 2], "item": "A"}\n')
                f.write('{"query_id": 1, "vector": [1, 2]}\n')
            with self.assertRaisesMessage(RecordFormatError, ":2:"):
                read_eval_samples(path)
