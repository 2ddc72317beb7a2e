import time
from unittest import skipUnless

import numpy as np
from django.conf import settings
from django.test import SimpleTestCase, tag

from latent.aggregation import global_representations
from latent.bench import (
    SynthSpec, bench_decode, format_latency_table, item_key, random_memory, scales_linearly,
    scan_scaling, synth_data, synth_dataset,
)
from latent.decoder import DecodeConfig, Query, batch_decode, decode
from latent.evaluation import evaluate, sweep_m
from latent.exceptions import BenchmarkError, ConfigError
from latent.storage import MEMORY_MAGIC, encode_container


def memory_bytes(memory):
    return encode_container(MEMORY_MAGIC, memory.dtype, memory.dim, memory.catalog.keys,
                            memory.item_of_row, memory.matrix)


class SynthDatasetTests(SimpleTestCase):
    def test_zero_noise_rows_equal_centroids(self):
        spec = SynthSpec(num_items=10, dim=5, samples_per_item=4, query_count=5, seed=2)
        data = synth_data(spec)
        expected = data.centroids[data.item_of_row, 0].astype(np.float32)
        np.testing.assert_array_equal(data.matrix, expected)

    def test_same_seed_same_memory(self):
        spec = SynthSpec(num_items=20, dim=8, samples_per_item=5, noise_sigma=0.1, query_count=10, seed=77)
        first, first_samples = synth_dataset(spec)
        second, second_samples = synth_dataset(spec)
        self.assertEqual(memory_bytes(first), memory_bytes(second))
        self.assertEqual([s.truth for s in first_samples], [s.truth for s in second_samples])
        third, _ = synth_dataset(SynthSpec(num_items=20, dim=8, samples_per_item=5,
                                           noise_sigma=0.1, query_count=10, seed=78))
        self.assertNotEqual(memory_bytes(first), memory_bytes(third))

    def test_keys_and_truths(self):
        memory, samples = synth_dataset(SynthSpec(num_items=3, dim=2, samples_per_item=2, query_count=4))
        self.assertEqual(memory.catalog.keys, ("item-00000", "item-00001", "item-00002"))
        self.assertTrue(all(s.truth in memory.catalog for s in samples))
        self.assertEqual(item_key(12), "item-00012")

    def test_zero_noise_global_recall_is_perfect(self):
        memory, samples = synth_dataset(SynthSpec(num_items=50, dim=16, samples_per_item=3,
                                                  query_count=200, seed=4))
        report = evaluate(samples, memory, global_representations(memory), DecodeConfig(), [1])
        self.assertEqual(report.recall(1), 1.0)

    def test_tight_clusters(self):
        spec = SynthSpec(num_items=200, dim=64, samples_per_item=20, noise_sigma=0.05,
                         sigma_relative=True, query_count=1000, seed=42)
        memory, samples = synth_dataset(spec)
        report = evaluate(samples, memory, global_representations(memory), DecodeConfig(), [1, 20])
        self.assertGreaterEqual(report.recall(1), 0.95)
        self.assertGreaterEqual(report.recall(20), 0.99)

    def test_local_beats_global_on_multi_aspect_items(self):
        spec = SynthSpec(num_items=60, dim=16, samples_per_item=30, noise_sigma=0.5,
                         sigma_relative=True, aspects_per_item=3, query_count=400, seed=8)
        memory, samples = synth_dataset(spec)
        table = global_representations(memory)
        glob = evaluate(samples, memory, table, DecodeConfig(), [1])
        local = evaluate(samples, memory, table, DecodeConfig(mode="local", K=1, M=20), [1])
        self.assertGreater(local.recall(1), glob.recall(1))

    def test_spec_validation(self):
        for bad in (dict(num_items=1), dict(dim=1), dict(samples_per_item=0), dict(noise_sigma=-1.0)):
            values = dict(num_items=5, dim=4, samples_per_item=2)
            values.update(bad)
            with self.assertRaises(ConfigError):
                SynthSpec(**values)


class LocalGlobalSweepTests(SimpleTestCase):
    def test_best_m_keeps_up_with_global(self):
        spec = SynthSpec(num_items=100, dim=16, samples_per_item=20, noise_sigma=0.5,
                         sigma_relative=True, query_count=300, seed=11)
        memory, samples = synth_dataset(spec)
        table = global_representations(memory)
        glob = evaluate(samples, memory, table, DecodeConfig(), [20])
        rows = sweep_m(samples, memory, table, [8, 32, 128, 512], [20])
        self.assertEqual([M for M, _ in rows], [8, 32, 128, 512])
        best = max(report.recall(20) for _, report in rows)
        self.assertGreaterEqual(best, glob.recall(20) - 0.01)
        for M, report in rows:
            rerun = evaluate(samples, memory, table, DecodeConfig(mode="local", K=20, M=M), [20])
            self.assertEqual(report.metrics, rerun.metrics)


class BenchDecodeTests(SimpleTestCase):
    def setUp(self):
        self.memory, samples = synth_dataset(SynthSpec(num_items=30, dim=16, samples_per_item=10,
                                                       noise_sigma=0.3, query_count=40, seed=6))
        self.queries = [s.query for s in samples]

    def test_needs_three_repetitions(self):
        with self.assertRaisesMessage(BenchmarkError, "repetitions >= 3"):
            bench_decode(self.memory, self.queries, DecodeConfig(), 2)

    def test_report(self):
        for cfg in (DecodeConfig(K=10), DecodeConfig(mode="local", K=10, M=25)):
            report = bench_decode(self.memory, self.queries, cfg, 3)
            self.assertGreaterEqual(report.p95_ms, report.p50_ms)
            self.assertGreaterEqual(report.p50_ms, 0.0)
            self.assertGreater(report.qps, 0.0)
            self.assertTrue(report.outputs_identical)
            self.assertEqual(set(report.phase_seconds), {"neighbor_scan", "aggregation", "ranking"})
            self.assertGreater(report.resident_bytes, self.memory.matrix.nbytes)

    def test_benchmark_leaves_outputs_unchanged(self):
        cfg = DecodeConfig(mode="local", K=5, M=12)
        table = global_representations(self.memory)
        before = batch_decode(self.queries, self.memory, table, cfg)
        report = bench_decode(self.memory, self.queries, cfg, 4, threads=2)
        self.assertTrue(report.outputs_identical)
        self.assertEqual(batch_decode(self.queries, self.memory, table, cfg), before)

    def test_latency_table(self):
        report = bench_decode(self.memory, self.queries, DecodeConfig(), 3)
        lines = format_latency_table([report, report]).splitlines()
        self.assertEqual(len(lines), 3)
        self.assertIn("p95_ms", lines[0])


class ScanScalingTests(SimpleTestCase):
    def test_scales_linearly_band(self):
        self.assertTrue(scales_linearly([(100, 1.0), (200, 2.2), (400, 3.9)]))
        self.assertFalse(scales_linearly([(100, 1.0), (200, 2.0), (400, 8.0)]))

    def test_repetitions_checked(self):
        with self.assertRaises(BenchmarkError):
            scan_scaling(100, 4, repetitions=1)

    @tag("slow")
    @skipUnless(settings.RUN_SLOW_TESTS, "set L2D_RUN_SLOW=1 to run timing tests")
    def test_scan_cost_linear_in_rows(self):
        timings = scan_scaling(25_000, 1024, repetitions=5)
        self.assertEqual([n for n, _ in timings], [25_000, 50_000, 100_000])
        self.assertTrue(scales_linearly(timings), timings)

    @tag("slow")
    @skipUnless(settings.RUN_SLOW_TESTS, "set L2D_RUN_SLOW=1 to run timing tests")
    def test_large_memory_decode_under_a_second(self):
        memory = random_memory(100_000, 1024, seed=1, items=1000)
        table = global_representations(memory)
        queries = [Query(i, v) for i, v in
                   enumerate(np.random.default_rng(2).random((4, 1024), dtype=np.float32))]
        for cfg in (DecodeConfig(K=20), DecodeConfig(mode="local", K=20, M=100)):
            decode(queries[0], memory, table, cfg)
            for q in queries[1:]:
                start = time.perf_counter()
                decode(q, memory, table, cfg)
                self.assertLess(time.perf_counter() - start, 1.0, cfg)
