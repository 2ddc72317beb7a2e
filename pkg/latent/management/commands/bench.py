from latent.bench import bench_decode, default_thread_counts, format_latency_table
from latent.decoder import read_queries
from latent.exceptions import ConfigError
from latent.utils import parse_int_list, write_jsonl

from ._base import LatentCommand, add_decode_arguments, load_memory_and_table


class Command(LatentCommand):
    help = "Measure per-query decode latency and throughput"
    name = "bench"

    def add_command_arguments(self, parser):
        add_decode_arguments(parser, threads=False)
        parser.add_argument("--memory", required=True, help="memory file")
        parser.add_argument("--queries", dest="inputs", required=True, help="queries JSONL")
        parser.add_argument("--repetitions", type=int, default=5,
                            help="runs over the queries; the first is warm-up")
        parser.add_argument("--threads", dest="thread_counts",
                            help="comma-separated thread counts (default: 1 and all cores)")
        parser.add_argument("--out", dest="output", help="latency records JSONL")

    def run(self, cfg, options):
        if options.get("thread_counts"):
            try:
                thread_counts = parse_int_list(options["thread_counts"])
            except ValueError as e:
                raise ConfigError(f"--threads: {e}") from e
            if not thread_counts or min(thread_counts) < 1:
                raise ConfigError("--threads must list positive integers")
        else:
            thread_counts = default_thread_counts()
        memory, table = load_memory_and_table(cfg.memory)
        queries = read_queries(cfg.inputs)
        decode_cfg = cfg.decode_config()
        reports = [bench_decode(memory, queries, decode_cfg, options["repetitions"], threads)
                   for threads in thread_counts]
        self.stdout.write(format_latency_table(reports), ending="")
        if cfg.output:
            write_jsonl(cfg.output, (r.as_record() for r in reports))
