from latent.decoder import batch_decode, read_queries, result_record
from latent.utils import write_jsonl

from ._base import LatentCommand, load_memory_and_table


class Command(LatentCommand):
    help = "Decode top-K items for each query vector"
    name = "decode"
    decode_flags = True

    def add_command_arguments(self, parser):
        parser.add_argument("--memory", required=True, help="memory file")
        parser.add_argument("--queries", dest="inputs", required=True, help="queries JSONL")
        parser.add_argument("--out", dest="output", default="-", help="ranked lists JSONL")
        parser.add_argument("--table", help="exported global rep table for the memory")

    def run(self, cfg, options):
        memory, table = load_memory_and_table(cfg.memory, options.get("table"))
        queries = read_queries(cfg.inputs)
        results = batch_decode(queries, memory, table, cfg.decode_config(), cfg.threads)
        write_jsonl(cfg.output, (result_record(r, memory.catalog) for r in results))
