from latent.aggregation import global_representations, save_rep_table
from latent.memory import build_memory, read_records, save_memory

from ._base import LatentCommand


class Command(LatentCommand):
    help = "Build a memory file from (vector, item) JSONL records"
    name = "build"

    def add_command_arguments(self, parser):
        parser.add_argument("--in", dest="inputs", required=True, help="records JSONL ('-' = stdin)")
        parser.add_argument("--out", dest="output", required=True, help="memory file to write")
        parser.add_argument("--dim", type=int, required=True)
        parser.add_argument("--dtype", choices=("f32", "f16"), help="storage dtype")
        parser.add_argument("--table-out", dest="table_out",
                            help="also export the global item rep table")

    def run(self, cfg, options):
        memory = build_memory(read_records(cfg.inputs), options["dim"], cfg.dtype)
        save_memory(memory, cfg.output)
        if options.get("table_out"):
            save_rep_table(global_representations(memory), options["table_out"])
