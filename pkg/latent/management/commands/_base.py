import logging
import traceback

from django.core.management.base import BaseCommand, CommandError

from latent.aggregation import cached_global_representations, load_rep_table
from latent.config import resolve_run_config
from latent.exceptions import DATA_EXIT, LatentError, MemoryFormatError
from latent.memory import load_memory

logger = logging.getLogger("general_logger")


class LatentCommand(BaseCommand):
    """Base for pipeline subcommands: config resolution and exit-code mapping"""

    name = None
    requires_system_checks = []
    requires_migrations_checks = False
    decode_flags = False
    eval_flags = False

    def add_arguments(self, parser):
        parser.add_argument("--config", help="dotenv-format config file (L2D_* keys)")
        parser.add_argument("--seed", type=int, help="64-bit seed for all randomness")
        if self.decode_flags:
            add_decode_arguments(parser)
        if self.eval_flags:
            parser.add_argument("--Ks", help="comma-separated cutoffs, e.g. 20,50,100")
            parser.add_argument("--threshold", type=int,
                                help="sparse iff training frequency <= threshold")
        self.add_command_arguments(parser)

    def add_command_arguments(self, parser):
        pass

    def handle(self, *args, **options):
        try:
            cfg = resolve_run_config(self.name, options, options.get("config"), decodes=self.decode_flags)
            logger.info(f"==== {self.name} started ====")
            self.run(cfg, options)
            logger.info(f"==== {self.name} completed ====")
        except LatentError as e:
            logger.error(f"{self.name} failed [{e.code}]: {str(e)}")
            raise CommandError(f"[{e.code}] {e}", returncode=e.exit_code) from e
        except OSError as e:
            logger.error(f"{self.name} I/O error: {str(e)}")
            logger.debug(traceback.format_exc())
            raise CommandError(f"[io] {e}", returncode=DATA_EXIT) from e

    def run(self, cfg, options):
        raise NotImplementedError


def add_decode_arguments(parser, threads=True):
    parser.add_argument("--mode", choices=("global", "local"))
    parser.add_argument("--K", type=int, help="list length")
    parser.add_argument("--M", type=int, help="neighbors for local aggregation")
    parser.add_argument("--backfill", choices=("global-backfill", "truncate"))
    parser.add_argument("--epsilon", type=float, help="score guard in 1/(d + epsilon)")
    parser.add_argument("--block-rows", dest="block_rows", type=int,
                        help="memory rows scanned per block")
    if threads:
        parser.add_argument("--threads", type=int, help="worker threads across queries")


def load_memory_and_table(memory_path, table_path=None):
    """Memory plus its global rep table (exported file or computed once)"""
    memory = load_memory(memory_path)
    if not table_path:
        return memory, cached_global_representations(memory)
    table = load_rep_table(table_path)
    if table.catalog.keys != memory.catalog.keys or table.dim != memory.dim:
        raise MemoryFormatError(f"{table_path}: rep table does not belong to {memory_path}")
    return memory, table


def report_paths(prefix):
    return f"{prefix}.txt", f"{prefix}.jsonl"
