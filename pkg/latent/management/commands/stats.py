import json

from latent.memory import load_memory, memory_stats

from ._base import LatentCommand


class Command(LatentCommand):
    help = "Print memory statistics as JSON"
    name = "stats"

    def add_command_arguments(self, parser):
        parser.add_argument("memory", help="memory file")

    def run(self, cfg, options):
        stats = memory_stats(load_memory(cfg.memory))
        self.stdout.write(json.dumps(stats.as_dict(), sort_keys=True))
