from latent.exceptions import ConfigError
from latent.memory import capacity_for_fraction, read_records, reservoir_sample, write_records

from ._base import LatentCommand


class Command(LatentCommand):
    help = "Reservoir-sample a records JSONL down to a fixed capacity or fraction"
    name = "sample"

    def add_command_arguments(self, parser):
        parser.add_argument("--in", dest="inputs", required=True, help="records JSONL")
        parser.add_argument("--out", dest="output", required=True, help="sampled records JSONL")
        group = parser.add_mutually_exclusive_group()
        group.add_argument("--capacity", type=int, help="records to keep")
        group.add_argument("--fraction", type=float, help="share of the stream to keep, e.g. 0.3")

    def run(self, cfg, options):
        records = read_records(cfg.inputs)
        if options.get("capacity") is not None:
            capacity = options["capacity"]
        elif options.get("fraction") is not None:
            records = list(records)
            capacity = capacity_for_fraction(len(records), options["fraction"])
        else:
            raise ConfigError("sample needs --capacity or --fraction")
        write_records(cfg.output, reservoir_sample(records, capacity, cfg.seed))
