from latent.aggregation import cached_global_representations, load_rep_table
from latent.decoder import ranked_record
from latent.exceptions import ConfigError
from latent.grounding import ground_beams, read_beam_sets
from latent.memory import load_memory
from latent.utils import write_jsonl

from ._base import LatentCommand, add_decode_arguments


class Command(LatentCommand):
    help = "Ground beam-generated item embeddings onto the candidate catalog"
    name = "ground"

    def add_command_arguments(self, parser):
        add_decode_arguments(parser)
        source = parser.add_mutually_exclusive_group()
        source.add_argument("--memory", help="memory file (candidates = its global table)")
        source.add_argument("--table", help="exported candidate rep table")
        parser.add_argument("--beams", dest="inputs", required=True,
                            help="JSONL {query_id, beams: [[...], ...]}")
        parser.add_argument("--out", dest="output", default="-", help="ranked lists JSONL")

    def run(self, cfg, options):
        if options.get("table"):
            candidates = load_rep_table(options["table"])
        elif cfg.memory:
            candidates = cached_global_representations(load_memory(cfg.memory))
        else:
            raise ConfigError("ground needs --memory or --table")
        beam_sets = read_beam_sets(cfg.inputs, candidates.dim)
        write_jsonl(cfg.output, (
            ranked_record(ground_beams(beams, candidates, cfg.K, cfg.epsilon), candidates.catalog)
            for beams in beam_sets
        ))
