from latent.bench import SynthSpec, synth_data, synth_records
from latent.memory import write_records
from latent.utils import write_jsonl

from ._base import LatentCommand


class Command(LatentCommand):
    help = "Generate synthetic clustered records and evaluation queries"
    name = "synth"

    def add_command_arguments(self, parser):
        parser.add_argument("--items", type=int, required=True)
        parser.add_argument("--dim", type=int, required=True)
        parser.add_argument("--samples-per-item", dest="samples_per_item", type=int, default=20)
        parser.add_argument("--sigma", type=float, default=0.0, help="Gaussian noise sigma")
        parser.add_argument("--sigma-relative", dest="sigma_relative", action="store_true",
                            help="sigma is a multiple of the mean nearest-centroid distance")
        parser.add_argument("--aspects", type=int, default=1, help="sub-centroids per item")
        parser.add_argument("--queries", type=int, default=0, help="evaluation queries to draw")
        parser.add_argument("--out", dest="output", required=True, help="records JSONL")
        parser.add_argument("--queries-out", dest="queries_out", help="evaluation queries JSONL")

    def run(self, cfg, options):
        spec = SynthSpec(
            num_items=options["items"],
            dim=options["dim"],
            samples_per_item=options["samples_per_item"],
            noise_sigma=options["sigma"],
            query_count=options["queries"],
            seed=cfg.seed,
            sigma_relative=options["sigma_relative"],
            aspects_per_item=options["aspects"],
        )
        data = synth_data(spec)
        write_records(cfg.output, synth_records(data))
        if options.get("queries_out"):
            write_jsonl(options["queries_out"], (
                {"query_id": s.query.query_id, "item": s.truth, "vector": s.query.vector.tolist()}
                for s in data.samples
            ))
