from latent.evaluation import evaluate, format_report_table, read_eval_samples, report_records, sweep_m
from latent.exceptions import ConfigError
from latent.utils import open_text, parse_int_list, write_jsonl

from ._base import LatentCommand, load_memory_and_table, report_paths


class Command(LatentCommand):
    help = "Local-mode evaluation for each M, next to the global-mode baseline"
    name = "sweep"
    decode_flags = True
    eval_flags = True

    def add_command_arguments(self, parser):
        parser.add_argument("--memory", required=True, help="memory file")
        parser.add_argument("--queries", dest="inputs", required=True,
                            help="evaluation JSONL {query_id, item, vector}")
        parser.add_argument("--Ms", required=True, help="ascending neighbor counts, e.g. 8,32,128")
        parser.add_argument("--out", dest="output", required=True,
                            help="report prefix: writes PREFIX.txt and PREFIX.jsonl")
        parser.add_argument("--table", help="exported global rep table for the memory")

    def run(self, cfg, options):
        try:
            Ms = parse_int_list(options["Ms"])
        except ValueError as e:
            raise ConfigError(f"--Ms: {e}") from e
        memory, table = load_memory_and_table(cfg.memory, options.get("table"))
        samples = read_eval_samples(cfg.inputs)
        base_cfg = cfg.decode_config(mode="global", M=None)
        reports = [evaluate(samples, memory, table, base_cfg, cfg.Ks, cfg.threads)]
        reports += [report for _, report in
                    sweep_m(samples, memory, table, Ms, cfg.Ks, base_cfg, cfg.threads)]
        header = dict(cfg.header(), Ms=",".join(str(M) for M in Ms))
        text_path, records_path = report_paths(cfg.output)
        with open_text(text_path, "w") as f:
            f.write(format_report_table(reports, header))
        write_jsonl(records_path, report_records(reports, header))
