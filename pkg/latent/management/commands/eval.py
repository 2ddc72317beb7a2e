from latent.evaluation import evaluate_cohorts, format_report_table, read_eval_samples, report_records
from latent.utils import open_text, write_jsonl

from ._base import LatentCommand, load_memory_and_table, report_paths

THRESHOLD_NOTE = "sparse/dense threshold is an assumed boundary, not a measured one"


class Command(LatentCommand):
    help = "Full-ranking Recall@K / NDCG@K overall and per sparse/dense cohort"
    name = "eval"
    decode_flags = True
    eval_flags = True

    def add_command_arguments(self, parser):
        parser.add_argument("--memory", required=True, help="memory file")
        parser.add_argument("--queries", dest="inputs", required=True,
                            help="evaluation JSONL {query_id, item, vector}")
        parser.add_argument("--out", dest="output", required=True,
                            help="report prefix: writes PREFIX.txt and PREFIX.jsonl")
        parser.add_argument("--table", help="exported global rep table for the memory")

    def run(self, cfg, options):
        memory, table = load_memory_and_table(cfg.memory, options.get("table"))
        samples = read_eval_samples(cfg.inputs)
        reports = evaluate_cohorts(samples, memory, table, cfg.decode_config(), cfg.Ks,
                                   cfg.threshold, cfg.threads)
        header = dict(cfg.header(), threshold_note=THRESHOLD_NOTE)
        text_path, records_path = report_paths(cfg.output)
        with open_text(text_path, "w") as f:
            f.write(format_report_table(reports, header))
        write_jsonl(records_path, report_records(reports, header))
