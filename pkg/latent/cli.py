"""Single executable for the pipeline: ``python -m latent <subcommand> ...``.

Exit codes: 0 success, 1 usage error, 2 data/format error, 3 internal error.
Diagnostics go to stderr; data goes to files or stdout.
"""
import logging
import os
import sys
import traceback

from .exceptions import INTERNAL_EXIT, USAGE_EXIT

logger = logging.getLogger("general_logger")

SUBCOMMANDS = ("build", "stats", "sample", "decode", "eval", "sweep", "ground", "bench", "synth")

USAGE = (
    "usage: python -m latent <subcommand> [options]\n"
    f"subcommands: {', '.join(SUBCOMMANDS)}\n"
    "run 'python -m latent <subcommand> --help' for the options of one subcommand\n"
)


def run(argv=None):
    """Run one subcommand and return its exit code"""
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv:
        sys.stderr.write(USAGE)
        return USAGE_EXIT
    if argv[0] in ("-h", "--help"):
        sys.stdout.write(USAGE)
        return 0
    name = argv[0]
    if name not in SUBCOMMANDS:
        sys.stderr.write(f"unknown subcommand {name!r}\n{USAGE}")
        return USAGE_EXIT

    os.environ.setdefault("DJANGO_SETTINGS_MODULE", "latent_django.settings")
    try:
        import django
        from django.core.management import CommandError, load_command_class
        django.setup()
    except Exception as e:
        sys.stderr.write(f"could not initialise Django settings: {e}\n")
        return INTERNAL_EXIT

    command = load_command_class("latent", name)
    try:
        # not flagged as called from the command line, so argparse errors
        # surface as CommandError instead of exiting the interpreter
        parser = command.create_parser("latent", name)
        options = vars(parser.parse_args(argv[1:]))
        args = options.pop("args", ())
        command.execute(*args, **options)
    except CommandError as e:
        sys.stderr.write(f"{name}: {e}\n")
        return e.returncode
    except SystemExit as e:
        # --help
        return e.code if isinstance(e.code, int) else 0
    except Exception as e:
        logger.error(f"Unexpected error in {name}: {str(e)}")
        logger.error(traceback.format_exc())
        return INTERNAL_EXIT
    return 0


def main():
    sys.exit(run())
