"""Run configuration: command-line flags > --config dotenv file > settings defaults."""
import logging
import os
from dataclasses import asdict, dataclass

from django.conf import settings
from dotenv import dotenv_values

from .decoder import BACKFILLS, MODES, DecodeConfig
from .exceptions import ConfigError
from .storage import DTYPE_TAGS
from .utils import parse_int_list

logger = logging.getLogger("general_logger")

# RunConfig field -> (config file / environment key, converter)
CONFIG_KEYS = {
    "mode": ("L2D_MODE", str),
    "K": ("L2D_K", int),
    "M": ("L2D_M", int),
    "backfill": ("L2D_BACKFILL", str),
    "epsilon": ("L2D_EPSILON", float),
    "Ks": ("L2D_KS", parse_int_list),
    "threshold": ("L2D_THRESHOLD", int),
    "threads": ("L2D_THREADS", int),
    "seed": ("L2D_SEED", int),
    "dtype": ("L2D_DTYPE", str),
    "block_rows": ("L2D_BLOCK_ROWS", int),
}


@dataclass(frozen=True)
class RunConfig:
    subcommand: str
    mode: str
    K: int
    M: int
    backfill: str
    epsilon: float
    Ks: tuple
    threshold: int
    threads: int
    seed: int
    dtype: str
    block_rows: int
    memory: str = None
    inputs: str = None
    output: str = None
    config_file: str = None

    def decode_config(self, **overrides):
        values = dict(mode=self.mode, K=self.K, M=self.M, backfill=self.backfill,
                      epsilon=self.epsilon, block_rows=self.block_rows)
        values.update(overrides)
        return DecodeConfig(**values)

    def header(self):
        """Effective configuration echoed into report headers.

        threads and the output path never change results, so they are left out
        and reports stay byte-identical across thread counts.
        """
        header = asdict(self)
        del header["threads"], header["output"]
        header["Ks"] = ",".join(str(k) for k in self.Ks)
        return header


def load_config_file(path):
    """Parse a dotenv-format config file into RunConfig field values"""
    if not os.path.isfile(path):
        raise ConfigError(f"config file not found: {path}")
    raw = dotenv_values(path)
    values = {}
    for name, (key, convert) in CONFIG_KEYS.items():
        if raw.get(key) in (None, ""):
            continue
        try:
            values[name] = convert(raw[key])
        except ValueError as e:
            raise ConfigError(f"{path}: {key}={raw[key]!r} is not valid ({e})") from e
    unknown = sorted(k for k in raw if k not in {key for key, _ in CONFIG_KEYS.values()})
    if unknown:
        logger.warning(f"Ignoring unknown config keys in {path}: {', '.join(unknown)}")
    return values


def resolve_run_config(subcommand, options, config_path=None, decodes=True):
    """Merge flags, config file and defaults into a validated RunConfig"""
    file_values = load_config_file(config_path) if config_path else {}
    defaults = settings.LATENT_DEFAULTS
    merged = {}
    for name, (key, convert) in CONFIG_KEYS.items():
        if options.get(name) is not None:
            value = options[name]
        elif name in file_values:
            value = file_values[name]
        else:
            value = defaults.get(name)
        if value is not None and name != "Ks":
            try:
                value = convert(value)
            except ValueError as e:
                raise ConfigError(f"{name}={value!r} is not valid ({e})") from e
        merged[name] = value

    try:
        merged["Ks"] = tuple(parse_int_list(merged["Ks"]))
    except ValueError as e:
        raise ConfigError(str(e)) from e
    _validate(merged, decodes)
    return RunConfig(
        subcommand=subcommand,
        memory=options.get("memory"),
        inputs=options.get("inputs"),
        output=options.get("output"),
        config_file=config_path,
        **merged,
    )


def _validate(values, decodes):
    if values["mode"] not in MODES:
        raise ConfigError(f"--mode must be one of {', '.join(MODES)}")
    if values["backfill"] not in BACKFILLS:
        raise ConfigError(f"--backfill must be one of {', '.join(BACKFILLS)}")
    if decodes and values["mode"] == "local" and values["M"] is None:
        raise ConfigError("--mode local requires --M")
    if decodes and values["mode"] == "global" and values["M"] is not None:
        logger.warning(f"M={values['M']} is ignored in global mode")
    if values["M"] is not None and values["M"] < 1:
        raise ConfigError("--M must be >= 1")
    if values["K"] < 1:
        raise ConfigError("--K must be >= 1")
    if not values["Ks"] or min(values["Ks"]) < 1:
        raise ConfigError("--Ks must list positive integers")
    if values["threshold"] < 1:
        raise ConfigError("--threshold must be >= 1")
    if values["threads"] < 1:
        raise ConfigError("--threads must be >= 1")
    if values["dtype"] not in DTYPE_TAGS:
        raise ConfigError(f"--dtype must be one of {', '.join(DTYPE_TAGS)}")
    if not values["epsilon"] > 0:
        raise ConfigError("--epsilon must be positive")
    if values["block_rows"] < 1:
        raise ConfigError("--block-rows must be >= 1")
