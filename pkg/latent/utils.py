import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager

import numpy as np

from .exceptions import DimensionMismatchError, NonFiniteVectorError, RecordFormatError

logger = logging.getLogger("general_logger")

SCORE_DIGITS = 9


def as_vector(values, dim, label):
    """Coerce values to a finite float32 vector of length dim"""
    try:
        vector = np.asarray(values, dtype=np.float32)
    except (ValueError, TypeError) as e:
        raise RecordFormatError(f"{label}: vector components must be numbers ({e})") from e
    if vector.ndim != 1 or vector.shape[0] != dim:
        length = vector.shape[0] if vector.ndim == 1 else vector.shape
        raise DimensionMismatchError(f"{label}: vector length {length} != dim {dim}")
    if not np.isfinite(vector).all():
        raise NonFiniteVectorError(f"{label}: vector has NaN/Inf components")
    return vector


def format_score(score):
    """Round a score to 9 significant digits for serialization"""
    return float(f"{score:.{SCORE_DIGITS}g}")


def parse_int_list(text):
    """Parse '20,50,100' (or an iterable of ints) into a list of ints"""
    if isinstance(text, str):
        parts = [p.strip() for p in text.split(",") if p.strip()]
        try:
            return [int(p) for p in parts]
        except ValueError as e:
            raise ValueError(f"not an integer list: {text!r}") from e
    return [int(p) for p in text]


@contextmanager
def open_text(path, mode="r"):
    """Open a UTF-8 text file, '-' meaning stdin/stdout"""
    if str(path) == "-":
        yield sys.stdin if "r" in mode else sys.stdout
        return
    with open(path, mode, encoding="utf-8", newline="\n") as f:
        yield f


def read_jsonl(path):
    """Yield (line_number, object) for every non-blank line of a JSONL file"""
    lineno = 0
    with open_text(path) as f:
        try:
            for lineno, line in enumerate(f, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError as e:
                    raise RecordFormatError(f"{path}:{lineno}: invalid JSON ({e.msg})") from e
                if not isinstance(obj, dict):
                    raise RecordFormatError(f"{path}:{lineno}: expected a JSON object")
                yield lineno, obj
        except UnicodeDecodeError as e:
            raise RecordFormatError(f"{path}: invalid UTF-8 after line {lineno} ({e.reason})") from e


def write_jsonl(path, objects):
    """Write one compact JSON object per line; returns the line count"""
    count = 0
    with open_text(path, "w") as f:
        for obj in objects:
            f.write(json.dumps(obj, ensure_ascii=False, separators=(",", ":")))
            f.write("\n")
            count += 1
    logger.info(f"Wrote {count} records to {path}")
    return count


def ordered_map(fn, items, threads=1):
    """Map fn over items, results in input order; threads > 1 uses a pool"""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))
