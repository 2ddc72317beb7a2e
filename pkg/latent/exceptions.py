"""Error types raised by the decoding engine.

Every error carries a stable ``code`` (used in per-query failure records and
logs) and the process ``exit_code`` the CLI maps it to.
"""

USAGE_EXIT = 1
DATA_EXIT = 2
INTERNAL_EXIT = 3


class LatentError(Exception):
    code = "error"
    exit_code = DATA_EXIT


class ConfigError(LatentError):
    code = "config"
    exit_code = USAGE_EXIT


class BenchmarkError(LatentError):
    code = "benchmark"
    exit_code = USAGE_EXIT


class RecordFormatError(LatentError):
    code = "record_format"


class DimensionMismatchError(LatentError):
    code = "dim_mismatch"


class NonFiniteVectorError(LatentError):
    code = "non_finite"


class DuplicateSampleError(LatentError):
    code = "duplicate_sample"


class EmptyMemoryError(LatentError):
    code = "empty_memory"

    def __init__(self, message="empty memory"):
        super().__init__(message)


class MemoryFormatError(LatentError):
    code = "format"


class BadMagicError(MemoryFormatError):
    code = "bad_magic"


class VersionMismatchError(MemoryFormatError):
    code = "version_mismatch"


class TruncatedFileError(MemoryFormatError):
    code = "truncated"


class ChecksumError(MemoryFormatError):
    code = "checksum"


class DtypeError(MemoryFormatError):
    code = "bad_dtype"
