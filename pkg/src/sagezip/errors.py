"""Exception classes. Each family maps onto a stable CLI exit code."""


class SageError(Exception):
    exit_code = 1


class ParseError(SageError):
    """Malformed FASTQ/FASTA input. ``index`` is the 0-based record number."""

    exit_code = 2

    def __init__(self, message, index=None):
        if index is not None:
            message = f"record {index}: {message}"
        super().__init__(message)
        self.index = index


class AlignError(SageError):
    exit_code = 3


class FormatError(SageError):
    exit_code = 4


class PackError(FormatError):
    """A base string cannot be represented in the requested packing mode."""


class CorruptionError(FormatError):
    """A stream could not be decoded. Carries the stream name and bit offset."""

    def __init__(self, message, stream=None, offset=None, partition=None):
        where = []
        if partition is not None:
            where.append(f"partition {partition}")
        if stream is not None:
            where.append(f"stream {stream}")
        if offset is not None:
            where.append(f"bit {offset}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.stream = stream
        self.offset = offset
        self.partition = partition


class ChecksumError(CorruptionError):
    pass


class VersionError(FormatError):
    pass


class ConsensusMismatchError(FormatError):
    def __init__(self, expected, actual):
        super().__init__(
            f"consensus digest mismatch: container expects {expected}, got {actual}"
        )
        self.expected = expected
        self.actual = actual


class CoverageError(SageError, ValueError):
    """A value needs more bits than the widest class of a scheme."""
