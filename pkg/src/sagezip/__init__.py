"""Consensus-based compression of genomic read sets."""

from .align import AlignParams, Alignment, align_batch, align_read, build_index
from .bench import BenchReport, StageSpec, pipeline_throughput
from .codec import CompressOptions, compress_reads, decode_all, decompress
from .container import Container, read_container
from .errors import (AlignError, ChecksumError, ConsensusMismatchError, CorruptionError,
                     FormatError, ParseError, SageError, VersionError)
from .seqio import ReadRecord, parse_fasta, parse_fastq

__version__ = "0.1.0"

__all__ = [
    "AlignError", "AlignParams", "Alignment", "BenchReport", "ChecksumError",
    "CompressOptions", "ConsensusMismatchError", "Container", "CorruptionError",
    "FormatError", "ParseError", "ReadRecord", "SageError", "StageSpec", "VersionError",
    "align_batch", "align_read", "build_index", "compress_reads", "decode_all", "decompress",
    "parse_fasta", "parse_fastq", "pipeline_throughput", "read_container",
]
