"""Benchmark reports, level ablation and the pipeline throughput model."""

from __future__ import annotations

import logging
import os
import shlex
import subprocess
import tempfile
import time
from dataclasses import dataclass, field
from typing import Sequence

from .codec import CompressOptions, align_all, compress_reads, decompress, is_long_read
from .plan import LEVELS
from .seqio import ReadRecord

log = logging.getLogger(__name__)

# Categories that describe read-to-consensus differences.
MISMATCH_CATEGORIES = ("matching_positions", "mismatch_counts", "mismatch_positions", "bases",
                       "types", "rev", "corner_cases")


@dataclass(frozen=True)
class StageSpec:
    name: str
    throughput: float     # bases per second

    def __post_init__(self):
        if not self.throughput > 0:
            raise ValueError(f"stage {self.name!r}: throughput must be positive")


def pipeline_throughput(stages: Sequence[StageSpec]) -> float:
    """Throughput of stages that run concurrently on a stream of bases.

    Every base passes through every stage, so the slowest stage sets the
    rate of the whole pipeline.
    """
    if not stages:
        raise ValueError("pipeline needs at least one stage")
    return min(s.throughput for s in stages)


def bottleneck(stages: Sequence[StageSpec]) -> StageSpec:
    if not stages:
        raise ValueError("pipeline needs at least one stage")
    return min(stages, key=lambda s: s.throughput)


def ratio(input_bytes: int, compressed_bytes: int) -> float:
    if input_bytes <= 0 or compressed_bytes <= 0:
        raise ValueError("sizes must be positive")
    return input_bytes / compressed_bytes


@dataclass
class BenchReport:
    input_bytes: int
    compressed_bytes: int
    compress_seconds: float
    decompress_seconds: float
    bases: int
    reads: int
    categories: dict[str, int]
    payload_bits: int
    ablation: dict[str, dict] = field(default_factory=dict)
    external: dict[str, int] = field(default_factory=dict)

    @property
    def ratio(self) -> float:
        return ratio(self.input_bytes, self.compressed_bytes)

    @property
    def decode_throughput(self) -> float:
        """Bases per second."""
        return self.bases / self.decompress_seconds if self.decompress_seconds > 0 else 0.0

    def summary(self) -> str:
        lines = [
            f"reads {self.reads}  bases {self.bases}",
            f"input {self.input_bytes} B  compressed {self.compressed_bytes} B  "
            f"ratio {self.ratio:.2f}x",
            f"compress {self.compress_seconds:.2f} s  decompress {self.decompress_seconds:.2f} s  "
            f"decode {self.decode_throughput / 1e6:.2f} Mbases/s",
            "category bits:",
        ]
        for name, bits in self.categories.items():
            lines.append(f"  {name:<20}{bits:>14}")
        for level, row in self.ablation.items():
            lines.append(f"level {level:<3} {row['bytes']:>12} B")
        for cmd, size in self.external.items():
            lines.append(f"external {cmd!r}: {size} B  ratio {ratio(self.input_bytes, size):.2f}x")
        return "\n".join(lines)


def run_external(command: str, data: bytes) -> int | None:
    """Compressed size produced by a shell-style command reading stdin and
    writing stdout, or None if it fails."""
    try:
        proc = subprocess.run(shlex.split(command), input=data, stdout=subprocess.PIPE,
                              stderr=subprocess.PIPE, check=True)
    except (OSError, subprocess.CalledProcessError) as exc:
        log.warning("external compressor %r failed: %s", command, exc)
        return None
    return len(proc.stdout)


def bench(reads: Sequence[ReadRecord], consensus: str, input_bytes: int,
          options: CompressOptions | None = None, ablate: Sequence[str] = (),
          external: Sequence[str] = (), raw_input: bytes | None = None) -> BenchReport:
    """Compress, decompress and report. ``ablate`` lists levels to re-encode
    (each level turns on its features on top of the previous ones)."""
    opts = options or CompressOptions()
    for lv in ablate:
        if lv not in LEVELS:
            raise ValueError(f"unknown level {lv!r}")
    reads = list(reads)
    long_read = is_long_read(reads) if opts.long_read is None else opts.long_read
    with tempfile.TemporaryDirectory(prefix="sage-bench-") as tmp:
        path = os.path.join(tmp, "main.sage")
        t0 = time.perf_counter()
        alns = align_all(reads, consensus, opts.align_params(long_read),
                         opts.threads or opts.partitions)
        res = compress_reads(reads, consensus, path, opts, alignments=alns)
        t_comp = time.perf_counter() - t0
        t0 = time.perf_counter()
        with open(os.devnull, "wb") as sink:
            decompress(path, sink, consensus, fmt="lines", threads=opts.threads)
        t_dec = time.perf_counter() - t0
        report = BenchReport(input_bytes, res.compressed_bytes, t_comp, t_dec, res.bases,
                             res.read_count, res.categories, res.payload_bits)
        for lv in ablate:
            lv_path = os.path.join(tmp, f"{lv}.sage")
            lv_opts = CompressOptions(**{**opts.__dict__, "level": lv})
            r = compress_reads(reads, consensus, lv_path, lv_opts, alignments=alns)
            report.ablation[lv] = {"bytes": r.compressed_bytes, "categories": r.categories,
                                   "features": r.plan.features}
    if external and raw_input is not None:
        for cmd in external:
            size = run_external(cmd, raw_input)
            if size is not None:
                report.external[cmd] = size
    return report
