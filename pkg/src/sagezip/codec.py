"""End-to-end compression and decompression."""

from __future__ import annotations

import logging
import multiprocessing
import os
import tempfile
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

from .align import AlignParams, Alignment, align_batch, build_index
from .container import (F_EMBEDDED, F_HAS_LITERALS, F_PRESERVE_ORDER, F_SIDECAR, Container,
                        Header, consensus_digest, embed_consensus, layout_flags,
                        write_container)
from .decode import DecodeStats, decode_container_partition
from .encode import CATEGORIES, encode_partition
from .errors import CorruptionError, FormatError, SageError
from .plan import LEVELS, Plan, make_plan
from .seqio import PackMode, ReadRecord, pack_bases, packed_record

log = logging.getLogger(__name__)

LONG_READ_THRESHOLD = 1000
OUT_FORMATS = ("fasta", "fastq", "lines", "two_bit", "three_bit", "one_hot")


def resolve_threads(requested: int | None, default: int) -> int:
    """SAGE_THREADS, else ``requested``, else ``default`` capped at the CPU count."""
    env = os.environ.get("SAGE_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise SageError(f"SAGE_THREADS must be an integer, got {env!r}") from None
    if requested:
        return max(1, requested)
    return max(1, min(default, os.cpu_count() or 1))


# -- worker pool ------------------------------------------------------------
# Work items reach forked workers through this global, so large inputs are
# never pickled.
_SHARED: dict = {}


def _pool_map(fn: Callable, items: Sequence, threads: int, shared: dict) -> list:
    if threads <= 1 or len(items) <= 1:
        _SHARED.update(shared)
        try:
            return [fn(x) for x in items]
        finally:
            _SHARED.clear()
    _SHARED.update(shared)
    try:
        ctx = multiprocessing.get_context("fork")
        with ProcessPoolExecutor(max_workers=threads, mp_context=ctx) as pool:
            return list(pool.map(fn, items))
    finally:
        _SHARED.clear()


def _align_chunk(bounds):
    lo, hi = bounds
    reads, index, params = _SHARED["reads"], _SHARED["index"], _SHARED["params"]
    return align_batch(reads[lo:hi], index, params)


def _encode_one(q):
    plan, consensus = _SHARED["plan"], _SHARED["consensus"]
    sl = plan.slices[q]
    return encode_partition(plan.alignments, sl.order, sl.start, plan.layout, plan.schemes,
                            consensus)


# -- compression ------------------------------------------------------------

@dataclass
class CompressOptions:
    k: int | None = None
    max_k: int = 6
    max_segments: int = 2
    partitions: int = 1
    preserve_order: bool = False
    long_read: bool | None = None     # None: decide from read lengths
    embed_consensus: bool = False
    passthrough: bool = False
    level: str = "O4"
    threads: int | None = None
    band: int | None = None
    max_edit_rate: float | None = None

    def align_params(self, long_read: bool) -> AlignParams:
        kw = {"max_segments": self.max_segments}
        if self.k is not None:
            kw["k"] = self.k
        if self.band is not None:
            kw["band"] = self.band
        if self.max_edit_rate is not None:
            kw["max_edit_rate"] = self.max_edit_rate
        return AlignParams.long_reads(**kw) if long_read else AlignParams.short_reads(**kw)


@dataclass
class CompressResult:
    path: str
    read_count: int
    bases: int
    compressed_bytes: int
    plan: Plan
    categories: dict[str, int]
    payload_bits: int
    align_seconds: float
    total_seconds: float
    long_read: bool
    level_bytes: dict[str, int] = field(default_factory=dict)


def is_long_read(reads: Sequence[ReadRecord]) -> bool:
    if not reads:
        return False
    lengths = sorted(r.length for r in reads)
    return lengths[len(lengths) // 2] > LONG_READ_THRESHOLD


def align_all(reads: Sequence[ReadRecord], consensus: str, params: AlignParams,
              threads: int = 1):
    """Return (best alignments, single-segment alternatives)."""
    if not reads:
        return [], []
    index = build_index(consensus, params.k)
    step = max(1, -(-len(reads) // (threads * 4)))
    chunks = [(i, min(len(reads), i + step)) for i in range(0, len(reads), step)]
    parts = _pool_map(_align_chunk, chunks, threads,
                      {"reads": reads, "index": index, "params": params})
    pairs = [p for part in parts for p in part]
    return [p[0] for p in pairs], [p[1] for p in pairs]


def _sidecar(reads: Sequence[ReadRecord]) -> bytes:
    lines = []
    for r in reads:
        lines.append(r.id)
        lines.append(r.qual if r.qual is not None else "")
    return ("\n".join(lines) + "\n").encode("utf-8") if reads else b""


def compress_reads(reads: Sequence[ReadRecord], consensus: str, out_path,
                   options: CompressOptions | None = None,
                   alignments: tuple[list[Alignment], list[Alignment]] | None = None
                   ) -> CompressResult:
    """Compress ``reads`` against ``consensus`` into ``out_path``. Precomputed
    ``alignments`` (best, single) skip the aligner."""
    opts = options or CompressOptions()
    if opts.level not in LEVELS:
        raise ValueError(f"level must be one of {LEVELS}")
    if opts.partitions < 1 or opts.partitions > 0xFFFF:
        raise ValueError("partitions must lie in 1..65535")
    if not 1 <= opts.max_segments <= 7:
        raise ValueError("max_segments must lie in 1..7")
    t0 = time.perf_counter()
    reads = list(reads)
    long_read = is_long_read(reads) if opts.long_read is None else opts.long_read
    params = opts.align_params(long_read)
    threads = resolve_threads(opts.threads, opts.partitions)
    if alignments is None:
        best, single = align_all(reads, consensus, params, threads)
    else:
        best, single = alignments
    t_align = time.perf_counter() - t0
    preserve = opts.preserve_order or opts.passthrough
    sidecar = _sidecar(reads) if opts.passthrough else b""
    embedded = embed_consensus(consensus) if opts.embed_consensus else None
    plan = make_plan(best, single, opts.partitions, len(consensus), long_read=long_read,
                     level=opts.level, max_k=opts.max_k, preserve_order=preserve,
                     embedded=embedded, sidecar_len=len(sidecar))
    encoded = _pool_map(_encode_one, list(range(opts.partitions)), threads,
                        {"plan": plan, "consensus": consensus})
    for q, enc in enumerate(encoded):
        if enc.stream_bits != plan.evaluation.stream_bits[q]:
            raise SageError(f"size model disagrees with the encoder in partition {q}")
    flags = layout_flags(plan.layout)
    if preserve:
        flags |= F_PRESERVE_ORDER
    if any(not a.mapped or a.n_literal is not None for a in plan.alignments):
        flags |= F_HAS_LITERALS
    if sidecar:
        flags |= F_SIDECAR
    if embedded is not None:
        flags |= F_EMBEDDED
    header = Header(flags, len(consensus), consensus_digest(consensus), params.k, len(reads),
                    plan.layout.fixed_read_len, opts.partitions,
                    opts.max_segments if plan.layout.chimeric else 1,
                    plan.layout.order_bits, plan.schemes, len(sidecar), embedded)
    size = write_container(out_path, header, plan.slices, [e.blobs for e in encoded], sidecar)
    if size != plan.total_bytes:
        raise SageError(f"container is {size} bytes, size model said {plan.total_bytes}")
    cats = [0] * len(CATEGORIES)
    for e in encoded:
        for i, c in enumerate(e.categories):
            cats[i] += c
    return CompressResult(
        path=os.fspath(out_path), read_count=len(reads), bases=sum(r.length for r in reads),
        compressed_bytes=size, plan=plan, categories=dict(zip(CATEGORIES, cats)),
        payload_bits=sum(sum(e.stream_bits) for e in encoded), align_seconds=t_align,
        total_seconds=time.perf_counter() - t0, long_read=long_read,
        level_bytes={name: ev.total_bytes for name, ev in plan.levels.items()})


# -- decompression ----------------------------------------------------------

def format_record(fmt: str, name: str, bases: str, qual: str | None = None) -> tuple[bytes, bool]:
    """Serialized record and whether a TWO_BIT read fell back to THREE_BIT."""
    if fmt == "lines":
        return bases.encode("ascii") + b"\n", False
    if fmt == "fasta":
        return f">{name}\n{bases}\n".encode("ascii"), False
    if fmt == "fastq":
        q = qual if qual else "I" * len(bases)
        return f"@{name}\n{bases}\n+\n{q}\n".encode("ascii"), False
    mode = {"two_bit": PackMode.TWO_BIT, "three_bit": PackMode.THREE_BIT,
            "one_hot": PackMode.ONE_HOT}[fmt]
    fallback = mode is PackMode.TWO_BIT and "N" in bases
    if fallback:
        mode = PackMode.THREE_BIT
    return packed_record(pack_bases(bases, mode)), fallback


def _decode_to_file(args):
    q, fmt, first_index, tmpdir = args
    container, consensus = _SHARED["container"], _SHARED["consensus"]
    fd, path = tempfile.mkstemp(dir=tmpdir, suffix=f".p{q}")
    fallbacks = nbases = 0
    try:
        with os.fdopen(fd, "wb") as out:
            for j, rec in enumerate(decode_container_partition(container, q, consensus)):
                data, fb = format_record(fmt, f"r{first_index + j}", rec.bases)
                fallbacks += fb
                nbases += len(rec.bases)
                out.write(data)
        return path, fallbacks, nbases, None
    except CorruptionError as exc:
        os.unlink(path)
        return None, 0, 0, str(exc)


def _decode_indexed(q):
    container, consensus = _SHARED["container"], _SHARED["consensus"]
    try:
        return [tuple(r) for r in decode_container_partition(container, q, consensus)], None
    except CorruptionError as exc:
        return None, str(exc)


@dataclass
class DecompressResult:
    read_count: int
    bases: int
    seconds: float
    failed_partitions: list[int]
    two_bit_fallbacks: int


def decompress(path, out, consensus: str | None = None, fmt: str = "fasta",
               preserve_order: bool = False, threads: int | None = None,
               best_effort: bool = False) -> DecompressResult:
    """Decode the container at ``path`` and write records to the binary
    stream ``out``."""
    if fmt not in OUT_FORMATS:
        raise ValueError(f"unknown output format {fmt!r}")
    t0 = time.perf_counter()
    container = Container(path, verify=not best_effort)
    consensus = container.resolve_consensus(consensus)
    header = container.header
    nparts = len(container.entries)
    threads = resolve_threads(threads, nparts)
    bad = container.verify() if best_effort else []
    for q in bad:
        warnings.warn(f"skipping partition {q}: checksum mismatch", stacklevel=2)
    good = [q for q in range(nparts) if q not in bad]
    shared = {"container": container, "consensus": consensus}
    failed = list(bad)
    count = nbases = fallbacks = 0
    if preserve_order:
        if not header.preserve_order:
            raise FormatError("container was written without --preserve-order")
        meta = _parse_sidecar(container.read_sidecar(), header.read_count)
        buf: list = [None] * header.read_count
        for q, (recs, err) in zip(good, _pool_map(_decode_indexed, good, threads, shared)):
            if err is not None:
                if not best_effort:
                    raise CorruptionError(err)
                warnings.warn(f"skipping partition {q}: {err}", stacklevel=2)
                failed.append(q)
                continue
            for idx, bases in recs:
                if idx is None or idx >= len(buf) or buf[idx] is not None:
                    raise CorruptionError(f"bad order index {idx}", stream="order_idx",
                                          partition=q)
                buf[idx] = bases
        for i, bases in enumerate(buf):
            if bases is None:
                continue
            name, qual = meta[i] if meta else (f"r{i}", None)
            data, fb = format_record(fmt, name, bases, qual)
            out.write(data)
            count += 1
            nbases += len(bases)
            fallbacks += fb
    else:
        firsts = []
        acc = 0
        for e in container.entries:
            firsts.append(acc)
            acc += e.read_count
        with tempfile.TemporaryDirectory(prefix="sage-") as tmpdir:
            jobs = [(q, fmt, firsts[q], tmpdir) for q in good]
            if threads <= 1 and not best_effort:
                for q in good:
                    for j, rec in enumerate(decode_container_partition(container, q, consensus)):
                        data, fb = format_record(fmt, f"r{firsts[q] + j}", rec.bases)
                        out.write(data)
                        count += 1
                        nbases += len(rec.bases)
                        fallbacks += fb
            else:
                for q, (tmp, fb, nb, err) in zip(good, _pool_map(_decode_to_file, jobs, threads,
                                                             shared)):
                    if err is not None:
                        if not best_effort:
                            raise CorruptionError(err)
                        warnings.warn(f"skipping partition {q}: {err}", stacklevel=2)
                        failed.append(q)
                        continue
                    with open(tmp, "rb") as f:
                        while True:
                            chunk = f.read(1 << 20)
                            if not chunk:
                                break
                            out.write(chunk)
                    os.unlink(tmp)
                    count += container.entries[q].read_count
                    nbases += nb
                    fallbacks += fb
    if fallbacks:
        warnings.warn(f"{fallbacks} reads contain N and were written in THREE_BIT mode",
                      stacklevel=2)
    return DecompressResult(count, nbases, time.perf_counter() - t0, sorted(failed), fallbacks)


def _parse_sidecar(data: bytes, n: int):
    if not data:
        return None
    lines = data.decode("utf-8").split("\n")
    if len(lines) < 2 * n:
        raise CorruptionError("sidecar is shorter than the read count")
    return [(lines[2 * i], lines[2 * i + 1] or None) for i in range(n)]


def decode_all(path, consensus: str | None = None, preserve_order: bool = False,
               stats: DecodeStats | None = None, audit: bool = False):
    """Decode a container into a list of sequences. With ``audit`` also
    return the per-partition access reports."""
    container = Container(path)
    consensus = container.resolve_consensus(consensus)
    reports = []
    out = []
    for q in range(len(container.entries)):
        gen = decode_container_partition(container, q, consensus, audit=audit, stats=stats)
        while True:
            try:
                out.append(next(gen))
            except StopIteration as stop:
                reports.append(stop.value)
                break
    if preserve_order:
        buf = [None] * len(out)
        for idx, bases in out:
            buf[idx] = bases
        seqs = buf
    else:
        seqs = [b for _, b in out]
    return (seqs, reports) if audit else seqs
