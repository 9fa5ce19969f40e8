"""Command-line interface.

Exit codes:
    0   success
    1   other codec error
    2   malformed FASTQ/FASTA input
    3   alignment failure
    4   container format error (corruption, checksum, version, wrong consensus)
    5   file could not be read or written
    64  bad command-line usage
"""

from __future__ import annotations

import argparse
import csv
import gzip
import io
import logging
import os
import sys
import tempfile
import warnings

from . import __version__
from .bench import StageSpec, bench, bottleneck, pipeline_throughput
from .codec import OUT_FORMATS, CompressOptions, compress_reads, decompress
from .container import Container
from .decode import DecodeStats, decode_read_set
from .encode import STREAM_NAMES
from .errors import SageError
from .plan import LEVELS
from .seqio import parse_fasta, parse_fastq

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_PARSE = 2
EXIT_ALIGN = 3
EXIT_FORMAT = 4
EXIT_IO = 5
EXIT_USAGE = 64

STATS_HEADER = ("histogram", "value", "count", "cumulative_fraction")

log = logging.getLogger("sagezip")


class _Parser(argparse.ArgumentParser):
    # Keep exit code 2 for parse errors in the input data.
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _open(path):
    if path == "-":
        return sys.stdin.buffer
    with open(path, "rb") as f:
        magic = f.read(2)
    return gzip.open(path, "rb") if magic == b"\x1f\x8b" else open(path, "rb")


def load_reference(path) -> str:
    with _open(path) as f:
        return parse_fasta(f)[1]


def load_reads(path, keep_meta: bool = False):
    with _open(path) as f:
        return list(parse_fastq(f, keep_meta=keep_meta))


def _options(args) -> CompressOptions:
    long_read = {"auto": None, "on": True, "off": False}[args.long_read]
    return CompressOptions(k=args.k, max_k=args.max_k, max_segments=args.max_segments,
                           partitions=args.partitions, preserve_order=args.preserve_order,
                           long_read=long_read, embed_consensus=args.embed_consensus,
                           passthrough=args.keep_names, level=args.level,
                           threads=args.threads)


def _print_categories(categories: dict[str, int], out) -> None:
    total = sum(categories.values()) or 1
    for name, bits in categories.items():
        print(f"  {name:<20}{bits:>14} bits {100 * bits / total:6.2f}%", file=out)


# -- subcommands -------------------------------------------------------------

def cmd_compress(args) -> int:
    consensus = load_reference(args.ref)
    reads = load_reads(args.input, keep_meta=args.keep_names)
    res = compress_reads(reads, consensus, args.output, _options(args))
    input_bytes = os.path.getsize(args.input) if args.input != "-" else 0
    out = sys.stdout
    print(f"{res.read_count} reads, {res.bases} bases -> {res.compressed_bytes} bytes", file=out)
    if input_bytes and res.compressed_bytes:
        print(f"ratio {input_bytes / res.compressed_bytes:.2f}x vs input file", file=out)
    print(f"features {res.plan.features}", file=out)
    _print_categories(res.categories, out)
    return EXIT_OK


def cmd_decompress(args) -> int:
    consensus = load_reference(args.ref) if args.ref else None
    if args.output == "-":
        res = decompress(args.input, sys.stdout.buffer, consensus, args.format,
                         args.preserve_order, args.threads, args.best_effort)
    else:
        d = os.path.dirname(os.path.abspath(args.output))
        fd, tmp = tempfile.mkstemp(dir=d, prefix=".sage-")
        try:
            with os.fdopen(fd, "wb") as out:
                res = decompress(args.input, out, consensus, args.format,
                                 args.preserve_order, args.threads, args.best_effort)
            os.replace(tmp, args.output)
        except BaseException:
            os.unlink(tmp)
            raise
    if res.failed_partitions:
        print(f"failed partitions: {res.failed_partitions}", file=sys.stderr)
        return EXIT_FORMAT
    return EXIT_OK


def stats_rows(stats: DecodeStats):
    """CSV rows (see :data:`STATS_HEADER`) for the decoded value histograms."""
    rows = []

    def emit(name, hist: dict):
        total = sum(hist.values())
        acc = 0
        for value in sorted(hist):
            acc += hist[value]
            rows.append((name, value, hist[value], f"{acc / total:.6f}"))

    emit("matching_delta_bits", {b: c for b, c in enumerate(stats.matching) if c})
    emit("mismatch_delta_bits", {b: c for b, c in enumerate(stats.mismatch) if c})
    emit("mismatch_count", stats.counts)
    emit("indel_length", stats.indel_lengths)
    return rows


def cmd_inspect(args) -> int:
    c = Container(args.input)
    h = c.header
    out = sys.stdout
    if args.stats:
        consensus = load_reference(args.ref) if args.ref else None
        consensus = c.resolve_consensus(consensus)
        stats = DecodeStats()
        for _ in decode_read_set(c, consensus, stats=stats):
            pass
        w = csv.writer(out, lineterminator="\n")
        w.writerow(STATS_HEADER)
        w.writerows(stats_rows(stats))
        return EXIT_OK
    print(f"version {h.version}  flags {h.flags:#04x}  reads {h.read_count}  "
          f"partitions {h.partition_count}", file=out)
    print(f"consensus {h.consensus_len} bases  sha256 {h.consensus_hash.hex()}  "
          f"embedded {h.embedded is not None}", file=out)
    print(f"k {h.k}  max segments {h.max_segments}  fixed read length {h.fixed_read_len}  "
          f"order bits {h.order_bits}  sidecar {h.sidecar_len} B", file=out)
    print(f"layout {h.layout}", file=out)
    for name, s in zip(("matching", "mismatch", "count", "side"), h.schemes):
        print(f"scheme {name:<9} widths {list(s.widths)}", file=out)
    for i, e in enumerate(c.entries):
        sizes = " ".join(f"{n}={ln}" for n, ln in zip(STREAM_NAMES, e.lengths))
        print(f"partition {i}: [{e.start}, {e.end}) reads {e.read_count}  {sizes}", file=out)
    print(f"file {c.file_size} bytes", file=out)
    return EXIT_OK


def cmd_bench(args) -> int:
    consensus = load_reference(args.ref)
    with _open(args.input) as f:
        raw = f.read()
    reads = list(parse_fastq(io.BytesIO(raw)))
    report = bench(reads, consensus, len(raw), _options(args), ablate=args.ablate or (),
                   external=args.external or (), raw_input=raw)
    print(report.summary())
    return EXIT_OK


def _stage(text: str) -> StageSpec:
    name, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected NAME=BASES_PER_SECOND, got {text!r}")
    try:
        return StageSpec(name, float(value))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def cmd_pipeline(args) -> int:
    stages = list(args.stage or [])
    if args.measure:
        consensus = load_reference(args.ref) if args.ref else None
        with open(os.devnull, "wb") as sink:
            res = decompress(args.measure, sink, consensus, fmt="lines", threads=args.threads)
        if res.seconds > 0 and res.bases:
            stages.append(StageSpec("decompress", res.bases / res.seconds))
    if not stages:
        print("no stages given", file=sys.stderr)
        return EXIT_USAGE
    for s in stages:
        print(f"{s.name:<16}{s.throughput:>16.4g} bases/s")
    slow = bottleneck(stages)
    print(f"pipeline {pipeline_throughput(stages):.4g} bases/s, bound by {slow.name}")
    return EXIT_OK


# -- parser -----------------------------------------------------------------

def _add_compress_flags(p) -> None:
    p.add_argument("-k", type=int, default=None, help="seed length (default 15 short, 17 long)")
    p.add_argument("--max-k", type=int, default=6, help="most bit-length classes per scheme")
    p.add_argument("--max-segments", type=int, default=2, help="segments per chimeric read")
    p.add_argument("-p", "--partitions", type=int, default=1)
    p.add_argument("--preserve-order", action="store_true", help="store original read order")
    p.add_argument("--long-read", choices=("auto", "on", "off"), default="auto")
    p.add_argument("--embed-consensus", action="store_true")
    p.add_argument("--keep-names", action="store_true",
                   help="store read names and qualities verbatim (implies --preserve-order)")
    p.add_argument("--level", choices=LEVELS, default="O4",
                   help="highest optimization level to consider")
    p.add_argument("-t", "--threads", type=int, default=None,
                   help="worker processes (SAGE_THREADS overrides)")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="sage", description="Consensus-based genomic read compression.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("compress", help="compress a FASTQ file")
    p.add_argument("--ref", required=True, help="consensus FASTA")
    p.add_argument("input", help="FASTQ input ('-' for stdin)")
    p.add_argument("-o", "--output", required=True)
    _add_compress_flags(p)
    p.set_defaults(func=cmd_compress)

    p = sub.add_parser("decompress", help="decompress a container")
    p.add_argument("input")
    p.add_argument("--ref", help="consensus FASTA (not needed if embedded)")
    p.add_argument("-o", "--output", default="-")
    p.add_argument("-f", "--format", choices=OUT_FORMATS, default="fasta")
    p.add_argument("--preserve-order", action="store_true")
    p.add_argument("--best-effort", action="store_true",
                   help="skip corrupted partitions instead of failing")
    p.add_argument("-t", "--threads", type=int, default=None)
    p.set_defaults(func=cmd_decompress)

    p = sub.add_parser("inspect", help="show header, partitions or value histograms")
    p.add_argument("input")
    p.add_argument("--stats", action="store_true", help="write histograms as CSV")
    p.add_argument("--ref", help="consensus FASTA (needed by --stats unless embedded)")
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("bench", help="ratio, throughput and category breakdown")
    p.add_argument("--ref", required=True)
    p.add_argument("input")
    p.add_argument("--ablate", nargs="+", choices=LEVELS, metavar="LEVEL",
                   help="re-encode at these levels (NO O1 O2 O3 O4)")
    p.add_argument("--external", action="append", metavar="CMD",
                   help="external compressor reading stdin, e.g. 'gzip -c'")
    _add_compress_flags(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("pipeline", help="throughput of pipelined stages")
    p.add_argument("--stage", action="append", type=_stage, metavar="NAME=RATE")
    p.add_argument("--measure", metavar="CONTAINER",
                   help="add a decompress stage measured on this container")
    p.add_argument("--ref")
    p.add_argument("-t", "--threads", type=int, default=None)
    p.set_defaults(func=cmd_pipeline)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    warnings.simplefilter("default")
    warnings.showwarning = lambda msg, *a, **k: print(f"warning: {msg}", file=sys.stderr)
    try:
        return args.func(args)
    except SageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
