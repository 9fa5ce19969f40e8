import io
import os
import warnings

import pytest

from sagezip.codec import (CompressOptions, compress_reads, decode_all, decompress,
                           is_long_read, resolve_threads)
from sagezip.container import Container
from sagezip.errors import FormatError, SageError
from sagezip.plan import LEVELS
from sagezip.seqio import ReadRecord, parse_fastq
from sagezip.simulate import SimParams, simulate_reads

MIXED = SimParams.short(sub_rate=0.01, indel_rate=0.002, n_frac=0.03, clip_frac=0.05,
                        chimeric_frac=0.05, random_frac=0.03)


@pytest.fixture(scope="module")
def reads(consensus_n):
    return simulate_reads(consensus_n, 1200, MIXED, 12)


@pytest.mark.parametrize("level", LEVELS)
@pytest.mark.parametrize("preserve", [False, True])
def test_roundtrip_levels(tmp_path, consensus_n, reads, level, preserve):
    path = tmp_path / "r.sage"
    compress_reads(reads, consensus_n, path, CompressOptions(level=level, partitions=2,
                                                             preserve_order=preserve))
    got = decode_all(path, consensus_n, preserve_order=preserve)
    want = [r.bases for r in reads]
    assert (got if preserve else sorted(got)) == (want if preserve else sorted(want))


def test_levels_monotone_and_exact(tmp_path, consensus_n, reads):
    res = compress_reads(reads, consensus_n, tmp_path / "m.sage")
    sizes = [res.level_bytes[lv] for lv in LEVELS]
    assert sizes == sorted(sizes, reverse=True)
    assert res.compressed_bytes == os.path.getsize(tmp_path / "m.sage") == sizes[-1]
    assert sum(res.categories.values()) == res.payload_bits


def test_partition_counts_agree(tmp_path, consensus_n, reads):
    outs = {}
    for p in (1, 2, 4, 8):
        compress_reads(reads, consensus_n, tmp_path / f"p{p}.sage",
                       CompressOptions(partitions=p))
        outs[p] = sorted(decode_all(tmp_path / f"p{p}.sage", consensus_n))
        assert len(Container(tmp_path / f"p{p}.sage").entries) == p
    assert outs[1] == outs[2] == outs[4] == outs[8] == sorted(r.bases for r in reads)


@pytest.mark.parametrize("fmt", ["fasta", "lines", "two_bit", "three_bit", "one_hot"])
def test_parallel_decode_matches_serial(tmp_path, consensus_n, reads, fmt):
    path = tmp_path / "par.sage"
    compress_reads(reads, consensus_n, path, CompressOptions(partitions=4))
    a, b = io.BytesIO(), io.BytesIO()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        decompress(path, a, consensus_n, fmt=fmt, threads=1)
        decompress(path, b, consensus_n, fmt=fmt, threads=4)
    assert a.getvalue() == b.getvalue()


def test_keep_names_restores_fastq(tmp_path, consensus_n):
    recs = [ReadRecord(f"read/{i} extra", r.bases, "".join(chr(33 + (i + j) % 40)
                                                          for j in range(r.length)))
            for i, r in enumerate(simulate_reads(consensus_n, 60, MIXED, 3))]
    compress_reads(recs, consensus_n, tmp_path / "n.sage", CompressOptions(passthrough=True))
    out = io.BytesIO()
    decompress(tmp_path / "n.sage", out, consensus_n, fmt="fastq", preserve_order=True)
    out.seek(0)
    back = list(parse_fastq(out, keep_meta=True))
    assert [(r.id, r.bases, r.qual) for r in back] == [(r.id, r.bases, r.qual) for r in recs]


def test_preserve_order_needs_index(tmp_path, consensus_n, reads):
    compress_reads(reads[:50], consensus_n, tmp_path / "o.sage")
    with pytest.raises(FormatError):
        decompress(tmp_path / "o.sage", io.BytesIO(), consensus_n, preserve_order=True)


def test_long_read_detection(consensus):
    short = simulate_reads(consensus, 5, SimParams.short(), 1)
    long = simulate_reads(consensus, 5, SimParams.long(read_len=3000, length_sd=0), 1)
    assert not is_long_read(short) and is_long_read(long) and not is_long_read([])


def test_long_reads_roundtrip(tmp_path, consensus):
    reads = simulate_reads(consensus, 40, SimParams.long(read_len=2000, chimeric_frac=0.1,
                                                         clip_frac=0.1, n_frac=0.1,
                                                         random_frac=0.05), 5)
    res = compress_reads(reads, consensus, tmp_path / "l.sage", CompressOptions(partitions=2))
    assert res.long_read
    assert sorted(decode_all(tmp_path / "l.sage", consensus)) == sorted(r.bases for r in reads)


def test_threads_env(monkeypatch):
    monkeypatch.setenv("SAGE_THREADS", "3")
    assert resolve_threads(8, 1) == 3
    monkeypatch.setenv("SAGE_THREADS", "x")
    with pytest.raises(SageError):
        resolve_threads(None, 1)
    monkeypatch.delenv("SAGE_THREADS")
    monkeypatch.setattr(os, "cpu_count", lambda: 16)
    assert resolve_threads(None, 4) == 4 and resolve_threads(2, 4) == 2
    monkeypatch.setattr(os, "cpu_count", lambda: 2)
    assert resolve_threads(None, 4) == 2 and resolve_threads(8, 4) == 8


def test_parallel_compress_is_identical(tmp_path, consensus_n, reads):
    compress_reads(reads, consensus_n, tmp_path / "a.sage", CompressOptions(partitions=3,
                                                                            threads=1))
    compress_reads(reads, consensus_n, tmp_path / "b.sage", CompressOptions(partitions=3,
                                                                            threads=3))
    assert (tmp_path / "a.sage").read_bytes() == (tmp_path / "b.sage").read_bytes()


def test_bad_options(tmp_path, consensus):
    with pytest.raises(ValueError):
        compress_reads([], consensus, tmp_path / "x", CompressOptions(level="O9"))
    with pytest.raises(ValueError):
        compress_reads([], consensus, tmp_path / "x", CompressOptions(partitions=0))
