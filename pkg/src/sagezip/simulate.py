"""Synthetic read sets for tests and benchmarks."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

from .seqio import ReadRecord, revcomp

BASES = "ACGT"


@dataclass(frozen=True)
class SimParams:
    read_len: int = 150
    length_sd: float = 0.0
    sub_rate: float = 0.002
    indel_rate: float = 0.0002
    max_indel: int = 3
    rev_frac: float = 0.5
    n_frac: float = 0.0
    clip_frac: float = 0.0
    chimeric_frac: float = 0.0
    random_frac: float = 0.0

    @classmethod
    def short(cls, **kw) -> "SimParams":
        return cls(**kw)

    @classmethod
    def long(cls, **kw) -> "SimParams":
        base = dict(read_len=5000, length_sd=0.3, sub_rate=0.01, indel_rate=0.01, max_indel=4)
        base.update(kw)
        return cls(**base)


def random_consensus(length: int, rng: random.Random, n_runs: int = 0) -> str:
    seq = [rng.choice(BASES) for _ in range(length)]
    for _ in range(n_runs):
        p = rng.randrange(length)
        for i in range(p, min(length, p + rng.randint(1, 20))):
            seq[i] = "N"
    return "".join(seq)


def mutate(seq: str, p: SimParams, rng: random.Random) -> str:
    rate = p.sub_rate + p.indel_rate
    if rate <= 0:
        return seq
    log_keep = math.log1p(-rate) if rate < 1 else None
    out = []
    i = 0
    while True:
        # distance to the next event is geometric
        gap = int(math.log(1.0 - rng.random()) / log_keep) if log_keep else 0
        if i + gap >= len(seq):
            out.append(seq[i:])
            break
        out.append(seq[i:i + gap])
        i += gap
        r = rng.random() * rate
        if r < p.sub_rate:
            out.append(rng.choice([b for b in BASES if b != seq[i]]))
            i += 1
        elif r < p.sub_rate + p.indel_rate / 2:
            out.append("".join(rng.choice(BASES) for _ in range(rng.randint(1, p.max_indel))))
        else:
            i += rng.randint(1, p.max_indel)
    return "".join(out)


def _length(p: SimParams, rng: random.Random, limit: int) -> int:
    n = p.read_len
    if p.length_sd:
        n = int(rng.lognormvariate(0, p.length_sd) * p.read_len)
    return max(20, min(n, limit))


def _piece(consensus: str, n: int, p: SimParams, rng: random.Random) -> str:
    start = rng.randrange(0, len(consensus) - n + 1)
    s = mutate(consensus[start:start + n], p, rng)
    return revcomp(s) if rng.random() < p.rev_frac else s


def simulate_reads(consensus: str, count: int, p: SimParams, seed: int = 0) -> list[ReadRecord]:
    rng = random.Random(seed)
    reads = []
    for i in range(count):
        n = _length(p, rng, len(consensus))
        r = rng.random()
        if r < p.random_frac:
            s = "".join(rng.choice(BASES) for _ in range(n))
        elif r < p.random_frac + p.chimeric_frac and n >= 80:
            a = n // 2
            s = _piece(consensus, a, p, rng) + _piece(consensus, n - a, p, rng)
        else:
            s = _piece(consensus, n, p, rng)
            if rng.random() < p.clip_frac:
                c = rng.randint(20, max(21, n // 4))
                junk = "".join(rng.choice(BASES) for _ in range(c))
                s = junk + s[c:] if rng.random() < 0.5 else s[:-c] + junk
        if rng.random() < p.n_frac:
            j = rng.randrange(len(s))
            s = s[:j] + "N" + s[j + 1:]
        if not s:
            s = rng.choice(BASES)
        reads.append(ReadRecord(f"r{i}", s))
    return reads
