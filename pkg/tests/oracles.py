"""Reference implementations used to check the package. Written for
clarity, sharing no code with the modules under test."""

from __future__ import annotations

import itertools

COMP = {"A": "T", "C": "G", "G": "C", "T": "A", "N": "N"}
CODE = {"A": 0, "C": 1, "G": 2, "T": 3}


def revcomp(s: str) -> str:
    return "".join(COMP[b] for b in reversed(s))


def bits_of(fields) -> str:
    """Stream-order bit string for (value, width) fields, LSB first."""
    return "".join(format(v, f"0{w}b")[::-1] if w else "" for v, w in fields)


def bits_to_bytes(bits: str) -> bytes:
    bits = bits + "0" * (-len(bits) % 8)
    return bytes(int(bits[i:i + 8][::-1], 2) for i in range(0, len(bits), 8))


def bytes_to_bits(data: bytes, n: int | None = None) -> str:
    s = "".join(format(b, "08b")[::-1] for b in data)
    return s if n is None else s[:n]


def take(bits: str, pos: int, width: int) -> tuple[int, int]:
    """Read ``width`` LSB-first bits at ``pos``; return (value, new pos)."""
    chunk = bits[pos:pos + width]
    assert len(chunk) == width, "ran past the end"
    return (int(chunk[::-1], 2) if width else 0), pos + width


def bitlen(v: int) -> int:
    return max(1, len(bin(v)) - 2)


def recount(values) -> dict[int, int]:
    out: dict[int, int] = {}
    for v in values:
        b = bitlen(v)
        out[b] = out.get(b, 0) + 1
    return out


def scheme_cost(hist: dict[int, int], widths, ranks=None) -> int | None:
    """Bits for ``hist`` under classes ``widths`` (ascending). Without
    ``ranks`` the classes are ranked by descending use. Guide code length of
    rank r is r + 1. None if some value is not covered."""
    widths = sorted(widths)
    use = [0] * len(widths)
    for b, c in hist.items():
        cls = next((i for i, w in enumerate(widths) if w >= b), None)
        if cls is None:
            return None
        use[cls] += c
    if ranks is None:
        order = sorted(range(len(widths)), key=lambda i: -use[i])
        ranks = [0] * len(widths)
        for r, i in enumerate(order):
            ranks[i] = r
    return sum(use[i] * (ranks[i] + 1 + widths[i]) for i in range(len(widths)))


def brute_force_cost(hist: dict[int, int], max_k: int, permute: bool = False) -> int:
    """Cheapest cost over every width subset of size <= ``max_k`` drawn from
    1..max bit length (and, with ``permute``, every rank assignment)."""
    top = max(hist)
    best = None
    pool = range(1, top)
    for k in range(1, max_k + 1):
        for rest in itertools.combinations(pool, k - 1):
            widths = list(rest) + [top]
            if permute:
                for perm in itertools.permutations(range(k)):
                    c = scheme_cost(hist, widths, perm)
                    best = c if best is None or c < best else best
            else:
                c = scheme_cost(hist, widths)
                best = c if best is None or c < best else best
    return best


def coded_bits(widths, ranks, fixed: bool, value: int) -> int:
    """Guide plus payload bits of ``value`` in the narrowest class that holds it."""
    b = bitlen(value)
    for w, r in sorted(zip(widths, ranks)):
        if w >= b:
            return (0 if fixed else r + 1) + w
    raise ValueError(f"value {value} not covered")


def substitution_only_bits(positions, mismatch_offsets, rev_count, schemes, chimeric_flag,
                           corner_flag, fixed_len=True) -> int:
    """Expected payload bits of a read set in which every read maps as one
    segment with substitutions only. ``positions`` are the matching
    positions, ``mismatch_offsets`` one offset list per read."""
    m, mm, cnt = schemes[0], schemes[1], schemes[2]
    per_read_flags = 2 + chimeric_flag + corner_flag    # escape + rev (+ chim, + corner)
    total = per_read_flags * len(positions)
    prev = 0
    for p in sorted(positions):
        total += coded_bits(m.widths, m.ranks, m.fixed, p - prev)
        prev = p
    for offs in mismatch_offsets:
        total += coded_bits(cnt.widths, cnt.ranks, cnt.fixed, len(offs))
        last = 0
        for o in offs:
            total += coded_bits(mm.widths, mm.ranks, mm.fixed, o - last) + 2
            last = o
        if offs and offs[0] == 0 and not corner_flag:
            total += 1                                  # offset-0 discriminator
    assert fixed_len
    return total


def edit_distance(a: str, b: str) -> int:
    prev = list(range(len(b) + 1))
    for i, x in enumerate(a, 1):
        cur = [i] + [0] * len(b)
        for j, y in enumerate(b, 1):
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (x != y))
        prev = cur
    return prev[-1]


def semi_global_distance(read: str, ref: str) -> int:
    """Minimum edit distance of ``read`` to any substring of ``ref``."""
    prev = [0] * (len(ref) + 1)
    for i, x in enumerate(read, 1):
        cur = [i] + [0] * len(ref)
        for j, y in enumerate(ref, 1):
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (x != y))
        prev = cur
    return min(prev)


def apply_edits(cons: str, pos: int, edits, length: int) -> str:
    """Build a read from ``cons[pos:]`` and an edit list of
    (consensus offset, kind, arg): ("S", base), ("I", bases), ("D", n)."""
    out, cur = [], 0
    for off, kind, arg in sorted(edits, key=lambda e: e[0]):
        out.append(cons[pos + cur:pos + off])
        cur = off
        if kind == "S":
            out.append(arg)
            cur += 1
        elif kind == "I":
            out.append(arg)
        else:
            cur += arg
    out.append(cons[pos + cur:pos + length])
    return "".join(out)
