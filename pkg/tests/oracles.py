"""Exact reference computations kept independent of the library code paths."""

from __future__ import annotations

import itertools
from collections import defaultdict
from fractions import Fraction


def _span(rows: list[int]) -> set[int]:
    span = {0}
    for r in rows:
        span |= {s ^ r for s in span}
    return span


def gf2_rank(rows: list[int]) -> int:
    return len(_span(rows)).bit_length() - 1


def enumerate_gf2(n: int, m: int, p: float):
    """Exact joint law of (rank, decoded count) for m x n binary matrices.

    Every entry is 1 independently with probability p. A source i is
    decoded iff the unit vector e_i lies in the row span, tested by
    enumerating the span.
    """
    law: dict[tuple[int, int], float] = defaultdict(float)
    units = [1 << i for i in range(n)]
    for rows in itertools.product(range(1 << n), repeat=m):
        ones = sum(bin(r).count("1") for r in rows)
        weight = p**ones * (1 - p) ** (m * n - ones)
        span = _span(list(rows))
        rank = len(span).bit_length() - 1
        decoded = sum(u in span for u in units)
        law[rank, decoded] += weight
    return dict(law)


def marginal_rank(law, m):
    out = [0.0] * (m + 1)
    for (r, _), v in law.items():
        out[r] += v
    return out


def marginal_decoded(law, n):
    out = [0.0] * (n + 1)
    for (_, x), v in law.items():
        out[x] += v
    return out


def full_rank_dp(n: int, q: int, p: Fraction, rows: int) -> Fraction:
    """Exact P(rows independent) for q = 2 by tracking the span exactly.

    Feasible for small n: the state is the current span (a set of ints).
    """
    assert q == 2
    weights = {}
    for v in range(1 << n):
        k = bin(v).count("1")
        weights[v] = p**k * (1 - p) ** (n - k)
    states = {frozenset({0}): Fraction(1)}
    for _ in range(rows):
        nxt: dict[frozenset, Fraction] = defaultdict(Fraction)
        for span, pr in states.items():
            for v, w in weights.items():
                if v in span:
                    continue
                nxt[frozenset(span | {s ^ v for s in span})] += pr * w
        states = nxt
    return sum(states.values(), Fraction(0))


def dense_full_rank(n: int, q: int, m: int) -> float:
    """P(m uniform rows over GF(q)^n are independent) = prod (1 - q^(i-n))."""
    out = 1.0
    for i in range(m):
        out *= 1.0 - float(q) ** (i - n)
    return out


def dense_rank_law(n: int, q: int, m: int) -> list[float]:
    """Exact rank distribution of an m x n uniform matrix over GF(q)."""
    probs = [1.0] + [0.0] * m
    for _ in range(m):
        nxt = [0.0] * (m + 1)
        for r, pr in enumerate(probs):
            if pr == 0.0:
                continue
            stay = float(q) ** (r - n)
            nxt[r] += pr * stay
            if r < m:
                nxt[r + 1] += pr * (1.0 - stay)
        probs = nxt
    return probs
