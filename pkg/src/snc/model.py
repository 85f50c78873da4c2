"""Closed-form approximations for rank and partial decoding of sparse codes.

The pipeline is:

* ``full_rank_prob``: probability that ``i`` sparse rows are independent,
  a product over all nonzero combinations of ``k`` rows.
* ``rank_distribution``: the rank-growth chain driven by ratios of
  consecutive full-rank probabilities.
* ``residual_density``: nonzero density of undecoded rows after
  Gauss-Jordan has eliminated ``x`` decoded sources.
* ``prob_exact_given_rank``: inclusion-exclusion over the set of decoded
  sources, with matrix counts ``(C(n, n d) (q-1)^(n d))^rows``.
* ``prob_exact`` / ``prob_at_least``: the above mixed over the rank law.

All large quantities are handled as logarithms. Alternating sums are
evaluated from separately accumulated positive and negative parts, so a
value that overflows is reported as ``inf`` rather than ``nan`` before
clamping.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import TextIO

import numpy as np
from numba import njit
from scipy.special import gammaln, gammasgn

from .codec import SncParams
from .gf import field as get_field

log = logging.getLogger(__name__)


# --------------------------------------------------------------------------
# real-argument binomials


def _is_pole(z: float) -> bool:
    return z <= 0 and float(z).is_integer()


def log_gamma_binomial(a: float, b: float) -> tuple[float, float]:
    """``(log|C(a, b)|, sign)`` for the Gamma-function binomial."""
    args = (a + 1, b + 1, a - b + 1)
    if any(_is_pole(z) for z in args):
        raise ValueError(f"binomial C({a}, {b}) hits a Gamma pole at one of {args}")
    mag = gammaln(args[0]) - gammaln(args[1]) - gammaln(args[2])
    sign = gammasgn(args[0]) * gammasgn(args[1]) * gammasgn(args[2])
    return float(mag), float(sign)


def gamma_binomial(a: float, b: float) -> float:
    """C(a, b) = Gamma(a+1) / (Gamma(b+1) Gamma(a-b+1)) for real a, b."""
    if float(a).is_integer() and float(b).is_integer() and 0 <= b <= a:
        return float(math.comb(int(a), int(b)))
    mag, sign = log_gamma_binomial(a, b)
    return sign * math.exp(mag)


def _lbinom_int(a: int, b: int) -> float:
    if b < 0 or b > a:
        return -math.inf
    return math.lgamma(a + 1) - math.lgamma(b + 1) - math.lgamma(a - b + 1)


# --------------------------------------------------------------------------
# full-rank probabilities and the rank law


@dataclass(frozen=True)
class FullRankCurve:
    """``values[i]`` approximates P(i sparse rows are independent), i = 0..n."""

    values: np.ndarray
    log_values: np.ndarray


def _key(params: SncParams) -> tuple[int, int, float]:
    return params.n, params.q, float(params.p)


@lru_cache(maxsize=4096)
def _log_full_rank(n: int, q: int, p: float) -> np.ndarray:
    a = 1.0 - q * p / (q - 1)
    out = np.zeros(n + 1)
    log_q1 = math.log(q - 1)
    for i in range(1, n + 1):
        total = 0.0
        for k in range(1, i + 1):
            base = (q - 1) / q * a**k + 1.0 / q
            log_pk = n * math.log(base)
            pk = math.exp(log_pk)
            if pk >= 1.0:
                total = -math.inf
                break
            # log(-log(1 - pk)) without cancellation for tiny pk
            if pk < 1e-8:
                log_neg_log1m = log_pk + pk / 2
            else:
                log_neg_log1m = math.log(-math.log1p(-pk))
            log_nk = _lbinom_int(i, k) + k * log_q1
            total -= math.exp(log_nk + log_neg_log1m)
        out[i] = total
    out.setflags(write=False)
    return out


def full_rank_curve(params: SncParams) -> FullRankCurve:
    lv = _log_full_rank(*_key(params))
    return FullRankCurve(np.exp(lv), lv)


def full_rank_prob(params: SncParams, i: int) -> float:
    """Product over k of (1 - p_k)^(n_k), n_k = C(i, k)(q-1)^k."""
    if not 0 <= i <= params.n:
        raise ValueError(f"row count {i} outside [0, {params.n}]")
    return float(math.exp(_log_full_rank(*_key(params))[i]))


@dataclass(frozen=True)
class RankDistribution:
    m: int
    probs: np.ndarray  # probs[r] for r = 0..m

    def __getitem__(self, r: int) -> float:
        return float(self.probs[r]) if 0 <= r <= self.m else 0.0


@lru_cache(maxsize=1024)
def _rank_table(n: int, q: int, p: float, m_max: int) -> np.ndarray:
    """Row m holds P(rank = r | m rows) for r = 0..n."""
    lv = _log_full_rank(n, q, p)
    gain = np.zeros(n + 1)
    gain[:n] = np.exp(lv[1:] - lv[:-1])
    gain = np.clip(gain, 0.0, 1.0)
    table = np.zeros((m_max + 1, n + 1))
    table[0, 0] = 1.0
    for m in range(1, m_max + 1):
        prev = table[m - 1]
        cur = prev * (1.0 - gain)
        cur[1:] += prev[:-1] * gain[:-1]
        table[m] = cur
    table.setflags(write=False)
    return table


def rank_table(params: SncParams, m_max: int) -> np.ndarray:
    # grow in powers of two so the cache is reused across calls
    size = max(2 * params.n, 1)
    while size < m_max:
        size *= 2
    return _rank_table(*_key(params), size)[: m_max + 1]


def rank_distribution(params: SncParams, m: int) -> RankDistribution:
    """Rank law of ``m`` received rows; P(rank = r) = 0 for r > n."""
    if m < 0:
        raise ValueError("m must be non-negative")
    row = rank_table(params, m)[m]
    probs = np.zeros(m + 1)
    k = min(m, params.n) + 1
    probs[:k] = row[:k]
    return RankDistribution(m, probs)


# --------------------------------------------------------------------------
# density of the undecoded rows


def residual_weights(params: SncParams, x: int) -> list[float]:
    """P(l of the x decoded sources fall in a row's support), l = 0..x.

    Hypergeometric C(x, l) C(n-x, np-l) / C(n, np); exact rational
    arithmetic when n p is an integer, Gamma-form binomials otherwise.
    """
    n = params.n
    w = n * params.p
    w_int = round(w)
    if abs(w - w_int) < 1e-9:
        total = math.comb(n, w_int)
        out = []
        for l in range(x + 1):
            if l > w_int or w_int - l > n - x:
                out.append(0.0)
            else:
                out.append(float(Fraction(math.comb(x, l) * math.comb(n - x, w_int - l), total)))
        return out
    out = []
    lden, sden = log_gamma_binomial(n, w)
    for l in range(x + 1):
        try:
            lnum, snum = log_gamma_binomial(n - x, w - l)
        except ValueError:
            log.debug("Gamma pole in residual weight n=%d x=%d l=%d w=%g; term skipped", n, x, l, w)
            out.append(0.0)
            continue
        out.append(math.comb(x, l) * snum * sden * math.exp(lnum - lden))
    return out


def residual_density(params: SncParams, x: int) -> float:
    """Expected nonzero density of a row after x sources are eliminated."""
    if not 0 <= x <= params.n:
        raise ValueError(f"decoded count {x} outside [0, {params.n}]")
    n, w = params.n, params.n * params.p
    return sum((w - l) / n * wt for l, wt in enumerate(residual_weights(params, x)))


@lru_cache(maxsize=4096)
def _residual_densities(n: int, q: int, p: float) -> np.ndarray:
    params = SncParams(n, get_field(q), p)
    return np.array([residual_density(params, x) for x in range(n + 1)])


def _log_matrix_count(n: int, q: int, d: float) -> float:
    """log of C(n, n d) (q-1)^(n d), the number of rows of density d."""
    nd = n * d
    mag, sign = log_gamma_binomial(n, nd)
    if sign < 0:
        # only reachable for densities outside [0, 1]
        log.warning("negative row count C(%d, %g); using its magnitude", n, nd)
    return mag + nd * math.log(q - 1)


@lru_cache(maxsize=4096)
def _log_counts(n: int, q: int, p: float) -> tuple[np.ndarray, float]:
    dens = _residual_densities(n, q, p)
    lk = np.array([_log_matrix_count(n, q, d) for d in dens])
    return lk, _log_matrix_count(n, q, p)


# --------------------------------------------------------------------------
# inclusion-exclusion core


@njit(cache=True)
def _conditional_kernel(m, n, log_rank, lk, lk0, lbin):
    """Clamped and raw P(X = x | R = r, M = m) for all r, x.

    ``log_rank[mm, rr]`` is log P(rank rr | mm rows); ``lk[k]`` the log row
    count at residual density P_k; ``lbin[a, b]`` = log C(a, b).
    """
    clamped = np.zeros((n + 1, n + 1))
    raw = np.zeros((n + 1, n + 1))
    top = min(m, n)
    for r in range(top + 1):
        lpr = log_rank[m, r]
        if lpr == -np.inf:
            continue
        for x in range(r + 1):
            jmax = min(m - x, n - x, r - x)
            hi_pos = -np.inf
            hi_neg = -np.inf
            for j in range(jmax + 1):
                t = _term(m, n, r, x, j, log_rank, lk, lk0, lbin, lpr)
                if j % 2 == 0:
                    hi_pos = max(hi_pos, t)
                else:
                    hi_neg = max(hi_neg, t)
            s_pos = 0.0
            s_neg = 0.0
            for j in range(jmax + 1):
                t = _term(m, n, r, x, j, log_rank, lk, lk0, lbin, lpr)
                if t == -np.inf:
                    continue
                if j % 2 == 0:
                    s_pos += math.exp(t - hi_pos)
                else:
                    s_neg += math.exp(t - hi_neg)
            lpos = hi_pos + math.log(s_pos) if s_pos > 0 else -np.inf
            lneg = hi_neg + math.log(s_neg) if s_neg > 0 else -np.inf
            lc = lbin[n, x]
            if lpos > lneg:
                val = math.exp(min(lc + lpos, 709.0)) * -math.expm1(lneg - lpos)
                if lc + lpos > 709.0:
                    val = np.inf
            elif lneg > lpos:
                val = -math.exp(min(lc + lneg, 709.0)) * -math.expm1(lpos - lneg)
                if lc + lneg > 709.0:
                    val = -np.inf
            else:
                val = 0.0
            raw[r, x] = val
            clamped[r, x] = min(1.0, max(0.0, val))
    if m >= n:
        # full rank: the row space is everything, every source decodes
        for x in range(n + 1):
            clamped[n, x] = 0.0
        clamped[n, n] = 1.0
    return clamped, raw


@njit(cache=True)
def _term(m, n, r, x, j, log_rank, lk, lk0, lbin, lpr):
    k = x + j
    rows_left = m - k
    lp = log_rank[rows_left, r - k]
    if lp == -np.inf:
        return -np.inf
    return lbin[n - x, j] + rows_left * lk[k] - m * lk0 + lp - lpr


@lru_cache(maxsize=None)
def _lbin_table(n: int) -> np.ndarray:
    t = np.full((n + 1, n + 1), -np.inf)
    for a in range(n + 1):
        for b in range(a + 1):
            t[a, b] = _lbinom_int(a, b)
    return t


def _log_rank_table(params: SncParams, m_max: int) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(rank_table(params, m_max))


def conditional_grid(params: SncParams, m: int) -> tuple[np.ndarray, np.ndarray]:
    """(clamped, raw) arrays indexed [r, x] for P(X = x | R = r, M = m)."""
    n, q, p = _key(params)
    lk, lk0 = _log_counts(n, q, p)
    return _conditional_kernel(m, n, _log_rank_table(params, m), lk, lk0, _lbin_table(n))


def prob_exact_given_rank(params: SncParams, x: int, r: int, m: int) -> float:
    """P(X = x | R = r, M = m), clamped to [0, 1].

    Returns 0 when the rank itself has zero probability (the conditional is
    undefined there).
    """
    if not 0 <= x <= r <= m:
        raise ValueError(f"need 0 <= x <= r <= m, got x={x} r={r} m={m}")
    if r > params.n:
        return 0.0
    if rank_distribution(params, m)[r] == 0.0:
        log.warning("P(rank=%d | m=%d) is zero for %s; conditional set to 0", r, m, params)
        return 0.0
    clamped, _ = conditional_grid(params, m)
    return float(clamped[r, x])


# --------------------------------------------------------------------------
# tables over (m, x)


@dataclass
class PartialDecodingTable:
    """Model grids for m = 0..m_max and x = 0..n.

    ``exact[m, x]`` mixes the per-rank clamped conditionals over the rank
    law. ``at_least_raw`` is the same mixture of per-rank tail sums, before
    any repair; ``at_least`` is clamped to [0, 1] and made monotone
    (non-increasing in x, non-decreasing in m) by running maxima.
    """

    params: SncParams
    m_max: int
    exact: np.ndarray
    at_least_raw: np.ndarray
    at_least: np.ndarray
    repair_magnitude: float

    def expected_decoded(self) -> np.ndarray:
        return expected_from_exact(self.exact)


def expected_from_exact(exact: np.ndarray) -> np.ndarray:
    """E(X | M = m) from rows of P(X = x | M = m), renormalised per row."""
    xs = np.arange(exact.shape[1])
    mass = exact.sum(axis=1)
    safe = np.where(mass > 0, mass, 1.0)
    return (exact @ xs) / safe


def repair_monotone(grid: np.ndarray) -> tuple[np.ndarray, float]:
    g = np.clip(grid, 0.0, 1.0)
    g[:, 0] = 1.0
    violation = max(
        float(np.max(np.diff(g, axis=1), initial=0.0)),
        float(np.max(-np.diff(g, axis=0), initial=0.0)),
    )
    g = np.maximum.accumulate(g[:, ::-1], axis=1)[:, ::-1]
    g = np.maximum.accumulate(g, axis=0)
    return g, violation


def _marginals(params: SncParams, m: int) -> tuple[np.ndarray, np.ndarray]:
    clamped, _ = conditional_grid(params, m)
    pr = rank_table(params, m)[m]
    exact = pr @ clamped
    tails = np.cumsum(clamped[:, ::-1], axis=1)[:, ::-1]
    return exact, pr @ tails


def partial_decoding_table(params: SncParams, m_max: int | None = None) -> PartialDecodingTable:
    m_max = 2 * params.n if m_max is None else m_max
    return _table(params.n, params.q, float(params.p), m_max)


@lru_cache(maxsize=256)
def _table(n: int, q: int, p: float, m_max: int) -> PartialDecodingTable:
    params = SncParams(n, get_field(q), p)
    exact = np.zeros((m_max + 1, n + 1))
    tail = np.zeros((m_max + 1, n + 1))
    for m in range(m_max + 1):
        exact[m], tail[m] = _marginals(params, m)
    repaired, violation = repair_monotone(tail)
    if violation > 0:
        log.info("monotonicity repair for n=%d q=%d p=%g: largest violation %.3g", n, q, p, violation)
    for a in (exact, tail, repaired):
        a.setflags(write=False)
    return PartialDecodingTable(params, m_max, exact, tail, repaired, violation)


def _table_for(params: SncParams, m: int) -> PartialDecodingTable:
    return partial_decoding_table(params, max(m, 2 * params.n))


def prob_exact(params: SncParams, x: int, m: int) -> float:
    """P(X = x | M = m)."""
    if not 0 <= x <= params.n or m < 0:
        raise ValueError(f"need 0 <= x <= n and m >= 0, got x={x} m={m}")
    return float(_table_for(params, m).exact[m, x])


def prob_at_least(params: SncParams, x: int, m: int, repaired: bool = True) -> float:
    """P(X >= x | M = m); ``repaired=False`` gives the value before repair."""
    if not 0 <= x <= params.n or m < 0:
        raise ValueError(f"need 0 <= x <= n and m >= 0, got x={x} m={m}")
    t = _table_for(params, m)
    return float((t.at_least if repaired else t.at_least_raw)[m, x])


def effective_receptions(m: int, epsilon: float) -> int:
    """Mean number of deliveries in m channel uses, rounded to nearest."""
    if not 0.0 <= epsilon < 1.0:
        raise ValueError(f"erasure probability {epsilon} outside [0, 1)")
    return int(round(m * (1.0 - epsilon)))


def prob_exact_erasure(params: SncParams, x: int, m: int) -> float:
    """P(X = x) after m transmissions over an erasure channel."""
    return prob_exact(params, x, effective_receptions(m, params.epsilon))


def prob_at_least_erasure(params: SncParams, x: int, m: int) -> float:
    return prob_at_least(params, x, effective_receptions(m, params.epsilon))


# --------------------------------------------------------------------------
# CSV


GRID_COLUMNS = ("m", "x", "at_least", "exact", "at_least_raw")


def write_table_csv(table: PartialDecodingTable, out: TextIO) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(GRID_COLUMNS)
    for m in range(table.m_max + 1):
        for x in range(table.params.n + 1):
            w.writerow([m, x, repr(float(table.at_least[m, x])), repr(float(table.exact[m, x])),
                        repr(float(table.at_least_raw[m, x]))])


def read_table_csv(src: TextIO) -> dict[str, np.ndarray]:
    """Parse a grid CSV back into ``{column: array[m, x]}``."""
    rows = list(csv.DictReader(src))
    m_max = max(int(r["m"]) for r in rows)
    x_max = max(int(r["x"]) for r in rows)
    out = {k: np.zeros((m_max + 1, x_max + 1)) for k in GRID_COLUMNS[2:]}
    for r in rows:
        for k in out:
            out[k][int(r["m"]), int(r["x"])] = float(r[k])
    return out
