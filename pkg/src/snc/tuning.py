"""Average decoding delay and per-transmission sparsity tuning.

The tuned scheme picks, for every reception count ``i``, the matrix density
``p_i`` that maximises the model's E(X | M = i). Row ``i`` is then sent with
density ``i p_i - (i-1) p_(i-1)`` so that the first ``i`` rows have average
density ``p_i``.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from typing import Sequence, TextIO

import numpy as np

from . import model
from .codec import SncParams
from .gf import FieldSpec

log = logging.getLogger(__name__)

DEFAULT_TOL = 0.5


class UnboundedHorizonError(ValueError):
    """The expected-decoded curve never comes within ``tol`` of ``n``."""


@dataclass(frozen=True)
class AddReport:
    add: float  # mean transmissions until a source packet decodes
    ant: float  # transmissions until the whole generation decodes
    m0: int


def expected_decoded(params: SncParams, m: int) -> float:
    """Model E(X | M = m) from the per-rank clamped, renormalised law."""
    if m < 0:
        raise ValueError("m must be non-negative")
    t = model.partial_decoding_table(params, max(m, 2 * params.n))
    return float(t.expected_decoded()[m])


def add_from_curve(expected: Sequence[float], n: int, tol: float = DEFAULT_TOL) -> AddReport:
    """ADD and ANT from a curve of E(X | M = m), m = 0, 1, ...

    ``m0`` is the first index with E >= n - tol; ADD is
    ``(m0 n - sum_{i < m0} E_i) / n``, i.e. the mean over packets of the
    transmission at which each decodes, and ANT is ``m0``.
    """
    e = np.asarray(expected, dtype=float)
    hits = np.flatnonzero(e >= n - tol)
    if hits.size == 0:
        raise UnboundedHorizonError(
            f"E(X|M=m) peaks at {e.max(initial=0):.4g} < n - tol = {n - tol} within m <= {len(e) - 1}"
        )
    m0 = int(hits[0])
    if np.any(np.diff(e[: m0 + 1]) < 0):
        log.info("expected-decoded curve decreases before m0=%d", m0)
    add = (m0 * n - math.fsum(e[:m0])) / n
    return AddReport(add=add, ant=float(m0), m0=m0)


def default_grid(n: int, q: int) -> np.ndarray:
    """Candidate densities k / (4n), k = 1 .. floor(4n (1 - 1/q))."""
    kmax = math.floor(4 * n * (1 - 1 / q) + 1e-9)
    return np.arange(1, kmax + 1) / (4 * n)


@dataclass(frozen=True)
class TuningSchedule:
    n: int
    q: int
    targets: tuple[float, ...]  # matrix density after i rows, i = 1..m0
    per_packet: tuple[float, ...]  # density of row i
    m0: int

    def __post_init__(self):
        if not len(self.targets) == len(self.per_packet) == self.m0:
            raise ValueError("schedule sequences must both have length m0")

    def write_csv(self, out: TextIO) -> None:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["i", "target_p", "packet_p"])
        for i, (t, pp) in enumerate(zip(self.targets, self.per_packet), start=1):
            w.writerow([i, repr(t), repr(pp)])

    @classmethod
    def read_csv(cls, src: TextIO, n: int, q: int) -> TuningSchedule:
        rows = list(csv.DictReader(src))
        if [int(r["i"]) for r in rows] != list(range(1, len(rows) + 1)):
            raise ValueError("schedule CSV must list i = 1, 2, ... in order")
        targets = tuple(float(r["target_p"]) for r in rows)
        per_packet = tuple(float(r["packet_p"]) for r in rows)
        return cls(n, q, targets, per_packet, len(rows))


def per_packet_densities(targets: Sequence[float], n: int, q: int) -> list[float]:
    """Row densities realising the cumulative targets, clamped to [1/n, 1 - 1/q]."""
    lo, hi = 1.0 / n, 1.0 - 1.0 / q
    out = []
    prev = 0.0
    for i, t in enumerate(targets, start=1):
        p = i * t - (i - 1) * prev
        if not lo <= p <= hi:
            log.info("row %d density %.4g clamped to [%.4g, %.4g]", i, p, lo, hi)
            p = min(max(p, lo), hi)
        out.append(p)
        prev = t
    return out


def _argmax_smallest(values: np.ndarray, rtol: float = 1e-12) -> int:
    # relative tolerance keeps the choice invariant under positive scaling
    best = values.max()
    return int(np.flatnonzero(values >= best - rtol * abs(best))[0])


def optimize_schedule(
    n: int,
    field: FieldSpec,
    search_grid: Sequence[float] | None = None,
    tol: float = DEFAULT_TOL,
    m_max: int | None = None,
) -> TuningSchedule:
    """Grid-search the density maximising E(X | M = i) for each i.

    Ties go to the sparsest candidate. Stops at the first ``i`` whose best
    expectation reaches ``n - tol``.
    """
    q = field.q
    grid = np.sort(np.asarray(default_grid(n, q) if search_grid is None else search_grid, float))
    if grid.size == 0 or grid[0] <= 0 or grid[-1] > 1 - 1 / q + 1e-12:
        raise ValueError(f"search grid must lie in (0, {1 - 1 / q}]")
    m_max = 4 * n if m_max is None else m_max
    curves = np.stack([
        model.partial_decoding_table(SncParams(n, field, float(p)), m_max).expected_decoded()
        for p in grid
    ])
    targets = []
    for i in range(1, m_max + 1):
        k = _argmax_smallest(curves[:, i])
        targets.append(float(grid[k]))
        if curves[k, i] >= n - tol:
            break
    else:
        raise UnboundedHorizonError(f"no candidate reaches E >= {n - tol} within {m_max} rows")
    if np.any(np.diff(targets) < 0):
        log.info("target densities are not monotone for n=%d q=%d", n, q)
    per_packet = per_packet_densities(targets, n, q)
    return TuningSchedule(n, q, tuple(targets), tuple(per_packet), len(targets))
