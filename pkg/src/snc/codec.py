"""Sparse encoder and incremental Gauss-Jordan decoder over GF(q).

Coding vectors are numpy ``uint8`` arrays of length ``n``. A source packet
``i`` counts as decoded once the unit vector ``e_i`` lies in the row space
of the received coefficient matrix, i.e. once some row of the reduced
row-echelon form has a single nonzero entry.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field as dc_field
from typing import Sequence

import numpy as np

from .gf import FieldSpec, field as get_field

# Transmissions are drawn in fixed-size blocks so the first m transmissions of
# a trial do not depend on how far the trial is run.
BLOCK = 64


class Mode(str, enum.Enum):
    FULLY_RANDOM = "fully-random"
    CONSTRAINED = "constrained"


@dataclass(frozen=True)
class SncParams:
    """One coding scenario: generation size, field, density, erasure rate.

    ``p`` is the probability that a coefficient is nonzero. In constrained
    mode every coding vector has exactly ``round(n * p)`` nonzeros.
    """

    n: int
    field: FieldSpec
    p: float
    epsilon: float = 0.0
    mode: Mode = Mode.FULLY_RANDOM

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"generation size must be positive, got {self.n}")
        if not 0.0 < self.p <= self.p_max + 1e-12:
            raise ValueError(f"p={self.p} outside (0, 1 - 1/q] = (0, {self.p_max}]")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"erasure probability {self.epsilon} outside [0, 1]")
        object.__setattr__(self, "mode", Mode(self.mode))
        if self.mode is Mode.CONSTRAINED and not 1 <= self.weight <= self.n:
            raise ValueError(f"constrained row weight {self.weight} outside [1, {self.n}]")

    @classmethod
    def from_weight(cls, n: int, q: int | str, w: float, **kw) -> SncParams:
        return cls(n=n, field=get_field(q), p=w / n, **kw)

    @classmethod
    def rlnc(cls, n: int, q: int | str, **kw) -> SncParams:
        f = get_field(q)
        return cls(n=n, field=f, p=1 - 1 / f.q, **kw)

    @property
    def q(self) -> int:
        return self.field.q

    @property
    def p_max(self) -> float:
        return 1.0 - 1.0 / self.field.q

    @property
    def weight(self) -> int:
        # ties-to-even, same as numpy.rint used by the block drawer
        return round(self.n * self.p)

    def with_p(self, p: float) -> SncParams:
        return SncParams(self.n, self.field, p, self.epsilon, self.mode)


@dataclass(frozen=True)
class ReceiveReport:
    rank_increased: bool
    newly_decoded: frozenset[int]


def rref(rows, fld: FieldSpec) -> tuple[np.ndarray, list[int]]:
    """Reduced row-echelon form of a matrix over ``fld``.

    Returns the nonzero rows, sorted by pivot column, and the pivot columns.
    """
    a = np.array(rows, dtype=np.uint8, ndmin=2).copy()
    m, n = a.shape
    pivots: list[int] = []
    r = 0
    for c in range(n):
        if r == m:
            break
        nz = np.flatnonzero(a[r:, c])
        if nz.size == 0:
            continue
        k = r + nz[0]
        if k != r:
            a[[r, k]] = a[[k, r]]
        a[r] = fld.scale(int(fld.inv_table[a[r, c]]), a[r])
        for i in range(m):
            if i != r and a[i, c]:
                a[i] ^= fld.scale(int(a[i, c]), a[r])
        pivots.append(c)
        r += 1
    return a[:r], pivots


class DecoderState:
    """Incrementally maintained RREF of the received coding vectors.

    Dependent vectors are discarded, so ``rank`` equals the number of rows
    kept. Not safe for concurrent mutation.
    """

    def __init__(self, n: int, fld: FieldSpec):
        self.n = n
        self.field = fld
        self.pivots: dict[int, np.ndarray] = {}
        self.decoded: set[int] = set()

    @property
    def rank(self) -> int:
        return len(self.pivots)

    @property
    def rref_rows(self) -> np.ndarray:
        if not self.pivots:
            return np.zeros((0, self.n), dtype=np.uint8)
        return np.stack([self.pivots[c] for c in sorted(self.pivots)])

    def receive(self, v) -> ReceiveReport:
        v = np.array(v, dtype=np.int64)
        if v.shape != (self.n,):
            raise ValueError(f"coding vector has shape {v.shape}, decoder expects ({self.n},)")
        if v.min(initial=0) < 0 or v.max(initial=0) >= self.field.q:
            raise ValueError(f"coefficients outside GF({self.field.q})")
        v = v.astype(np.uint8)
        fld = self.field

        for c, row in self.pivots.items():
            if v[c]:
                v ^= fld.scale(int(v[c]), row)
        nz = np.flatnonzero(v)
        if nz.size == 0:
            return ReceiveReport(False, frozenset())

        lead = int(nz[0])
        v = fld.scale(int(fld.inv_table[v[lead]]), v)
        touched = [lead]
        for c, row in self.pivots.items():
            if row[lead]:
                row ^= fld.scale(int(row[lead]), v)
                touched.append(c)
        self.pivots[lead] = v

        newly = set()
        for c in touched:
            if c not in self.decoded and np.count_nonzero(self.pivots[c]) == 1:
                newly.add(c)
        self.decoded |= newly
        return ReceiveReport(True, frozenset(newly))

    def copy(self) -> DecoderState:
        other = DecoderState(self.n, self.field)
        other.pivots = {c: row.copy() for c, row in self.pivots.items()}
        other.decoded = set(self.decoded)
        return other


def draw_coding_vector(params: SncParams, rng: np.random.Generator) -> np.ndarray:
    """One coding vector.

    Fully-random mode: each coefficient is zero with probability ``1 - p``,
    otherwise uniform over the ``q - 1`` nonzero values. Constrained mode: a
    uniformly random support of size ``round(n p)``, nonzero uniform values.
    """
    n, q = params.n, params.q
    vals = rng.integers(1, q, size=n, dtype=np.int64)
    if params.mode is Mode.CONSTRAINED:
        mask = np.zeros(n, dtype=bool)
        mask[rng.choice(n, size=params.weight, replace=False)] = True
    else:
        mask = rng.random(n) < params.p
    return np.where(mask, vals, 0).astype(np.uint8)


def row_densities(
    params: SncParams, start: int, count: int, packet_p: Sequence[float] | None = None
) -> np.ndarray:
    """Density used for transmissions ``start+1 .. start+count`` (1-based).

    With a per-packet schedule, transmission ``i`` uses ``packet_p[i-1]``;
    past the end of the schedule the last entry is reused.
    """
    if packet_p is None or len(packet_p) == 0:
        return np.full(count, params.p)
    sched = np.asarray(packet_p, dtype=float)
    idx = np.minimum(np.arange(start, start + count), len(sched) - 1)
    return sched[idx]


def draw_block(
    params: SncParams,
    rng: np.random.Generator,
    start: int,
    packet_p: Sequence[float] | None = None,
    count: int = BLOCK,
) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``count`` transmissions: coefficient rows and erasure flags.

    The stream layout (erasure uniforms, then position uniforms, then
    nonzero values) is shared by the single-trial runner and the campaign
    runner so both see identical packets for the same seed.
    """
    n, q = params.n, params.q
    erase_u = rng.random(count)
    pos_u = rng.random((count, n))
    vals = rng.integers(1, q, size=(count, n), dtype=np.int64)
    dens = row_densities(params, start, count, packet_p)
    if params.mode is Mode.CONSTRAINED:
        weights = np.clip(np.rint(n * dens), 1, n)
        ranks = np.argsort(np.argsort(pos_u, axis=1), axis=1)
        mask = ranks < weights[:, None]
    else:
        mask = pos_u < dens[:, None]
    rows = np.where(mask, vals, 0).astype(np.uint8)
    erased = erase_u < params.epsilon
    return rows, erased


@dataclass
class TrialTrace:
    """Outcome of one simulated trial.

    ``ranks``/``decoded_counts`` have one entry per delivered packet;
    ``delivered_at`` holds the (1-based) transmission index of each.
    Decode times are 1-based transmission indices, ``-1`` if never.
    """

    transmissions: int
    delivered_at: list[int] = dc_field(default_factory=list)
    ranks: list[int] = dc_field(default_factory=list)
    decoded_counts: list[int] = dc_field(default_factory=list)
    decode_time: list[int] = dc_field(default_factory=list)
    decode_time_delivered: list[int] = dc_field(default_factory=list)

    @property
    def final_rank(self) -> int:
        return self.ranks[-1] if self.ranks else 0

    @property
    def final_decoded(self) -> int:
        return self.decoded_counts[-1] if self.decoded_counts else 0


def run_transmission(
    params: SncParams,
    m: int,
    rng: np.random.Generator,
    packet_p: Sequence[float] | None = None,
) -> TrialTrace:
    """Simulate ``m`` channel uses through an erasure channel."""
    if m < 0:
        raise ValueError("m must be non-negative")
    state = DecoderState(params.n, params.field)
    trace = TrialTrace(m, decode_time=[-1] * params.n, decode_time_delivered=[-1] * params.n)
    t = 0
    while t < m:
        rows, erased = draw_block(params, rng, t, packet_p)
        for row, lost in zip(rows, erased):
            if t == m:
                break
            t += 1
            if lost:
                continue
            report = state.receive(row)
            trace.delivered_at.append(t)
            trace.ranks.append(state.rank)
            trace.decoded_counts.append(len(state.decoded))
            for i in report.newly_decoded:
                trace.decode_time[i] = t
                trace.decode_time_delivered[i] = len(trace.delivered_at)
    return trace
