"""Monte-Carlo campaigns and model-vs-simulation deviation metrics.

Every trial draws from its own stream (see :mod:`snc.streams`) and is run
until the generation is fully decoded or a horizon cap is hit. Statistics
are accumulated as integer histograms and integer sums over fixed-size
chunks of trials, so the result does not depend on how chunks are spread
over worker processes.
"""

from __future__ import annotations

import csv
import hashlib
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field as dc_field
from typing import Sequence, TextIO

import numpy as np

from . import model
from ._kernel import new_state, receive_block
from .codec import BLOCK, SncParams, draw_block
from .streams import trial_stream
from .tuning import TuningSchedule

CHUNK = 250
CAP_FACTOR = 50  # trials stop after CAP_FACTOR * n channel uses at most


@dataclass(frozen=True)
class Campaign:
    params: SncParams
    trials: int
    m_max: int
    x_list: tuple[int, ...] = (1,)
    schedule: TuningSchedule | None = None
    base_seed: int = 0

    def __post_init__(self):
        n = self.params.n
        if self.trials < 1:
            raise ValueError("a campaign needs at least one trial")
        if self.m_max < 0:
            raise ValueError("m_max must be non-negative")
        object.__setattr__(self, "x_list", tuple(int(x) for x in self.x_list))
        if any(not 1 <= x <= n for x in self.x_list):
            raise ValueError(f"x_list entries must lie in [1, {n}]")
        if self.schedule is not None and (self.schedule.n, self.schedule.q) != (n, self.params.q):
            raise ValueError("schedule was built for a different (n, q)")

    @property
    def cap(self) -> int:
        cap = max(self.m_max, CAP_FACTOR * self.params.n)
        return -(-cap // BLOCK) * BLOCK


@dataclass
class _Tally:
    """Integer accumulators; merging is plain addition."""

    decode_hist: np.ndarray  # [x, t]: trials whose x-th decode happens at t
    rank_hist: np.ndarray  # [r, t]: trials reaching rank r at t
    add_sum: int = 0  # sum over trials of sum_i d_i
    add_sq: int = 0  # sum over trials of (sum_i d_i)^2
    ant_sum: int = 0
    ant_sq: int = 0
    censored: int = 0

    def merge(self, other: _Tally) -> None:
        self.decode_hist += other.decode_hist
        self.rank_hist += other.rank_hist
        self.add_sum += other.add_sum
        self.add_sq += other.add_sq
        self.ant_sum += other.ant_sum
        self.ant_sq += other.ant_sq
        self.censored += other.censored


def _run_chunk(c: Campaign, first: int, count: int) -> _Tally:
    params, n, cap = c.params, c.params.n, c.cap
    packet_p = None if c.schedule is None else list(c.schedule.per_packet)
    mul, inv = params.field.mul_table, params.field.inv_table
    width = c.m_max + 2  # last column collects "later than m_max or never"
    tally = _Tally(np.zeros((n + 1, width), np.int64), np.zeros((n + 1, width), np.int64))
    times = np.empty((count, n), np.int64)
    rank_times = np.empty((count, n), np.int64)
    rref, has, state, dtime, dtime_deliv, rank_time = new_state(n)
    for j in range(count):
        rng = trial_stream(c.base_seed, first + j)
        # rows of rref are only read once has[c] is set, so no need to clear them
        has[:] = False
        state[:] = 0
        for a in (dtime, dtime_deliv, rank_time):
            a[:] = -1
        t = 0
        while state[0] < n and t < cap:
            rows, erased = draw_block(params, rng, t, packet_p)
            receive_block(rows, erased, t, rref, has, state, dtime, dtime_deliv, rank_time, mul, inv)
            t += BLOCK
        dtime[dtime > cap] = -1
        times[j] = dtime
        rank_times[j] = rank_time

    never = times < 0
    censored = never.any(axis=1)
    filled = np.where(never, cap, times)
    per_trial = filled.sum(axis=1)
    ant = filled.max(axis=1)
    tally.add_sum = int(per_trial.sum())
    tally.add_sq = sum(int(v) * int(v) for v in per_trial)
    tally.ant_sum = int(ant.sum())
    tally.ant_sq = sum(int(v) * int(v) for v in ant)
    tally.censored = int(censored.sum())

    cols = np.arange(1, n + 1)
    for hist, raw in ((tally.decode_hist, times), (tally.rank_hist, rank_times)):
        ordered = np.sort(np.where(raw < 0, width - 1, np.minimum(raw, width - 1)), axis=1)
        np.add.at(hist, (np.broadcast_to(cols, ordered.shape), ordered), 1)
    tally.decode_hist[0, 0] = count
    tally.rank_hist[0, 0] = count
    return tally


def _workers() -> int:
    cpus = os.cpu_count() or 1
    env = os.environ.get("SNC_THREADS")
    return max(1, min(cpus, int(env))) if env else cpus


@dataclass
class CampaignResult:
    """Empirical grids indexed [m, x] for m = 0..m_max channel uses."""

    campaign: Campaign
    counts: np.ndarray  # trials with X >= x after m channel uses
    rank_counts: np.ndarray  # trials with rank >= r after m channel uses
    add: float
    add_se: float
    ant: float
    ant_se: float
    censored: int
    trials: int = dc_field(init=False)

    def __post_init__(self):
        self.trials = self.campaign.trials

    @property
    def at_least(self) -> np.ndarray:
        return self.counts / self.trials

    @property
    def at_least_se(self) -> np.ndarray:
        p = self.at_least
        return np.sqrt(p * (1 - p) / self.trials)

    @property
    def exact(self) -> np.ndarray:
        c = self.counts
        return (c - np.concatenate([c[:, 1:], np.zeros((c.shape[0], 1), c.dtype)], axis=1)) / self.trials

    @property
    def rank_law(self) -> np.ndarray:
        c = self.rank_counts
        return (c - np.concatenate([c[:, 1:], np.zeros((c.shape[0], 1), c.dtype)], axis=1)) / self.trials

    @property
    def expected_curve(self) -> np.ndarray:
        return self.counts[:, 1:].sum(axis=1) / self.trials

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        for a in (self.counts, self.rank_counts):
            h.update(np.ascontiguousarray(a).tobytes())
        h.update(repr((self.add, self.add_se, self.ant, self.ant_se, self.censored)).encode())
        return h.hexdigest()


def _mean_se(total: int, sq: int, count: int, scale: float) -> tuple[float, float]:
    mean = total / count / scale
    if count < 2:
        return mean, float("nan")
    # integer numerator keeps the variance exact before the final division
    var = (count * sq - total * total) / (count * (count - 1)) / scale**2
    return mean, float(np.sqrt(max(var, 0.0) / count))


def run_campaign(c: Campaign, workers: int | None = None) -> CampaignResult:
    chunks = [(s, min(CHUNK, c.trials - s)) for s in range(0, c.trials, CHUNK)]
    workers = _workers() if workers is None else max(1, workers)
    if workers > 1 and len(chunks) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(chunks))) as pool:
            parts = list(pool.map(_run_chunk, [c] * len(chunks), *zip(*chunks)))
    else:
        parts = [_run_chunk(c, s, k) for s, k in chunks]
    total = parts[0]
    for part in parts[1:]:
        total.merge(part)

    m_max = c.m_max
    counts = np.cumsum(total.decode_hist[:, : m_max + 1], axis=1).T
    rank_counts = np.cumsum(total.rank_hist[:, : m_max + 1], axis=1).T
    n = c.params.n
    add, add_se = _mean_se(total.add_sum, total.add_sq, c.trials, n)
    ant, ant_se = _mean_se(total.ant_sum, total.ant_sq, c.trials, 1)
    return CampaignResult(c, counts, rank_counts, add, add_se, ant, ant_se, total.censored)


# --------------------------------------------------------------------------
# deviation metrics


@dataclass(frozen=True)
class Cell:
    m: int
    x: int
    model: float
    sim: float

    @property
    def deviation(self) -> float:
        return abs(self.model - self.sim)


@dataclass(frozen=True)
class DeviationReport:
    mapd: float  # mean absolute deviation, percentage points
    relative_mapd: float  # mean |model - sim| / sim in percent, over sim > 0
    cells: int
    worst: tuple[Cell, ...]


def model_grid(params: SncParams, m_max: int) -> np.ndarray:
    """Model P(X >= x) after m channel uses, erasures folded into m."""
    rows = [model.effective_receptions(m, params.epsilon) for m in range(m_max + 1)]
    table = model.partial_decoding_table(params, max(max(rows), 2 * params.n))
    return table.at_least[rows]


def deviation(model_at_least: np.ndarray, sim_at_least: np.ndarray, x_list: Sequence[int],
              m_range: Sequence[int], worst: int = 10) -> DeviationReport:
    cells = [Cell(m, x, float(model_at_least[m, x]), float(sim_at_least[m, x])) for x in x_list for m in m_range]
    if not cells:
        raise ValueError("no cells to compare")
    dev = np.array([c.deviation for c in cells])
    sims = np.array([c.sim for c in cells])
    pos = sims > 0
    rel = float(np.mean(dev[pos] / sims[pos]) * 100) if pos.any() else float("nan")
    order = sorted(cells, key=lambda c: -c.deviation)[:worst]
    return DeviationReport(float(dev.mean() * 100), rel, len(cells), tuple(order))


def compare(table: model.PartialDecodingTable, result: CampaignResult) -> DeviationReport:
    """MAPD over x in the campaign's x_list and m = 1..m_max."""
    c = result.campaign
    p, q = table.params, c.params
    if (p.n, p.q, p.p, p.mode) != (q.n, q.q, q.p, q.mode):
        raise ValueError(f"model table is for {p}, campaign for {q}")
    rows = [model.effective_receptions(m, q.epsilon) for m in range(c.m_max + 1)]
    if max(rows) > table.m_max:
        raise ValueError(f"model table stops at m={table.m_max}, campaign needs {max(rows)}")
    grid = table.at_least[rows]
    return deviation(grid, result.at_least, c.x_list, range(1, c.m_max + 1))


# --------------------------------------------------------------------------
# CSV


RESULT_COLUMNS = ("m", "x", "model_at_least", "sim_at_least", "sim_se", "n_trials")
METRIC_COLUMNS = ("config_id", "n", "q", "w_or_tuned", "add", "add_se", "ant", "ant_se")


def write_result_csv(out: TextIO, model_at_least: np.ndarray, result: CampaignResult) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(RESULT_COLUMNS)
    sim, se = result.at_least, result.at_least_se
    for m in range(result.campaign.m_max + 1):
        for x in range(result.campaign.params.n + 1):
            w.writerow([m, x, repr(float(model_at_least[m, x])), repr(float(sim[m, x])),
                        repr(float(se[m, x])), result.trials])


def read_result_csv(src: TextIO) -> dict[str, np.ndarray]:
    rows = list(csv.DictReader(src))
    m_max = max(int(r["m"]) for r in rows)
    x_max = max(int(r["x"]) for r in rows)
    out = {k: np.zeros((m_max + 1, x_max + 1)) for k in RESULT_COLUMNS[2:]}
    for r in rows:
        for k in out:
            out[k][int(r["m"]), int(r["x"])] = float(r[k])
    return out


@dataclass(frozen=True)
class MetricRow:
    config_id: str
    n: int
    q: int
    w_or_tuned: str
    add: float
    add_se: float
    ant: float
    ant_se: float


def write_metrics_csv(out: TextIO, rows: Sequence[MetricRow]) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(METRIC_COLUMNS)
    for r in rows:
        w.writerow([r.config_id, r.n, r.q, r.w_or_tuned, repr(r.add), repr(r.add_se), repr(r.ant), repr(r.ant_se)])


def read_metrics_csv(src: TextIO) -> list[MetricRow]:
    return [
        MetricRow(r["config_id"], int(r["n"]), int(r["q"]), r["w_or_tuned"], float(r["add"]),
                  float(r["add_se"]), float(r["ant"]), float(r["ant_se"]))
        for r in csv.DictReader(src)
    ]
