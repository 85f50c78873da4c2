"""Compiled Gauss-Jordan kernel used by the campaign runner.

Same algorithm as :meth:`snc.codec.DecoderState.receive`, operating on a
dense ``(n, n)`` array indexed by pivot column. Row ``c`` is meaningful
only when ``has[c]`` is set.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def receive_block(rows, erased, t0, rref, has, state, dtime, dtime_deliv, rank_time, mul, inv):
    """Feed one block of transmissions into the decoder.

    ``state`` is ``[rank, delivered]``. Transmission ``t0 + i + 1`` is the
    1-based channel-use index of ``rows[i]``. Returns the number of block
    entries consumed; stops early once the generation is fully decoded.
    """
    n = rows.shape[1]
    v = np.empty(n, dtype=np.uint8)
    for i in range(rows.shape[0]):
        if state[0] == n:
            return i
        if erased[i]:
            continue
        t = t0 + i + 1
        state[1] += 1
        for k in range(n):
            v[k] = rows[i, k]
        for c in range(n):
            f = v[c]
            if f != 0 and has[c]:
                for k in range(c, n):
                    if rref[c, k] != 0:
                        v[k] ^= mul[f, rref[c, k]]
        lead = -1
        for c in range(n):
            if v[c] != 0:
                lead = c
                break
        if lead < 0:
            continue
        s = inv[v[lead]]
        for k in range(lead, n):
            if v[k] != 0:
                v[k] = mul[s, v[k]]
        for c in range(n):
            if has[c]:
                f = rref[c, lead]
                if f != 0:
                    for k in range(lead, n):
                        if v[k] != 0:
                            rref[c, k] ^= mul[f, v[k]]
                    if dtime[c] < 0 and _weight_one(rref, c, n):
                        dtime[c] = t
                        dtime_deliv[c] = state[1]
        for k in range(n):
            rref[lead, k] = v[k]
        has[lead] = True
        rank_time[state[0]] = t
        state[0] += 1
        if _weight_one(rref, lead, n):
            dtime[lead] = t
            dtime_deliv[lead] = state[1]
    return rows.shape[0]


@njit(cache=True)
def _weight_one(rref, c, n):
    w = 0
    for k in range(n):
        if rref[c, k] != 0:
            w += 1
            if w > 1:
                return False
    return w == 1


def new_state(n: int):
    """Fresh (rref, has, state, dtime, dtime_deliv, rank_time) arrays."""
    return (
        np.zeros((n, n), dtype=np.uint8),
        np.zeros(n, dtype=np.bool_),
        np.zeros(2, dtype=np.int64),
        np.full(n, -1, dtype=np.int64),
        np.full(n, -1, dtype=np.int64),
        np.full(n, -1, dtype=np.int64),
    )
