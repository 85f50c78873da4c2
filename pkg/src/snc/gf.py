"""Arithmetic in GF(2), GF(2^4) and GF(2^8).

Elements are plain ints in ``[0, q)``; :class:`FieldSpec` holds the
log/antilog tables and exposes scalar and vectorised operations.
:class:`FieldElement` is a thin operator-overloading wrapper for callers
who prefer ``a * b`` over ``field.mul(a, b)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

SUPPORTED_ORDERS = (2, 16, 256)

DEFAULT_POLYNOMIALS = {
    2: 0b11,  # x + 1
    16: 0b1_0011,  # x^4 + x + 1
    256: 0x11B,  # x^8 + x^4 + x^3 + x + 1
}

_ALIASES = {"2^1": 2, "2^4": 16, "2^8": 256, "2**4": 16, "2**8": 256}


def _poly_degree(poly: int) -> int:
    return poly.bit_length() - 1


def _poly_mod(a: int, b: int) -> int:
    """Remainder of carry-less division a mod b over GF(2)[x]."""
    db = _poly_degree(b)
    while a and _poly_degree(a) >= db:
        a ^= b << (_poly_degree(a) - db)
    return a


def is_irreducible(poly: int) -> bool:
    """Exhaustive trial division by every polynomial of degree 1..deg/2."""
    deg = _poly_degree(poly)
    if deg < 1:
        return False
    if deg == 1:
        return True
    for d in range(1, deg // 2 + 1):
        for divisor in range(1 << d, 1 << (d + 1)):
            if _poly_mod(poly, divisor) == 0:
                return False
    return True


def _clmul_mod(a: int, b: int, poly: int, q: int) -> int:
    # shift-and-add ("peasant") multiplication; only used to build tables
    result = 0
    while b:
        if b & 1:
            result ^= a
        b >>= 1
        a <<= 1
        if a & q:
            a ^= poly
    return result


class FieldSpec:
    """GF(q) for q in {2, 16, 256}, immutable after construction.

    The reduction polynomial must be irreducible of degree log2(q). Log
    tables are generated from the smallest primitive element, which is
    not always ``x``: for x^8+x^4+x^3+x+1 the element 0x02 has order 51,
    so the generator there is 0x03.
    """

    def __init__(self, q: int, reduction_polynomial: int | None = None):
        if q not in SUPPORTED_ORDERS:
            raise ValueError(f"unsupported field order {q}; expected one of {SUPPORTED_ORDERS}")
        poly = DEFAULT_POLYNOMIALS[q] if reduction_polynomial is None else reduction_polynomial
        degree = q.bit_length() - 1
        if _poly_degree(poly) != degree:
            raise ValueError(f"polynomial {poly:#x} does not have degree {degree}")
        if not is_irreducible(poly):
            raise ValueError(f"polynomial {poly:#x} is reducible over GF(2)")
        self.q = q
        self.reduction_polynomial = poly

        order = q - 1
        self.generator = self._find_generator()
        exp = np.zeros(2 * order, dtype=np.int64)
        log = np.zeros(q, dtype=np.int64)
        x = 1
        for i in range(order):
            exp[i] = x
            log[x] = i
            x = _clmul_mod(x, self.generator, poly, q)
        exp[order:] = exp[:order]
        self.exp_table = exp
        self.log_table = log

        nz = np.arange(1, q)
        mul = np.zeros((q, q), dtype=np.uint8)
        mul[1:, 1:] = exp[(log[nz][:, None] + log[nz][None, :]) % order]
        inv = np.zeros(q, dtype=np.uint8)
        inv[1:] = exp[(order - log[nz]) % order]
        self.mul_table = mul
        self.inv_table = inv
        for table in (exp, log, mul, inv):
            table.setflags(write=False)

    def _find_generator(self) -> int:
        if self.q == 2:
            return 1
        order = self.q - 1
        for g in range(2, self.q):
            x, k = g, 1
            while x != 1:
                x = _clmul_mod(x, g, self.reduction_polynomial, self.q)
                k += 1
            if k == order:
                return g
        raise AssertionError("irreducible polynomial without primitive element")

    def __repr__(self) -> str:
        return f"FieldSpec(q={self.q}, reduction_polynomial={self.reduction_polynomial:#x})"

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, FieldSpec)
            and self.q == other.q
            and self.reduction_polynomial == other.reduction_polynomial
        )

    def __hash__(self) -> int:
        return hash((self.q, self.reduction_polynomial))

    def _check(self, a: int) -> int:
        if not 0 <= a < self.q:
            raise ValueError(f"{a} is not an element of GF({self.q})")
        return a

    def add(self, a: int, b: int) -> int:
        return self._check(a) ^ self._check(b)

    sub = add

    def mul(self, a: int, b: int) -> int:
        return int(self.mul_table[self._check(a), self._check(b)])

    def inv(self, a: int) -> int:
        if self._check(a) == 0:
            raise ZeroDivisionError(f"0 has no inverse in GF({self.q})")
        return int(self.inv_table[a])

    def div(self, a: int, b: int) -> int:
        return self.mul(a, self.inv(b))

    def pow(self, a: int, k: int) -> int:
        self._check(a)
        if a == 0:
            if k < 0:
                raise ZeroDivisionError(f"0 has no inverse in GF({self.q})")
            return 1 if k == 0 else 0
        order = self.q - 1
        return int(self.exp_table[(int(self.log_table[a]) * k) % order])

    def scale(self, c: int, row: np.ndarray) -> np.ndarray:
        """Multiply every entry of ``row`` by the scalar ``c``."""
        return self.mul_table[c][row]

    def element(self, value: int) -> FieldElement:
        return FieldElement(self._check(int(value)), self)


@dataclass(frozen=True)
class FieldElement:
    value: int
    field: FieldSpec

    def __post_init__(self):
        if not 0 <= self.value < self.field.q:
            raise ValueError(f"{self.value} is not an element of GF({self.field.q})")

    def _other(self, other: FieldElement | int) -> int:
        if isinstance(other, FieldElement):
            if other.field != self.field:
                raise ValueError("operands belong to different fields")
            return other.value
        return other

    def __add__(self, other):
        return FieldElement(self.field.add(self.value, self._other(other)), self.field)

    __radd__ = __add__
    __sub__ = __add__
    __rsub__ = __add__

    def __mul__(self, other):
        return FieldElement(self.field.mul(self.value, self._other(other)), self.field)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return FieldElement(self.field.div(self.value, self._other(other)), self.field)

    def __pow__(self, k: int):
        return FieldElement(self.field.pow(self.value, k), self.field)

    def inverse(self) -> FieldElement:
        return FieldElement(self.field.inv(self.value), self.field)

    def __int__(self) -> int:
        return self.value

    def __bool__(self) -> bool:
        return self.value != 0


def parse_order(q: int | str) -> int:
    """Accept 2, 16, 256 as ints or strings, plus the aliases "2^4"/"2^8"."""
    if isinstance(q, str):
        key = q.strip()
        q = _ALIASES[key] if key in _ALIASES else int(key)
    if q not in SUPPORTED_ORDERS:
        raise ValueError(f"unsupported field order {q}; expected one of {SUPPORTED_ORDERS}")
    return q


@lru_cache(maxsize=None)
def field(q: int | str) -> FieldSpec:
    """Shared FieldSpec with the default reduction polynomial."""
    return FieldSpec(parse_order(q))


def add(a: FieldElement, b: FieldElement) -> FieldElement:
    return a + b


def mul(a: FieldElement, b: FieldElement) -> FieldElement:
    return a * b


def inv(a: FieldElement) -> FieldElement:
    return a.inverse()
