"""The k-type order on Z^d.

A direction index ``k`` in ``1..2**d`` is decoded into sign bits; bit ``i``
set means coordinate ``i`` points toward minus infinity.  Lattice vectors are
plain tuples of ints.
"""
from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass
from typing import Sequence

LatticeVector = tuple[int, ...]


class LatticeError(ValueError):
    """Bad dimension, index or range for a lattice operation."""


class IndexSetMode(str, enum.Enum):
    """How ``m >=^k 0`` is read when building the index set of a k-metric.

    ``strict`` keeps the origin plus vectors strictly inside the k-quadrant;
    ``quadrant`` keeps the whole closed box ``0 <= s_i <= n-1``.
    """

    STRICT = "strict"
    QUADRANT = "quadrant"

    @classmethod
    def parse(cls, value: "IndexSetMode | str") -> "IndexSetMode":
        try:
            return cls(value)
        except ValueError:
            raise LatticeError(f"unknown index-set mode {value!r}") from None


@dataclass(frozen=True)
class KIndex:
    d: int
    k: int
    bits: tuple[int, ...]

    @property
    def signs(self) -> tuple[int, ...]:
        return tuple(-1 if b else 1 for b in self.bits)

    def complement(self) -> "KIndex":
        """Index with every bit flipped (the reversed order)."""
        return k_bits(2**self.d + 1 - self.k, self.d)

    def __str__(self) -> str:
        return f"k={self.k}"


def k_bits(k: int, d: int) -> KIndex:
    """Decode ``k`` so that ``k - 1 = sum(bits[i] * 2**i)``."""
    if d < 1:
        raise LatticeError(f"dimension must be >= 1, got {d}")
    if not 1 <= k <= 2**d:
        raise LatticeError(f"k must lie in 1..{2**d} for d={d}, got {k}")
    bits = tuple(((k - 1) >> i) & 1 for i in range(d))
    return KIndex(d=d, k=k, bits=bits)


def all_k(d: int) -> list[KIndex]:
    return [k_bits(k, d) for k in range(1, 2**d + 1)]


def _check_dims(kx: KIndex | None, *vs: Sequence[int]) -> None:
    dims = {len(v) for v in vs}
    if kx is not None:
        dims.add(kx.d)
    if len(dims) != 1:
        raise LatticeError(f"dimension mismatch: {sorted(dims)}")


def k_greater(kx: KIndex, x: Sequence[int], y: Sequence[int]) -> bool:
    _check_dims(kx, x, y)
    return all(s * a > s * b for s, a, b in zip(kx.signs, x, y))


def k_geq(kx: KIndex, x: Sequence[int], y: Sequence[int]) -> bool:
    _check_dims(kx, x, y)
    return tuple(x) == tuple(y) or k_greater(kx, x, y)


def sup_norm(m: Sequence[int]) -> int:
    return max((abs(c) for c in m), default=0)


def index_set(n: int, kx: KIndex, mode: IndexSetMode | str = IndexSetMode.QUADRANT) -> list[LatticeVector]:
    """Lattice points ``m`` with ``||m|| < n`` lying on the k-side of the origin.

    Enumeration is lexicographic in the signed coordinates ``s_i = sign_i * m_i``.
    """
    if n < 1:
        raise LatticeError(f"n must be >= 1, got {n}")
    mode = IndexSetMode.parse(mode)
    signs = kx.signs
    lo = 1 if mode is IndexSetMode.STRICT else 0
    out: list[LatticeVector] = []
    if mode is IndexSetMode.STRICT:
        out.append((0,) * kx.d)
    for s in itertools.product(range(lo, n), repeat=kx.d):
        out.append(tuple(sg * c for sg, c in zip(signs, s)))
    return out


def star(m: Sequence[int], r: Sequence[int]) -> LatticeVector:
    """Coordinate-wise product."""
    _check_dims(None, m, r)
    return tuple(a * b for a, b in zip(m, r))


def add(m1: Sequence[int], m2: Sequence[int]) -> LatticeVector:
    _check_dims(None, m1, m2)
    return tuple(a + b for a, b in zip(m1, m2))


def zero(d: int) -> LatticeVector:
    return (0,) * d


def unit(i: int, d: int) -> LatticeVector:
    return tuple(1 if j == i else 0 for j in range(d))
