"""Arithmetic and ultrametric geometry on the hierarchical group Omega_N.

Elements are finitely supported sequences over Z_N.  Digits are stored
little-endian (coordinate 1 first) with trailing zeros trimmed, so the
hierarchical norm of an element is the length of its digit tuple.
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from itertools import product
from typing import Iterator, Sequence

DEFAULT_ENUM_CAP = 10**6


class OrderMismatchError(ValueError):
    """Raised when combining elements of groups with different N."""


class EnumerationCapError(ValueError):
    """Raised when a brute-force enumeration would exceed the element cap."""


def enum_cap() -> int:
    """Current enumeration cap; ``HRW_ENUM_CAP`` overrides the default."""
    value = os.environ.get("HRW_ENUM_CAP")
    return int(value) if value else DEFAULT_ENUM_CAP


def _trim(digits: Sequence[int]) -> tuple[int, ...]:
    end = len(digits)
    while end and digits[end - 1] == 0:
        end -= 1
    return tuple(int(d) for d in digits[:end])


@dataclass(frozen=True)
class GroupElement:
    """A point of Omega_N in canonical form."""

    N: int
    digits: tuple[int, ...] = ()

    def __post_init__(self):
        if self.N < 2:
            raise ValueError(f"group order must be >= 2, got {self.N}")
        digits = _trim(self.digits)
        for d in digits:
            if not 0 <= d < self.N:
                raise ValueError(f"digit {d} outside Z_{self.N}")
        object.__setattr__(self, "digits", digits)

    @classmethod
    def origin(cls, N: int) -> GroupElement:
        return cls(N, ())

    @classmethod
    def parse(cls, N: int, text: str) -> GroupElement:
        """Inverse of :meth:`serialize` ("1,0,2"; empty string is the origin)."""
        text = text.strip()
        if not text:
            return cls(N, ())
        return cls(N, tuple(int(part) for part in text.split(",")))

    def serialize(self) -> str:
        return ",".join(str(d) for d in self.digits)

    @property
    def norm(self) -> int:
        return len(self.digits)

    def digit(self, i: int) -> int:
        """Coordinate ``i`` (1-based, as in x = (x_1, x_2, ...))."""
        if i < 1:
            raise IndexError("coordinates are indexed from 1")
        return self.digits[i - 1] if i <= len(self.digits) else 0

    def _check(self, other: GroupElement) -> None:
        if self.N != other.N:
            raise OrderMismatchError(f"orders differ: N={self.N} vs N={other.N}")

    def _combine(self, other: GroupElement, sign: int) -> GroupElement:
        self._check(other)
        n = max(len(self.digits), len(other.digits))
        a = self.digits + (0,) * (n - len(self.digits))
        b = other.digits + (0,) * (n - len(other.digits))
        return GroupElement(self.N, tuple((x + sign * y) % self.N for x, y in zip(a, b)))

    def __add__(self, other: GroupElement) -> GroupElement:
        return self._combine(other, 1)

    def __sub__(self, other: GroupElement) -> GroupElement:
        return self._combine(other, -1)

    def __neg__(self) -> GroupElement:
        return GroupElement(self.N, tuple((-d) % self.N for d in self.digits))

    def index(self) -> int:
        """Position of the element in :func:`enumerate_ball` order."""
        return sum(d * self.N**i for i, d in enumerate(self.digits))

    def __str__(self):
        return f"({self.serialize()})_N={self.N}"


@dataclass(frozen=True)
class Ball:
    """Closed ball of radius R centered at the origin."""

    N: int
    R: int

    def __post_init__(self):
        if self.R < 0:
            raise ValueError("radius must be non-negative")

    def __len__(self):
        return self.N**self.R

    def __contains__(self, x: GroupElement) -> bool:
        return x.N == self.N and x.norm <= self.R


def distance(x: GroupElement, y: GroupElement) -> int:
    """Hierarchical distance: largest coordinate index where x and y differ."""
    x._check(y)
    n = max(len(x.digits), len(y.digits))
    for i in range(n, 0, -1):
        if x.digit(i) != y.digit(i):
            return i
    return 0


def subtract(x: GroupElement, y: GroupElement) -> GroupElement:
    return x - y


def add(x: GroupElement, y: GroupElement) -> GroupElement:
    return x + y


def sphere_size(N: int, j: int) -> int:
    """Number of points at distance exactly ``j >= 1`` from a fixed point."""
    if j < 1:
        raise ValueError("sphere_size is defined for j >= 1; handle j = 0 separately")
    return N ** (j - 1) * (N - 1)


def sample_uniform_sphere(N: int, j: int, rng) -> GroupElement:
    """Uniform point at distance ``j`` from the origin.

    ``rng`` needs an ``integers(low, high)`` method (numpy ``Generator`` or
    :class:`hrwalk.montecarlo.Stream`).  Coordinates are drawn in order
    1..j-1 then j, which is the consumption order the walk kernels use.
    """
    if j < 1:
        raise ValueError("sphere radius must be >= 1")
    digits = [int(rng.integers(0, N)) for _ in range(j - 1)]
    digits.append(int(rng.integers(1, N)))
    return GroupElement(N, tuple(digits))


def iter_ball(N: int, R: int) -> Iterator[GroupElement]:
    for combo in product(range(N), repeat=R):
        yield GroupElement(N, tuple(reversed(combo)))


def enumerate_ball(N: int, R: int, cap: int | None = None) -> list[GroupElement]:
    """All N**R elements of B_R, ordered by :meth:`GroupElement.index` (origin first)."""
    cap = enum_cap() if cap is None else cap
    if R < 0:
        raise ValueError("radius must be non-negative")
    if N**R > cap:
        raise EnumerationCapError(f"|B_{R}| = {N}**{R} exceeds enumeration cap {cap}")
    out = [None] * N**R
    for x in iter_ball(N, R):
        out[x.index()] = x
    return out
