"""Closed-form positive sequences used as c_j or d_j generators.

Every generator knows its limiting ratio behaviour (needed for degree
classification and for certified tail bounds) and can evaluate the weighted
tails ``sum_{k>=1} c_{k0+k} x**k`` that appear in the kernel tables.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import zeta as hurwitz_zeta

# relative size below which a series tail counts as negligible
_TAIL_RTOL = 1e-18


class SequenceError(ValueError):
    pass


class Sequence:
    """Base class.  Subclasses implement :meth:`values` and the ratio data."""

    kind = "abstract"

    def values(self, k) -> np.ndarray:
        raise NotImplementedError

    def log_values(self, k) -> np.ndarray:
        return np.log(self.values(k))

    @property
    def ratio_liminf(self) -> float | None:
        return None

    @property
    def ratio_limsup(self) -> float | None:
        return None

    @property
    def ratio_limit(self) -> float | None:
        lo, hi = self.ratio_liminf, self.ratio_limsup
        if lo is None or hi is None or lo != hi:
            return None
        return lo

    @property
    def nondecreasing(self) -> bool:
        return False

    def inv_power_tail(self, s: float, k0: int) -> float | None:
        """``sum_{k>=k0} c_k**(-s)``; ``inf`` if divergent, ``None`` if unknown."""
        return None

    def weighted_tail(self, k0, x: float) -> tuple[np.ndarray, np.ndarray]:
        """``sum_{k>=1} c_{k0+k} x**k / c_{k0}`` and an absolute error bound.

        Returned relative to ``c_{k0}`` so large indices do not overflow.
        """
        raise NotImplementedError

    def to_json(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Constant(Sequence):
    value: float = 1.0
    kind = "constant"

    def __post_init__(self):
        if not self.value > 0:
            raise SequenceError("constant sequence must be positive")

    def values(self, k):
        return np.full(np.shape(k), float(self.value))

    ratio_liminf = property(lambda self: 1.0)
    ratio_limsup = property(lambda self: 1.0)
    nondecreasing = property(lambda self: True)

    def inv_power_tail(self, s, k0):
        return math.inf

    def weighted_tail(self, k0, x):
        k0 = np.asarray(k0)
        val = np.full(k0.shape, x / (1.0 - x))
        return val, np.zeros(k0.shape)

    def to_json(self):
        return {"type": "constant", "value": self.value}


@dataclass(frozen=True)
class Geometric(Sequence):
    """c_k = eta**k."""

    eta: float
    kind = "geometric"

    def __post_init__(self):
        if not self.eta > 0:
            raise SequenceError("geometric ratio must be positive")

    def values(self, k):
        return np.power(float(self.eta), np.asarray(k, dtype=float))

    def log_values(self, k):
        return np.asarray(k, dtype=float) * math.log(self.eta)

    ratio_liminf = property(lambda self: float(self.eta))
    ratio_limsup = property(lambda self: float(self.eta))
    nondecreasing = property(lambda self: self.eta >= 1.0)

    def inv_power_tail(self, s, k0):
        q = self.eta ** (-s)
        if q >= 1.0:
            return math.inf
        return q**k0 / (1.0 - q)

    def weighted_tail(self, k0, x):
        k0 = np.asarray(k0)
        q = self.eta * x
        if q >= 1.0:
            raise SequenceError(f"weighted tail diverges: eta*x = {q} >= 1")
        return np.full(k0.shape, q / (1.0 - q)), np.zeros(k0.shape)

    def to_json(self):
        return {"type": "geometric", "eta": self.eta}


@dataclass(frozen=True)
class Power(Sequence):
    """c_k = (k+1)**beta (the j**beta family)."""

    beta: float
    kind = "power"

    def __post_init__(self):
        if self.beta < 0:
            raise SequenceError("power exponent must be >= 0")

    def values(self, k):
        return np.power(np.asarray(k, dtype=float) + 1.0, self.beta)

    def log_values(self, k):
        return self.beta * np.log(np.asarray(k, dtype=float) + 1.0)

    ratio_liminf = property(lambda self: 1.0)
    ratio_limsup = property(lambda self: 1.0)
    nondecreasing = property(lambda self: True)

    def inv_power_tail(self, s, k0):
        p = self.beta * s
        if p <= 1.0:
            return math.inf
        return float(hurwitz_zeta(p, k0 + 1.0))

    def weighted_tail(self, k0, x):
        if not 0 < x < 1:
            raise SequenceError(f"weighted tail needs 0 < x < 1, got {x}")
        base = np.asarray(k0, dtype=float) + 1.0
        total = np.zeros(base.shape)
        bound = np.full(base.shape, np.inf)
        term = np.ones(base.shape)
        k = 0
        while True:
            k += 1
            # term = ((base+k)/base)**beta * x**k
            term = term * x * ((base + k) / (base + k - 1.0)) ** self.beta
            total = total + term
            q = x * ((base + k + 1.0) / (base + k)) ** self.beta
            if np.all(q < 1.0):
                bound = term * q / (1.0 - q)
                if np.all(bound <= _TAIL_RTOL * total):
                    return total, bound
            if k > 100000:
                raise SequenceError("power weighted tail did not converge")

    def to_json(self):
        return {"type": "power", "beta": self.beta}


@dataclass(frozen=True)
class PeriodicGeometric(Sequence):
    """c_k = eta**k * weights[k mod p]; ratio liminf and limsup differ."""

    eta: float
    weights: tuple[float, ...]
    kind = "periodic"

    def __post_init__(self):
        if not self.eta > 0 or not self.weights or min(self.weights) <= 0:
            raise SequenceError("periodic sequence needs eta > 0 and positive weights")
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))

    def values(self, k):
        k = np.asarray(k)
        w = np.asarray(self.weights)[k % len(self.weights)]
        return np.power(float(self.eta), k.astype(float)) * w

    def _ratios(self):
        w = self.weights
        p = len(w)
        return [self.eta * w[(i + 1) % p] / w[i] for i in range(p)]

    ratio_liminf = property(lambda self: min(self._ratios()))
    ratio_limsup = property(lambda self: max(self._ratios()))
    nondecreasing = property(lambda self: min(self._ratios()) >= 1.0)

    def inv_power_tail(self, s, k0):
        p = len(self.weights)
        q = self.eta ** (-s * p)
        if q >= 1.0:
            return math.inf
        head = sum(self.values(np.arange(k0, k0 + p)) ** (-s))
        return float(head / (1.0 - q))

    def weighted_tail(self, k0, x):
        k0 = np.asarray(k0)
        p = len(self.weights)
        q = self.eta * x
        if q >= 1.0:
            raise SequenceError(f"weighted tail diverges: eta*x = {q} >= 1")
        w = np.asarray(self.weights)
        total = np.zeros(k0.shape)
        for m in range(1, p + 1):
            total = total + q**m * w[(k0 + m) % p]
        return total / (1.0 - q**p) / w[k0 % p], np.zeros(k0.shape)

    def to_json(self):
        return {"type": "periodic", "eta": self.eta, "weights": list(self.weights)}


def from_json(obj: dict) -> Sequence:
    kind = obj.get("type")
    if kind == "constant":
        return Constant(float(obj.get("value", 1.0)))
    if kind == "geometric":
        return Geometric(float(obj["eta"]))
    if kind == "power":
        return Power(float(obj["beta"]))
    if kind == "periodic":
        return PeriodicGeometric(float(obj["eta"]), tuple(obj["weights"]))
    raise SequenceError(f"unknown sequence type {kind!r}")
