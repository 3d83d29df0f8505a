"""Pure-Python twin of the compiled kernels (same draws, same arithmetic order)."""
from __future__ import annotations

import math

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_INV53 = 1.0 / 9007199254740992.0


class Xoshiro:
    """xoshiro256** keyed by (seed, replica) through splitmix64."""

    __slots__ = ("s",)

    def __init__(self, seed: int, replica: int):
        x = [seed & _MASK]
        key = [_splitmix(x) ^ ((replica * _GOLDEN) & _MASK)]
        self.s = [_splitmix(key) for _ in range(4)]

    def next(self) -> int:
        s = self.s
        result = (_rotl((s[1] * 5) & _MASK, 7) * 9) & _MASK
        t = (s[1] << 17) & _MASK
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = _rotl(s[3], 45)
        return result

    def uniform_pos(self) -> float:
        return float((self.next() >> 11) + 1) * _INV53

    def below(self, n: int) -> int:
        if n <= 1:
            return 0
        limit = _MASK - (_MASK % n)
        while True:
            x = self.next()
            if x < limit:
                return x % n

    def exponential(self) -> float:
        return -math.log(self.uniform_pos())


def _splitmix(x: list) -> int:
    x[0] = (x[0] + _GOLDEN) & _MASK
    z = x[0]
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK


def _jump(g: Xoshiro, log_a: float, cdf) -> int:
    u = g.uniform_pos()
    if log_a < 0.0:
        return 1 + int(math.floor(math.log(u) / log_a))
    u = 1.0 - u
    j = 0
    n = len(cdf)
    while j < n - 1 and u >= cdf[j]:
        j += 1
    return j + 1


def _step(g: Xoshiro, N: int, d: list, norm: int, levels: int, log_a: float, cdf) -> int:
    J = _jump(g, log_a, cdf)
    if J > levels:
        return -1
    for i in range(J - 1):
        d[i] = (d[i] + g.below(N)) % N
    d[J - 1] = (d[J - 1] + 1 + g.below(N - 1)) % N
    if J > norm:
        return J
    if J == norm:
        while norm > 0 and d[norm - 1] == 0:
            norm -= 1
    return norm


def stream_words(seed: int, replica: int, count: int) -> np.ndarray:
    g = Xoshiro(seed, replica)
    return np.array([g.next() for _ in range(count)], dtype=np.uint64)


def walk_discrete(N, log_a, cdf, n_steps, seed, r0, r1, levels):
    cdf = list(cdf)
    out = np.zeros((r1 - r0, n_steps + 1), dtype=np.int32)
    for k in range(r1 - r0):
        g = Xoshiro(seed, r0 + k)
        d = [0] * levels
        norm = 0
        for s in range(n_steps):
            norm = _step(g, N, d, norm, levels, log_a, cdf)
            out[k, s + 1] = norm
            if norm < 0:
                break
    return out


def walk_continuous_at(N, log_a, cdf, times, seed, r0, r1, levels):
    cdf = list(cdf)
    times = list(times)
    nt = len(times)
    out = np.zeros((r1 - r0, nt), dtype=np.int32)
    for k in range(r1 - r0):
        g = Xoshiro(seed, r0 + k)
        d = [0] * levels
        norm = 0
        clock = 0.0
        q = 0
        while q < nt:
            clock += g.exponential()
            while q < nt and times[q] < clock:
                out[k, q] = norm
                q += 1
            if q >= nt:
                break
            norm = _step(g, N, d, norm, levels, log_a, cdf)
            if norm < 0:
                out[k, q:] = -1
                break
    return out


def walk_return_times(N, log_a, cdf, horizon, seed, r0, r1, levels):
    cdf = list(cdf)
    out = np.full(r1 - r0, np.inf)
    for k in range(r1 - r0):
        g = Xoshiro(seed, r0 + k)
        d = [0] * levels
        norm = 0
        clock = 0.0
        while True:
            clock += g.exponential()
            if clock > horizon:
                break
            norm = _step(g, N, d, norm, levels, log_a, cdf)
            if norm == 0:
                out[k] = clock
                break
            if norm < 0:
                break
    return out


def walk_last_exit(N, log_a, cdf, R, horizon, seed, r0, r1, levels, escape):
    cdf = list(cdf)
    n = r1 - r0
    L = np.zeros(n)
    cens = np.zeros(n, dtype=np.uint8)
    late = np.zeros(n, dtype=np.uint8)
    late_from = 0.9 * horizon
    for k in range(n):
        g = Xoshiro(seed, r0 + k)
        d = [0] * levels
        norm = 0
        clock = 0.0
        last = 0.0
        while True:
            clock += g.exponential()
            if clock > horizon:
                if norm <= R:
                    cens[k] = 1
                    last = horizon
                break
            prev = norm
            norm = _step(g, N, d, norm, levels, log_a, cdf)
            if norm < 0:
                cens[k] = 1
                last = horizon
                break
            if prev <= R < norm:
                last = clock
            elif prev > R >= norm and clock >= late_from:
                late[k] = 1
            if norm >= escape:
                break
        L[k] = last
    return L, cens, late


def walk_occupation(N, log_a, cdf, F, K, t_end, seed, r0, r1, levels):
    cdf = list(cdf)
    F = list(F)
    out = np.zeros(r1 - r0)
    for k in range(r1 - r0):
        g = Xoshiro(seed, r0 + k)
        d = [0] * levels
        norm = 0
        clock = 0.0
        acc = 0.0
        while True:
            if norm <= K:
                idx = 0
                w = 1
                for s in range(norm):
                    idx += d[s] * w
                    w *= N
                fval = F[idx]
            else:
                fval = 0.0
            hold = g.exponential()
            if clock + hold >= t_end:
                acc += fval * (t_end - clock)
                break
            acc += fval * hold
            clock += hold
            norm = _step(g, N, d, norm, levels, log_a, cdf)
            if norm < 0:
                break
        out[k] = acc
    return out


def _lgs_series(a: float, x: float) -> float:
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(1, 100000):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * 1e-17:
            break
    return total * math.exp(-x)


def _ugs_cf(a: float, x: float) -> float:
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    dd = 1.0 / b
    f = dd
    for i in range(1, 100000):
        an = -i * (i - a)
        b += 2.0
        dd = an * dd + b
        if abs(dd) < tiny:
            dd = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        dd = 1.0 / dd
        delta = dd * c
        f *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return f


def lower_gamma_scaled(a: float, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    out = np.empty(x.shape)
    lg = math.lgamma(a)
    for i, xi in enumerate(x.tolist()):
        if xi <= 0.0:
            out[i] = 1.0 / a
        elif xi < a + 1.0:
            out[i] = _lgs_series(a, xi)
        else:
            out[i] = math.exp(lg - a * math.log(xi)) - math.exp(-xi) * _ugs_cf(a, xi)
    return out


def renewal_solve(p, dt: float) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    M = len(p) - 1
    rho = np.empty(M + 1)
    rho[0] = 1.0
    for i in range(1, M + 1):
        s = float(np.dot(p[1:i], rho[i - 1:0:-1])) if i > 1 else 0.0
        rho[i] = (1.0 - p[i] - 0.5 * dt * p[i] * rho[0] - dt * s) / (0.5 * dt * p[0])
    return rho
