"""The distance chain Z_n = |xi_n| and its running maximum Z*_n.

Because the group is ultrametric, Z_n is itself Markov and Z*_n is a Markov
chain with an upper-triangular kernel.  Both are expressed through the r_j
and their tails, so every quantity here is exact up to the kernel tail bound.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .kernel import KernelTables, build_tables, geometric

DEFAULT_LEVEL_CAP = 64


class DomainError(ValueError):
    pass


def _geometric_c(tables: KernelTables) -> float | None:
    return tables.spec.geometric_c


def _r(tables: KernelTables, j: int) -> float:
    return float(tables.r_at(j)[0]) if j >= 1 else 0.0


def _tail(tables: KernelTables, j: int) -> float:
    """sum_{i>j} r_i."""
    return float(tables.r_tail(j)[0])


# ------------------------------------------------------------- one step


def p_ij(tables: KernelTables, i: int, j: int) -> float:
    """One-step transition probability of the distance chain."""
    if i < 0 or j < 0:
        raise ValueError("levels must be non-negative")
    N = tables.N
    if j > i:
        return _r(tables, j)
    if j == i:
        if i == 0:
            return 0.0
        return 1.0 - _tail(tables, i) - _r(tables, i) / (N - 1)
    ri = _r(tables, i)
    if j > 0:
        return ri / float(N) ** (i - j)
    return ri / (float(N) ** (i - 1) * (N - 1))


def row(tables: KernelTables, i: int, cap: int) -> tuple[np.ndarray, float]:
    """p_i0..p_i,cap and the mass sum_{j>cap} p_ij."""
    vals = np.array([p_ij(tables, i, j) for j in range(cap + 1)])
    return vals, _tail(tables, max(cap, i))


def transition_block(tables: KernelTables, cap: int = DEFAULT_LEVEL_CAP) -> np.ndarray:
    return np.array([[p_ij(tables, i, j) for j in range(cap + 1)] for i in range(cap + 1)])


# ------------------------------------------------------ hitting / exit


@dataclass
class GeometricLaw:
    """Law of a geometric waiting time on {1, 2, ...} with success probability p."""

    success: float

    @property
    def mean(self) -> float:
        return 1.0 / self.success

    def pmf(self, n: int) -> float:
        if n < 1:
            return 0.0
        return (1.0 - self.success) ** (n - 1) * self.success


def hitting_stats(tables: KernelTables, j: int) -> GeometricLaw:
    """tau_j = inf{n : Z_n >= j} from 0: each step reaches distance >= j w.p. sum_{i>=j} r_i."""
    if j < 1:
        raise ValueError("j must be >= 1")
    return GeometricLaw(_tail(tables, j - 1))


def exit_stats(tables: KernelTables, i: int) -> GeometricLaw:
    """T_i, the first exit time from level i started at i."""
    if i < 0:
        raise ValueError("i must be >= 0")
    return GeometricLaw(1.0 - p_ij(tables, i, i))


def hitting_mean_geometric(N: int, c: float, j: int) -> float:
    return (N / c) ** (j - 1)


def exit_mean_geometric(N: int, c: float, i: int) -> float:
    return (N / c) ** i * (N - 1) / (N * (1.0 + 1.0 / c) - 2.0)


# ------------------------------------------------------------- drift


def drift(N: int, c: float, i: int) -> float:
    """D_i = E[Z_1 | Z_0 = i] for the c^j-walk (closed form)."""
    if i < 0:
        raise ValueError("i must be >= 0")
    if i == 0:
        return N / (N - c)
    a = c / N
    return i + a ** (i - 1) * (c / (N - c) - (N - c) * (1.0 - float(N) ** (-i)) / (N - 1) ** 2)


def drift_direct(tables: KernelTables, i: int, rel_tol: float = 1e-18) -> tuple[float, float]:
    """sum_j j p_ij by direct summation; returns (value, bound on the omitted terms)."""
    terms = [j * p_ij(tables, i, j) for j in range(0, i + 1)]
    j = i
    while True:
        j += 1
        t = j * _r(tables, j)
        terms.append(t)
        if j > i + 8 and t < rel_tol * max(i, 1):
            break
    # beyond j the terms decay at least geometrically (ratio <= r_{j+1}/r_j * (j+1)/j)
    q = _r(tables, j + 1) / _r(tables, j) * (j + 1) / j
    bound = t * q / (1.0 - q) if q < 1 else math.inf
    return math.fsum(terms), bound


def drift_threshold(N: int, c: float) -> float:
    """L_N(c): for c < 1 the drift D_i - i is negative exactly when i > L_N(c)."""
    if c >= 1.0:
        raise DomainError("threshold is defined only for c < 1")
    arg = 1.0 - c * ((N - 1) / (N - c)) ** 2
    return -math.log(arg) / math.log(N)


def threshold_hitting_mean(N: int, c: float) -> tuple[float, float]:
    """E_0 tau at the drift threshold: (integer level floor(L)+1, continuous level L)."""
    L = drift_threshold(N, c)
    T = math.floor(L) + 1
    return hitting_mean_geometric(N, c, T), (N / c) ** L


# ------------------------------------------------------ maximal process


def _log_cdf(tables: KernelTables, j: int) -> float:
    """log sum_{i<=j} r_i (=-inf at j = 0)."""
    if j <= 0:
        return -math.inf
    return math.log1p(-_tail(tables, j))


def max_dist(tables: KernelTables, n: int, j: int) -> tuple[float, float]:
    """(P_0[Z*_n = j], P_0[Z*_n >= j])."""
    if n < 1 or j < 1:
        raise ValueError("n and j must be >= 1")
    lo = n * _log_cdf(tables, j - 1)
    hi = n * _log_cdf(tables, j)
    # (cdf_j)^n - (cdf_{j-1})^n without cancellation
    pmf = math.exp(hi) * -math.expm1(lo - hi) if math.isfinite(lo) else math.exp(hi)
    surv = -math.expm1(lo) if math.isfinite(lo) else 1.0
    return pmf, surv


def max_dist_geometric(N: int, c: float, n: int, j: int) -> tuple[float, float]:
    a = c / N
    pmf = (1.0 - a**j) ** n - (1.0 - a ** (j - 1)) ** n
    return pmf, 1.0 - (1.0 - a ** (j - 1)) ** n


@dataclass
class MaxChainMatrix:
    tables: KernelTables

    def entry(self, i: int, j: int) -> float:
        if j < i:
            return 0.0
        if j == i:
            return 1.0 - _tail(self.tables, i)
        return _r(self.tables, j)

    def dense(self, levels: int = DEFAULT_LEVEL_CAP) -> np.ndarray:
        """Levels 0..levels-1; mass escaping past the last level is dropped."""
        Q = np.zeros((levels, levels))
        r = self.tables.r_at(np.arange(1, levels))
        for i in range(levels):
            Q[i, i] = 1.0 - _tail(self.tables, i)
            Q[i, i + 1:] = r[i:]
        return Q

    def power(self, n: int, levels: int = DEFAULT_LEVEL_CAP) -> np.ndarray:
        return np.linalg.matrix_power(self.dense(levels), n)


def max_matrix(tables: KernelTables) -> MaxChainMatrix:
    return MaxChainMatrix(tables)


def max_matrix_n(N: int, c: float, n: int, levels: int = DEFAULT_LEVEL_CAP) -> np.ndarray:
    """Closed-form n-step matrix of Z*_n for the c^j-walk."""
    a = c / N
    out = np.zeros((levels, levels))
    for i in range(levels):
        out[i, i] = (1.0 - a**i) ** n
        for j in range(i + 1, levels):
            out[i, j] = (1.0 - a**j) ** n - (1.0 - a ** (j - 1)) ** n
    return out


# ---------------------------------------------------------- moments


@dataclass
class MaxMoment:
    exact: float
    exact_error: float
    bound: float


def _sum_with_ratio_tail(term, j0: int, rel_tol: float = 1e-17) -> tuple[float, float, int]:
    """Sum term(j) for j >= j0 once terms are in geometric decay; returns (sum, tail, last j)."""
    vals = []
    j = j0
    while True:
        v = term(j)
        vals.append(v)
        nxt = term(j + 1)
        if v > 0 and nxt < v:
            q = nxt / v
            # the ratio of the series used here is non-increasing in j past its peak
            tail = nxt / (1.0 - q)
            if tail <= rel_tol * math.fsum(vals):
                return math.fsum(vals), tail, j
        elif v == 0.0 and nxt == 0.0 and j > j0 + 10:
            return math.fsum(vals), 0.0, j
        j += 1
        if j > 10_000_000:
            raise RuntimeError("moment series did not converge")


def max_moment(N: int, c: float, n: int, M: float) -> MaxMoment:
    """E_0 (Z*_n)^M by its series, and the upper bound on E_0 Z_n^M (and on E_0 (Z*_n)^M)."""
    if n < 1 or not M > 0:
        raise ValueError("need n >= 1 and M > 0")
    a = c / N
    la = math.log(a)

    def exact_term(j):
        lo = n * math.log1p(-math.exp((j - 1) * la)) if j > 1 else -math.inf
        hi = n * math.log1p(-math.exp(j * la))
        diff = math.exp(hi) * -math.expm1(lo - hi) if math.isfinite(lo) else math.exp(hi)
        return j**M * diff

    def bound_term(j):
        return j**M * math.exp(j * la + (n - 1) * math.log1p(-math.exp(j * la)))

    exact, err, _ = _sum_with_ratio_tail(exact_term, 1)
    bsum, btail, _ = _sum_with_ratio_tail(bound_term, 1)
    bound = n * (N - c) / c * (bsum + btail)
    return MaxMoment(exact, err, bound)


# ------------------------------------------------------- time scales


@dataclass
class TimescaleReport:
    n: int
    prob_at_most_j: float
    prob_equal_j: float
    limit_in_j: float
    limit_in_N_at_j: float
    limit_in_N_at_j_plus_1: float


def timescale_probability(N: int, eta: float, mu: float, j: int) -> TimescaleReport:
    """P_0[Z*_n <= j] and P_0[Z*_n = j] at n = floor(N^(j/mu)) for the (mu, eta^j, N)-walk."""
    from . import sequences as seqs
    from .kernel import MuC, WalkSpec

    if mu < 1 or not eta > 0 or j < 1:
        raise ValueError("need mu >= 1, eta > 0, j >= 1")
    tables = build_tables(WalkSpec(N, MuC(mu, seqs.Geometric(eta))))
    n = int(math.floor(float(N) ** (j / mu) * (1.0 + 1e-15)))
    at_most = math.exp(n * _log_cdf(tables, j))
    pmf, _ = max_dist(tables, n, j)
    if eta > 1:
        lim = 0.0
    elif eta == 1:
        lim = math.exp(-1.0)
    else:
        lim = 1.0
    e = math.exp(-(eta**j))
    return TimescaleReport(n, at_most, pmf, lim, e, 1.0 - e)


# ----------------------------------------------------------- export


def chain_csv(tables: KernelTables, cap: int = 16) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["matrix", "i", "j", "value"])
    Q = max_matrix(tables)
    for i in range(cap + 1):
        for j in range(cap + 1):
            w.writerow(["p", i, j, repr(p_ij(tables, i, j))])
    for i in range(cap + 1):
        for j in range(i, cap + 1):
            w.writerow(["q", i, j, repr(Q.entry(i, j))])
    return buf.getvalue()


def geometric_tables(N: int, c: float) -> KernelTables:
    return build_tables(geometric(N, c))
