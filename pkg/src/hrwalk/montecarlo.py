"""Seeded, parallel simulation of hierarchical walks and path-functional estimators.

Replica k always draws from the xoshiro256** stream keyed by (seed, k), so the
output of every estimator is a deterministic function of (spec, config) no
matter how replicas are split across threads.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np
from scipy import stats

from . import _core
from . import sequences as seqs
from ._core._fallback import Xoshiro
from .group import GroupElement
from .kernel import GeometricLaw, KernelTables, MuC, WalkSpec, build_tables
from .potential import green_power, last_exit_integral

DEFAULT_LEVELS = 128
DEFAULT_CHUNK = 4096
# table heads stop once the r-tail is below the resolution of a 53-bit uniform
_TABLE_TAIL = 2.0**-54
_Z995 = float(stats.norm.ppf(0.995))


class RefusedError(ValueError):
    """The estimator does not apply to this walk."""


@dataclass
class SimConfig:
    seed: int
    replicas: int
    horizon: float
    scheme: str = "discrete"
    track_full: bool = False
    threads: int = 1
    chunk: int = DEFAULT_CHUNK

    def __post_init__(self):
        if self.replicas < 1:
            raise ValueError("replicas must be >= 1")
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        if self.scheme not in ("discrete", "continuous"):
            raise ValueError("scheme must be 'discrete' or 'continuous'")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    @property
    def workers(self) -> int:
        return self.threads if self.threads > 0 else (os.cpu_count() or 1)


@dataclass
class EmpiricalStats:
    count: int
    mean: float
    variance: float
    minimum: float
    maximum: float
    half_width99: float
    histogram: tuple[np.ndarray, np.ndarray] | None = None

    @classmethod
    def from_samples(cls, x, bins: int | None = None) -> EmpiricalStats:
        x = np.asarray(x, dtype=float)
        if x.size == 0:
            raise ValueError("no samples")
        var = float(np.var(x, ddof=1)) if x.size > 1 else 0.0
        hist = np.histogram(x, bins=bins) if bins else None
        return cls(int(x.size), float(np.mean(x)), var, float(x.min()), float(x.max()),
                   _Z995 * math.sqrt(var / x.size), hist)

    def to_json(self) -> dict:
        return {"count": self.count, "mean": self.mean, "variance": self.variance,
                "min": self.minimum, "max": self.maximum, "halfWidth99": self.half_width99}


class Stream:
    """Python view of a replica stream, usable wherever a numpy Generator is."""

    def __init__(self, seed: int, replica: int = 0):
        self._g = Xoshiro(seed, replica)

    def integers(self, low: int, high: int) -> int:
        return low + self._g.below(high - low)

    def random(self) -> float:
        return 1.0 - self._g.uniform_pos()

    def exponential(self) -> float:
        return self._g.exponential()

    def raw(self) -> int:
        return self._g.next()


# ----------------------------------------------------------- jump sampler


@dataclass
class JumpSampler:
    """Inverse-CDF description of the jump-distance law handed to the kernels.

    ``log_a < 0`` selects exact geometric sampling P[J > k] = a^k; otherwise
    ``cdf`` holds sum_{i<=j} r_i with its last entry set to 1.
    """

    N: int
    log_a: float
    cdf: np.ndarray
    levels: int


def geometric_ratio(spec: WalkSpec) -> float | None:
    law = spec.law
    if isinstance(law, GeometricLaw):
        return law.c / spec.N
    if isinstance(law, MuC):
        y = spec.N ** (-1.0 / law.mu)
        if isinstance(law.cseq, seqs.Geometric):
            return law.cseq.eta * y
        if isinstance(law.cseq, seqs.Constant):
            return y
    return None


def jump_sampler(tables: KernelTables, levels: int = DEFAULT_LEVELS) -> JumpSampler:
    N = tables.N
    a = geometric_ratio(tables.spec)
    if a is not None:
        # largest reachable jump with a 53-bit uniform
        jmax = 1 + int(math.floor(math.log(2.0**-53) / math.log(a)))
        return JumpSampler(N, math.log(a), np.zeros(0), max(levels, jmax + 1))
    if tables.finite_support:
        L = tables.J
    else:
        L = tables.J
        while float(tables.r_tail(L)[0]) >= _TABLE_TAIL:
            L *= 2
        tails = tables.r_tail(np.arange(1, L + 1))
        L = int(np.argmax(tails < _TABLE_TAIL)) + 1
    cdf = tables.r_cdf(np.arange(1, L + 1)).astype(float)
    cdf[-1] = 1.0
    return JumpSampler(N, 0.0, np.ascontiguousarray(cdf), max(levels, L + 1))


# ------------------------------------------------------------- parallel runs


def _chunks(replicas: int, chunk: int):
    return [(r0, min(r0 + chunk, replicas)) for r0 in range(0, replicas, chunk)]


def _run(config: SimConfig, fn: Callable):
    """Evaluate fn(r0, r1) over fixed replica chunks; results come back in replica order."""
    parts = _chunks(config.replicas, config.chunk)
    if config.workers == 1 or len(parts) == 1:
        return [fn(r0, r1) for r0, r1 in parts]
    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        return list(pool.map(lambda p: fn(*p), parts))


def _concat(results):
    if isinstance(results[0], tuple):
        return tuple(np.concatenate([r[k] for r in results]) for k in range(len(results[0])))
    return np.concatenate(results)


# --------------------------------------------------------------- simulate


@dataclass
class SimResult:
    """Distances per replica: steps 0..n (discrete) or at ``times`` (continuous)."""

    distances: np.ndarray
    times: np.ndarray | None = None

    def max_process(self) -> np.ndarray:
        return np.maximum.accumulate(self.distances, axis=1)


@dataclass
class PathSummary:
    replica: int
    distances: np.ndarray


def simulate(spec: WalkSpec | KernelTables, config: SimConfig, times=None) -> SimResult:
    tables = spec if isinstance(spec, KernelTables) else build_tables(spec)
    js = jump_sampler(tables)
    seed = int(config.seed)
    if config.scheme == "discrete":
        n = int(config.horizon)
        parts = _run(config, lambda r0, r1: _core.walk_discrete(
            js.N, js.log_a, js.cdf, n, seed, r0, r1, js.levels))
        return SimResult(_concat(parts))
    if times is None:
        times = np.linspace(0.0, config.horizon, 101)
    times = np.ascontiguousarray(np.sort(np.asarray(times, dtype=float)))
    parts = _run(config, lambda r0, r1: _core.walk_continuous_at(
        js.N, js.log_a, js.cdf, times, seed, r0, r1, js.levels))
    return SimResult(_concat(parts), times)


def iter_paths(spec: WalkSpec, config: SimConfig, times=None) -> Iterator[PathSummary]:
    res = simulate(spec, config, times)
    for k, row in enumerate(res.distances):
        yield PathSummary(k, row)


def one_step_frequencies(dist: np.ndarray, levels: int) -> np.ndarray:
    """Counts of observed distance transitions i -> j for i, j < levels."""
    a = dist[:, :-1].ravel()
    b = dist[:, 1:].ravel()
    keep = (a < levels) & (b < levels) & (a >= 0) & (b >= 0)
    counts = np.zeros((levels, levels), dtype=np.int64)
    np.add.at(counts, (a[keep], b[keep]), 1)
    return counts


# ----------------------------------------------------------- return times


@dataclass
class ReturnTimeReport:
    samples: np.ndarray  # inf where censored
    horizon: float
    stats: EmpiricalStats | None
    censored_fraction: float

    def survival(self, t) -> np.ndarray:
        """Empirical P[T > t] for t <= horizon (censored paths count as survivors)."""
        s = np.sort(self.samples)
        t = np.asarray(t, dtype=float)
        return 1.0 - np.searchsorted(s, t, side="right") / s.size

    def to_json(self) -> dict:
        return {"horizon": self.horizon, "censoredFraction": self.censored_fraction,
                "stats": None if self.stats is None else self.stats.to_json()}


def estimate_return_time(spec: WalkSpec | KernelTables, config: SimConfig) -> ReturnTimeReport:
    if config.scheme != "continuous":
        raise ValueError("return times use the continuous scheme")
    tables = spec if isinstance(spec, KernelTables) else build_tables(spec)
    js = jump_sampler(tables)
    seed = int(config.seed)
    T = float(config.horizon)
    parts = _run(config, lambda r0, r1: _core.walk_return_times(
        js.N, js.log_a, js.cdf, T, seed, r0, r1, js.levels))
    x = _concat(parts)
    done = np.isfinite(x)
    st = EmpiricalStats.from_samples(x[done]) if done.any() else None
    return ReturnTimeReport(x, T, st, float(1.0 - done.mean()))


# ------------------------------------------------------------- last exit


@dataclass
class LastExitReport:
    R: int
    horizon: float
    samples: np.ndarray
    censored: np.ndarray
    late: np.ndarray
    stats: EmpiricalStats
    escape_level: int
    reentry_bound: float

    @property
    def censored_fraction(self) -> float:
        return float(self.censored.mean())

    @property
    def late_fraction(self) -> float:
        return float(self.late.mean())

    def moment(self, zeta: float) -> tuple[float, float]:
        """Empirical E L^zeta and its 99% half-width."""
        v = self.samples**zeta
        return float(v.mean()), _Z995 * float(v.std(ddof=1)) / math.sqrt(v.size)

    def to_json(self) -> dict:
        return {"R": self.R, "horizon": self.horizon, "censoredFraction": self.censored_fraction,
                "lateReturnFraction": self.late_fraction, "escapeLevel": self.escape_level,
                "reentryBound": self.reentry_bound, "stats": self.stats.to_json()}


def reentry_bound(tables: KernelTables, R: int, m: int) -> float:
    """Upper bound on P_x[walk ever visits B_R] for |x| = m > R.

    P_x[hit B] min_{y in B} G1_B(y) <= G1_B(x); on the subgroup B_R the minimum
    is G1_B(0) and G1_B(x) = N^R G(0, x).
    """
    N = tables.N
    h_m = float(tables.h_modes(m)[m - 1])
    G_m = green_power(tables, 1.0, start=m + 1)
    GB = last_exit_integral(tables, 1.0, R).series
    if not (G_m.finite and GB.finite):
        return math.inf
    g = G_m.value + G_m.truncation_error - float(N) ** (-m) / h_m
    return float(N) ** R * g / GB.value


def escape_level(tables: KernelTables, R: int, tol: float, levels: int) -> tuple[int, float]:
    """Smallest level m > R whose re-entry bound is below ``tol`` (capped at ``levels``)."""
    b = math.inf
    for m in range(R + 1, levels + 1):
        b = reentry_bound(tables, R, m)
        if b <= tol:
            return m, b
    return levels, b


def estimate_last_exit(spec: WalkSpec | KernelTables, config: SimConfig, R: int,
                       reentry_tol: float = 1e-6) -> LastExitReport:
    """Last exit time from B_R; a path stops once re-entry has probability below ``reentry_tol``."""
    if config.scheme != "continuous":
        raise ValueError("last exit times use the continuous scheme")
    if R < 0:
        raise ValueError("R must be >= 0")
    tables = spec if isinstance(spec, KernelTables) else build_tables(spec)
    if not green_power(tables, 1.0).finite:
        raise RefusedError("last exit time needs a certified transient walk")
    js = jump_sampler(tables)
    esc, bound = escape_level(tables, R, reentry_tol, js.levels)
    seed = int(config.seed)
    T = float(config.horizon)
    parts = _run(config, lambda r0, r1: _core.walk_last_exit(
        js.N, js.log_a, js.cdf, int(R), T, seed, r0, r1, js.levels, esc))
    L, cens, late = _concat(parts)
    return LastExitReport(R, T, L, cens.astype(bool), late.astype(bool),
                          EmpiricalStats.from_samples(L), esc, bound)


# ------------------------------------------------------------- occupation


@dataclass
class OccupationReport:
    t: float
    samples: np.ndarray
    norm: float
    ks: float

    def to_json(self) -> dict:
        return {"t": self.t, "norm": self.norm, "ks": self.ks,
                "stats": EmpiricalStats.from_samples(self.samples).to_json()}


def _support_array(N: int, F: dict[GroupElement, float]) -> tuple[np.ndarray, int]:
    if not F:
        raise ValueError("F must have non-empty support")
    K = max(x.norm for x in F)
    arr = np.zeros(N**K)
    for x, v in F.items():
        if v < 0:
            raise ValueError("F must be non-negative")
        arr[x.index()] = float(v)
    return arr, K


def certified_recurrent_mu1(spec: WalkSpec) -> bool:
    fam = spec.family
    if fam is None or fam[0] != 1.0:
        return False
    seq = fam[1]
    tail = seq.inv_power_tail(1.0, 0)
    return seq.nondecreasing and tail is not None and math.isinf(tail)


def occupation_norm(tables: KernelTables, t: float, total_F: float) -> float:
    """(N-1) sum_y F(y) sum_{j <= log t / log N} d_j^-1 / (N D)."""
    N = tables.N
    top = int(math.floor(math.log(t) / math.log(N) + 1e-12))
    d = tables.modes(top + 1).d[: top + 1]
    return (N - 1) * total_F * math.fsum((1.0 / d).tolist()) / (N * tables.D)


def occupation_statistic(spec: WalkSpec | KernelTables, F: dict[GroupElement, float], t: float,
                         config: SimConfig) -> OccupationReport:
    """Normalized occupation integrals of F up to time t, one per replica."""
    tables = spec if isinstance(spec, KernelTables) else build_tables(spec)
    if not certified_recurrent_mu1(tables.spec):
        raise RefusedError("occupation limit requires a recurrent mu = 1 walk with non-decreasing c_j")
    arr, K = _support_array(tables.N, F)
    js = jump_sampler(tables)
    seed = int(config.seed)
    arr = np.ascontiguousarray(arr)
    parts = _run(config, lambda r0, r1: _core.walk_occupation(
        js.N, js.log_a, js.cdf, arr, K, float(t), seed, r0, r1, js.levels))
    raw = _concat(parts)
    norm = occupation_norm(tables, t, float(arr.sum()))
    x = raw / norm
    return OccupationReport(float(t), x, norm, ks_statistic(x, lambda v: -np.expm1(-np.maximum(v, 0))))


def ks_statistic(samples, cdf: Callable) -> float:
    """Sup distance between the empirical CDF of ``samples`` and ``cdf``."""
    x = np.asarray(samples, dtype=float)
    if x.size < 2:
        raise ValueError("need at least two samples")
    return float(stats.kstest(x, cdf).statistic)


# ---------------------------------------------------------------- output


def samples_csv(columns: dict[str, np.ndarray]) -> str:
    """CSV text with one row per replica."""
    names = list(columns)
    n = len(next(iter(columns.values())))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["replica", *names])
    for k in range(n):
        w.writerow([k, *(repr(float(columns[c][k])) for c in names)])
    return buf.getvalue()


def write_samples_csv(path: str, columns: dict[str, np.ndarray]) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(samples_csv(columns))


def summary(spec: WalkSpec, config: SimConfig, **fields) -> dict:
    out = {"seed": int(config.seed), "specHash": spec.digest(), "replicas": config.replicas,
           "horizon": config.horizon, "scheme": config.scheme}
    out.update(fields)
    return out


def summary_json(spec: WalkSpec, config: SimConfig, **fields) -> str:
    return json.dumps(summary(spec, config, **fields), sort_keys=True, indent=2)
