"""Green-operator powers, degrees, incomplete potentials and return-time tails.

Every series here is a sum over the modes h_j of the walk.  With weights
w_j = (N-1) / N^j the main quantities are

    G^zeta(0,0)        = sum_j w_j h_j^-zeta
    g_t^(zeta)         = sum_j w_j t^zeta gamma_low(zeta, h_j t) / (h_j t)^zeta / Gamma(zeta)
    G_t^2(0,0)         = sum_j w_j ((1 - e^{-h_j t}) / h_j)^2
    G_t^2 G(0,0)       = sum_j w_j (1 - e^{-h_j t})^2 / h_j^3

and the values are returned as :class:`PotentialValue` with a rigorous bound
on the neglected modes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import zeta as riemann_zeta

from . import _core
from . import sequences as seqs
from .kernel import ExplicitR, GeometricLaw, KernelTables, MuC, WalkSpec, build_tables

# tolerance used to decide that a ratio certificate sits exactly on 1
_BOUNDARY_TOL = 1e-12
_TERM_CAP = 200_000
_CERT_WINDOW = 50
_REL_TOL = 1e-17


class UnsupportedSpecError(ValueError):
    """The requested analysis does not apply to this walk."""


class SolverError(RuntimeError):
    """A numerical solve did not meet its tolerance."""


@dataclass
class PotentialValue:
    value: float
    truncation_error: float = 0.0
    terms: int = 0
    divergent: bool = False
    indeterminate: bool = False

    @property
    def finite(self) -> bool:
        return not self.divergent and not self.indeterminate

    @classmethod
    def infinite(cls, terms: int = 0) -> PotentialValue:
        return cls(math.inf, 0.0, terms, divergent=True)

    def to_json(self) -> dict:
        return {
            "value": self.value if math.isfinite(self.value) else None,
            "truncationError": self.truncation_error,
            "divergent": self.divergent,
            "indeterminate": self.indeterminate,
            "terms": self.terms,
        }


@dataclass
class DegreeReport:
    gamma: float
    decoration: str  # plus | minus | undetermined
    method: str
    lower: float | None = None
    upper: float | None = None

    def to_json(self) -> dict:
        return {"gamma": self.gamma, "decoration": self.decoration, "method": self.method,
                "lower": self.lower, "upper": self.upper}


@dataclass
class ReturnTail:
    grid: np.ndarray
    rho: np.ndarray
    residual: float
    clip: float = 0.0

    @property
    def dt(self) -> float:
        return float(self.grid[1] - self.grid[0])


@dataclass
class MomentEstimate:
    value: float
    tail_exponent: float
    divergent: bool


@dataclass
class LastExitIntegral:
    series: PotentialValue
    closed_form: float | None = None


# --------------------------------------------------------------- helpers


def _log_weights(N: int, j: np.ndarray) -> np.ndarray:
    return math.log(N - 1) - j * math.log(N)


def _ratio_of(seq: seqs.Sequence) -> float | None:
    """Long-run ratio d_{k+1}/d_k (per-period geometric mean when oscillating)."""
    if seq.ratio_limit is not None:
        return seq.ratio_limit
    if isinstance(seq, seqs.PeriodicGeometric):
        return seq.eta
    return None


def _degree_formula(mu: float, ratio: float, N: int) -> float:
    L = mu * math.log(ratio) / math.log(N)
    if L >= 1.0:
        return math.inf
    return (mu - 1.0 + L) / (1.0 - L)


def _positive_series(log_term_fn, start: int, q_lim: float, scale_log: float = 0.0) -> PotentialValue:
    """Sum exp(log_term_fn(k)) for k >= start, k increasing, certified by a ratio bound.

    The tail after the last evaluated term is bounded by term * qhat / (1 - qhat),
    where qhat is the largest of the limiting ratio and the ratios seen over the
    trailing window.
    """
    chunk = 256
    k0 = start
    logs: list[np.ndarray] = []
    while True:
        lt = log_term_fn(np.arange(k0, k0 + chunk)) + scale_log
        logs.append(lt)
        allv = np.concatenate(logs)
        n = len(allv)
        if n > _CERT_WINDOW + 1:
            window = np.diff(allv[-(_CERT_WINDOW + 1):])
            qhat = max(q_lim, float(np.exp(window.max())))
            if qhat < 1.0:
                terms = np.exp(allv)
                total = math.fsum(terms.tolist())
                bound = float(terms[-1]) * qhat / (1.0 - qhat)
                if bound <= _REL_TOL * total or total == 0.0:
                    return PotentialValue(total, bound, n)
        if n >= _TERM_CAP:
            return PotentialValue(math.nan, math.inf, n, indeterminate=True)
        k0 += chunk
        chunk = min(chunk * 2, 1 << 15)


def _mode_cutoff(tables: KernelTables, rel_scale: float) -> int:
    return tables.mode_cutoff(extra_scale=max(rel_scale, 1.0))


# ------------------------------------------------------------ green power


def green_power(tables: KernelTables, zeta: float, start: int = 1) -> PotentialValue:
    """G^zeta(0,0) = (N-1) sum_{j>=start} h_j^-zeta / N^j, with a convergence certificate."""
    if not zeta > 0:
        raise ValueError("zeta must be positive")
    spec = tables.spec
    N = spec.N
    if isinstance(spec.law, ExplicitR):
        # h_j = 0 beyond the support: the walk is confined to a finite group
        return PotentialValue.infinite()
    mu, seq, kind = spec.family
    q = certificate_ratio(spec, zeta)
    if q is None:
        return PotentialValue(math.nan, math.inf, 0, indeterminate=True)
    rho = _ratio_of(seq)

    def log_terms(j):
        m = tables.modes(int(j[-1]))
        return _log_weights(N, j) - zeta * m.log_h[j - 1]

    if q > 1.0 + _BOUNDARY_TOL:
        return PotentialValue.infinite()
    if abs(q - 1.0) <= _BOUNDARY_TOL:
        return _green_boundary(tables, zeta, seq, kind, rho, start, log_terms)
    return _positive_series(log_terms, start, q)


def _green_boundary(tables, zeta, seq, kind, rho, start, log_terms) -> PotentialValue:
    """Certificate ratio exactly 1: compare with sum d_k^-zeta directly."""
    N = tables.N
    if rho != 1.0:
        # terms are asymptotically constant or periodic
        return PotentialValue.infinite()
    K = max(start, 4096)
    tail_d = seq.inv_power_tail(zeta, K)
    if tail_d is None:
        return PotentialValue(math.nan, math.inf, 0, indeterminate=True)
    if math.isinf(tail_d):
        return PotentialValue.infinite()
    j = np.arange(start, K + 1)
    head = math.fsum(np.exp(log_terms(j)).tolist())
    # beyond K: w_j h_j^-zeta = (N-1)/(N D^zeta) d_{j-1}^-zeta when x = 1
    pref = (N - 1) / N * tables.D ** (-zeta)
    if kind == "d":
        return PotentialValue(head + pref * tail_d, 1e-15 * pref * tail_d, int(K))
    # d_k >= c_k N/(N-1): the c-tail gives an upper bound on the d-tail
    upper = pref * ((N - 1) / N) ** zeta * tail_d
    return PotentialValue(head + 0.5 * upper, 0.5 * upper, int(K))


def certificate_ratio(spec: WalkSpec, zeta: float) -> float | None:
    """Limiting ratio of consecutive terms of the G^zeta series (None if unknown)."""
    fam = spec.family
    if fam is None:
        return None
    mu, seq, _ = fam
    rho = _ratio_of(seq)
    if rho is None:
        return None
    log_q = (zeta / mu - 1.0) * math.log(spec.N) - zeta * math.log(rho)
    return math.exp(min(log_q, 700.0))


def degree_by_summability(spec: WalkSpec, hi: float = 1e6, iters: int = 200) -> float:
    """Sup of zeta with a convergent ratio certificate, minus one (bisection)."""
    q = lambda z: certificate_ratio(spec, z)  # noqa: E731
    if q(1e-300) is None:
        raise UnsupportedSpecError("no ratio certificate available")
    lo = 0.0
    if q(hi) < 1.0:
        return math.inf
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if q(mid) < 1.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 4e-16 * hi:
            break
    return 0.5 * (lo + hi) - 1.0


# ---------------------------------------------------------------- degree


def degree_classify(spec: WalkSpec) -> DegreeReport:
    law = spec.law
    N = spec.N
    if isinstance(law, ExplicitR):
        raise UnsupportedSpecError("degree needs an infinite-range law (geometric, muC or muD)")
    if isinstance(law, GeometricLaw):
        c = law.c
        return DegreeReport(math.log(c) / math.log(N / c), "minus", "closed-form-geometric")
    mu, seq, kind = spec.family
    lo_r, hi_r = seq.ratio_liminf, seq.ratio_limsup
    if lo_r is None or hi_r is None:
        raise UnsupportedSpecError("sequence generator exposes no ratio information")
    if isinstance(seq, seqs.Geometric) and seq.eta != 1.0:
        if mu * math.log(seq.eta) / math.log(N) >= 1.0:
            raise UnsupportedSpecError("geometric sequence too large: walk not normalizable")
        return DegreeReport(_degree_formula(mu, seq.eta, N), "minus", "closed-form-mu-family")
    if lo_r == hi_r == 1.0:
        tail = seq.inv_power_tail(mu, 0)
        if tail is None:
            decoration = "undetermined"
        elif math.isfinite(tail):
            decoration = "plus"
        elif seq.nondecreasing:
            decoration = "minus"
        else:
            decoration = "undetermined"
        return DegreeReport(mu - 1.0, decoration, "summability-test")
    lower = _degree_formula(mu, lo_r, N)
    upper = _degree_formula(mu, hi_r, N)
    rho = _ratio_of(seq)
    gamma = _degree_formula(mu, rho, N) if rho is not None else 0.5 * (lower + upper)
    return DegreeReport(gamma, "undetermined", "ratio-bounds", lower, upper)


# --------------------------------------------------------- incomplete potentials


def _mode_sum(tables: KernelTables, per_mode, zero_h_value: float, tail_per_weight: float):
    """sum_j w_j per_mode(h_j) with the modes truncated where w_j * tail_per_weight is negligible."""
    N = tables.N
    K = _mode_cutoff(tables, tail_per_weight)
    m = tables.modes(K)
    j = np.arange(1, K + 1)
    h = np.exp(m.log_h)
    vals = per_mode(h)
    terms = (np.exp(_log_weights(N, j)) * vals).tolist()
    if tables.finite_support:
        # modes beyond the support have h = 0; their weights sum to N^-K
        terms.append(float(N) ** (-K) * zero_h_value)
        err = 0.0
    else:
        err = float(N) ** (-K) * tail_per_weight
    return math.fsum(terms), err, K


def g_t_zeta(tables: KernelTables, zeta: float, t: float) -> PotentialValue:
    """(1/Gamma(zeta)) int_0^t s^(zeta-1) p_s(0,0) ds, mode by mode."""
    if not zeta > 0 or not t > 0:
        raise ValueError("zeta and t must be positive")
    scale = t**zeta / math.gamma(zeta)

    def per_mode(h):
        return scale * _core.lower_gamma_scaled(float(zeta), np.ascontiguousarray(h * t))

    cap = scale / zeta
    value, err, K = _mode_sum(tables, per_mode, cap, cap)
    return PotentialValue(value, err, K)


def incomplete_powers(tables: KernelTables, k: int, t: float) -> PotentialValue:
    """G_t^k(0,0) for k in {1, 2}."""
    if k not in (1, 2):
        raise ValueError("k must be 1 or 2")
    if not t > 0:
        raise ValueError("t must be positive")

    def per_mode(h):
        x = h * t
        with np.errstate(divide="ignore", invalid="ignore"):
            one = np.where(x > 0, -np.expm1(-x) / np.where(x > 0, x, 1.0), 1.0) * t
        return one**k

    value, err, K = _mode_sum(tables, per_mode, t**k, t**k)
    return PotentialValue(value, err, K)


def g2g(tables: KernelTables, t: float) -> PotentialValue:
    """G_t^2 G(0,0) = sum_j w_j (1 - e^{-h_j t})^2 / h_j^3; +inf when G diverges."""
    if not t > 0:
        raise ValueError("t must be positive")
    G = green_power(tables, 1.0)
    if not G.finite:
        return PotentialValue(math.inf, 0.0, G.terms, divergent=G.divergent,
                              indeterminate=G.indeterminate)
    N = tables.N
    K = _mode_cutoff(tables, t * t)
    m = tables.modes(K)
    j = np.arange(1, K + 1)
    h = np.exp(m.log_h)
    x = h * t
    vals = np.square(-np.expm1(-x) / x) * t * t / h
    value = math.fsum((np.exp(_log_weights(N, j)) * vals).tolist())
    # (1 - e^{-x})^2 / h^3 <= t^2 / h beyond K
    tail = green_power(tables, 1.0, start=K + 1)
    err = t * t * (tail.value + tail.truncation_error)
    return PotentialValue(value, err, K + tail.terms)


def f_t(tables: KernelTables, mu: float, t: float) -> PotentialValue:
    """The incomplete functional compared against the benchmark at level mu."""
    if mu == 1:
        return incomplete_powers(tables, 1, t)
    if mu == 2:
        return incomplete_powers(tables, 2, t)
    if mu == 3:
        return g2g(tables, t)
    return g_t_zeta(tables, mu, t)


def asymptotic_benchmark(tables: KernelTables, mu: float, t: float) -> float:
    """((N-1)/(N D^mu)) sum_{j=0}^{floor(mu log t / log N)} d_j^-mu."""
    fam = tables.spec.family
    if fam is None or tables.D is None:
        raise UnsupportedSpecError("benchmark needs a muC/muD family")
    fmu, seq, _ = fam
    if abs(fmu - mu) > 1e-12:
        raise UnsupportedSpecError(f"walk has mu={fmu}, benchmark requested at mu={mu}")
    if not seq.nondecreasing:
        raise UnsupportedSpecError("benchmark needs a non-decreasing sequence")
    tail = seq.inv_power_tail(mu, 0)
    if tail is not None and math.isfinite(tail):
        raise UnsupportedSpecError("benchmark needs sum d_j^-mu = infinity")
    N = tables.N
    top = int(math.floor(mu * math.log(t) / math.log(N) + 1e-12))
    m = tables.modes(top + 1)
    d = m.d[: top + 1]
    return (N - 1) / (N * tables.D**mu) * math.fsum((d ** (-mu)).tolist())


# -------------------------------------------------------------- last exit


def last_exit_integral(tables: KernelTables, mu: float, R: int) -> LastExitIntegral:
    """int_0^inf t^(mu-1) P_t(0, B_R) dt = Gamma(mu) (N-1) sum_{j>R} N^(R-j) h_j^-mu."""
    if mu < 1:
        raise ValueError("mu must be >= 1")
    if R < 0:
        raise ValueError("radius must be non-negative")
    N = tables.N
    tail = green_power(tables, mu, start=R + 1)
    if not tail.finite:
        series = PotentialValue(math.inf, 0.0, tail.terms, divergent=tail.divergent,
                                indeterminate=tail.indeterminate)
        return LastExitIntegral(series)
    scale = math.gamma(mu) * float(N) ** R
    series = PotentialValue(scale * tail.value, scale * tail.truncation_error, tail.terms)
    return LastExitIntegral(series, _last_exit_closed_form(tables.spec, mu, R))


def _last_exit_closed_form(spec: WalkSpec, mu: float, R: int) -> float | None:
    law = spec.law
    N = spec.N
    if isinstance(law, GeometricLaw):
        wmu, eta = 1.0, law.c
    elif isinstance(law, MuC) and isinstance(law.cseq, (seqs.Geometric, seqs.Constant)):
        wmu = law.mu
        eta = law.cseq.eta if isinstance(law.cseq, seqs.Geometric) else 1.0
    else:
        return None
    if abs(wmu - mu) > 1e-12 or eta**mu <= 1.0:
        return None
    front = (N - 1) ** (mu + 1) / (N ** ((mu + 1) / mu) / eta - 1.0) ** mu
    return math.gamma(mu) * front / (eta**mu - 1.0) * (N / eta**mu) ** R


def last_exit_moment_bound(tables: KernelTables, zeta: float, K: int) -> float:
    """Upper bound on E_0 L^zeta_{B_C} valid for every C <= K.

    Strong Markov at the first visit to B_C after time t gives
    P[L > t] <= int_t^inf P_s(0,B_K) ds / int_0^inf P_s(0,B_K) ds.
    """
    num = last_exit_integral(tables, zeta + 1.0, K).series
    den = last_exit_integral(tables, 1.0, K).series
    if not num.finite or not den.finite:
        return math.inf
    return (num.value + num.truncation_error) / den.value


# ---------------------------------------------------------- return times


def p00_grid(tables: KernelTables, grid: np.ndarray) -> np.ndarray:
    """p_t(0,0) on a vector of times."""
    N = tables.N
    K = tables.mode_cutoff()
    m = tables.modes(K)
    j = np.arange(1, K + 1)
    w = np.exp(_log_weights(N, j))
    h = np.exp(m.log_h)
    p = np.exp(-np.outer(grid, h)) @ w
    if tables.finite_support:
        p += float(N) ** (-K)
    return p


def return_tail_solve(tables: KernelTables, T: float, M: int, tol: float = 1e-6) -> ReturnTail:
    """Solve int_0^t p_s rho_{t-s} ds + p_t = 1 for rho on a uniform grid."""
    if not T > 0 or M < 100:
        raise ValueError("need T > 0 and M >= 100")
    grid = np.linspace(0.0, T, M + 1)
    dt = T / M
    p = p00_grid(tables, grid)
    rho = _core.renewal_solve(np.ascontiguousarray(p), dt)
    clipped = np.clip(rho, 0.0, 1.0)
    clip = float(np.max(np.abs(clipped - rho)))
    conv = np.convolve(p, clipped)[: M + 1]
    # trapezoid: full convolution minus half the two end products
    integral = dt * (conv - 0.5 * p[0] * clipped - 0.5 * p * clipped[0])
    defect = np.abs(integral[1:] + p[1:] - 1.0)
    residual = max(float(defect.max()), clip)
    if residual > tol:
        raise SolverError(f"renewal residual {residual:.3g} exceeds {tol:g}; refine the grid")
    return ReturnTail(grid, clipped, residual, clip)


def survival_with_holding(tail: ReturnTail) -> np.ndarray:
    """P[T > t] for T = H + R with H ~ Exp(1): e^{-t} + int_0^t e^{-s} rho_{t-s} ds."""
    grid, rho, dt = tail.grid, tail.rho, tail.dt
    e = np.exp(-grid)
    conv = np.convolve(e, rho)[: len(grid)]
    integral = dt * (conv - 0.5 * e[0] * rho - 0.5 * e * rho[0])
    return e + integral


def return_moment(tail: ReturnTail, zeta: float) -> MomentEstimate:
    """E R^zeta = int rho_t d(t^zeta), with a power-law tail fitted over the last decade."""
    if not zeta > 0:
        raise ValueError("zeta must be positive")
    t, rho = tail.grid, tail.rho
    tz = t**zeta
    body = float(np.sum(0.5 * (rho[1:] + rho[:-1]) * np.diff(tz)))
    T = t[-1]
    sel = (t >= T / 10.0) & (rho > 0)
    if sel.sum() < 2:
        return MomentEstimate(body, -math.inf, False)
    a, logC = np.polyfit(np.log(t[sel]), np.log(rho[sel]), 1)
    if a + zeta >= 0.0:
        return MomentEstimate(math.inf, float(a), True)
    extra = math.exp(logC) * zeta * T ** (a + zeta) / (-(a + zeta))
    return MomentEstimate(body + extra, float(a), False)


# --------------------------------------------------------- normings


def norming(beta: float, mu: int, t: float) -> float:
    """Occupation-time norming a_t for the j^beta family at level mu."""
    if beta < 0:
        raise ValueError("beta must be >= 0")
    if mu not in (1, 2, 3):
        raise ValueError("mu must be 1, 2 or 3")
    crit = 1.0 / mu
    if abs(beta - crit) <= 1e-12:
        return math.sqrt(t * math.log(math.log(t)))
    if beta < crit:
        return math.sqrt(t) * math.log(t) ** ((1.0 - mu * beta) / 2.0)
    return math.sqrt(t)


def covariance_kernel_jbeta(N: int, beta: float, D: float, dist: int) -> float:
    """Covariance kernel of the limit field at hierarchical distance ``dist``."""
    if beta <= 1:
        raise UnsupportedSpecError("covariance kernel needs beta > 1")
    if dist < 0:
        raise ValueError("distance must be non-negative")
    zr = float(riemann_zeta(beta))
    if dist == 0:
        return 2 * N / D * (N - 1) * zr
    partial = math.fsum(j ** (-beta) for j in range(1, dist + 1))
    return 2 * N / D * ((N - 1) * zr - dist ** (-beta) - (N - 1) * partial)


def tables_for(spec: WalkSpec) -> KernelTables:
    return build_tables(spec)
