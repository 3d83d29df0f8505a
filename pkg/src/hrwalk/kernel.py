"""Jump laws of r_j-walks and their exact transition probabilities.

A walk on Omega_N jumps to distance j with probability r_j and lands
uniformly on that sphere.  Everything exact about the walk is expressed
through the mode rates h_j = r_j N/(N-1) + sum_{i>j} r_i:

    p_t(0,y) = (delta - 1) e^{-h_|y| t} / N^|y| + (N-1) sum_{j>|y|} e^{-h_j t} / N^j

and its discrete-time counterpart with f_k = 1 - h_k in place of e^{-h t}.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import sequences as seqs
from .group import EnumerationCapError, enum_cap, enumerate_ball, sphere_size

DEFAULT_EPS = 1e-12
# modes beyond this index contribute < N**-k; 2**-64 is below double resolution
_TAIL_BITS = 64


class KernelError(ValueError):
    """Invalid jump law."""


class DivergenceError(KernelError):
    """The r-sequence cannot be normalized."""


class InvalidKernelError(KernelError):
    """A derived jump probability is not strictly positive."""

    def __init__(self, k: int, value: float):
        super().__init__(f"derived r_{k} = {value!r} is not positive")
        self.k = k


# ---------------------------------------------------------------- jump laws


@dataclass(frozen=True)
class ExplicitR:
    r: tuple[float, ...]
    type = "explicit"

    def __post_init__(self):
        object.__setattr__(self, "r", tuple(float(v) for v in self.r))
        if not self.r or min(self.r) <= 0:
            raise KernelError("explicit r must be a non-empty list of positive numbers")
        if abs(math.fsum(self.r) - 1.0) > 1e-12:
            raise KernelError(f"explicit r sums to {math.fsum(self.r)!r}, not 1")

    def to_json(self):
        return {"type": "explicit", "r": list(self.r)}


@dataclass(frozen=True)
class GeometricLaw:
    """The c^j-walk: r_j = (1 - c/N)(c/N)^(j-1)."""

    c: float
    type = "geometric"

    def to_json(self):
        return {"type": "geometric", "c": self.c}


@dataclass(frozen=True)
class MuC:
    """(mu, (c_j), N)-walk: r_j = D c_{j-1} / N^((j-1)/mu)."""

    mu: float
    cseq: seqs.Sequence
    type = "muC"

    def to_json(self):
        return {"type": "muC", "mu": self.mu, "cseq": self.cseq.to_json()}


@dataclass(frozen=True)
class MuD:
    """Walk specified through d_j (h_j = D d_{j-1} / N^((j-1)/mu))."""

    mu: float
    dseq: seqs.Sequence
    type = "muD"

    def to_json(self):
        return {"type": "muD", "mu": self.mu, "dseq": self.dseq.to_json()}


Law = ExplicitR | GeometricLaw | MuC | MuD


@dataclass(frozen=True)
class WalkSpec:
    N: int
    law: Law

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 2:
            raise KernelError(f"N must be an integer >= 2, got {self.N!r}")
        law = self.law
        if isinstance(law, GeometricLaw) and not 0 < law.c < self.N:
            raise KernelError(f"geometric walk needs 0 < c < N, got c={law.c}")
        if isinstance(law, (MuC, MuD)) and not law.mu > 0:
            raise KernelError("mu must be positive")

    @classmethod
    def from_json(cls, obj: dict | str) -> WalkSpec:
        if isinstance(obj, str):
            obj = json.loads(obj)
        try:
            N = obj["N"]
            law = obj["law"]
            kind = law["type"]
        except (KeyError, TypeError) as exc:
            raise KernelError(f"walk spec missing field: {exc}") from None
        if kind == "geometric":
            return cls(int(N), GeometricLaw(float(law["c"])))
        if kind == "explicit":
            return cls(int(N), ExplicitR(tuple(law["r"])))
        if kind == "muC":
            return cls(int(N), MuC(float(law["mu"]), seqs.from_json(law["cseq"])))
        if kind == "muD":
            return cls(int(N), MuD(float(law["mu"]), seqs.from_json(law["dseq"])))
        raise KernelError(f"unknown law type {kind!r}")

    def to_json(self) -> dict:
        return {"N": self.N, "law": self.law.to_json()}

    def digest(self) -> str:
        text = json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    # (mu, sequence, 'c' | 'd') view; None for explicit laws
    @property
    def family(self):
        law = self.law
        if isinstance(law, GeometricLaw):
            return 1.0, seqs.Geometric(law.c), "c"
        if isinstance(law, MuC):
            return law.mu, law.cseq, "c"
        if isinstance(law, MuD):
            return law.mu, law.dseq, "d"
        return None

    @property
    def geometric_c(self) -> float | None:
        """Equivalent c of a c^j-walk, when the law is one in disguise."""
        law = self.law
        if isinstance(law, GeometricLaw):
            return law.c
        if isinstance(law, MuC) and isinstance(law.cseq, (seqs.Geometric, seqs.Constant)):
            eta = law.cseq.eta if isinstance(law.cseq, seqs.Geometric) else 1.0
            return eta * self.N ** (1.0 - 1.0 / law.mu)
        return None


def geometric(N: int, c: float) -> WalkSpec:
    return WalkSpec(N, GeometricLaw(c))


def jbeta(N: int, mu: float, beta: float) -> WalkSpec:
    """The j^beta-walk: d_j = (j+1)^beta."""
    return WalkSpec(N, MuD(mu, seqs.Power(beta)))


def explicit(N: int, r) -> WalkSpec:
    return WalkSpec(N, ExplicitR(tuple(r)))


# ------------------------------------------------------------------- tables


@dataclass
class _Modes:
    """Per-index quantities for j = 1..len; logs avoid underflow at large j."""

    log_r: np.ndarray
    log_tail: np.ndarray  # log sum_{i>j} r_i
    log_h: np.ndarray
    s: np.ndarray
    d: np.ndarray  # d_{j-1}; nan for explicit laws


@dataclass
class KernelTables:
    spec: WalkSpec
    J: int
    r: np.ndarray
    f: np.ndarray
    h: np.ndarray
    s: np.ndarray
    d: np.ndarray
    D: float | None
    tail_bound: float
    _builder: object = field(repr=False, default=None)
    _cache: _Modes | None = field(repr=False, default=None)

    @property
    def N(self) -> int:
        return self.spec.N

    @property
    def finite_support(self) -> bool:
        return isinstance(self.spec.law, ExplicitR)

    def modes(self, jmax: int) -> _Modes:
        """Mode data for j = 1..jmax (may extend far beyond the truncation J)."""
        if self._cache is None or len(self._cache.log_h) < jmax:
            self._cache = self._builder(max(jmax, 2 * len(self._cache.log_h) if self._cache else jmax))
        m = self._cache
        return _Modes(m.log_r[:jmax], m.log_tail[:jmax], m.log_h[:jmax], m.s[:jmax], m.d[:jmax])

    def h_modes(self, jmax: int) -> np.ndarray:
        return np.exp(self.modes(jmax).log_h)

    def r_at(self, j) -> np.ndarray:
        """r_j for arbitrary j >= 1 (array)."""
        j = np.atleast_1d(np.asarray(j, dtype=int))
        out = np.zeros(j.shape)
        if j.size == 0:
            return out
        m = self.modes(int(j.max()))
        out[:] = np.exp(m.log_r[j - 1])
        return out

    def r_tail(self, j) -> np.ndarray:
        """sum_{i>j} r_i for j >= 0."""
        j = np.atleast_1d(np.asarray(j, dtype=int))
        out = np.ones(j.shape)
        pos = j >= 1
        if pos.any():
            m = self.modes(int(j.max()))
            out[pos] = np.exp(m.log_tail[j[pos] - 1])
        return out

    def r_cdf(self, j) -> np.ndarray:
        """sum_{i<=j} r_i, computed as 1 - tail for accuracy near 1."""
        return 1.0 - self.r_tail(j)

    def mode_cutoff(self, extra_scale: float = 1.0, bits: int = _TAIL_BITS) -> int:
        """Smallest K with extra_scale * N**-K below 2**-bits."""
        lg = math.log2(self.N)
        need = bits + max(0.0, math.log2(extra_scale)) if extra_scale > 0 else bits
        return max(self.J, int(math.ceil(need / lg)) + 1)

    def h_over_N_tail(self, K: int) -> float:
        """sum_{j>K} h_j / N^j."""
        L = K + self.mode_cutoff()
        m = self.modes(L)
        j = np.arange(K + 1, L + 1)
        terms = np.exp(m.log_h[K:L] - j * math.log(self.N))
        return math.fsum(terms.tolist())

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["j", "r", "f", "h", "s", "d"])
        for j in range(1, self.J + 1):
            d = self.d[j - 1]
            w.writerow([j, repr(self.r[j - 1]), repr(self.f[j - 1]), repr(self.h[j - 1]),
                        repr(self.s[j - 1]), "" if math.isnan(d) else repr(d)])
        return buf.getvalue()


def _explicit_builder(spec: WalkSpec):
    N = spec.N
    r = np.asarray(spec.law.r)
    J = len(r)
    tail = np.array([math.fsum(r[j:].tolist()) for j in range(1, J + 1)])

    def build(jmax: int) -> _Modes:
        n = max(jmax, J)
        rr = np.zeros(n)
        tt = np.zeros(n)
        rr[:J] = r
        tt[:J] = tail
        h = rr * N / (N - 1) + tt
        with np.errstate(divide="ignore", invalid="ignore"):
            s = np.where(rr > 0, h / rr, np.nan)
            return _Modes(np.log(rr), np.log(tt), np.log(h), s, np.full(n, np.nan))

    return build


def _family_builder(spec: WalkSpec):
    N = spec.N
    mu, seq, kind = spec.family
    log_y = -math.log(N) / mu
    y = math.exp(log_y)
    q = N / (N - 1)

    if kind == "c":
        lim = seq.ratio_limsup
        if lim is None:
            raise DivergenceError("c-sequence exposes no ratio bound; cannot certify normalization")
        if lim * y >= 1.0:
            raise DivergenceError(
                f"c-sequence not summable: limsup c_(j+1)/c_j = {lim} >= N^(1/mu) = {1 / y}")
        W0, _ = seq.weighted_tail(np.array([0]), y)
        log_D = -(float(seq.log_values(np.array([0]))[0]) + math.log1p(float(W0[0])))

        def build(jmax: int) -> _Modes:
            k = np.arange(jmax)  # k = j - 1
            log_c = seq.log_values(k)
            W, _ = seq.weighted_tail(k, y)
            log_r = log_D + log_c + k * log_y
            s = q + W
            with np.errstate(over="ignore"):
                d = np.exp(log_c) * s
            return _Modes(log_r, log_r + np.log(W), log_r + np.log(s), s, d)

        return build, math.exp(log_D)

    # kind == "d": r is derived from h through the inversion formula
    lim = seq.ratio_limsup
    if lim is None or lim * y >= 1.0:
        raise DivergenceError("d-sequence too large to define a normalizable walk")
    x = y / N
    limit_ratio = seq.ratio_limit
    if limit_ratio is not None:
        qx = limit_ratio * x
        g_inf = (N - 1) / N - (N - 1) ** 2 / N * qx / (1 - qx)
        if g_inf <= 0:
            raise InvalidKernelError(-1, g_inf)

    def raw(jmax: int):
        k = np.arange(jmax)
        log_d = seq.log_values(k)
        Wd, _ = seq.weighted_tail(k, x)
        g = (N - 1) / N - (N - 1) ** 2 / N * Wd
        bad = np.nonzero(g <= 0)[0]
        if bad.size:
            kk = int(bad[0])
            raise InvalidKernelError(kk + 1, float(np.exp(log_d[kk]) * g[kk]))
        return k, log_d, Wd, g

    # normalizer: S = sum_k d_k g_k y^k, summed until the d-weighted tail is negligible
    n = 64
    while True:
        k, log_d, Wd, g = raw(n)
        terms = np.exp(log_d + np.log(g) + k * log_y)
        Wy, _ = seq.weighted_tail(np.array([n - 1]), y)
        tail = (N - 1) / N * math.exp(log_d[-1] + (n - 1) * log_y) * float(Wy[0])
        S = math.fsum(terms.tolist())
        if tail <= 1e-18 * S:
            break
        n *= 2
    log_D = -math.log(S)

    def build(jmax: int) -> _Modes:
        k, log_d, Wd, g = raw(jmax)
        log_h = log_D + log_d + k * log_y
        log_r = log_h + np.log(g)
        log_tail = log_h + math.log(N - 1) + np.log(Wd)
        with np.errstate(over="ignore"):
            d = np.exp(log_d)
        return _Modes(log_r, log_tail, log_h, 1.0 / g, d)

    return build, math.exp(log_D)


def build_tables(spec: WalkSpec, eps: float = DEFAULT_EPS) -> KernelTables:
    """Tabulate r, f, h, s, d up to the first J whose r-tail is below ``eps``."""
    if not 0 < eps <= 1e-6:
        raise KernelError("eps must lie in (0, 1e-6]")
    if isinstance(spec.law, ExplicitR):
        builder = _explicit_builder(spec)
        D = None
        J = len(spec.law.r)
    else:
        builder, D = _family_builder(spec)
        n = 64
        while True:
            m = builder(n)
            below = np.nonzero(m.log_tail < math.log(eps))[0]
            if below.size:
                J = int(below[0]) + 1
                break
            n *= 2
            if n > 1 << 22:
                raise DivergenceError("r-tail does not fall below eps")
    m = builder(max(J, 64))
    r = np.exp(m.log_r[:J])
    h = np.exp(m.log_h[:J])
    tail = float(np.exp(m.log_tail[J - 1])) if J >= 1 else 1.0
    return KernelTables(
        spec=spec, J=J, r=r, f=1.0 - h, h=h, s=m.s[:J].copy(), d=m.d[:J].copy(), D=D,
        tail_bound=tail, _builder=builder, _cache=m,
    )


def r_from_h(N: int, h, h_tail: float = 0.0, normalize: bool = False) -> np.ndarray:
    """Recover r_1..r_K from h_1..h_K.

    ``h_tail`` is ``sum_{j>K} h_j / N^j``.  With ``normalize`` the output is
    rescaled to unit mass, which is legitimate because the map is linear in h.
    """
    h = np.asarray(h, dtype=float)
    K = len(h)
    j = np.arange(1, K + 1)
    if np.any(h <= 0):
        raise KernelError("h must be positive")
    weighted = h * np.power(float(N), -j.astype(float))
    # beyond[k] = sum_{j>k} h_j / N^j
    beyond = np.empty(K)
    acc = h_tail
    for i in range(K - 1, -1, -1):
        beyond[i] = acc
        acc += weighted[i]
    r = (N - 1) / N * h - (N - 1) ** 2 / N * np.power(float(N), j.astype(float)) * beyond
    bad = np.nonzero(r <= 0)[0]
    if bad.size:
        raise InvalidKernelError(int(bad[0]) + 1, float(r[bad[0]]))
    if normalize:
        r = r / math.fsum(r.tolist())
    return r


def c_from_d_mu1(N: int, d, d_tail_rule=None) -> np.ndarray:
    """c_j from d_j for mu = 1 (cross-check of the h-route).

    c_j = (N-1)/N d_j - ((N-1)^2/N) N^{2j} sum_{i>j} d_i / N^{2i}
    """
    d = np.asarray(d, dtype=float)
    K = len(d)
    out = np.empty(K)
    for jj in range(K):
        tail = math.fsum((d[jj + 1:] * np.power(float(N), -2.0 * np.arange(1, K - jj))).tolist())
        if d_tail_rule is not None:
            tail += d_tail_rule(jj)
        out[jj] = (N - 1) / N * d[jj] - (N - 1) ** 2 / N * tail
    return out


# ------------------------------------------------------ transition functions


def _radial_sum(tables: KernelTables, rad: int, mode_fn, with_error: bool):
    """(delta-1) g_rad / N^rad + (N-1) sum_{k>rad} g_k / N^k for |g_k| <= 1."""
    N = tables.N
    if rad < 0:
        raise ValueError("radius must be non-negative")
    if tables.finite_support:
        J = tables.J
        K = max(J, rad)
        m = tables.modes(K)
        g = mode_fn(np.exp(m.log_h))
        k = np.arange(rad + 1, K + 1)
        terms = ((N - 1) * g[rad:K] * np.power(float(N), -k.astype(float))).tolist()
        # modes beyond the support have h = 0 and g = 1 exactly
        terms.append(float(N) ** (-K))
        err = 0.0
    else:
        K = rad + tables.mode_cutoff()
        m = tables.modes(K)
        g = mode_fn(np.exp(m.log_h))
        k = np.arange(rad + 1, K + 1)
        terms = ((N - 1) * g[rad:K] * np.power(float(N), -k.astype(float))).tolist()
        err = float(N) ** (-K)
    if rad >= 1:
        terms.append(-g[rad - 1] * float(N) ** (-rad))
    # exact value is a probability; cancellation can leave a tiny negative residue
    value = max(math.fsum(terms), 0.0)
    return (value, err) if with_error else value


def pn(tables: KernelTables, n: int, rad: int, with_error: bool = False):
    """n-step probability p^(n)(0, y) for any y with |y| = rad."""
    if n < 1:
        raise ValueError("n must be >= 1")
    n = int(n)
    if n == 1 and rad == 0:
        # a step never stays put; the series only cancels to rounding
        return (0.0, 0.0) if with_error else 0.0
    return _radial_sum(tables, rad, lambda h: np.power(1.0 - h, n), with_error)


def pt(tables: KernelTables, t: float, rad: int, with_error: bool = False):
    """Continuous-time (unit rate) transition probability p_t(0, y), |y| = rad."""
    if t < 0:
        raise ValueError("t must be non-negative")
    return _radial_sum(tables, rad, lambda h: np.exp(-h * t), with_error)


def pt_ball(tables: KernelTables, t: float, R: int, with_error: bool = False):
    """P_t(0, B_R) = p_t(0,0) + sum_{m<=R} |S_m| p_t(0, S_m)."""
    if R < 0:
        raise ValueError("radius must be non-negative")
    v0, e0 = pt(tables, t, 0, with_error=True)
    vals, errs = [v0], [e0]
    for m in range(1, R + 1):
        v, e = pt(tables, t, m, with_error=True)
        size = sphere_size(tables.N, m)
        vals.append(size * v)
        errs.append(size * e)
    value = math.fsum(vals)
    return (value, math.fsum(errs)) if with_error else value


def pt_ball_modes(tables: KernelTables, t: float, R: int) -> float:
    """Same quantity through the collapsed form (N-1) sum_{j>R} N^(R-j) e^{-h_j t}."""
    N = tables.N
    K = R + tables.mode_cutoff()
    h = tables.h_modes(K)
    j = np.arange(R + 1, K + 1)
    terms = ((N - 1) * np.power(float(N), (R - j).astype(float)) * np.exp(-h[R:K] * t)).tolist()
    if tables.finite_support and K >= tables.J:
        terms.append(float(N) ** (R - K))
    return math.fsum(terms)


# ----------------------------------------------------------- brute force


def transition_matrix(spec: WalkSpec, cap: int | None = None) -> np.ndarray:
    """Dense one-step matrix on (Z_N)^J for a finitely supported law."""
    if not isinstance(spec.law, ExplicitR):
        raise KernelError("brute force needs a finitely supported (explicit) law")
    N = spec.N
    r = spec.law.r
    J = len(r)
    cap = enum_cap() if cap is None else cap
    if N**J > cap:
        raise EnumerationCapError(f"N**J = {N**J} exceeds enumeration cap {cap}")
    size = N**J
    idx = np.arange(size)
    digits = np.stack([(idx // N**i) % N for i in range(J)], axis=1)
    # distance = highest differing coordinate
    dist = np.zeros((size, size), dtype=int)
    for i in range(J):
        differ = digits[:, None, i] != digits[None, :, i]
        dist[differ] = i + 1
    P = np.zeros((size, size))
    for j in range(1, J + 1):
        P[dist == j] = r[j - 1] / sphere_size(N, j)
    return P


def brute_force_pn(spec: WalkSpec, n: int, cap: int | None = None) -> np.ndarray:
    """Exact n-step law from the origin, indexed like :func:`enumerate_ball`."""
    P = transition_matrix(spec, cap)
    v = np.zeros(P.shape[0])
    v[0] = 1.0
    for _ in range(n):
        v = v @ P
    return v


def ball_elements(spec: WalkSpec):
    return enumerate_ball(spec.N, len(spec.law.r))
