# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled walk kernels.  Must stay draw-for-draw identical to ``_fallback``."""
import numpy as np

cimport numpy as cnp
from libc.math cimport exp, floor, log, lgamma, fabs, INFINITY
from libc.stdint cimport uint64_t, int32_t, uint8_t
from libc.stdlib cimport malloc, free, calloc

cnp.import_array()

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL


cdef struct Rng:
    uint64_t s0, s1, s2, s3


cdef inline uint64_t _splitmix(uint64_t *x) noexcept nogil:
    cdef uint64_t z
    x[0] += GOLDEN
    z = x[0]
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline uint64_t _rotl(uint64_t x, int k) noexcept nogil:
    return (x << k) | (x >> (64 - k))


cdef inline void _seed(Rng *g, uint64_t seed, uint64_t replica) noexcept nogil:
    cdef uint64_t x = seed
    cdef uint64_t key = _splitmix(&x) ^ (replica * GOLDEN)
    g.s0 = _splitmix(&key)
    g.s1 = _splitmix(&key)
    g.s2 = _splitmix(&key)
    g.s3 = _splitmix(&key)


cdef inline uint64_t _next(Rng *g) noexcept nogil:
    cdef uint64_t result = _rotl(g.s1 * 5, 7) * 9
    cdef uint64_t t = g.s1 << 17
    g.s2 ^= g.s0
    g.s3 ^= g.s1
    g.s1 ^= g.s2
    g.s0 ^= g.s3
    g.s2 ^= t
    g.s3 = _rotl(g.s3, 45)
    return result


cdef inline double _uniform_pos(Rng *g) noexcept nogil:
    # in (0, 1]
    return (<double>((_next(g) >> 11) + 1)) * (1.0 / 9007199254740992.0)


cdef inline uint64_t _below(Rng *g, uint64_t n) noexcept nogil:
    cdef uint64_t x, limit
    if n <= 1:
        return 0
    limit = 0xFFFFFFFFFFFFFFFFULL - (0xFFFFFFFFFFFFFFFFULL % n)
    while True:
        x = _next(g)
        if x < limit:
            return x % n


cdef inline double _exponential(Rng *g) noexcept nogil:
    return -log(_uniform_pos(g))


cdef inline int _jump(Rng *g, double log_a, const double *cdf, int ncdf) noexcept nogil:
    cdef double u = _uniform_pos(g)
    cdef int j
    if log_a < 0.0:
        return 1 + <int>floor(log(u) / log_a)
    # u in (0, 1]; cdf[-1] == 1.0
    u = 1.0 - u
    j = 0
    while j < ncdf - 1 and u >= cdf[j]:
        j += 1
    return j + 1


cdef inline int _step(Rng *g, int N, int *d, int norm, int levels,
                      double log_a, const double *cdf, int ncdf) noexcept nogil:
    """Apply one jump in place; returns the new norm (-1 on level overflow)."""
    cdef int J = _jump(g, log_a, cdf, ncdf)
    cdef int i
    if J > levels:
        return -1
    for i in range(J - 1):
        d[i] = <int>((d[i] + _below(g, N)) % N)
    d[J - 1] = <int>((d[J - 1] + 1 + _below(g, N - 1)) % N)
    if J > norm:
        return J
    if J == norm:
        while norm > 0 and d[norm - 1] == 0:
            norm -= 1
    return norm


def stream_words(uint64_t seed, uint64_t replica, int count):
    """First ``count`` raw outputs of the replica stream (for cross-backend tests)."""
    cdef Rng g
    _seed(&g, seed, replica)
    out = np.empty(count, dtype=np.uint64)
    cdef uint64_t[::1] o = out
    cdef int i
    for i in range(count):
        o[i] = _next(&g)
    return out


def walk_discrete(int N, double log_a, const double[::1] cdf, int n_steps,
                  uint64_t seed, long r0, long r1, int levels):
    """Distances |xi_0|..|xi_n| for replicas r0..r1-1 (-1 marks level overflow)."""
    cdef long nrep = r1 - r0
    out = np.zeros((nrep, n_steps + 1), dtype=np.int32)
    cdef int32_t[:, ::1] o = out
    cdef int ncdf = cdf.shape[0]
    cdef const double *pc = &cdf[0] if ncdf > 0 else NULL
    cdef long k
    cdef int s, norm
    cdef Rng g
    cdef int *d
    with nogil:
        d = <int *>malloc(levels * sizeof(int))
        for k in range(nrep):
            _seed(&g, seed, <uint64_t>(r0 + k))
            for s in range(levels):
                d[s] = 0
            norm = 0
            for s in range(n_steps):
                norm = _step(&g, N, d, norm, levels, log_a, pc, ncdf)
                o[k, s + 1] = norm
                if norm < 0:
                    break
        free(d)
    return out


def walk_continuous_at(int N, double log_a, const double[::1] cdf, const double[::1] times,
                       uint64_t seed, long r0, long r1, int levels):
    """Distances at the sorted observation ``times`` under rate-1 holding times."""
    cdef long nrep = r1 - r0
    cdef int nt = times.shape[0]
    out = np.zeros((nrep, nt), dtype=np.int32)
    cdef int32_t[:, ::1] o = out
    cdef int ncdf = cdf.shape[0]
    cdef const double *pc = &cdf[0] if ncdf > 0 else NULL
    cdef long k
    cdef int s, norm, q
    cdef double clock
    cdef Rng g
    cdef int *d
    with nogil:
        d = <int *>malloc(levels * sizeof(int))
        for k in range(nrep):
            _seed(&g, seed, <uint64_t>(r0 + k))
            for s in range(levels):
                d[s] = 0
            norm = 0
            clock = 0.0
            q = 0
            while q < nt:
                clock += _exponential(&g)
                while q < nt and times[q] < clock:
                    o[k, q] = norm
                    q += 1
                if q >= nt:
                    break
                norm = _step(&g, N, d, norm, levels, log_a, pc, ncdf)
                if norm < 0:
                    while q < nt:
                        o[k, q] = -1
                        q += 1
        free(d)
    return out


def walk_return_times(int N, double log_a, const double[::1] cdf, double horizon,
                      uint64_t seed, long r0, long r1, int levels):
    """First return time to the origin (holding time included); inf if censored."""
    cdef long nrep = r1 - r0
    out = np.empty(nrep, dtype=np.float64)
    cdef double[::1] o = out
    cdef int ncdf = cdf.shape[0]
    cdef const double *pc = &cdf[0] if ncdf > 0 else NULL
    cdef long k
    cdef int s, norm
    cdef double clock
    cdef Rng g
    cdef int *d
    with nogil:
        d = <int *>malloc(levels * sizeof(int))
        for k in range(nrep):
            _seed(&g, seed, <uint64_t>(r0 + k))
            for s in range(levels):
                d[s] = 0
            norm = 0
            clock = 0.0
            o[k] = INFINITY
            while True:
                clock += _exponential(&g)
                if clock > horizon:
                    break
                norm = _step(&g, N, d, norm, levels, log_a, pc, ncdf)
                if norm == 0:
                    o[k] = clock
                    break
                if norm < 0:
                    break
        free(d)
    return out


def walk_last_exit(int N, double log_a, const double[::1] cdf, int R, double horizon,
                   uint64_t seed, long r0, long r1, int levels, int escape):
    """Last exit time from B_R before ``horizon``.

    A path stops early once its norm reaches ``escape``.  Returns (L, censored,
    late) where censored marks paths inside B_R at the horizon and late marks
    paths that re-entered B_R in the final tenth.
    """
    cdef long nrep = r1 - r0
    L_out = np.zeros(nrep, dtype=np.float64)
    c_out = np.zeros(nrep, dtype=np.uint8)
    late_out = np.zeros(nrep, dtype=np.uint8)
    cdef double[::1] Lo = L_out
    cdef uint8_t[::1] co = c_out
    cdef uint8_t[::1] lo = late_out
    cdef int ncdf = cdf.shape[0]
    cdef const double *pc = &cdf[0] if ncdf > 0 else NULL
    cdef long k
    cdef int s, norm, prev
    cdef double clock, last, late_from = 0.9 * horizon
    cdef Rng g
    cdef int *d
    with nogil:
        d = <int *>malloc(levels * sizeof(int))
        for k in range(nrep):
            _seed(&g, seed, <uint64_t>(r0 + k))
            for s in range(levels):
                d[s] = 0
            norm = 0
            clock = 0.0
            last = 0.0
            while True:
                clock += _exponential(&g)
                if clock > horizon:
                    if norm <= R:
                        co[k] = 1
                        last = horizon
                    break
                prev = norm
                norm = _step(&g, N, d, norm, levels, log_a, pc, ncdf)
                if norm < 0:
                    co[k] = 1
                    last = horizon
                    break
                if prev <= R and norm > R:
                    last = clock
                elif prev > R and norm <= R and clock >= late_from:
                    lo[k] = 1
                if norm >= escape:
                    break
            Lo[k] = last
        free(d)
    return L_out, c_out, late_out


def walk_occupation(int N, double log_a, const double[::1] cdf, const double[::1] F,
                    int K, double t_end, uint64_t seed, long r0, long r1, int levels):
    """Integral of F(X(s)) over [0, t_end]; F is indexed by position inside B_K."""
    cdef long nrep = r1 - r0
    out = np.zeros(nrep, dtype=np.float64)
    cdef double[::1] o = out
    cdef int ncdf = cdf.shape[0]
    cdef const double *pc = &cdf[0] if ncdf > 0 else NULL
    cdef long k, idx, w
    cdef int s, norm
    cdef double clock, hold, acc, fval
    cdef Rng g
    cdef int *d
    with nogil:
        d = <int *>malloc(levels * sizeof(int))
        for k in range(nrep):
            _seed(&g, seed, <uint64_t>(r0 + k))
            for s in range(levels):
                d[s] = 0
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
                hold = _exponential(&g)
                if clock + hold >= t_end:
                    acc += fval * (t_end - clock)
                    break
                acc += fval * hold
                clock += hold
                norm = _step(&g, N, d, norm, levels, log_a, pc, ncdf)
                if norm < 0:
                    break
            o[k] = acc
        free(d)
    return out


cdef double _lgs_series(double a, double x) noexcept nogil:
    # e^{-x} sum_n x^n / (a (a+1) ... (a+n))
    cdef double term = 1.0 / a, total = term, ap = a
    cdef int n
    for n in range(1, 100000):
        ap += 1.0
        term *= x / ap
        total += term
        if fabs(term) < fabs(total) * 1e-17:
            break
    return total * exp(-x)


cdef double _ugs_cf(double a, double x) noexcept nogil:
    # Gamma(a, x) e^{x} x^{-a} by modified Lentz
    cdef double tiny = 1e-300, b = x + 1.0 - a, c = 1.0 / tiny, dd = 1.0 / b
    cdef double f = dd, an, delta
    cdef int i
    for i in range(1, 100000):
        an = -i * (i - a)
        b += 2.0
        dd = an * dd + b
        if fabs(dd) < tiny:
            dd = tiny
        c = b + an / c
        if fabs(c) < tiny:
            c = tiny
        dd = 1.0 / dd
        delta = dd * c
        f *= delta
        if fabs(delta - 1.0) < 1e-16:
            break
    return f


def lower_gamma_scaled(double a, const double[::1] x):
    """gamma_low(a, x) / x**a elementwise, stable for all x >= 0."""
    cdef Py_ssize_t n = x.shape[0], i
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    cdef double xi, lg = lgamma(a)
    with nogil:
        for i in range(n):
            xi = x[i]
            if xi <= 0.0:
                o[i] = 1.0 / a
            elif xi < a + 1.0:
                o[i] = _lgs_series(a, xi)
            else:
                o[i] = exp(lg - a * log(xi)) - exp(-xi) * _ugs_cf(a, xi)
    return out


def renewal_solve(const double[::1] p, double dt):
    """Forward substitution for the trapezoidal renewal equation with rho_0 = 1."""
    cdef Py_ssize_t M = p.shape[0] - 1, i, k
    rho = np.empty(M + 1, dtype=np.float64)
    cdef double[::1] r = rho
    cdef double s
    r[0] = 1.0
    with nogil:
        for i in range(1, M + 1):
            s = 0.0
            for k in range(1, i):
                s += p[k] * r[i - k]
            r[i] = (1.0 - p[i] - 0.5 * dt * p[i] * r[0] - dt * s) / (0.5 * dt * p[0])
    return rho
