import math

import numpy as np
import pytest
from scipy import integrate

from hrwalk import kernel as kn
from hrwalk import potential as pot
from hrwalk import sequences as seqs


def geometric_log_h(N, c, jmax):
    """log h_j with h_j = N/(N-1) r_j + sum_{i>j} r_i straight from the jump law."""
    a = c / N
    j = np.arange(1, jmax + 1, dtype=float)
    # r_j = (1-a) a^(j-1), tail_j = a^j
    return (j - 1) * math.log(a) + math.log(N / (N - 1) * (1 - a) + a)


@pytest.mark.parametrize("N, c, zeta", [(4, 2.0, 1.0), (4, 3.0, 1.5), (16, 2.0, 1.0), (3, 2.5, 2.0)])
def test_green_power_geometric_direct(N, c, zeta):
    tb = kn.build_tables(kn.geometric(N, c))
    v = pot.green_power(tb, zeta)
    j = np.arange(1, 3001)
    terms = np.exp(math.log(N - 1) - j * math.log(N) - zeta * geometric_log_h(N, c, 3000))
    gamma = math.log(c) / math.log(N / c)
    if zeta < gamma + 1:
        assert v.finite
        assert v.value == pytest.approx(math.fsum(terms.tolist()), rel=1e-12)
        assert v.truncation_error <= 1e-15 * v.value
    else:
        assert v.divergent


def test_green_power_boundary_cases():
    # N=4, c=2: gamma = 1 exactly, G^2 sits on the boundary with constant terms
    assert pot.green_power(kn.build_tables(kn.geometric(4, 2.0)), 2.0).divergent
    # j^beta, mu = 1: G diverges iff sum d^-1 diverges iff beta <= 1
    assert pot.green_power(kn.build_tables(kn.jbeta(2, 1.0, 0.5)), 1.0).divergent
    v = pot.green_power(kn.build_tables(kn.jbeta(4, 1.0, 1.5)), 1.0)
    assert v.finite and v.value > 0


def test_explicit_walk_green_diverges():
    assert pot.green_power(kn.build_tables(kn.explicit(2, [0.5, 0.5])), 1.0).divergent


@pytest.mark.parametrize("N, c", [(2, 0.5), (2, 1.0), (4, 2.0), (16, 3.0), (4, 3.0)])
def test_degree_geometric(N, c):
    rep = pot.degree_classify(kn.geometric(N, c))
    assert rep.gamma == pytest.approx(math.log(c) / math.log(N / c), abs=1e-12)
    assert rep.decoration == "minus"


def test_degree_summability_matches_closed_form():
    for spec in (kn.geometric(4, 3.0), kn.WalkSpec(8, kn.MuC(2.0, seqs.Geometric(1.5)))):
        assert pot.degree_by_summability(spec) == pytest.approx(pot.degree_classify(spec).gamma, abs=1e-9)


def test_degree_periodic_bounds():
    rep = pot.degree_classify(kn.WalkSpec(8, kn.MuC(1.0, seqs.PeriodicGeometric(1.5, (1.0, 2.0)))))
    assert rep.decoration == "undetermined"
    assert rep.lower <= rep.gamma <= rep.upper


def test_degree_explicit_unsupported():
    with pytest.raises(pot.UnsupportedSpecError):
        pot.degree_classify(kn.explicit(2, [1.0]))


@pytest.mark.parametrize("zeta, t", [(0.5, 7.0), (1.0, 3.0), (2.0, 12.0)])
def test_incomplete_against_quadrature(zeta, t):
    tb = kn.build_tables(kn.geometric(2, 1.0))
    f = lambda s: s ** (zeta - 1) * kn.pt(tb, s, 0)
    ref = integrate.quad(f, 0, t, limit=400, epsabs=1e-13, epsrel=1e-12)[0] / math.gamma(zeta)
    assert pot.g_t_zeta(tb, zeta, t).value == pytest.approx(ref, rel=1e-9)


def test_incomplete_square_against_double_integral():
    tb = kn.build_tables(kn.geometric(2, 1.0))
    t = 2.0
    ref = integrate.dblquad(lambda u, s: kn.pt(tb, s + u, 0), 0, t, 0, t, epsabs=1e-12)[0]
    assert pot.incomplete_powers(tb, 2, t).value == pytest.approx(ref, rel=1e-9)
    assert pot.incomplete_powers(tb, 1, t).value == pytest.approx(pot.g_t_zeta(tb, 1.0, t).value, rel=1e-13)


def test_incomplete_increasing_in_t():
    tb = kn.build_tables(kn.jbeta(2, 1.0, 0.5))
    vals = [pot.g_t_zeta(tb, 1.0, t).value for t in (10, 100, 1e3, 1e4)]
    assert all(b > a for a, b in zip(vals, vals[1:]))


def test_g2g_transient_bounded_by_t2_green():
    tb = kn.build_tables(kn.geometric(4, 2.0))
    t = 50.0
    v = pot.g2g(tb, t)
    assert v.finite and v.value < t * t * pot.green_power(tb, 1.0).value
    assert pot.g2g(kn.build_tables(kn.geometric(2, 1.0)), t).divergent


def test_benchmark_requirements():
    with pytest.raises(pot.UnsupportedSpecError):
        pot.asymptotic_benchmark(kn.build_tables(kn.jbeta(4, 1.0, 1.5)), 1.0, 1e4)
    with pytest.raises(pot.UnsupportedSpecError):
        pot.asymptotic_benchmark(kn.build_tables(kn.jbeta(2, 1.0, 0.5)), 2.0, 1e4)


def test_last_exit_closed_form_and_bound():
    tb = kn.build_tables(kn.WalkSpec(8, kn.MuC(1.0, seqs.Geometric(2.0))))
    le = pot.last_exit_integral(tb, 1.0, 2)
    assert le.closed_form == pytest.approx(le.series.value, rel=1e-12)
    b0 = pot.last_exit_moment_bound(tb, 0.25, 0)
    b1 = pot.last_exit_moment_bound(tb, 0.25, 1)
    assert 0 < b0 < b1 < math.inf
    # gamma = 1/2 here, so order 1/2 sits on the divergent boundary
    assert pot.last_exit_moment_bound(tb, 0.5, 0) == math.inf


def test_return_tail_solver():
    tb = kn.build_tables(kn.geometric(2, 1.0))
    tail = pot.return_tail_solve(tb, 20.0, 2000)
    assert tail.residual < 1e-10
    assert tail.rho[0] == 1.0 and np.all(np.diff(tail.rho) <= 1e-12)
    surv = pot.survival_with_holding(tail)
    assert surv[0] == pytest.approx(1.0) and np.all(surv <= 1.0 + 1e-12)
    with pytest.raises(pot.SolverError):
        pot.return_tail_solve(tb, 20.0, 200, tol=1e-30)


def test_return_moment_recurrent_diverges():
    tb = kn.build_tables(kn.geometric(2, 1.0))
    tail = pot.return_tail_solve(tb, 100.0, 10_000)
    assert pot.return_moment(tail, 0.5).divergent


def test_normings_and_covariance():
    t = 1e6
    assert pot.norming(0.5, 2, t) == pytest.approx(math.sqrt(t * math.log(math.log(t))))
    assert pot.norming(0.2, 1, t) == pytest.approx(math.sqrt(t) * math.log(t) ** 0.4)
    assert pot.norming(2.0, 1, t) == pytest.approx(math.sqrt(t))
    N, beta, D = 2, 2.0, 0.5
    z2 = math.pi**2 / 6
    assert pot.covariance_kernel_jbeta(N, beta, D, 0) == pytest.approx(2 * N / D * (N - 1) * z2)
    assert pot.covariance_kernel_jbeta(N, beta, D, 1) == pytest.approx(2 * N / D * (z2 - 1 - 1))
    with pytest.raises(pot.UnsupportedSpecError):
        pot.covariance_kernel_jbeta(N, 1.0, D, 1)


def test_green_power_half_order_closed_form():
    # h_j = 3 / 2^j, so the sum is geometric in 2^(-j/2)
    tb = kn.build_tables(kn.geometric(2, 1.0))
    ref = 3**-0.5 * 2**-0.5 / (1 - 2**-0.5)
    assert pot.green_power(tb, 0.5).value == pytest.approx(ref, rel=1e-13)


def test_green_power_increasing_in_order():
    tb = kn.build_tables(kn.geometric(4, 2.0))
    vals = [pot.green_power(tb, z).value for z in (0.25, 0.5, 0.75, 1.0, 1.25)]
    assert all(b > a for a, b in zip(vals, vals[1:]))


@pytest.mark.parametrize("spec, gamma", [
    (kn.WalkSpec(2, kn.MuC(2.0, seqs.Constant())), 1.0),
    (kn.jbeta(2, 1.0, 0.5), 0.0),
    (kn.WalkSpec(2, kn.MuC(0.5, seqs.Constant())), -0.5),
])
def test_degree_constant_families(spec, gamma):
    assert pot.degree_classify(spec).gamma == pytest.approx(gamma, abs=1e-9)


def test_incomplete_long_horizon_quadrature():
    tb = kn.build_tables(kn.geometric(2, 1.0))
    ref = integrate.quad(lambda s: kn.pt(tb, s, 0), 0, 1e3, limit=2000, points=[1, 10, 100],
                         epsabs=1e-14, epsrel=1e-13)[0]
    assert pot.g_t_zeta(tb, 1.0, 1e3).value == pytest.approx(ref, rel=1e-8)
    ref2 = integrate.dblquad(lambda u, s: kn.pt(tb, s + u, 0), 0, 100, 0, 100,
                             epsabs=1e-10, epsrel=1e-10)[0]
    assert pot.incomplete_powers(tb, 2, 100.0).value == pytest.approx(ref2, rel=1e-7)


def test_incomplete_small_time():
    tb = kn.build_tables(kn.geometric(2, 1.0))
    t = 1e-5
    assert pot.g_t_zeta(tb, 1.0, t).value / t == pytest.approx(1.0, abs=1e-5)
    assert pot.incomplete_powers(tb, 2, t).value / t**2 == pytest.approx(1.0, abs=1e-4)


def test_incomplete_logarithmic_growth():
    # gamma = 0: equal increments per decade
    tb = kn.build_tables(kn.geometric(2, 1.0))
    vals = [pot.g_t_zeta(tb, 1.0, 10.0**k).value for k in range(2, 8)]
    inc = np.diff(vals)
    assert np.max(np.abs(inc / inc[-1] - 1.0)) < 0.15


def test_incomplete_square_sandwich():
    tb = kn.build_tables(kn.geometric(2, 1.0))

    def gap(t):
        lo = pot.g_t_zeta(tb, 2.0, t).value
        sq = pot.incomplete_powers(tb, 2, t).value
        assert lo <= sq
        return sq - lo

    C = 1.01 * gap(10.0) / 10.0
    for t in (10.0, 100.0, 1000.0):
        assert gap(t) <= C * t


def test_g2g_growth():
    tb = kn.build_tables(kn.geometric(4, 2.0))
    assert pot.g2g(tb, 1e-6).value < 1e-10
    vals = [pot.g2g(tb, t).value for t in (10, 100, 1e3, 1e4, 1e6)]
    assert all(b > a for a, b in zip(vals, vals[1:]))


def test_last_exit_integral_grows_with_radius():
    tb = kn.build_tables(kn.geometric(4, 2.0))
    vals = [pot.last_exit_integral(tb, 1.0, R).series.value for R in range(6)]
    assert all(b > a for a, b in zip(vals, vals[1:]))


def test_return_tail_slowly_varying():
    tb = kn.build_tables(kn.geometric(2, 1.0))
    tail = pot.return_tail_solve(tb, 1e4, 40_000)
    g, r = tail.grid, tail.rho
    i1, i2 = np.searchsorted(g, [1e2, 1e4])
    slope = np.polyfit(np.log(g[i1:i2 + 1]), np.log(r[i1:i2 + 1]), 1)[0]
    assert -0.15 < slope < 0.0


def test_return_moment_threshold():
    tb = kn.build_tables(kn.WalkSpec(2, kn.MuC(0.5, seqs.Constant())))
    tail = pot.return_tail_solve(tb, 1e3, 20_000)
    assert not pot.return_moment(tail, 0.25).divergent
    assert pot.return_moment(tail, 0.75).divergent


def test_return_moment_synthetic_tail():
    g = np.linspace(0.0, 2000.0, 200_001)
    tail = pot.ReturnTail(g, (1.0 + g) ** -2.0, 0.0)
    est = pot.return_moment(tail, 1.0)
    assert est.value == pytest.approx(1.0, abs=1e-3)
    assert est.tail_exponent == pytest.approx(-2.0, abs=0.01)


def test_norming_special_points():
    assert pot.norming(1.0, 1, math.exp(math.e)) == pytest.approx(math.exp(math.e / 2))
    assert pot.norming(0.0, 1, 100.0) == pytest.approx(math.sqrt(100 * math.log(100)))


def test_covariance_shape():
    # the (delta - 1) term makes distance 1 negative for N=2; decay starts at 3
    vals = [pot.covariance_kernel_jbeta(2, 2.0, 0.5, d) for d in range(201)]
    assert vals[0] == max(vals) and vals[1] < 0
    assert all(b < a for a, b in zip(vals[3:], vals[4:]))
    assert 0 < vals[-1] < 0.05
