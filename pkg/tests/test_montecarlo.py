import json
import math

import numpy as np
import pytest
from scipy import stats

from hrwalk import distance_chain as dc
from hrwalk import kernel as kn
from hrwalk import montecarlo as mc
from hrwalk import potential as pot
from hrwalk import sequences as seqs
from hrwalk.group import GroupElement


@pytest.fixture(scope="module")
def tb():
    return kn.build_tables(kn.geometric(2, 1.0))


def binomial_z(k, n, p):
    # one-path resolution floor keeps tiny probabilities from producing huge z
    return (k - n * p) / math.sqrt(n * max(p, 1.0 / n) * (1 - p))


def test_config_validation():
    with pytest.raises(ValueError):
        mc.SimConfig(1, 0, 10)
    with pytest.raises(ValueError):
        mc.SimConfig(1, 1, 0)
    with pytest.raises(ValueError):
        mc.SimConfig(1, 1, 1, scheme="other")
    with pytest.raises(ValueError):
        mc.SimConfig(-1, 1, 1)


def test_one_step_jump_frequencies(tb):
    res = mc.simulate(tb, mc.SimConfig(21, 10**6, 1))
    d = res.distances[:, 1]
    for j in range(1, 12):
        assert abs(binomial_z((d == j).sum(), d.size, 0.5**j)) < 3.0


def test_table_sampler_frequencies():
    tb = kn.build_tables(kn.jbeta(2, 1.0, 0.5))
    js = mc.jump_sampler(tb)
    assert js.log_a == 0.0 and js.cdf[-1] == 1.0
    res = mc.simulate(tb, mc.SimConfig(8, 400_000, 1))
    d = res.distances[:, 1]
    r = tb.r_at(np.arange(1, 9))
    for j in range(1, 9):
        assert abs(binomial_z((d == j).sum(), d.size, r[j - 1])) < 3.5


def test_distance_process_matches_chain(tb):
    res = mc.simulate(tb, mc.SimConfig(5, 20_000, 30))
    counts = mc.one_step_frequencies(res.distances, 64)
    for i in range(1, 5):
        row = counts[i, :8]
        n = counts[i].sum()
        p = np.array([dc.p_ij(tb, i, j) for j in range(8)])
        keep = p * n > 5
        obs = np.append(row[keep], n - row[keep].sum())
        exp = np.append(p[keep] * n, n * (1 - p[keep].sum()))
        assert stats.chisquare(obs, exp).pvalue > 1e-4


def test_return_probability_matches_kernel(tb):
    res = mc.simulate(tb, mc.SimConfig(2, 10**6, 10))
    for n in (2, 5, 10):
        k = (res.distances[:, n] == 0).sum()
        assert abs(binomial_z(k, 10**6, kn.pn(tb, n, 0))) < 3.0


def test_continuous_marginal_matches_pt(tb):
    times = np.array([0.5, 2.0, 10.0])
    res = mc.simulate(tb, mc.SimConfig(4, 200_000, 10.0, scheme="continuous"), times)
    for q, t in enumerate(times):
        k = (res.distances[:, q] == 0).sum()
        assert abs(binomial_z(k, 200_000, kn.pt(tb, t, 0))) < 3.0


def test_determinism_across_threads(tb):
    a = mc.simulate(tb, mc.SimConfig(9, 9000, 20, threads=1, chunk=1000)).distances
    b = mc.simulate(tb, mc.SimConfig(9, 9000, 20, threads=4, chunk=1000)).distances
    c = mc.simulate(tb, mc.SimConfig(9, 9000, 20, threads=3, chunk=777)).distances
    np.testing.assert_array_equal(a, b)
    np.testing.assert_array_equal(a, c)
    assert list(mc.iter_paths(kn.geometric(2, 1.0), mc.SimConfig(9, 3, 20)))[2].replica == 2


def test_return_time_censoring():
    rec = kn.build_tables(kn.geometric(2, 1.0))
    fr = [mc.estimate_return_time(rec, mc.SimConfig(1, 20_000, T, "continuous")).censored_fraction
          for T in (10.0, 1000.0)]
    assert fr[1] < fr[0]
    tr = kn.build_tables(kn.geometric(4, 2.0))
    a = mc.estimate_return_time(tr, mc.SimConfig(1, 20_000, 100.0, "continuous"))
    b = mc.estimate_return_time(tr, mc.SimConfig(2, 20_000, 1000.0, "continuous"))
    se = math.sqrt(2 * a.censored_fraction * (1 - a.censored_fraction) / 20_000)
    assert a.censored_fraction > 0.1
    assert abs(a.censored_fraction - b.censored_fraction) < 4 * se + 0.01
    with pytest.raises(ValueError):
        mc.estimate_return_time(rec, mc.SimConfig(1, 10, 10.0))


def test_last_exit_refuses_recurrent(tb):
    with pytest.raises(mc.RefusedError):
        mc.estimate_last_exit(tb, mc.SimConfig(1, 10, 10.0, "continuous"), 1)


def test_last_exit_moment_stable_across_horizons():
    tr = kn.build_tables(kn.geometric(4, 2.0))
    m = []
    for T in (1e3, 1e4):
        rep = mc.estimate_last_exit(tr, mc.SimConfig(3, 4000, T, "continuous"), 1)
        m.append(rep.moment(0.5))
    assert abs(m[0][0] - m[1][0]) < 2 * (m[0][1] + m[1][1])


def test_last_exit_level_scaling():
    # mode rates are geometric with ratio a, so E L^zeta grows like a^-zeta per level
    N, mu, eta = 16, 2.0, 2.0
    tb = kn.build_tables(kn.WalkSpec(N, kn.MuC(mu, seqs.Geometric(eta))))
    a = eta * N ** (-1 / mu)
    m = [mc.estimate_last_exit(tb, mc.SimConfig(6, 40_000, 1e5, "continuous"), R).moment(1.0)[0]
         for R in (1, 2)]
    assert m[1] / m[0] == pytest.approx(1 / a, rel=0.15)


def test_reentry_bound_decreases():
    tb = kn.build_tables(kn.geometric(4, 2.0))
    b = [mc.reentry_bound(tb, 1, m) for m in range(2, 8)]
    assert all(0 < y < x < 1 for x, y in zip(b, b[1:]))
    esc, bound = mc.escape_level(tb, 1, 1e-3, 128)
    assert bound <= 1e-3 < mc.reentry_bound(tb, 1, esc - 1)


def test_last_exit_sandwich_direction():
    tb = kn.build_tables(kn.geometric(4, 2.0))
    zeta, K = 0.5, 2
    bound = pot.last_exit_moment_bound(tb, zeta, K)
    for C in range(0, K + 1):
        rep = mc.estimate_last_exit(tb, mc.SimConfig(7, 4000, 1e4, "continuous"), C)
        assert rep.moment(zeta)[0] <= bound * 1.01
        assert rep.late_fraction < 0.01


def test_occupation_refusal_and_scaling():
    spec = kn.WalkSpec(2, kn.MuC(1.0, seqs.Constant(1.0)))
    o = GroupElement.origin(2)
    cfg = mc.SimConfig(3, 400, 1000.0, "continuous")
    a = mc.occupation_statistic(spec, {o: 1.0}, 1000.0, cfg)
    b = mc.occupation_statistic(spec, {o: 5.0}, 1000.0, cfg)
    np.testing.assert_allclose(a.samples, b.samples, rtol=1e-12)
    with pytest.raises(mc.RefusedError):
        mc.occupation_statistic(kn.geometric(4, 2.0), {o: 1.0}, 10.0, cfg)


def test_occupation_negative_control():
    spec = kn.WalkSpec(2, kn.MuC(1.0, seqs.Constant(1.0)))
    rep = mc.occupation_statistic(spec, {GroupElement.origin(2): 1.0}, 10.0,
                                  mc.SimConfig(3, 5000, 10.0, "continuous"))
    assert rep.ks > 0.1


def test_ks_statistic():
    x = stats.expon.rvs(size=10_000, random_state=np.random.default_rng(0))
    assert mc.ks_statistic(x, stats.expon.cdf) < 0.02
    assert mc.ks_statistic(np.full(100, 1.0), stats.expon.cdf) >= 0.5
    with pytest.raises(ValueError):
        mc.ks_statistic([1.0], stats.expon.cdf)


def test_stream_and_stats():
    s = mc.Stream(1, 2)
    v = [s.integers(3, 7) for _ in range(200)]
    assert min(v) >= 3 and max(v) <= 6
    assert 0 <= s.random() < 1 and s.exponential() > 0
    st = mc.EmpiricalStats.from_samples(np.arange(10.0), bins=5)
    assert st.count == 10 and st.variance >= 0 and st.histogram is not None
    with pytest.raises(ValueError):
        mc.EmpiricalStats.from_samples([])


def test_outputs(tmp_path, tb):
    spec = kn.geometric(2, 1.0)
    cfg = mc.SimConfig(42, 3, 10.0, "continuous")
    rep = mc.estimate_return_time(tb, cfg)
    path = tmp_path / "s.csv"
    mc.write_samples_csv(str(path), {"T": rep.samples})
    assert path.read_text().splitlines()[0] == "replica,T"
    js = json.loads(mc.summary_json(spec, cfg, censoredFraction=rep.censored_fraction))
    assert js["seed"] == 42 and js["specHash"] == spec.digest()
