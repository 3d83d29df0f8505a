import math
import os
import subprocess
import sys

import numpy as np
import pytest
from scipy.special import gammainc, gamma

from hrwalk import _core
from hrwalk._core import _fallback
from hrwalk.montecarlo import Stream

ext = pytest.importorskip("hrwalk._core._ext")


def test_backend_selected():
    assert _core.BACKEND == "cython"


def test_stream_words_identical():
    for seed, rep in [(0, 0), (1, 7), (2**64 - 1, 123456)]:
        np.testing.assert_array_equal(ext.stream_words(seed, rep, 64), _fallback.stream_words(seed, rep, 64))


def test_distinct_replicas_distinct_streams():
    a = ext.stream_words(5, 0, 8)
    b = ext.stream_words(5, 1, 8)
    assert not np.array_equal(a, b)


GEOM = (math.log(0.5), np.zeros(0))
TABLE = (0.0, np.array([0.5, 0.8, 0.95, 1.0]))


@pytest.mark.parametrize("law", [GEOM, TABLE])
def test_walks_identical_across_backends(law):
    log_a, cdf = law
    args = (3, log_a, cdf)
    np.testing.assert_array_equal(ext.walk_discrete(*args, 30, 9, 0, 40, 128),
                                  _fallback.walk_discrete(*args, 30, 9, 0, 40, 128))
    times = np.linspace(0, 20, 11)
    np.testing.assert_array_equal(ext.walk_continuous_at(*args, times, 9, 5, 25, 128),
                                  _fallback.walk_continuous_at(*args, times, 9, 5, 25, 128))
    np.testing.assert_array_equal(ext.walk_return_times(*args, 50.0, 9, 0, 30, 128),
                                  _fallback.walk_return_times(*args, 50.0, 9, 0, 30, 128))
    for a, b in zip(ext.walk_last_exit(*args, 1, 100.0, 9, 0, 30, 128, 6),
                    _fallback.walk_last_exit(*args, 1, 100.0, 9, 0, 30, 128, 6)):
        np.testing.assert_array_equal(a, b)
    F = np.ascontiguousarray(np.arange(9, dtype=float))
    np.testing.assert_array_equal(ext.walk_occupation(*args, F, 2, 30.0, 9, 0, 30, 128),
                                  _fallback.walk_occupation(*args, F, 2, 30.0, 9, 0, 30, 128))


def test_chunking_does_not_change_replicas():
    whole = ext.walk_discrete(2, math.log(0.5), np.zeros(0), 20, 4, 0, 50, 128)
    parts = np.vstack([ext.walk_discrete(2, math.log(0.5), np.zeros(0), 20, 4, r, r + 10, 128)
                       for r in range(0, 50, 10)])
    np.testing.assert_array_equal(whole, parts)


def test_level_overflow_flagged():
    out = ext.walk_discrete(2, 0.0, np.array([0.0, 0.0, 1.0]), 5, 1, 0, 3, 2)
    assert np.all(out[:, 1] == -1)


def test_step_consumes_stream_like_sphere_sampler():
    # one table step from the origin = jump draw, then a uniform sphere point drawn digit by digit
    from hrwalk.group import sample_uniform_sphere
    N, cdf = 5, np.array([0.2, 0.4, 0.7, 1.0])
    for rep in range(40):
        s = Stream(3, rep)
        u = 1.0 - s._g.uniform_pos()
        J = int(np.searchsorted(cdf[:-1], u, side="right")) + 1
        x = sample_uniform_sphere(N, J, s)
        assert ext.walk_discrete(N, 0.0, cdf, 1, 3, rep, rep + 1, 16)[0, 1] == x.norm


@pytest.mark.parametrize("a", [0.5, 1.0, 2.0, 3.0, 7.5])
def test_lower_gamma_against_scipy(a):
    x = np.array([0.0, 1e-3, 0.5, 1.0, 3.0, 8.0, 40.0, 700.0])
    ref = gammainc(a, x) * gamma(a) / np.where(x > 0, x, 1.0) ** a
    ref[0] = 1.0 / a
    for mod in (ext, _fallback):
        np.testing.assert_allclose(mod.lower_gamma_scaled(a, x), ref, rtol=1e-12)


def test_renewal_backends_agree():
    p = np.exp(-np.linspace(0, 5, 501))
    np.testing.assert_allclose(ext.renewal_solve(p, 0.01), _fallback.renewal_solve(p, 0.01), rtol=1e-10)


def test_pure_python_switch():
    env = dict(os.environ, HRW_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import hrwalk; print(hrwalk.BACKEND)"],
                         env=env, capture_output=True, text=True)
    assert out.stdout.strip() == "python"
