import numpy as np
import pytest
from hypothesis import given, strategies as st

from hrwalk.group import (
    Ball, EnumerationCapError, GroupElement, OrderMismatchError, distance, enumerate_ball,
    sample_uniform_sphere, sphere_size,
)


def elements(N, max_len=6):
    return st.lists(st.integers(0, N - 1), max_size=max_len).map(lambda d: GroupElement(N, tuple(d)))


@pytest.mark.parametrize("x, y, expected", [((1, 0, 1), (1, 0, 0), 3), ((), (), 0), ((1,), (), 1)])
def test_distance_examples(x, y, expected):
    assert distance(GroupElement(2, x), GroupElement(2, y)) == expected


@given(st.data())
def test_strong_triangle_inequality(data):
    N = data.draw(st.integers(2, 5))
    x, y, z = (data.draw(elements(N)) for _ in range(3))
    assert distance(x, y) <= max(distance(x, z), distance(z, y))
    assert distance(x, y) == distance(y, x)
    assert (distance(x, y) == 0) == (x == y)


@given(st.data())
def test_translation_invariance_and_inverse(data):
    N = data.draw(st.integers(2, 5))
    x, y, z = (data.draw(elements(N)) for _ in range(3))
    assert distance(x + z, y + z) == distance(x, y)
    assert (x - y) + y == x
    assert (x - x) == GroupElement.origin(N)
    assert distance(x, y) == (x - y).norm


def test_canonical_form_and_serialization():
    x = GroupElement(3, (2, 1, 0, 0))
    assert x.digits == (2, 1)
    assert GroupElement.parse(3, x.serialize()) == x
    assert GroupElement.parse(3, "") == GroupElement.origin(3)


def test_invalid_digits_and_order_mismatch():
    with pytest.raises(ValueError):
        GroupElement(2, (2,))
    with pytest.raises(OrderMismatchError):
        distance(GroupElement(2, (1,)), GroupElement(3, (1,)))


def test_sphere_sizes_partition_ball():
    for N in (2, 3, 5):
        for R in range(0, 5):
            assert 1 + sum(sphere_size(N, j) for j in range(1, R + 1)) == len(Ball(N, R)) == N**R


def test_enumerate_ball_order_and_cap():
    pts = enumerate_ball(3, 2)
    assert len(pts) == 9 and pts[0] == GroupElement.origin(3)
    assert [p.index() for p in pts] == list(range(9))
    with pytest.raises(EnumerationCapError):
        enumerate_ball(2, 21, cap=10**6)


def test_enum_cap_env(monkeypatch):
    monkeypatch.setenv("HRW_ENUM_CAP", "4")
    with pytest.raises(EnumerationCapError):
        enumerate_ball(2, 3)


def test_uniform_sphere_frequencies():
    rng = np.random.default_rng(11)
    N, j, n = 3, 2, 60000
    counts = {}
    for _ in range(n):
        x = sample_uniform_sphere(N, j, rng)
        assert x.norm == j
        counts[x] = counts.get(x, 0) + 1
    assert len(counts) == sphere_size(N, j)
    p = 1 / sphere_size(N, j)
    sd = np.sqrt(n * p * (1 - p))
    assert all(abs(c - n * p) < 4 * sd for c in counts.values())
