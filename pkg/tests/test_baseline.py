import random

import pytest

from symopt.baseline import MetaPolicy, meta_select, meta_update


def test_all_zero_greedy_picks_goal_0():
    m = MetaPolicy(4)
    assert meta_select(m, "s", random.Random(0), greedy=True) == 0


def test_argmax_with_epsilon_zero():
    m = MetaPolicy(4, eps_start=0.0, eps_end=0.0)
    m.q[("s", 2)] = 10.0
    assert meta_select(m, "s", random.Random(0)) == 2
    assert meta_select(m, "s", random.Random(0), allowed=[0, 1, 3]) == 0


def test_epsilon_half_frequencies():
    m = MetaPolicy(4, eps_start=0.5, eps_end=0.5)
    m.q[("s", 3)] = 1.0
    rng = random.Random(0)
    n = 10_000
    counts = [0] * 4
    for _ in range(n):
        counts[meta_select(m, "s", rng)] += 1
    # greedy goal: 0.5 + 0.5/4; others 0.5/4
    want = [0.125, 0.125, 0.125, 0.625]
    for c, w in zip(counts, want):
        assert abs(c / n - w) <= 0.03


def test_update_examples():
    m = MetaPolicy(2, alpha=1.0, gamma=0.9)
    meta_update(m, "s", 0, 100.0, "t")
    assert m.value("s", 0) == 100.0
    m.q[("t", 1)] = 10.0
    m.q[("u", 0)] = 5.0 + 0.9 * 10.0
    meta_update(m, "u", 0, 5.0, "t")
    assert m.value("u", 0) == 14.0
    meta_update(m, "v", 1, 3.0, "t", terminal=True)
    assert m.value("v", 1) == 3.0


def test_update_respects_next_goals():
    m = MetaPolicy(2, alpha=1.0, gamma=0.5)
    m.q[("t", 0)] = 100.0
    meta_update(m, "s", 0, 0.0, "t", next_goals=[1])
    assert m.value("s", 0) == 0.0


def test_meta_values_bounded():
    rng = random.Random(1)
    m = MetaPolicy(3, alpha=0.1, gamma=0.9)
    for _ in range(10_000):
        meta_update(m, rng.randrange(10), rng.randrange(3), rng.uniform(-100, 100), rng.randrange(10))
    assert all(abs(v) <= 1000.0 for v in m.q.values())


def test_validation():
    with pytest.raises(ValueError):
        MetaPolicy(0)
    with pytest.raises(ValueError):
        MetaPolicy(2, alpha=0.0)
    with pytest.raises(ValueError):
        meta_select(MetaPolicy(2), "s", random.Random(0), allowed=[])
