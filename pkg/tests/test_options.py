import random

import pytest

from symopt.envs import OfficeWorld
from symopt.options import (GlobalOption, OptionSet, SnapshotError, SymbolicOption, TabularPolicy,
                            execute_option, initiation, intrinsic_reward, load_options, q_update,
                            save_options, termination)
from symopt.symbolic import Vocabulary


def ident(s):
    return s


def opt(pre_pos=(), pre_neg=(), eff_pos=(), eff_neg=()):
    return SymbolicOption(0, pre_pos, pre_neg, eff_pos, eff_neg)


def test_initiation_examples():
    assert initiation(opt({"at_ml", "key"}), frozenset({"at_ml", "key"}), ident)
    assert initiation(opt(), frozenset({"anything"}), ident)
    assert not initiation(opt({"key"}, {"at_ml"}), frozenset({"at_ml", "key"}), ident)
    assert initiation(GlobalOption(), frozenset(), ident)


def test_termination_examples():
    o = opt(eff_pos={"at_rl"}, eff_neg={"at_ml"})
    assert termination(o, frozenset({"at_rl", "key"}), ident)
    assert not termination(o, frozenset({"at_ml", "at_rl"}), ident)
    assert termination(opt(), frozenset({"x"}), ident)


def test_intrinsic_reward_branches():
    o = opt(eff_pos={"done"})
    assert intrinsic_reward(o, frozenset({"done"}), 0.0, 100.0, ident) == 100.0
    assert intrinsic_reward(o, frozenset(), 0.0, 100.0, ident) == 0.0
    assert intrinsic_reward(o, frozenset(), 100.0, 100.0, ident) == 100.0


def test_q_update_arithmetic():
    p = TabularPolicy(alpha=1.0, gamma=0.9)
    q_update(p, "s", 0, 100.0, "t")
    assert p.q["s"][0] == 100.0
    # fixed point: q already equals r + gamma * max q(s')
    p.q["t"] = [10.0, 0.0, 0.0, 0.0]
    p.q["u"] = [5.0 + 0.9 * 10.0, 0.0, 0.0, 0.0]
    before = list(p.q["u"])
    q_update(p, "u", 0, 5.0, "t")
    assert p.q["u"] == before


def test_q_update_terminal_ignores_next():
    p = TabularPolicy(alpha=0.5, gamma=0.9)
    p.q["t"] = [1000.0] * 4
    q_update(p, "s", 1, 10.0, "t", terminal=True)
    assert p.q["s"][1] == 5.0


def test_q_values_stay_bounded():
    rng = random.Random(0)
    p = TabularPolicy(alpha=0.1, gamma=0.9)
    for _ in range(10_000):
        q_update(p, rng.randrange(20), rng.randrange(4), rng.uniform(-100, 100), rng.randrange(20))
    # |q| <= max|r| / (1 - gamma) by induction from zero initialisation
    assert all(abs(v) <= 1000.0 for row in p.q.values() for v in row)


def test_epsilon_schedule():
    p = TabularPolicy()
    assert p.epsilon == 1.0
    p.steps = 25_000
    assert p.epsilon == pytest.approx(0.525)
    p.steps = 10**6
    assert p.epsilon == pytest.approx(0.05)


def test_global_option_stops_on_symbolic_change():
    env = OfficeWorld(task=1)
    state = env.reset(seed=0)
    out, after = execute_option(env, state, GlobalOption(), 500, random.Random(0))
    assert out.success and out.pair.before != out.pair.after
    assert env.map_symbolic(after) == out.pair.after
    assert 1 <= out.steps_used <= 500


def test_option_already_done_takes_zero_steps():
    env = OfficeWorld(task=1)
    state = env.reset(seed=0)._replace(pos=(0, 0))
    out, after = execute_option(env, state, opt(), 500, random.Random(0))
    assert out.steps_used == 0 and out.external_reward == 0.0 and out.success and after == state


def test_failed_initiation_returns_no_pair():
    env = OfficeWorld(task=1)
    state = env.reset(seed=0)._replace(pos=(0, 0))
    out, after = execute_option(env, state, opt({"has_coffee"}), 500, random.Random(0))
    assert out.pair is None and not out.success and after == state


def test_deliver_coffee_option_earns_100():
    env = OfficeWorld(task=1)
    ox, oy = env.grid.cells("office")[0]
    state = env.reset(seed=0)._replace(pos=(ox - 1, oy), has_coffee=True)
    deliver = opt({"has_coffee"}, (), {"at_office", "delivered_coffee"}, {"has_coffee"})
    out, after = execute_option(env, state, deliver, 500, random.Random(1))
    assert out.success and out.external_reward == 100.0 and after.terminal


def test_execute_respects_step_cap_and_touches_only_its_option():
    env = OfficeWorld(task=1)
    target = opt(eff_pos={"delivered_mail"})
    other = SymbolicOption(1, (), (), {"has_mail"}, ())
    other.policy.q["x"] = [1.0, 2.0, 3.0, 4.0]
    snapshot = (dict(other.policy.q), other.policy.steps, other.trained_steps)
    out, _ = execute_option(env, env.reset(seed=2), target, 7, random.Random(0))
    assert out.steps_used <= 7
    assert target.policy.steps == out.steps_used
    assert (dict(other.policy.q), other.policy.steps, other.trained_steps) == snapshot


def test_pre_override_is_used():
    env = OfficeWorld(task=1)
    state = env.reset(seed=0)._replace(pos=(0, 0))
    o = opt(eff_pos={"has_coffee"})
    out, _ = execute_option(env, state, o, 5, random.Random(0), pre=(frozenset({"has_mail"}), frozenset()))
    assert out.pair is None


def test_option_set_merges_by_signature():
    s = OptionSet()
    a = s.add({"x"}, (), {"y"}, ())
    assert s.find({"y"}, ()) is a
    with pytest.raises(ValueError):
        s.add({"z"}, (), {"y"}, ())
    b = SymbolicOption(5, {"z"}, (), {"y"}, ())
    assert s.adopt(b) is a and a.pre_pos == {"x", "z"}
    c = s.adopt(SymbolicOption(9, (), (), {"w"}, ()))
    assert c.id == 1 and s[1] is c and s[-1] is s.global_option


def test_snapshot_round_trip_reproduces_greedy_policy(tmp_path):
    env = OfficeWorld(task=1)
    vocab = env.vocab
    o = SymbolicOption(0, (), (), {"has_coffee"}, ())
    rng = random.Random(0)
    for k in range(20):
        execute_option(env, env.reset(seed=k), o, 300, rng)
    path = tmp_path / "snap.txt"
    save_options(path, [o], vocab)
    (back,) = load_options(path, vocab)
    assert back.signature == o.signature and back.trained_steps == o.trained_steps
    assert back.policy.q == o.policy.q
    for key in o.policy.q:
        assert back.policy.greedy(key, random.Random(1)) == o.policy.greedy(key, random.Random(1))


def test_snapshot_errors(tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("not a snapshot\n{}")
    with pytest.raises(SnapshotError):
        load_options(bad, Vocabulary(["a"]))
    good = tmp_path / "good.txt"
    save_options(good, [SymbolicOption(0, (), (), {"a"}, ())], Vocabulary(["a"]))
    with pytest.raises(SnapshotError):
        load_options(good, Vocabulary(["b"]))
