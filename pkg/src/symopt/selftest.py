"""Oracle suites: the library's semantics, planner and PDDL checks against
independent reference implementations. Used by ``symopt selftest``."""

from __future__ import annotations

import os
import random
import time
from typing import Callable, NamedTuple

from .htn import Task, task_satisfied
from .options import SymbolicOption, initiation, termination
from .pddl import parse_domain, parse_problem, serialize_domain, serialize_problem
from .planner import ExternalPlanner, PlanningProblem, oracle_solve, solve
from .symbolic import (ActionModel, PreconditionError, StatePair, Vocabulary, applicable, apply,
                       induce_action_model)


class SuiteResult(NamedTuple):
    name: str
    passed: bool
    detail: str
    seconds: float


# -- bitmask reference semantics --------------------------------------------------
# States are ints over the vocabulary's proposition order; nothing here touches
# the set-based implementation.

def _mask(props, order) -> int:
    return sum(1 << order[p] for p in props)


def ref_applicable(s: int, pre_pos: int, pre_neg: int) -> bool:
    return s & pre_pos == pre_pos and s & pre_neg == 0


def ref_apply(s: int, eff_pos: int, eff_neg: int) -> int:
    return (s & ~eff_neg) | eff_pos


def ref_induce(s1: int, s2: int, full: int) -> tuple[int, int, int, int]:
    return s1, full & ~s1, s2 & ~s1, s1 & ~s2


def _vocab(n: int) -> Vocabulary:
    return Vocabulary([f"p{i}" for i in range(n)])


def _props_of(mask: int, vocab: Vocabulary) -> frozenset:
    return frozenset(p for i, p in enumerate(vocab.props) if mask >> i & 1)


def _random_disjoint(rng: random.Random, n: int) -> tuple[int, int]:
    a = b = 0
    for i in range(n):
        r = rng.random()
        if r < 0.25:
            a |= 1 << i
        elif r < 0.5:
            b |= 1 << i
    return a, b


class _Env:
    """Minimal stand-in so initiation/termination can take a 'low-level' state."""

    def __init__(self, vocab):
        self.vocab = vocab

    def F(self, low):
        return low


def _check_case(vocab, order, full, s, pre, eff, s2, errors) -> None:
    sp, s2p = _props_of(s, vocab), _props_of(s2, vocab)
    pp, pn = _props_of(pre[0], vocab), _props_of(pre[1], vocab)
    ep, en = _props_of(eff[0], vocab), _props_of(eff[1], vocab)
    a = ActionModel("act_0", pp, pn, ep, en, 0.0)
    ok = ref_applicable(s, *pre)
    if applicable(sp, a) != ok:
        errors.append(f"applicable {sorted(sp)} {a}")
    if ok:
        if _mask(apply(sp, a), order) != ref_apply(s, *eff):
            errors.append(f"apply {sorted(sp)} {a}")
    else:
        try:
            apply(sp, a)
            errors.append(f"apply accepted inapplicable {sorted(sp)}")
        except PreconditionError:
            pass
    m = induce_action_model(StatePair(sp, s2p), 0, 0.0, vocab)
    got = tuple(_mask(x, order) for x in (m.pre_pos, m.pre_neg, m.eff_pos, m.eff_neg))
    if got != ref_induce(s, s2, full):
        errors.append(f"induce {sorted(sp)} -> {sorted(s2p)}")
    o = SymbolicOption(0, pp, pn, ep, en)
    env = _Env(vocab)
    if initiation(o, sp, env.F) != ref_applicable(s, *pre):
        errors.append(f"initiation {sorted(sp)}")
    done = s & eff[0] == eff[0] and s & eff[1] == 0
    if termination(o, sp, env.F) != done:
        errors.append(f"termination {sorted(sp)}")
    t = Task("t", ep, en)
    if task_satisfied(t, sp) != done:
        errors.append(f"task_satisfied {sorted(sp)}")


def semantics_suite(n_random: int = 1000, seed: int = 0) -> SuiteResult:
    t0 = time.perf_counter()
    errors: list[str] = []
    rng = random.Random(seed)

    vocab = _vocab(6)
    order = {p: i for i, p in enumerate(vocab.props)}
    full = (1 << 6) - 1
    # every state against a fixed family of operators, and every state pair for induction
    ops = [_random_disjoint(rng, 6) for _ in range(24)] + [(0, 0), (full, 0), (0, full)]
    for s in range(1 << 6):
        for k, pre in enumerate(ops):
            eff = ops[(k * 7 + 3) % len(ops)]
            eff = (eff[0], eff[1] & ~eff[0])
            for s2 in (s ^ full, (s * 5 + k) & full):
                _check_case(vocab, order, full, s, pre, eff, s2, errors)
        for s2 in range(1 << 6):
            m = induce_action_model(StatePair(_props_of(s, vocab), _props_of(s2, vocab)), 0, 0.0, vocab)
            got = tuple(_mask(x, order) for x in (m.pre_pos, m.pre_neg, m.eff_pos, m.eff_neg))
            if got != ref_induce(s, s2, full):
                errors.append(f"induce {s} -> {s2}")

    vocab8 = _vocab(8)
    order8 = {p: i for i, p in enumerate(vocab8.props)}
    full8 = (1 << 8) - 1
    for _ in range(n_random):
        s, s2 = rng.getrandbits(8), rng.getrandbits(8)
        pre = _random_disjoint(rng, 8)
        eff = _random_disjoint(rng, 8)
        _check_case(vocab8, order8, full8, s, pre, eff, s2, errors)

    detail = "all agree" if not errors else f"{len(errors)} mismatches, first: {errors[0]}"
    return SuiteResult("semantics", not errors, detail, time.perf_counter() - t0)


# -- planner -------------------------------------------------------------------------

def random_problem(rng: random.Random, max_props: int = 8, max_actions: int = 12) -> PlanningProblem:
    """Small random instance mixing learned-style (full-state) and partial operators."""
    n = rng.randint(2, max_props)
    vocab = _vocab(n)
    full = (1 << n) - 1
    init = rng.getrandbits(n)
    states = [init] + [rng.getrandbits(n) for _ in range(rng.randint(2, 6))]
    actions = []
    for i in range(rng.randint(1, max_actions)):
        if rng.random() < 0.7:
            s1, s2 = rng.choice(states), rng.choice(states)
            if s1 == s2:
                s2 = s1 ^ (1 << rng.randrange(n))
                states.append(s2)
            pp, pn, ep, en = ref_induce(s1, s2, full)
        else:
            pp, pn = _random_disjoint(rng, n)
            ep, en = _random_disjoint(rng, n)
        gain = float(rng.choice([-20, 0, 0, 5, 10, 30, 50, 100]))
        actions.append(ActionModel(f"act_{i}", _props_of(pp, vocab), _props_of(pn, vocab),
                                   _props_of(ep, vocab), _props_of(en, vocab), gain))
    q = float(rng.choice([0, 0, 10, 40]))
    return PlanningProblem(_props_of(init, vocab), vocab, actions, q)


def check_plan(problem: PlanningProblem, steps) -> str | None:
    by_name = {a.name: a for a in problem.actions}
    s = problem.initial
    seen = {s}
    q = 0.0
    for n in steps:
        a = by_name[n]
        if not applicable(s, a):
            return f"{n} not applicable"
        s = apply(s, a)
        if s in seen:
            return f"{n} revisits a state"
        seen.add(s)
        q += a.gain
    if not q > problem.q_threshold:
        return "quality does not exceed the threshold"
    return None


def planner_suite(n: int = 200, seed: int = 0) -> SuiteResult:
    t0 = time.perf_counter()
    rng = random.Random(seed)
    errors = []
    for k in range(n):
        prob = random_problem(rng)
        got, want = solve(prob), oracle_solve(prob)
        if (got is None) != (want is None):
            errors.append(f"instance {k}: solve={got} oracle={want}")
            continue
        if got is None:
            continue
        if abs(got.quality - want.quality) > 1e-9:
            errors.append(f"instance {k}: quality {got.quality} != {want.quality}")
        why = check_plan(prob, got.steps)
        if why:
            errors.append(f"instance {k}: {why}")
    detail = f"{n} instances agree" if not errors else f"{len(errors)} failures, first: {errors[0]}"
    return SuiteResult("planner", not errors, detail, time.perf_counter() - t0)


# -- PDDL ----------------------------------------------------------------------------

def pddl_suite(n: int = 100, seed: int = 0, planner_path: str | None = None) -> SuiteResult:
    t0 = time.perf_counter()
    rng = random.Random(seed)
    errors = []
    for k in range(n):
        prob = random_problem(rng)
        actions = [a.with_gain(round(rng.uniform(-100, 200), 3)) if rng.random() < 0.5 else a
                   for a in prob.actions]
        dom = serialize_domain(prob.vocab, actions)
        vocab2, acts2 = parse_domain(dom)
        if serialize_domain(vocab2, acts2) != dom:
            errors.append(f"domain {k} does not round-trip")
        text = serialize_problem(prob.initial, prob.q_threshold, prob.vocab)
        init2, q2 = parse_problem(text)
        if serialize_problem(init2, q2, prob.vocab) != text:
            errors.append(f"problem {k} does not round-trip")
    planner_path = planner_path or os.environ.get("SYMOPT_METRIC_FF")
    checked = 0
    if planner_path:
        ext = ExternalPlanner(planner_path)
        prng = random.Random(seed)
        for k in range(200):
            prob = random_problem(prng)
            want = solve(prob)
            got = ext.solve(prob)
            checked += 1
            if (got is None) != (want is None) or (got and abs(got.quality - want.quality) > 1e-6):
                errors.append(f"external planner disagrees on instance {k}")
    detail = f"{n} domains round-trip" + (f", {checked} external comparisons" if checked else "")
    if errors:
        detail = f"{len(errors)} failures, first: {errors[0]}"
    return SuiteResult("pddl", not errors, detail, time.perf_counter() - t0)


SUITES: dict[str, Callable[[], SuiteResult]] = {
    "semantics": semantics_suite,
    "planner": planner_suite,
    "pddl": pddl_suite,
}


def run_all(names=None) -> list[SuiteResult]:
    return [SUITES[n]() for n in (names or SUITES)]


__all__ = ["SUITES", "SuiteResult", "check_plan", "planner_suite", "pddl_suite", "random_problem",
           "ref_applicable", "ref_apply", "ref_induce", "run_all", "semantics_suite"]
