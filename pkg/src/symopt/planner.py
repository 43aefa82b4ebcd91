"""Maximum-quality planning over learned action models.

A plan is a simple path in the state graph induced by the action models: it
never revisits a symbolic state and never uses the same action twice. Among
all such paths from the initial state the one with the largest summed gain
wins; ties go to the shorter plan, then to the lexicographically smaller
sequence of action names. The plan is returned only if its quality is
strictly greater than the problem's threshold.
"""

from __future__ import annotations

import os
import subprocess
import tempfile
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .pddl import parse_external_plan, serialize_domain, serialize_problem
from .symbolic import ActionModel, Plan, Vocabulary, apply, applicable

DEFAULT_NODE_BUDGET = 10**6
_EPS = 1e-9


@dataclass
class PlanningProblem:
    initial: frozenset
    vocab: Vocabulary
    actions: Sequence[ActionModel]
    q_threshold: float = 0.0

    def __post_init__(self):
        self.initial = frozenset(self.initial)
        if not (self.q_threshold == self.q_threshold) or abs(self.q_threshold) == float("inf"):
            raise ValueError("q_threshold must be finite")
        self.vocab.check(self.initial, "initial state")
        names = set()
        for a in self.actions:
            self.vocab.check(a.props, a.name)
            if a.name in names:
                raise ValueError(f"duplicate action name {a.name}")
            names.add(a.name)


@dataclass
class SearchStats:
    nodes_expanded: int = 0
    elapsed: float = 0.0
    optimal: bool = True


def _better(q1: float, s1: tuple, q2: float, s2: tuple) -> bool:
    if q1 > q2 + _EPS:
        return True
    if q1 < q2 - _EPS:
        return False
    if len(s1) != len(s2):
        return len(s1) < len(s2)
    return s1 < s2


class _Graph:
    """Successor lookup that is fast for full-state (snapshot) preconditions."""

    def __init__(self, vocab: Vocabulary, actions: Sequence[ActionModel]):
        self.by_state: dict[frozenset, list[ActionModel]] = {}
        self.partial: list[ActionModel] = []
        for a in sorted(actions, key=lambda a: a.name):
            if a.pre_pos | a.pre_neg == vocab.all:
                self.by_state.setdefault(a.pre_pos, []).append(a)
            else:
                self.partial.append(a)

    def successors(self, s: frozenset) -> list[ActionModel]:
        out = list(self.by_state.get(s, ()))
        if self.partial:
            out.extend(a for a in self.partial if applicable(s, a))
            out.sort(key=lambda a: a.name)
        return out


class _BudgetExceeded(Exception):
    pass


def search(problem: PlanningProblem, node_budget: int = DEFAULT_NODE_BUDGET) -> tuple[Plan | None, SearchStats]:
    """Branch-and-bound longest simple path. Returns the plan (or None) and stats."""
    t0 = time.perf_counter()
    stats = SearchStats()
    graph = _Graph(problem.vocab, problem.actions)

    best = {"q": 0.0, "steps": (), "states": (problem.initial,)}
    path: list[str] = []
    states: list[frozenset] = [problem.initial]
    visited = {problem.initial}
    used: set[str] = set()

    def bound(s: frozenset) -> float:
        # positive gains of unused actions usable somewhere still reachable
        total = 0.0
        counted: set[str] = set()
        seen = {s}
        frontier = deque([s])
        while frontier:
            u = frontier.popleft()
            for a in graph.successors(u):
                if a.name in used:
                    continue
                v = (u - a.eff_neg) | a.eff_pos
                if v in visited:
                    continue
                if a.name not in counted:
                    counted.add(a.name)
                    if a.gain > 0:
                        total += a.gain
                if v not in seen:
                    seen.add(v)
                    frontier.append(v)
        return total

    def dfs(s: frozenset, q: float) -> None:
        if _better(q, tuple(path), best["q"], best["steps"]):
            best.update(q=q, steps=tuple(path), states=tuple(states))
        succ = [a for a in graph.successors(s) if a.name not in used]
        if not succ:
            return
        ub = q + bound(s)
        if ub < best["q"] - _EPS:
            return
        if ub <= best["q"] + _EPS and len(path) + 1 > len(best["steps"]):
            return
        stats.nodes_expanded += 1
        if stats.nodes_expanded > node_budget:
            raise _BudgetExceeded
        for a in succ:
            nxt = (s - a.eff_neg) | a.eff_pos
            if nxt in visited:
                continue
            path.append(a.name)
            states.append(nxt)
            visited.add(nxt)
            used.add(a.name)
            dfs(nxt, q + a.gain)
            used.discard(a.name)
            visited.discard(nxt)
            states.pop()
            path.pop()

    try:
        dfs(problem.initial, 0.0)
    except _BudgetExceeded:
        stats.optimal = False
    stats.elapsed = time.perf_counter() - t0
    if best["q"] > problem.q_threshold:
        return Plan(best["steps"], best["q"], stats.optimal, best["states"]), stats
    return None, stats


def solve(problem: PlanningProblem, node_budget: int = DEFAULT_NODE_BUDGET) -> Plan | None:
    return search(problem, node_budget)[0]


class OracleRefused(ValueError):
    pass


def oracle_solve(problem: PlanningProblem) -> Plan | None:
    """Exhaustive enumeration of every simple path; only for small instances."""
    if len(problem.vocab) > 10 or len(problem.actions) > 14:
        raise OracleRefused(f"instance too large for enumeration: "
                            f"{len(problem.vocab)} props, {len(problem.actions)} actions")
    actions = list(problem.actions)
    best_q, best_steps = 0.0, ()

    def walk(s, q, steps, visited, used):
        nonlocal best_q, best_steps
        if _better(q, steps, best_q, best_steps):
            best_q, best_steps = q, steps
        for a in actions:
            if a.name in used:
                continue
            if not (a.pre_pos <= s and not (a.pre_neg & s)):
                continue
            nxt = (s - a.eff_neg) | a.eff_pos
            if nxt in visited:
                continue
            walk(nxt, q + a.gain, steps + (a.name,), visited | {nxt}, used | {a.name})

    walk(problem.initial, 0.0, (), frozenset([problem.initial]), frozenset())
    if best_q > problem.q_threshold:
        return Plan(best_steps, best_q, True)
    return None


def shortest_path(initial: frozenset, actions: Iterable[ActionModel],
                  goal: Callable[[frozenset], bool], max_nodes: int = 100_000,
                  avoid: Iterable[frozenset] = ()) -> list[str] | None:
    """Breadth-first search for the shortest action sequence reaching ``goal``.

    States in ``avoid`` (other than ``initial``) are never entered.
    """
    blocked = set(avoid) - {initial}
    acts = sorted(actions, key=lambda a: a.name)
    parents: dict[frozenset, tuple[frozenset, str] | None] = {initial: None}
    frontier = deque([initial])
    while frontier and len(parents) <= max_nodes:
        s = frontier.popleft()
        if goal(s):
            steps = []
            while parents[s] is not None:
                s, name = parents[s]
                steps.append(name)
            return steps[::-1]
        for a in acts:
            if a.pre_pos <= s and not (a.pre_neg & s):
                nxt = (s - a.eff_neg) | a.eff_pos
                if nxt not in parents and nxt not in blocked:
                    parents[nxt] = (s, a.name)
                    frontier.append(nxt)
    return None


# -- external Metric-FF adapter ---------------------------------------------

class ExternalPlannerError(RuntimeError):
    pass


class PlannerNotFound(ExternalPlannerError):
    pass


class PlannerTimeout(ExternalPlannerError):
    pass


class PlannerOutputError(ExternalPlannerError):
    pass


def _default_timeout() -> float:
    return float(os.environ.get("SYMOPT_PLANNER_TIMEOUT", "30"))


@dataclass
class ExternalPlanner:
    """Runs a Metric-FF compatible executable; one subprocess at a time."""

    path: str
    timeout: float = field(default_factory=_default_timeout)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def solve(self, problem: PlanningProblem) -> Plan | None:
        exe = Path(self.path)
        if not exe.is_file() or not os.access(exe, os.X_OK):
            raise PlannerNotFound(f"planner executable not found: {self.path}")
        with self._lock, tempfile.TemporaryDirectory() as tmp:
            dom = Path(tmp) / "domain.pddl"
            prob = Path(tmp) / "problem.pddl"
            dom.write_text(serialize_domain(problem.vocab, problem.actions))
            prob.write_text(serialize_problem(problem.initial, problem.q_threshold, problem.vocab))
            try:
                proc = subprocess.run([str(exe), "-o", str(dom), "-f", str(prob)],
                                      capture_output=True, text=True, timeout=self.timeout)
            except subprocess.TimeoutExpired as e:
                raise PlannerTimeout(f"planner exceeded {self.timeout}s") from e
        try:
            names = parse_external_plan(proc.stdout)
        except ValueError as e:
            raise PlannerOutputError(str(e)) from e
        if not names:
            return None
        by_name = {a.name: a for a in problem.actions}
        s, q = problem.initial, 0.0
        states = [s]
        for n in names:
            if n not in by_name:
                raise PlannerOutputError(f"planner returned unknown action {n}")
            s = apply(s, by_name[n])
            q += by_name[n].gain
            states.append(s)
        if not q > problem.q_threshold:
            return None
        return Plan(tuple(names), q, False, tuple(states))


def solve_external(problem: PlanningProblem, planner_path: str, timeout: float | None = None) -> Plan | None:
    planner = ExternalPlanner(planner_path) if timeout is None else ExternalPlanner(planner_path, timeout)
    return planner.solve(problem)
