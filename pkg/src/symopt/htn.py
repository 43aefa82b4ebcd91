"""Method models learned from exploration traces and a one-layer HTN solver."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .planner import shortest_path
from .symbolic import ActionModel, PreconditionError, apply, applicable

DEFAULT_TASK_BONUS = 100.0


class TraceError(ValueError):
    def __init__(self, index: int, reason: str):
        self.index = index
        super().__init__(f"trace step {index}: {reason}")


class MethodError(RuntimeError):
    pass


@dataclass(frozen=True)
class Task:
    name: str
    require_pos: frozenset = frozenset()
    require_neg: frozenset = frozenset()
    bonus: float = DEFAULT_TASK_BONUS

    def __post_init__(self):
        object.__setattr__(self, "require_pos", frozenset(self.require_pos))
        object.__setattr__(self, "require_neg", frozenset(self.require_neg))
        if self.require_pos & self.require_neg:
            raise ValueError(f"task {self.name}: contradictory termination condition")


@dataclass(frozen=True)
class MethodModel:
    name: str
    task: str
    precondition: frozenset
    subactions: tuple

    def __post_init__(self):
        if not self.subactions:
            raise ValueError(f"method {self.name} has no subactions")


@dataclass
class Trace:
    """Executed action names with the symbolic state reached after each."""

    initial: frozenset
    steps: list = field(default_factory=list)  # (action name, resulting state)

    def add(self, action: str, state: frozenset) -> None:
        self.steps.append((action, frozenset(state)))

    def __len__(self):
        return len(self.steps)

    def states(self) -> list[frozenset]:
        return [self.initial] + [s for _, s in self.steps]


def task_satisfied(t: Task, s) -> bool:
    return t.require_pos <= s and t.require_neg.isdisjoint(s)


def task_bonus(r_e: float, t: Task, s_after) -> float:
    return r_e + t.bonus if task_satisfied(t, s_after) else r_e


def applicable_instances(s, actions: Iterable[ActionModel]) -> list[ActionModel]:
    return sorted((a for a in actions if applicable(s, a)), key=lambda a: a.name)


def _as_lookup(actions) -> Mapping[str, ActionModel]:
    return actions if isinstance(actions, Mapping) else {a.name: a for a in actions}


def check_trace(trace: Trace, actions) -> None:
    lookup = _as_lookup(actions)
    s = trace.initial
    for i, (name, nxt) in enumerate(trace.steps):
        a = lookup.get(name)
        if a is None:
            raise TraceError(i, f"unknown action {name}")
        try:
            got = apply(s, a)
        except PreconditionError as e:
            raise TraceError(i, str(e)) from None
        if got != nxt:
            raise TraceError(i, f"{name} does not lead to the recorded state")
        s = nxt


def replay_method(m: MethodModel, actions) -> list[frozenset]:
    lookup = _as_lookup(actions)
    states = [m.precondition]
    for name in m.subactions:
        if name not in lookup:
            raise MethodError(f"method {m.name} references unknown action {name}")
        states.append(apply(states[-1], lookup[name]))
    return states


def generate_method_models(trace: Trace, tasks: Sequence[Task], actions,
                           existing: Sequence[MethodModel] = ()):
    """Segment ``trace`` into per-task methods; merge them into ``existing``.

    Returns ``(methods, method_to_task)``.
    """
    lookup = _as_lookup(actions)
    check_trace(trace, lookup)
    methods = list(existing)
    known = {(m.task, m.subactions) for m in methods}
    states = trace.states()
    names = [n for n, _ in trace.steps]

    cursor, ti = 0, 0

    def skip_satisfied(ti, s):
        while ti < len(tasks) and task_satisfied(tasks[ti], s):
            ti += 1
        return ti

    ti = skip_satisfied(ti, states[0])
    for k in range(len(names)):
        if ti >= len(tasks):
            break
        if task_satisfied(tasks[ti], states[k + 1]):
            t = tasks[ti]
            sub = tuple(names[cursor:k + 1])
            if (t.name, sub) not in known:
                m = MethodModel(f"m_{len(methods)}", t.name, states[cursor], sub)
                end = replay_method(m, lookup)[-1]
                if not task_satisfied(t, end):
                    raise MethodError(f"method {m.name} does not achieve {t.name}")
                methods.append(m)
                known.add((t.name, sub))
            cursor = k + 1
            ti = skip_satisfied(ti + 1, states[k + 1])
    return methods, {m.name: m.task for m in methods}


@dataclass(frozen=True)
class PlannedMethod:
    name: str
    task: str
    subactions: tuple
    bridge: bool = False


def flatten(plan: Sequence[PlannedMethod]) -> list[str]:
    return [a for m in plan for a in m.subactions]


def htn_solve(initial, vocab, actions, methods: Sequence[MethodModel], tasks: Sequence[Task],
              max_nodes: int = 100_000) -> list[PlannedMethod] | None:
    """Decompose ``tasks`` in order into learned methods, bridging gaps with search.

    The flattened result is applicable from ``initial`` and never revisits a
    symbolic state.
    """
    lookup = _as_lookup(actions)
    state = frozenset(initial)
    visited = {state}
    plan: list[PlannedMethod] = []
    n_bridges = 0

    def walk(s, names):
        out = []
        for n in names:
            a = lookup.get(n)
            if a is None:
                raise MethodError(f"unknown action {n} in method")
            if not applicable(s, a):
                return None
            s = apply(s, a)
            out.append(s)
        return out

    for t in tasks:
        if task_satisfied(t, state):
            continue
        cands = []
        for m in methods:
            if m.task != t.name:
                continue
            path = walk(state, m.subactions)
            if path is None or any(s in visited for s in path) or len(set(path)) != len(path):
                continue
            gain = sum(lookup[n].gain for n in m.subactions)
            cands.append((m.precondition != state, -gain, m.name, m, path))
        if cands:
            cands.sort(key=lambda c: c[:3])
            _, _, _, m, path = cands[0]
            plan.append(PlannedMethod(m.name, m.task, m.subactions))
            visited.update(path)
            state = path[-1]
            continue

        targets: dict = {}
        ranked = sorted((m for m in methods if m.task == t.name),
                        key=lambda m: (-sum(lookup[n].gain for n in m.subactions if n in lookup), m.name))
        for m in ranked:
            targets.setdefault(m.precondition, m)

        def goal(s, t=t):
            return task_satisfied(t, s) or s in targets

        steps = shortest_path(state, lookup.values(), goal, max_nodes=max_nodes, avoid=visited)
        if steps is None:
            return None
        path = walk(state, steps)
        if steps:
            plan.append(PlannedMethod(f"bridge_{n_bridges}", t.name, tuple(steps), bridge=True))
            n_bridges += 1
            visited.update(path)
            state = path[-1]
        if task_satisfied(t, state):
            continue
        m = targets[state]
        path = walk(state, m.subactions)
        if path is None or any(s in visited for s in path):
            return None
        plan.append(PlannedMethod(m.name, m.task, m.subactions))
        visited.update(path)
        state = path[-1]
    return plan
