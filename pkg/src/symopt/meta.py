"""Meta-controller: action models from observed transitions, option bookkeeping,
the sequential exploration schedule and the planning goal."""

from __future__ import annotations

from collections import deque
from statistics import fmean
from typing import Iterable, Sequence

from .options import OptionSet
from .symbolic import ActionModel, Plan, StatePair, Vocabulary, format_state, induce_action_model

DEFAULT_C = 100.0
DEFAULT_LAMBDA = 0.95
SR_WINDOW = 100
_AUTO = object()


class ConsistencyError(RuntimeError):
    """Internal bookkeeping went out of sync; indicates a learner bug."""


class RewardLedger:
    """Observed external rewards per symbolic state pair, in first-seen order."""

    def __init__(self):
        self.entries: dict[StatePair, list[float]] = {}

    def append(self, pair: StatePair, reward: float) -> None:
        pair = StatePair(frozenset(pair[0]), frozenset(pair[1]))
        self.entries.setdefault(pair, []).append(float(reward))

    def __contains__(self, pair) -> bool:
        return StatePair(frozenset(pair[0]), frozenset(pair[1])) in self.entries

    def __len__(self):
        return len(self.entries)

    def __getitem__(self, pair) -> list[float]:
        return self.entries[StatePair(frozenset(pair[0]), frozenset(pair[1]))]

    def pairs(self) -> list[StatePair]:
        return list(self.entries)

    def mean(self, pair) -> float:
        return fmean(self[pair])


class SuccessTracker:
    """Success flags of the last ``window`` executions of each action model."""

    def __init__(self, window: int = SR_WINDOW):
        self.window = window
        self._hist: dict[int, deque] = {}

    def record(self, index: int, success: bool) -> None:
        self._hist.setdefault(index, deque(maxlen=self.window)).append(bool(success))

    def attempts(self, index: int) -> int:
        return len(self._hist.get(index, ()))

    def sr(self, index: int) -> float:
        h = self._hist.get(index)
        return sum(h) / len(h) if h else 0.0

    def ratios(self, n: int) -> list[float]:
        return [self.sr(i) for i in range(n)]

    def reset(self) -> None:
        self._hist.clear()


def exploring_index(sr: Sequence[float], lam: float = DEFAULT_LAMBDA) -> int | None:
    """First action whose success ratio is still below ``lam``."""
    if not 0 < lam <= 1:
        raise ValueError(f"lambda must be in (0, 1], got {lam}")
    for i, r in enumerate(sr):
        if r < lam:
            return i
    return None


def exploration_reward(i: int, tracker: SuccessTracker, exploring: int | None, c: float = DEFAULT_C) -> float:
    if i != exploring:
        return 0.0
    return c * (1.0 - tracker.sr(i))


def compute_gain(pair, ledger: RewardLedger, tracker: SuccessTracker, exploring: int | None,
                 c: float = DEFAULT_C, index: int | None = None) -> float:
    if index is None:
        index = ledger.pairs().index(StatePair(frozenset(pair[0]), frozenset(pair[1])))
    return ledger.mean(pair) + exploration_reward(index, tracker, exploring, c)


def planning_goal(q_last: float) -> float:
    return q_last


class ActionOptionMap(dict):
    """action name -> option id; several actions may share one option."""

    def actions_of(self, option_id: int) -> list[str]:
        return [a for a, o in self.items() if o == option_id]


def generate_action_models(ledger: RewardLedger, options: OptionSet, tracker: SuccessTracker,
                           vocab: Vocabulary, c: float = DEFAULT_C, lam: float = DEFAULT_LAMBDA,
                           exploring=_AUTO):
    """One action model per recorded pair; options shared by effect signature.

    Returns ``(actions, action_to_option, options)``. The option set is updated
    in place: existing options absorb the new preconditions by set union.
    """
    pairs = ledger.pairs()
    if exploring is _AUTO:
        exploring = exploring_index(tracker.ratios(len(pairs)), lam)
    actions: list[ActionModel] = []
    amap = ActionOptionMap()
    for i, pair in enumerate(pairs):
        gain = compute_gain(pair, ledger, tracker, exploring, c, index=i)
        a = induce_action_model(pair, i, gain, vocab)
        o = options.find(a.eff_pos, a.eff_neg)
        if o is None:
            o = options.add(a.pre_pos, a.pre_neg, a.eff_pos, a.eff_neg)
        else:
            o.enlarge(a.pre_pos, a.pre_neg)
        actions.append(a)
        amap[a.name] = o.id
    return actions, amap, options


def action_index(name: str) -> int:
    return int(name.rsplit("_", 1)[1])


def options_for_plan(plan: Plan | Iterable[str], amap: dict) -> list[int]:
    steps = plan.steps if isinstance(plan, Plan) else list(plan)
    out = []
    for name in steps:
        if name not in amap:
            raise ConsistencyError(f"plan step {name} has no option")
        out.append(amap[name])
    return out


def dump_models(vocab: Vocabulary, actions: Sequence[ActionModel], amap: dict, options: OptionSet,
                tracker: SuccessTracker, methods: Sequence = (), ledger: RewardLedger | None = None) -> str:
    """Human-readable listing of the learned action models, options and methods."""
    lines = ["# action models"]
    for i, a in enumerate(actions):
        mean = f" mean_reward={ledger.mean(ledger.pairs()[i]):.2f}" if ledger is not None else ""
        lines.append(f"{a.name}: option={amap.get(a.name)} gain={a.gain:.2f}{mean} sr={tracker.sr(i):.2f}")
        lines.append(f"  pre+ {format_state(a.pre_pos, vocab)}")
        lines.append(f"  pre- {format_state(a.pre_neg, vocab)}")
        lines.append(f"  eff+ {format_state(a.eff_pos, vocab)}")
        lines.append(f"  eff- {format_state(a.eff_neg, vocab)}")
    lines.append("")
    lines.append("# options")
    for o in options:
        mapped = ", ".join(amap.actions_of(o.id)) if isinstance(amap, ActionOptionMap) else ""
        lines.append(f"opt_{o.id}: actions=[{mapped}] trained_steps={o.trained_steps}")
        lines.append(f"  pre+ {format_state(o.pre_pos, vocab)}")
        lines.append(f"  pre- {format_state(o.pre_neg, vocab)}")
        lines.append(f"  eff+ {format_state(o.eff_pos, vocab)}")
        lines.append(f"  eff- {format_state(o.eff_neg, vocab)}")
    if methods:
        lines.append("")
        lines.append("# methods")
        for m in methods:
            lines.append(f"{m.name}: task={m.task} subactions=[{', '.join(m.subactions)}]")
            lines.append(f"  pre {format_state(m.precondition, vocab)}")
    return "\n".join(lines) + "\n"
