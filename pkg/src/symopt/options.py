"""Symbolic options, the global exploration option, and their tabular policies."""

from __future__ import annotations

import json
import random
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Iterator, NamedTuple

from .symbolic import StatePair, Vocabulary, VocabularyError

SNAPSHOT_HEADER = "# symopt option snapshot v1"
DEFAULT_PHI = 100.0


@dataclass
class TabularPolicy:
    """Q-table over (low-level state key, action) with a linearly decaying epsilon."""

    n_actions: int = 4
    alpha: float = 0.1
    gamma: float = 0.9
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_decay_steps: int = 50_000
    q: dict = field(default_factory=dict)
    steps: int = 0

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ValueError(f"alpha must be in (0, 1], got {self.alpha}")
        if not 0 <= self.gamma < 1:
            raise ValueError(f"gamma must be in [0, 1), got {self.gamma}")

    @property
    def epsilon(self) -> float:
        if self.eps_decay_steps <= 0:
            return self.eps_end
        frac = min(1.0, self.steps / self.eps_decay_steps)
        return self.eps_start + frac * (self.eps_end - self.eps_start)

    def values(self, key) -> list[float]:
        row = self.q.get(key)
        return row if row is not None else [0.0] * self.n_actions

    def greedy(self, key, rng: random.Random) -> int:
        row = self.q.get(key)
        if row is None:
            return rng.randrange(self.n_actions)
        m = max(row)
        best = [i for i, v in enumerate(row) if v == m]
        return best[0] if len(best) == 1 else rng.choice(best)

    def select(self, key, rng: random.Random, greedy: bool = False) -> int:
        if not greedy and rng.random() < self.epsilon:
            return rng.randrange(self.n_actions)
        return self.greedy(key, rng)

    def reset_schedule(self):
        self.steps = 0


def q_update(policy: TabularPolicy, s, a: int, r: float, s_next, terminal: bool = False) -> None:
    """One-step Q-learning: q += alpha * (r + gamma * max q(s') - q)."""
    row = policy.q.get(s)
    if row is None:
        row = policy.q[s] = [0.0] * policy.n_actions
    target = r
    if not terminal:
        nxt = policy.q.get(s_next)
        if nxt is not None:
            target += policy.gamma * max(nxt)
    row[a] += policy.alpha * (target - row[a])


class Transition(NamedTuple):
    key: object
    action: int
    reward: float  # intrinsic
    next_key: object
    terminal: bool


@dataclass(eq=False)
class SymbolicOption:
    id: int
    pre_pos: frozenset
    pre_neg: frozenset
    eff_pos: frozenset
    eff_neg: frozenset
    policy: TabularPolicy = field(default_factory=TabularPolicy)
    trained_steps: int = 0
    experience: deque = field(default_factory=lambda: deque(maxlen=20_000), repr=False)

    def __post_init__(self):
        self.pre_pos, self.pre_neg = frozenset(self.pre_pos), frozenset(self.pre_neg)
        self.eff_pos, self.eff_neg = frozenset(self.eff_pos), frozenset(self.eff_neg)
        if self.eff_pos & self.eff_neg:
            raise ValueError(f"option {self.id}: contradictory effects")

    @property
    def signature(self) -> tuple[frozenset, frozenset]:
        return self.eff_pos, self.eff_neg

    def enlarge(self, pre_pos: Iterable[str], pre_neg: Iterable[str]) -> None:
        self.pre_pos = self.pre_pos | frozenset(pre_pos)
        self.pre_neg = self.pre_neg | frozenset(pre_neg)

    def can_start(self, s: frozenset) -> bool:
        return self.pre_pos <= s and self.pre_neg.isdisjoint(s)

    def done(self, s: frozenset) -> bool:
        return self.eff_pos <= s and self.eff_neg.isdisjoint(s)


class GlobalOption:
    """Always initiable random walk that stops once the symbolic state changes."""

    id = -1
    policy = None

    def can_start(self, s: frozenset) -> bool:
        return True


def initiation(o, low_state, F: Callable) -> bool:
    if isinstance(o, GlobalOption):
        return True
    return o.can_start(F(low_state))


def termination(o, low_state, F: Callable, start: frozenset | None = None) -> bool:
    if isinstance(o, GlobalOption):
        return start is not None and F(low_state) != start
    return o.done(F(low_state))


def intrinsic_reward(o, next_low_state, env_reward: float, phi: float, F: Callable) -> float:
    return phi if termination(o, next_low_state, F) else env_reward


@dataclass
class OptionOutcome:
    pair: StatePair | None
    external_reward: float | None
    success: bool
    steps_used: int


def execute_option(env, state, option, max_steps: int, rng: random.Random, *,
                   phi: float = DEFAULT_PHI, learn: bool = True, greedy: bool = False,
                   pre: tuple[frozenset, frozenset] | None = None):
    """Run ``option`` from low-level ``state``; returns (OptionOutcome, final state).

    ``pre`` overrides the option's own initiation sets (used to check the
    selected action model's preconditions instead of the merged ones).
    """
    F = env.map_symbolic
    s1 = F(state)
    if pre is not None:
        ok = pre[0] <= s1 and pre[1].isdisjoint(s1)
    else:
        ok = option.can_start(s1)
    if not ok:
        return OptionOutcome(None, None, False, 0), state
    step = env.step
    if isinstance(option, GlobalOption):
        n_actions = len(env.actions)
        r_e, used, s2 = 0.0, 0, s1
        while used < max_steps and not state.terminal:
            res = step(state, rng.randrange(n_actions))
            state = res.state
            used += 1
            r_e += res.reward
            s2 = F(state)
            if s2 != s1:
                break
        return OptionOutcome(StatePair(s1, s2), r_e, s2 != s1, used), state

    if option.done(s1):
        return OptionOutcome(StatePair(s1, s1), 0.0, True, 0), state
    policy = option.policy
    key_of = env.policy_key
    eff_pos, eff_neg = option.eff_pos, option.eff_neg
    record = option.experience.append
    r_e, used, success = 0.0, 0, False
    key = key_of(state)
    s2 = s1
    while used < max_steps and not state.terminal:
        a = policy.select(key, rng, greedy)
        res = step(state, a)
        state = res.state
        used += 1
        r_e += res.reward
        s2 = F(state)
        success = eff_pos <= s2 and eff_neg.isdisjoint(s2)
        nkey = key_of(state)
        if learn:
            r_i = phi if success else res.reward
            stop = success or res.terminal
            q_update(policy, key, a, r_i, nkey, stop)
            record(Transition(key, a, r_i, nkey, stop))
            policy.steps += 1
            option.trained_steps += 1
        key = nkey
        if success:
            break
    return OptionOutcome(StatePair(s1, s2), r_e, success, used), state


def replay(option: SymbolicOption, n_updates: int, rng: random.Random) -> None:
    """Extra Q-updates sampled from the option's stored experience."""
    exp = option.experience
    if not exp or n_updates <= 0:
        return
    size = len(exp)
    for _ in range(n_updates):
        t = exp[rng.randrange(size)]
        q_update(option.policy, t.key, t.action, t.reward, t.next_key, t.terminal)


class OptionSet:
    """Symbolic options keyed by their effect signature, in creation order."""

    def __init__(self, policy_factory: Callable[[], TabularPolicy] = TabularPolicy):
        self.policy_factory = policy_factory
        self._options: list[SymbolicOption] = []
        self._by_sig: dict = {}
        self.global_option = GlobalOption()

    def __iter__(self) -> Iterator[SymbolicOption]:
        return iter(self._options)

    def __len__(self):
        return len(self._options)

    def __getitem__(self, option_id: int) -> SymbolicOption:
        if option_id == -1:
            return self.global_option
        return self._options[option_id]

    def find(self, eff_pos, eff_neg) -> SymbolicOption | None:
        return self._by_sig.get((frozenset(eff_pos), frozenset(eff_neg)))

    def add(self, pre_pos, pre_neg, eff_pos, eff_neg, policy: TabularPolicy | None = None) -> SymbolicOption:
        sig = (frozenset(eff_pos), frozenset(eff_neg))
        if sig in self._by_sig:
            raise ValueError("an option with this effect signature already exists")
        o = SymbolicOption(len(self._options), pre_pos, pre_neg, eff_pos, eff_neg,
                           policy or self.policy_factory())
        self._options.append(o)
        self._by_sig[sig] = o
        return o

    def adopt(self, option: SymbolicOption) -> SymbolicOption:
        """Take over a previously trained option (e.g. from a snapshot).

        The option is renumbered; if its signature is already present the
        existing option absorbs its preconditions and is returned instead.
        """
        have = self.find(option.eff_pos, option.eff_neg)
        if have is not None:
            have.enlarge(option.pre_pos, option.pre_neg)
            return have
        option.id = len(self._options)
        self._options.append(option)
        self._by_sig[option.signature] = option
        return option


# -- snapshots ---------------------------------------------------------------

class SnapshotError(ValueError):
    pass


def _tuplify(x):
    return tuple(_tuplify(v) for v in x) if isinstance(x, list) else x


def save_options(path, options: Iterable[SymbolicOption], vocab: Vocabulary) -> None:
    body = {"vocab": list(vocab.props), "options": []}
    for o in options:
        p = o.policy
        body["options"].append({
            "id": o.id,
            "pre_pos": vocab.sort(o.pre_pos),
            "pre_neg": vocab.sort(o.pre_neg),
            "eff_pos": vocab.sort(o.eff_pos),
            "eff_neg": vocab.sort(o.eff_neg),
            "trained_steps": o.trained_steps,
            "policy": {"n_actions": p.n_actions, "alpha": p.alpha, "gamma": p.gamma,
                       "eps_start": p.eps_start, "eps_end": p.eps_end,
                       "eps_decay_steps": p.eps_decay_steps, "steps": p.steps},
            "q": [[list(k) if isinstance(k, tuple) else k, v]
                  for k, v in sorted(p.q.items(), key=lambda kv: repr(kv[0]))],
        })
    Path(path).write_text(SNAPSHOT_HEADER + "\n" + json.dumps(body, indent=1) + "\n")


def load_options(path, vocab: Vocabulary) -> list[SymbolicOption]:
    text = Path(path).read_text()
    header, _, rest = text.partition("\n")
    if header.strip() != SNAPSHOT_HEADER:
        raise SnapshotError(f"{path}: not an option snapshot (header {header!r})")
    body = json.loads(rest)
    out = []
    for rec in body["options"]:
        for k in ("pre_pos", "pre_neg", "eff_pos", "eff_neg"):
            for p in rec[k]:
                if p not in vocab:
                    raise SnapshotError(f"{path}: option {rec['id']} uses proposition {p!r} "
                                        f"missing from the environment vocabulary") from VocabularyError(p)
        policy = TabularPolicy(**rec["policy"])
        policy.q = {_tuplify(k): list(v) for k, v in rec["q"]}
        out.append(SymbolicOption(rec["id"], rec["pre_pos"], rec["pre_neg"], rec["eff_pos"],
                                  rec["eff_neg"], policy, rec["trained_steps"]))
    return out
