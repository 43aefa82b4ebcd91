"""Propositional state algebra and grounded action models.

Symbolic states are plain ``frozenset`` objects of proposition names. A
:class:`Vocabulary` fixes the proposition set and its ordering; everything
that prints or serializes goes through that ordering so output does not
depend on string hashing.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import AbstractSet, Iterable, NamedTuple

SymbolicState = frozenset
"""A symbolic state: the set of propositions that are true (closed world)."""

_NAME_RE = re.compile(r"^[a-z][a-z0-9_]*$")


class VocabularyError(ValueError):
    """A proposition outside the declared vocabulary was used."""

    def __init__(self, proposition: str, where: str = ""):
        self.proposition = proposition
        msg = f"unknown proposition {proposition!r}"
        if where:
            msg += f" in {where}"
        super().__init__(msg)


class PreconditionError(ValueError):
    """An action was applied in a state where it is not applicable."""

    def __init__(self, action: str, missing: Iterable[str], forbidden: Iterable[str]):
        self.action = action
        self.missing = tuple(sorted(missing))
        self.forbidden = tuple(sorted(forbidden))
        parts = []
        if self.missing:
            parts.append("missing " + ", ".join(self.missing))
        if self.forbidden:
            parts.append("forbidden " + ", ".join(self.forbidden))
        super().__init__(f"{action} not applicable: " + "; ".join(parts))


class Vocabulary:
    """Ordered, duplicate-free set of proposition names."""

    def __init__(self, props: Iterable[str]):
        seen: dict[str, None] = {}
        for p in props:
            if not _NAME_RE.match(p):
                raise ValueError(f"bad proposition name {p!r}")
            if p in seen:
                raise ValueError(f"duplicate proposition {p!r}")
            seen[p] = None
        if not seen:
            raise ValueError("vocabulary must not be empty")
        self.props: tuple[str, ...] = tuple(seen)
        self._index = {p: i for i, p in enumerate(self.props)}
        self.all: frozenset[str] = frozenset(self.props)

    def __iter__(self):
        return iter(self.props)

    def __len__(self):
        return len(self.props)

    def __contains__(self, p) -> bool:
        return p in self._index

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self.props == other.props

    def __hash__(self):
        return hash(self.props)

    def __repr__(self):
        return f"Vocabulary({list(self.props)!r})"

    def check(self, props: AbstractSet[str], where: str = "") -> None:
        extra = set(props) - self.all
        if extra:
            raise VocabularyError(min(extra), where)

    def sort(self, props: Iterable[str]) -> list[str]:
        """Sort propositions by vocabulary order; unknown names go last, alphabetically."""
        n = len(self.props)
        return sorted(props, key=lambda p: (self._index.get(p, n), p))

    def state(self, props: Iterable[str] = ()) -> frozenset[str]:
        s = frozenset(props)
        self.check(s, "state")
        return s


@dataclass(frozen=True)
class ActionModel:
    """A grounded STRIPS operator carrying a gain for the ``quality`` fluent."""

    name: str
    pre_pos: frozenset[str] = frozenset()
    pre_neg: frozenset[str] = frozenset()
    eff_pos: frozenset[str] = frozenset()
    eff_neg: frozenset[str] = frozenset()
    gain: float = 0.0

    def __post_init__(self):
        for attr in ("pre_pos", "pre_neg", "eff_pos", "eff_neg"):
            v = getattr(self, attr)
            if not isinstance(v, frozenset):
                object.__setattr__(self, attr, frozenset(v))
        if self.pre_pos & self.pre_neg:
            raise ValueError(f"{self.name}: contradictory preconditions {sorted(self.pre_pos & self.pre_neg)}")
        if self.eff_pos & self.eff_neg:
            raise ValueError(f"{self.name}: contradictory effects {sorted(self.eff_pos & self.eff_neg)}")

    @property
    def props(self) -> frozenset[str]:
        return self.pre_pos | self.pre_neg | self.eff_pos | self.eff_neg

    @property
    def signature(self) -> tuple[frozenset[str], frozenset[str]]:
        return self.eff_pos, self.eff_neg

    def with_gain(self, gain: float) -> "ActionModel":
        return ActionModel(self.name, self.pre_pos, self.pre_neg, self.eff_pos, self.eff_neg, gain)


class StatePair(NamedTuple):
    """A symbolic transition (before, after) observed in the environment."""

    before: frozenset
    after: frozenset

    def key(self) -> tuple[tuple[str, ...], tuple[str, ...]]:
        return tuple(sorted(self.before)), tuple(sorted(self.after))


@dataclass
class Plan:
    """Sequence of action-model names with its total gain."""

    steps: tuple[str, ...] = ()
    quality: float = 0.0
    optimal: bool = True
    states: tuple[frozenset, ...] = field(default=(), compare=False, repr=False)

    def __len__(self):
        return len(self.steps)

    def __bool__(self):
        return bool(self.steps)


def applicable(s: AbstractSet[str], a: ActionModel, vocab: Vocabulary | None = None) -> bool:
    if vocab is not None:
        vocab.check(s, "state")
        vocab.check(a.props, a.name)
    return a.pre_pos <= s and a.pre_neg.isdisjoint(s)


def apply(s: AbstractSet[str], a: ActionModel, vocab: Vocabulary | None = None) -> frozenset[str]:
    """Progress ``s`` through ``a``: (s - eff_neg) | eff_pos."""
    if not applicable(s, a, vocab):
        raise PreconditionError(a.name, a.pre_pos - s, a.pre_neg & s)
    return (frozenset(s) - a.eff_neg) | a.eff_pos


def induce_action_model(pair: StatePair, index: int, gain: float, vocab: Vocabulary) -> ActionModel:
    s1, s2 = frozenset(pair[0]), frozenset(pair[1])
    vocab.check(s1, "pair.before")
    vocab.check(s2, "pair.after")
    return ActionModel(
        name=f"act_{index}",
        pre_pos=s1,
        pre_neg=vocab.all - s1,
        eff_pos=s2 - s1,
        eff_neg=s1 - s2,
        gain=float(gain),
    )


def replay(initial: AbstractSet[str], steps: Iterable[str], actions: dict[str, ActionModel]) -> list[frozenset]:
    """States visited while applying ``steps`` from ``initial`` (initial included)."""
    states = [frozenset(initial)]
    for name in steps:
        states.append(apply(states[-1], actions[name]))
    return states


def format_state(s: AbstractSet[str], vocab: Vocabulary | None = None) -> str:
    items = vocab.sort(s) if vocab is not None else sorted(s)
    return "{" + ", ".join(items) + "}"
