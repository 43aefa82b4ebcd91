"""Goal-based tabular HRL baseline: a meta Q-table picks symbolic goals.

The goals are frozen option signatures (normally those discovered by a
finished SORL run) with freshly initialised low-level policies, so the only
difference from SORL is the high level: a Q-table instead of the planner.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Sequence


@dataclass
class MetaPolicy:
    n_goals: int
    alpha: float = 0.1
    gamma: float = 0.9
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_decay_steps: int = 5000
    q: dict = field(default_factory=dict)  # (symbolic state, goal) -> value
    steps: int = 0

    def __post_init__(self):
        if self.n_goals <= 0:
            raise ValueError("the goal set must be non-empty")
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

    def value(self, s, g: int) -> float:
        return self.q.get((s, g), 0.0)


def meta_select(meta: MetaPolicy, s, rng: random.Random, allowed: Sequence[int] | None = None,
                greedy: bool = False) -> int:
    """Epsilon-greedy over goals; ties go to the lowest goal id."""
    goals = list(range(meta.n_goals)) if allowed is None else sorted(allowed)
    if not goals:
        raise ValueError("no goal to select")
    if not greedy and rng.random() < meta.epsilon:
        return goals[rng.randrange(len(goals))]
    return max(goals, key=lambda g: (meta.value(s, g), -g))


def meta_update(meta: MetaPolicy, s, goal: int, reward: float, s_next, terminal: bool = False,
                next_goals: Sequence[int] | None = None) -> None:
    """One-step Q-update with the option's accumulated external reward."""
    target = reward
    if not terminal:
        goals = range(meta.n_goals) if next_goals is None else next_goals
        target += meta.gamma * max((meta.value(s_next, g) for g in goals), default=0.0)
    old = meta.value(s, goal)
    meta.q[(s, goal)] = old + meta.alpha * (target - old)
