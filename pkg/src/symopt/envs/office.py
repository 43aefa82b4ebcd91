"""Office World: fetch coffee and/or mail and bring it to the office."""

from __future__ import annotations

import random
from typing import NamedTuple

from ..symbolic import Vocabulary
from .grid import ACTION_NAMES, GridMap, load_default_map

OFFICE_PROPS = ("at_coffee", "at_mail", "at_office", "has_coffee", "has_mail",
                "delivered_coffee", "delivered_mail")

TASKS = {
    1: ("coffee",),
    2: ("mail",),
    3: ("coffee", "mail"),
}


class EnvError(RuntimeError):
    pass


class OfficeState(NamedTuple):
    pos: tuple
    has_coffee: bool = False
    has_mail: bool = False
    delivered_coffee: bool = False
    delivered_mail: bool = False
    steps: int = 0
    terminal: bool = False


class StepResult(NamedTuple):
    state: tuple
    reward: float
    terminal: bool


class OfficeWorld:
    name = "office"
    actions = ACTION_NAMES
    delivery_reward = 100.0

    def __init__(self, task: int = 1, grid: GridMap | None = None, step_cap: int = 500, seed=None):
        if task not in TASKS:
            raise ValueError(f"office task must be one of {sorted(TASKS)}, got {task}")
        self.task = task
        self.required = TASKS[task]
        self.grid = grid or load_default_map("office")
        self.step_cap = step_cap
        self.vocab = Vocabulary(OFFICE_PROPS)
        self.max_reward = self.delivery_reward * len(self.required)
        for marker in ("coffee", "mail", "office"):
            if not self.grid.cells(marker):
                raise ValueError(f"office map has no {marker} cell")
        self.start_cells = [c for c in self.grid.free_cells() if self.grid.label(c) != "office"]
        self.rng = random.Random(seed)

    def reset(self, seed=None) -> OfficeState:
        if seed is not None:
            self.rng = random.Random(seed)
        return OfficeState(pos=self.rng.choice(self.start_cells))

    def step(self, state: OfficeState, action) -> StepResult:
        if state.terminal:
            raise EnvError("step() called on a terminal state")
        if isinstance(action, str):
            action = ACTION_NAMES.index(action)
        pos = self.grid.move(state.pos, action)
        label = self.grid.labels.get(pos)
        hc, hm = state.has_coffee, state.has_mail
        dc, dm = state.delivered_coffee, state.delivered_mail
        reward = 0.0
        if pos != state.pos:
            if label == "coffee" and not hc and not dc:
                hc = True
            elif label == "mail" and not hm and not dm:
                hm = True
            elif label == "office":
                if hc:
                    hc, dc = False, True
                    if "coffee" in self.required:
                        reward += self.delivery_reward
                if hm:
                    hm, dm = False, True
                    if "mail" in self.required:
                        reward += self.delivery_reward
        steps = state.steps + 1
        done = (("coffee" not in self.required or dc) and ("mail" not in self.required or dm))
        terminal = done or steps >= self.step_cap
        nxt = OfficeState(pos, hc, hm, dc, dm, steps, terminal)
        return StepResult(nxt, reward, terminal)

    def map_symbolic(self, state: OfficeState) -> frozenset:
        props = []
        label = self.grid.labels.get(state.pos)
        if label in ("coffee", "mail", "office"):
            props.append("at_" + label)
        if state.has_coffee:
            props.append("has_coffee")
        if state.has_mail:
            props.append("has_mail")
        if state.delivered_coffee:
            props.append("delivered_coffee")
        if state.delivered_mail:
            props.append("delivered_mail")
        return frozenset(props)

    @staticmethod
    def policy_key(state: OfficeState):
        # everything but the step counter: options stay Markov when an effect
        # needs several pickups
        return state[:5]
