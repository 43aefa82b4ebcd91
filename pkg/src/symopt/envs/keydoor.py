"""KeyDoorWorld: a discrete stand-in for the first room of Montezuma's Revenge.

Ladders and doors are landmarks. The location proposition names the last
landmark the agent stood on, so walking from one ladder to another is a
single symbolic transition, as in the ladder-to-ladder action of the Atari
room.
"""

from __future__ import annotations

from typing import NamedTuple

from ..symbolic import Vocabulary
from .grid import ACTION_NAMES, GridMap, load_default_map
from .office import EnvError, StepResult

KEYDOOR_PROPS = ("at_middle_ladder", "at_left_ladder", "at_right_ladder", "at_right_door",
                 "at_left_door", "key_exists", "has_key", "door_open")


class KeyDoorState(NamedTuple):
    pos: tuple
    has_key: bool = False
    door_open: bool = False
    landmark: str | None = None
    steps: int = 0
    terminal: bool = False


class KeyDoorWorld:
    name = "keydoor"
    actions = ACTION_NAMES
    key_reward = 100.0
    door_reward = 300.0
    max_reward = 400.0

    def __init__(self, grid: GridMap | None = None, step_cap: int = 500, seed=None):
        self.grid = grid or load_default_map("keydoor")
        self.step_cap = step_cap
        self.vocab = Vocabulary(KEYDOOR_PROPS)
        ladders = self.grid.cells("ladder")
        doors = self.grid.cells("door")
        if len(ladders) != 3 or len(doors) != 2 or len(self.grid.cells("key")) != 1:
            raise ValueError("keydoor map needs three ladders, two doors and one key")
        if self.grid.start is None:
            raise ValueError("keydoor map needs a start cell 'S'")
        self.landmarks = {
            ladders[0]: "left_ladder",
            ladders[1]: "middle_ladder",
            ladders[2]: "right_ladder",
            doors[0]: "left_door",
            doors[1]: "right_door",
        }
        self.key_cell = self.grid.cells("key")[0]

    def reset(self, seed=None) -> KeyDoorState:
        return KeyDoorState(pos=self.grid.start, landmark=self.landmarks.get(self.grid.start))

    def step(self, state: KeyDoorState, action) -> StepResult:
        if state.terminal:
            raise EnvError("step() called on a terminal state")
        if isinstance(action, str):
            action = ACTION_NAMES.index(action)
        pos = self.grid.move(state.pos, action)
        has_key, door_open, landmark = state.has_key, state.door_open, state.landmark
        reward = 0.0
        if pos != state.pos:
            landmark = self.landmarks.get(pos, landmark)
            if pos == self.key_cell and not has_key:
                has_key = True
                reward = self.key_reward
            elif has_key and not door_open and self.grid.labels.get(pos) == "door":
                door_open = True
                reward = self.door_reward
        steps = state.steps + 1
        terminal = door_open or steps >= self.step_cap
        return StepResult(KeyDoorState(pos, has_key, door_open, landmark, steps, terminal), reward, terminal)

    def map_symbolic(self, state: KeyDoorState) -> frozenset:
        props = []
        if state.landmark is not None:
            props.append("at_" + state.landmark)
        props.append("has_key" if state.has_key else "key_exists")
        if state.door_open:
            props.append("door_open")
        return frozenset(props)

    @staticmethod
    def policy_key(state: KeyDoorState):
        return state[:4]
