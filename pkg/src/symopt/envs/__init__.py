from .grid import ACTION_NAMES, GridMap, MapParseError, load_default_map, parse_map, render
from .keydoor import KeyDoorState, KeyDoorWorld
from .office import EnvError, OfficeState, OfficeWorld, StepResult


def make_env(name: str, task: int = 1, map_path=None, step_cap: int = 500, seed=None):
    grid = parse_map(open(map_path).read()) if map_path else None
    if name == "office":
        return OfficeWorld(task=task, grid=grid, step_cap=step_cap, seed=seed)
    if name == "keydoor":
        return KeyDoorWorld(grid=grid, step_cap=step_cap, seed=seed)
    raise ValueError(f"unknown environment {name!r}")


__all__ = [
    "ACTION_NAMES", "EnvError", "GridMap", "KeyDoorState", "KeyDoorWorld", "MapParseError",
    "OfficeState", "OfficeWorld", "StepResult", "load_default_map", "make_env", "parse_map", "render",
]
