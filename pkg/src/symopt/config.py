"""Run configuration: a flat ``key = value`` text file."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from .htn import Task

ALGOS = ("sorl", "sorl-htn", "hrl-baseline")
ENVS = ("office", "keydoor")
DEFAULT_EPISODES = {"office": 3000, "keydoor": 5000}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    algo: str = "sorl"
    env: str = "office"
    task: int = 1
    seeds: tuple = (0, 1, 2, 3, 4)
    num_episodes: int = 0  # 0 -> environment default
    max_env_steps: int = 0  # 0 -> unlimited
    c: float = 100.0
    lam: float = 0.95
    phi: float = 100.0
    task_bonus: float = 100.0
    alpha: float = 0.1
    gamma: float = 0.9
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_decay_steps: int = 50_000
    max_option_steps: int = 500
    episode_step_cap: int = 500
    replay_updates: int = 0
    node_budget: int = 1_000_000
    planner_path: str = ""
    planner_timeout: float = 30.0
    eval_interval: int = 5000
    eval_episodes: int = 10
    stop_quality: float = 0.0  # 0 -> never stop early
    stop_eval_reward: float = 0.0
    meta_alpha: float = 0.1
    meta_gamma: float = 0.9
    meta_eps_decay: int = 5000
    map_path: str = ""
    tasks: str = ""  # "Name:pos,pos:neg,neg;Name2:..."
    output_dir: str = "runs/out"

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        def need(cond, msg):
            if not cond:
                raise ConfigError(msg)

        need(self.algo in ALGOS, f"algo must be one of {ALGOS}, got {self.algo!r}")
        need(self.env in ENVS, f"env must be one of {ENVS}, got {self.env!r}")
        need(self.env != "office" or self.task in (1, 2, 3), "office task must be 1, 2 or 3")
        need(len(self.seeds) > 0, "at least one seed is required")
        need(self.num_episodes >= 0 and self.max_env_steps >= 0, "episode/step budgets must be >= 0")
        need(self.c >= 0, "c must be >= 0")
        need(0 < self.lam <= 1, "lam must be in (0, 1]")
        need(0 < self.alpha <= 1 and 0 < self.meta_alpha <= 1, "learning rates must be in (0, 1]")
        need(0 <= self.gamma < 1 and 0 <= self.meta_gamma < 1, "discounts must be in [0, 1)")
        need(0 <= self.eps_end <= self.eps_start <= 1, "need 0 <= eps_end <= eps_start <= 1")
        need(self.eps_decay_steps >= 0 and self.meta_eps_decay >= 0, "decay lengths must be >= 0")
        need(self.max_option_steps > 0 and self.episode_step_cap > 0, "step caps must be positive")
        need(self.replay_updates >= 0, "replay_updates must be >= 0")
        need(self.node_budget > 0, "node_budget must be positive")
        need(self.eval_interval > 0 and self.eval_episodes > 0, "evaluation settings must be positive")
        self.task_list()

    @property
    def episodes(self) -> int:
        return self.num_episodes or DEFAULT_EPISODES[self.env]

    def task_list(self) -> list[Task]:
        if not self.tasks:
            if self.env == "keydoor":
                return [Task("GetKey", {"has_key"}, bonus=self.task_bonus),
                        Task("OpenDoor", {"door_open"}, bonus=self.task_bonus)]
            req = {1: ["coffee"], 2: ["mail"], 3: ["coffee", "mail"]}[self.task]
            return [Task(f"Deliver{r.title()}", {f"delivered_{r}"}, bonus=self.task_bonus) for r in req]
        out = []
        for chunk in self.tasks.split(";"):
            parts = [p.strip() for p in chunk.split(":")]
            if not parts[0]:
                continue
            if len(parts) > 4:
                raise ConfigError(f"bad task definition {chunk!r}")
            pos = {p for p in (parts[1].split(",") if len(parts) > 1 else []) if p.strip()}
            neg = {p for p in (parts[2].split(",") if len(parts) > 2 else []) if p.strip()}
            try:
                bonus = float(parts[3]) if len(parts) > 3 and parts[3] else self.task_bonus
                out.append(Task(parts[0], {p.strip() for p in pos}, {p.strip() for p in neg}, bonus))
            except ValueError as e:
                raise ConfigError(f"bad task definition {chunk!r}: {e}") from None
        return out

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    def dumps(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if f.name == "seeds":
                v = ",".join(str(s) for s in v)
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"


def _coerce(name: str, raw: str, default):
    try:
        if isinstance(default, tuple):
            return tuple(int(s) for s in raw.replace(" ", "").split(",") if s)
        if isinstance(default, bool):
            return raw.lower() in ("1", "true", "yes")
        if isinstance(default, int):
            return int(float(raw)) if float(raw).is_integer() else int(raw)
        if isinstance(default, float):
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"{name}: cannot parse {raw!r} as {type(default).__name__}") from None


def parse_config(text: str, **overrides) -> RunConfig:
    defaults = RunConfig()
    known = {f.name: getattr(defaults, f.name) for f in dataclasses.fields(RunConfig)}
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in known:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        values[key] = _coerce(key, raw, known[key])
    values.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig(**values)


def load_config(path, **overrides) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    return parse_config(text, **overrides)


def default_config(**kw) -> RunConfig:
    return RunConfig(**{k: v for k, v in kw.items() if v is not None})


__all__ = ["ConfigError", "RunConfig", "default_config", "load_config", "parse_config", "field"]
