"""Episode loops: flat SORL, SORL with learned HTN methods, transfer and the
goal-based baseline, plus greedy evaluation on a fixed env-step grid."""

from __future__ import annotations

import logging
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from typing import Sequence

from .baseline import MetaPolicy, meta_select, meta_update
from .config import RunConfig
from .envs import make_env
from .htn import (PlannedMethod, Trace, applicable_instances, flatten, generate_method_models,
                  htn_solve, task_satisfied)
from .meta import (ActionOptionMap, ConsistencyError, RewardLedger, SuccessTracker, action_index,
                   exploring_index, generate_action_models, planning_goal)
from .meta import _AUTO
from .options import OptionSet, TabularPolicy, execute_option, load_options, replay
from .planner import ExternalPlannerError, PlanningProblem, search, solve_external
from .symbolic import StatePair

log = logging.getLogger(__name__)

CSV_COLUMNS = ("episode", "env_steps", "reward", "plan_quality", "n_actions", "n_options", "n_methods")


@dataclass
class EpisodeLog:
    episode: int
    env_steps: int
    reward: float
    plan_quality: float
    n_actions: int
    n_options: int
    n_methods: int
    sr: tuple = ()

    def row(self) -> tuple:
        return tuple(getattr(self, c) for c in CSV_COLUMNS)


@dataclass
class RunResult:
    algo: str
    seed: int
    logs: list = field(default_factory=list)
    evals: list = field(default_factory=list)  # (env_steps, mean greedy reward)
    vocab: object = None
    actions: list = field(default_factory=list)
    amap: dict = field(default_factory=dict)
    options: object = None
    ledger: object = None
    tracker: object = None
    methods: list = field(default_factory=list)
    plan: tuple = ()
    htn_plan: list = field(default_factory=list)
    best_quality: float = 0.0
    first_best_episode: int | None = None

    @property
    def env_steps(self) -> int:
        return self.logs[-1].env_steps if self.logs else 0

    def steps_to_eval(self, threshold: float) -> int | None:
        for steps, r in self.evals:
            if r >= threshold:
                return steps
        return None

    def episodes_to_quality(self, quality: float) -> int | None:
        for rec in self.logs:
            if rec.plan_quality >= quality:
                return rec.episode
        return None

    def auc(self, until: int | None = None) -> float:
        pts = [r for s, r in self.evals if until is None or s <= until]
        return sum(pts) / len(pts) if pts else 0.0


def _env_seed(seed: int) -> int:
    return seed * 7919 + 17


class _Learner:
    """State shared by all loops: environment, options, ledger, schedule."""

    algo = "sorl"

    def __init__(self, cfg: RunConfig, seed: int):
        self.cfg, self.seed = cfg, seed
        self.env = make_env(cfg.env, cfg.task, cfg.map_path or None, cfg.episode_step_cap, seed=_env_seed(seed))
        self.eval_env = make_env(cfg.env, cfg.task, cfg.map_path or None, cfg.episode_step_cap)
        self.vocab = self.env.vocab
        self.F = self.env.map_symbolic
        self.rng = random.Random(seed)
        self.options = OptionSet(partial(TabularPolicy, len(self.env.actions), cfg.alpha, cfg.gamma,
                                         cfg.eps_start, cfg.eps_end, cfg.eps_decay_steps))
        self.ledger = RewardLedger()
        self.tracker = SuccessTracker()
        self.actions: list = []
        self.amap = ActionOptionMap()
        self.exploring = None
        self.methods: list = []
        self.env_steps = 0
        self.episode = 0
        self.logs: list[EpisodeLog] = []
        self.evals: list[tuple[int, float]] = []
        self.next_eval = cfg.eval_interval
        self.best_quality = 0.0
        self.first_best_episode = None
        self.tasks = cfg.task_list()
        for t in self.tasks:
            self.vocab.check(t.require_pos | t.require_neg, f"task {t.name}")

    # -- model bookkeeping ---------------------------------------------------

    def regenerate(self, exploring=_AUTO) -> None:
        if exploring is _AUTO:
            exploring = exploring_index(self.tracker.ratios(len(self.ledger)), self.cfg.lam)
        self.exploring = exploring
        self.actions, self.amap, _ = generate_action_models(
            self.ledger, self.options, self.tracker, self.vocab, self.cfg.c, self.cfg.lam, self.exploring)
        self.check_invariants()

    def check_invariants(self) -> None:
        pairs = self.ledger.pairs()
        for i, a in enumerate(self.actions):
            sr = self.tracker.sr(i)
            if not 0.0 <= sr <= 1.0:
                raise ConsistencyError(f"success ratio of {a.name} out of range: {sr}")
            if i != self.exploring and a.gain != self.ledger.mean(pairs[i]):
                raise ConsistencyError(f"non-exploring action {a.name} carries an exploration bonus")
        if self.n_options() > len(self.actions):
            raise ConsistencyError("more active options than action models")

    def n_options(self) -> int:
        return len(set(self.amap.values()))

    def exploit_actions(self) -> list:
        pairs = self.ledger.pairs()
        return [a.with_gain(self.ledger.mean(pairs[i])) for i, a in enumerate(self.actions)]

    def plan(self, initial, threshold: float, actions):
        problem = PlanningProblem(initial, self.vocab, actions, threshold)
        if self.cfg.planner_path:
            try:
                return solve_external(problem, self.cfg.planner_path, self.cfg.planner_timeout)
            except ExternalPlannerError as e:
                log.warning("external planner failed (%s); using the internal solver", e)
        plan, stats = search(problem, self.cfg.node_budget)
        if not stats.optimal:
            log.warning("seed %d episode %d: node budget exhausted, using best plan found",
                        self.seed, self.episode)
        return plan

    def pair_name(self, pair: StatePair) -> str:
        return f"act_{self.ledger.pairs().index(pair)}"

    def credit(self, r_e: float, pair: StatePair) -> float:
        """External reward plus the bonus of every task the transition completes."""
        return r_e + sum(t.bonus for t in self.tasks
                         if task_satisfied(t, pair.after) and not task_satisfied(t, pair.before))

    def run_option(self, state, option, pre=None, learn=True, greedy=False, rng=None, env=None):
        outcome, state = execute_option(env or self.env, state, option, self.cfg.max_option_steps,
                                        rng or self.rng, phi=self.cfg.phi, learn=learn, greedy=greedy, pre=pre)
        return outcome, state

    # -- driver --------------------------------------------------------------

    def finish_episode(self, reward: float, quality: float, final_state) -> None:
        if final_state.steps != self._episode_steps:
            raise ConsistencyError(f"step accounting mismatch: env {final_state.steps}, "
                                   f"options {self._episode_steps}")
        self.env_steps += final_state.steps
        if quality > self.best_quality:
            self.best_quality, self.first_best_episode = quality, self.episode
        self.logs.append(EpisodeLog(self.episode, self.env_steps, reward, quality, len(self.actions),
                                    self.n_options(), len(self.methods),
                                    tuple(self.tracker.ratios(len(self.actions)))))
        while self.env_steps >= self.next_eval:
            self.evals.append((self.next_eval, self.evaluate()))
            self.next_eval += self.cfg.eval_interval

    def should_stop(self) -> bool:
        cfg = self.cfg
        if cfg.max_env_steps and self.env_steps >= cfg.max_env_steps:
            return True
        if cfg.stop_quality and self.best_quality >= cfg.stop_quality:
            return True
        if cfg.stop_eval_reward and self.evals and self.evals[-1][1] >= cfg.stop_eval_reward:
            return True
        return False

    def run(self) -> RunResult:
        limit = self.cfg.num_episodes or (10**9 if self.cfg.max_env_steps else self.cfg.episodes)
        while self.episode < limit and not self.should_stop():
            self.episode += 1
            self._episode_steps = 0
            self.run_episode()
        if self.logs:
            self.regenerate()
        return self.result()

    def result(self) -> RunResult:
        return RunResult(self.algo, self.seed, self.logs, self.evals, self.vocab, self.actions, self.amap,
                         self.options, self.ledger, self.tracker, self.methods,
                         tuple(self.incumbent()), list(getattr(self, "htn_prev", [])),
                         self.best_quality, self.first_best_episode)

    # -- greedy evaluation ---------------------------------------------------

    def eval_start(self, k: int):
        state = self.eval_env.reset(seed=self.seed * 1_000_003 + k)
        return state, random.Random(self.seed * 1_000_033 + k)

    def incumbent(self) -> tuple:
        return ()

    def evaluate(self) -> float:
        """Mean external reward of the greedy policy over fixed evaluation starts.

        The greedy policy follows the incumbent plan while its next step is
        applicable and otherwise replans from the current symbolic state
        (exploitation gains only). Options run with epsilon = 0, no learning.
        """
        actions = self.exploit_actions()
        by_name = {a.name: a for a in actions}
        replans: dict = {}
        base = tuple(n for n in self.incumbent() if n in by_name)
        total = 0.0
        for k in range(self.cfg.eval_episodes):
            state, rng = self.eval_start(k)
            steps, pos = base, 0
            while not state.terminal:
                s = self.F(state)
                if not (pos < len(steps) and by_name[steps[pos]].pre_pos == s):
                    if s not in replans:
                        plan = self.plan(s, 0.0, actions) if actions else None
                        replans[s] = plan.steps if plan else ()
                    steps, pos = replans[s], 0
                    if not steps:
                        break
                a = by_name[steps[pos]]
                pos += 1
                outcome, state = self.run_option(state, self.options[self.amap[a.name]], (a.pre_pos, a.pre_neg),
                                                 learn=False, greedy=True, rng=rng, env=self.eval_env)
                total += outcome.external_reward
                if not outcome.success:
                    break
        return total / self.cfg.eval_episodes


class SorlLearner(_Learner):
    """Planning and learning loop with a flat planner over learned action models."""

    algo = "sorl"

    def __init__(self, cfg, seed):
        super().__init__(cfg, seed)
        self.plan_steps: tuple = ()
        self.q = 0.0

    def run_episode(self) -> None:
        state = self.env.reset()
        initial = self.F(state)
        plan = self.schedule(initial)
        if plan is not None:
            self.plan_steps = plan.steps
        by_name = {a.name: a for a in self.actions}
        self.q, reward = 0.0, 0.0
        for name in self.plan_steps:
            a = by_name.get(name)
            if state.terminal or a is None:
                break
            outcome, state = self.run_option(state, self.options[self.amap[name]], (a.pre_pos, a.pre_neg))
            if outcome.pair is None:
                break  # initiation failed: drop to global exploration
            self._episode_steps += outcome.steps_used
            self.tracker.record(action_index(name), outcome.success)
            self.q += outcome.external_reward
            reward += outcome.external_reward
            if not outcome.success:
                break
            if outcome.pair.before != outcome.pair.after:
                self.ledger.append(outcome.pair, outcome.external_reward)
        quality = self.q
        extra, state = self.explore(state)
        self.finish_episode(reward + extra, quality, state)

    def incumbent(self) -> tuple:
        return self.plan_steps

    def schedule(self, initial):
        """Plan with the exploration bonus on the first under-explored action the
        planner can actually place; candidates it cannot reach are skipped."""
        goal = planning_goal(self.q)
        ratios = self.tracker.ratios(len(self.ledger))
        for i, r in enumerate(ratios):
            if r >= self.cfg.lam:
                continue
            self.regenerate(i)
            plan = self.plan(initial, goal, self.actions)
            if plan is not None and f"act_{i}" in plan.steps:
                return plan
        self.regenerate(None)
        return self.plan(initial, goal, self.actions) if self.actions else None

    def explore(self, state):
        reward = 0.0
        while not state.terminal:
            outcome, state = self.run_option(state, self.options.global_option)
            self._episode_steps += outcome.steps_used
            reward += outcome.external_reward
            if outcome.success:
                self.ledger.append(outcome.pair, outcome.external_reward)
        if self.cfg.replay_updates:
            for o in self.options:
                replay(o, self.cfg.replay_updates, self.rng)
        return reward, state


class HtnLearner(_Learner):
    """Planning and learning loop with learned HTN methods over the same action models."""

    algo = "sorl-htn"

    def __init__(self, cfg, seed):
        super().__init__(cfg, seed)
        self.pending: list[Trace] = []
        self.htn_prev: list[PlannedMethod] = []
        self.q = 0.0

    def incumbent(self) -> tuple:
        return tuple(flatten(self.htn_prev))

    def htn_plan(self, initial, actions):
        lookup = {a.name: a for a in actions}
        for k in range(len(self.tasks), 0, -1):
            plan = htn_solve(initial, self.vocab, lookup, self.methods, self.tasks[:k])
            if plan:
                return plan
        return None

    def record(self, outcome, trace_box: list) -> None:
        pair = outcome.pair
        if outcome.success and pair.before != pair.after:
            self.ledger.append(pair, self.credit(outcome.external_reward, pair))
            trace_box[-1].add(self.pair_name(pair), pair.after)
        elif pair.before != pair.after:
            trace_box.append(Trace(pair.after))  # unexplained change: start a new segment

    def run_episode(self) -> None:
        state = self.env.reset()
        initial = self.F(state)
        self.regenerate()
        lookup = {a.name: a for a in self.actions}
        for seg in self.pending:
            if len(seg):
                self.methods, _ = generate_method_models(seg, self.tasks, lookup, self.methods)
        self.pending = []
        plan = self.htn_plan(initial, self.actions) if self.actions else None
        if plan:
            self.htn_prev = plan
        segments = [Trace(initial)]
        self.q, reward = 0.0, 0.0
        for name in flatten(self.htn_prev):
            a = lookup.get(name)
            if state.terminal or a is None:
                break
            outcome, state = self.run_option(state, self.options[self.amap[name]], (a.pre_pos, a.pre_neg))
            if outcome.pair is None:
                break
            self._episode_steps += outcome.steps_used
            self.tracker.record(action_index(name), outcome.success)
            self.q += outcome.external_reward
            reward += outcome.external_reward
            self.record(outcome, segments)
            if not outcome.success:
                break
        quality = self.q

        while not state.terminal:
            s = self.F(state)
            cands = applicable_instances(s, self.actions)
            pick = self.rng.randrange(len(cands) + 1) if cands else 0
            if pick < len(cands):
                a = cands[pick]
                outcome, state = self.run_option(state, self.options[self.amap[a.name]], (a.pre_pos, a.pre_neg))
                self.tracker.record(action_index(a.name), outcome.success)
            else:
                outcome, state = self.run_option(state, self.options.global_option)
            self._episode_steps += outcome.steps_used
            reward += outcome.external_reward
            self.record(outcome, segments)
        self.pending = segments
        self.finish_episode(reward, quality, state)


class BaselineLearner(_Learner):
    """Meta Q-table over (symbolic state, goal) with frozen option goals."""

    algo = "hrl-baseline"

    def __init__(self, cfg, seed, goals: Sequence[tuple], n_actions: int | None = None):
        super().__init__(cfg, seed)
        if not goals:
            raise ValueError("the baseline needs a non-empty goal set")
        for pre_pos, pre_neg, eff_pos, eff_neg in goals:
            self.options.add(pre_pos, pre_neg, eff_pos, eff_neg)
        self.goals = list(self.options)
        self.n_source_actions = n_actions if n_actions is not None else len(self.goals)
        self.meta = MetaPolicy(len(self.goals), cfg.meta_alpha, cfg.meta_gamma, cfg.eps_start, cfg.eps_end,
                               cfg.meta_eps_decay)
        self.no_pre = (frozenset(), frozenset())

    def n_options(self) -> int:
        return len(self.goals)

    def regenerate(self, exploring=None) -> None:
        pass

    def allowed(self, s) -> list[int]:
        return [o.id for o in self.goals if not o.done(s)]

    def run_episode(self) -> None:
        self.actions = [None] * self.n_source_actions
        state = self.env.reset()
        s = self.F(state)
        reward = 0.0
        while not state.terminal:
            goals = self.allowed(s)
            if not goals:
                outcome, state = self.run_option(state, self.options.global_option)
            else:
                g = meta_select(self.meta, s, self.rng, goals)
                self.meta.steps += 1
                outcome, state = self.run_option(state, self.options[g], self.no_pre)
                s_next = self.F(state)
                meta_update(self.meta, s, g, outcome.external_reward, s_next, state.terminal,
                            self.allowed(s_next))
            self._episode_steps += outcome.steps_used
            reward += outcome.external_reward
            s = self.F(state)
        self.finish_episode(reward, reward, state)

    def evaluate(self) -> float:
        total = 0.0
        for k in range(self.cfg.eval_episodes):
            state, rng = self.eval_start(k)
            s = self.F(state)
            while not state.terminal:
                goals = self.allowed(s)
                if not goals:
                    break
                g = meta_select(self.meta, s, rng, goals, greedy=True)
                outcome, state = self.run_option(state, self.options[g], self.no_pre, learn=False,
                                                 greedy=True, rng=rng, env=self.eval_env)
                total += outcome.external_reward
                s2 = self.F(state)
                if s2 == s:
                    break
                s = s2
        return total / self.cfg.eval_episodes

    def result(self) -> RunResult:
        res = super().result()
        res.actions = []
        return res


# -- public entry points ------------------------------------------------------

def _seed_of(cfg: RunConfig, seed: int | None) -> int:
    return cfg.seeds[0] if seed is None else seed


def run_sorl(cfg: RunConfig, seed: int | None = None) -> RunResult:
    return SorlLearner(cfg, _seed_of(cfg, seed)).run()


def run_sorl_htn(cfg: RunConfig, seed: int | None = None) -> RunResult:
    return HtnLearner(cfg, _seed_of(cfg, seed)).run()


def run_transfer(cfg: RunConfig, snapshots: Sequence = (), seed: int | None = None) -> RunResult:
    learner = SorlLearner(cfg, _seed_of(cfg, seed))
    for path in snapshots:
        for o in load_options(path, learner.vocab):
            learner.options.adopt(o)
    learner.algo = "sorl-transfer"
    return learner.run()


def goals_from(result: RunResult) -> list[tuple]:
    return [(o.pre_pos, o.pre_neg, o.eff_pos, o.eff_neg) for o in result.options]


def run_baseline(cfg: RunConfig, seed: int | None = None, goals: Sequence[tuple] | None = None,
                 n_actions: int | None = None) -> RunResult:
    """Baseline run; without ``goals`` a SORL run on the same config supplies them."""
    seed = _seed_of(cfg, seed)
    if goals is None:
        src = run_sorl(cfg.replace(algo="sorl"), seed)
        goals, n_actions = goals_from(src), len(src.actions)
    return BaselineLearner(cfg, seed, goals, n_actions).run()


def run_one(cfg: RunConfig, seed: int, snapshots: Sequence = ()) -> RunResult:
    if snapshots:
        return run_transfer(cfg, snapshots, seed)
    if cfg.algo == "sorl":
        return run_sorl(cfg, seed)
    if cfg.algo == "sorl-htn":
        return run_sorl_htn(cfg, seed)
    return run_baseline(cfg, seed)


def run_seeds(cfg: RunConfig, snapshots: Sequence = (), workers: int | None = None) -> list[RunResult]:
    """One independent worker per seed; results come back in seed order."""
    seeds = list(cfg.seeds)
    if workers == 1 or len(seeds) == 1:
        return [run_one(cfg, s, snapshots) for s in seeds]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run_one, [cfg] * len(seeds), seeds, [tuple(snapshots)] * len(seeds)))
