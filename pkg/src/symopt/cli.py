"""Command line: symopt {train,transfer,export-pddl,dump-models,plot,selftest}."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import ConfigError, RunConfig, default_config, load_config
from .envs import make_env
from .meta import generate_action_models
from .options import OptionSet, SnapshotError, load_options
from .outputs import OutputError, curve_from_csv, emit_outputs, load_ledger, plot_curves
from .pddl import serialize_domain, serialize_problem
from .symbolic import VocabularyError

EXIT_OK, EXIT_CONFIG, EXIT_SELFTEST = 0, 2, 3

log = logging.getLogger("symopt")


def _seeds(text: str) -> tuple:
    try:
        return tuple(int(s) for s in text.split(",") if s.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad seed list {text!r}") from None


def _run_args(p: argparse.ArgumentParser, full: bool = True) -> None:
    p.add_argument("--config", help="key = value run configuration file")
    p.add_argument("--env", choices=["office", "keydoor"])
    p.add_argument("--task", type=int)
    if not full:
        return
    p.add_argument("--algo", choices=["sorl", "sorl-htn", "hrl-baseline"])
    p.add_argument("--seeds", type=_seeds, help="comma separated, e.g. 0,1,2")
    p.add_argument("--episodes", type=int, dest="num_episodes")
    p.add_argument("--max-steps", type=int, dest="max_env_steps", help="environment step budget per seed")
    p.add_argument("--out", dest="output_dir")
    p.add_argument("--workers", type=int, help="parallel seed workers (default: one per CPU)")


def _config(args) -> RunConfig:
    keys = ("algo", "env", "task", "seeds", "num_episodes", "max_env_steps", "output_dir")
    over = {k: getattr(args, k, None) for k in keys}
    if args.config:
        return load_config(args.config, **over)
    return default_config(**over)


def cmd_train(args, snapshots=()) -> int:
    from .runner import run_seeds

    cfg = _config(args)
    log.info("running %s on %s (task %d), seeds %s", cfg.algo, cfg.env, cfg.task, list(cfg.seeds))
    results = run_seeds(cfg, snapshots, workers=args.workers or (1 if len(cfg.seeds) == 1 else None))
    label = "sorl-transfer" if snapshots else cfg.algo
    out = emit_outputs(results, cfg.output_dir, title=f"{label} / {cfg.env} task {cfg.task}",
                       config_text=cfg.dumps())
    for r in results:
        evals = f", final greedy reward {r.evals[-1][1]:g}" if r.evals else ""
        print(f"seed {r.seed}: {len(r.logs)} episodes, {r.env_steps} steps, "
              f"best plan quality {r.best_quality:g}{evals}")
    print(f"outputs written to {out}")
    return EXIT_OK


def cmd_transfer(args) -> int:
    if not args.snapshot:
        raise ConfigError("transfer needs at least one --snapshot")
    return cmd_train(args, tuple(args.snapshot))


def _learned(args):
    cfg = _config(args)
    env = make_env(cfg.env, cfg.task, cfg.map_path or None, cfg.episode_step_cap)
    run_dir = Path(args.run_dir)
    ledger_path = run_dir / f"seed_{args.seed}_ledger.txt"
    if not ledger_path.exists():
        raise ConfigError(f"no ledger at {ledger_path}; run `symopt train` first")
    vocab, ledger, tracker = load_ledger(ledger_path, env.vocab)
    options = OptionSet()
    snap = run_dir / f"seed_{args.seed}_options.txt"
    if snap.exists():
        for o in load_options(snap, vocab):
            options.adopt(o)
    kw = {"exploring": None} if args.exploit else {}
    actions, amap, options = generate_action_models(ledger, options, tracker, vocab, cfg.c, cfg.lam, **kw)
    return cfg, env, vocab, ledger, tracker, actions, amap, options


def cmd_export_pddl(args) -> int:
    cfg, env, vocab, *_rest, actions, _amap, _opts = _learned(args)
    initial = env.map_symbolic(env.reset(seed=args.seed))
    out = Path(args.pddl_dir or args.run_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / f"seed_{args.seed}_domain.pddl").write_text(serialize_domain(vocab, actions))
    (out / f"seed_{args.seed}_problem.pddl").write_text(serialize_problem(initial, args.quality, vocab))
    print(f"wrote {out / f'seed_{args.seed}_domain.pddl'} and {out / f'seed_{args.seed}_problem.pddl'}")
    return EXIT_OK


def cmd_dump_models(args) -> int:
    from .meta import dump_models

    cfg, env, vocab, ledger, tracker, actions, amap, options = _learned(args)
    sys.stdout.write(dump_models(vocab, actions, amap, options, tracker, ledger=ledger))
    return EXIT_OK


def cmd_plot(args) -> int:
    curves = {}
    for i, d in enumerate(args.run_dirs):
        d = Path(d)
        src = d / "aggregate_eval.csv"
        if not src.exists() or src.stat().st_size == 0 or len(src.read_text().splitlines()) < 2:
            src = d / "aggregate.csv"
        if not src.exists():
            raise ConfigError(f"{d} has no aggregate CSV")
        label = args.labels[i] if args.labels and i < len(args.labels) else d.name
        curves[label] = curve_from_csv(src)
    plot_curves(curves, args.out, args.title or "")
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_selftest(args) -> int:
    from .selftest import SUITES, run_all

    unknown = [s for s in args.suite if s not in SUITES]
    if unknown:
        raise ConfigError(f"unknown suite(s) {unknown}; choose from {sorted(SUITES)}")
    failed = 0
    for r in run_all(args.suite or None):
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.detail} ({r.seconds:.2f}s)")
        failed += not r.passed
    return EXIT_SELFTEST if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="symopt", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="run an experiment over all configured seeds")
    _run_args(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("transfer", help="like train, with options pre-seeded from snapshots")
    _run_args(p)
    p.add_argument("--snapshot", action="append", help="option snapshot file (repeatable)")
    p.set_defaults(func=cmd_transfer)

    for name, func, helptext in (("export-pddl", cmd_export_pddl, "write the learned domain and a problem"),
                                 ("dump-models", cmd_dump_models, "print learned action models and options")):
        p = sub.add_parser(name, help=helptext)
        _run_args(p, full=False)
        p.add_argument("--run-dir", required=True, help="output directory of a finished run")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--exploit", action="store_true", help="omit the exploration bonus from gains")
        if name == "export-pddl":
            p.add_argument("--quality", type=float, default=0.0, help="goal threshold q in quality > q")
            p.add_argument("--out", dest="pddl_dir", help="directory for the .pddl files (default: the run directory)")
        p.set_defaults(func=func)

    p = sub.add_parser("plot", help="overlay learning curves of finished runs as one SVG")
    p.add_argument("run_dirs", nargs="+")
    p.add_argument("--labels", nargs="*")
    p.add_argument("--title")
    p.add_argument("--out", default="learning_curves.svg")
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("selftest", help="run the oracle suites")
    p.add_argument("suite", nargs="*", help="semantics, planner and/or pddl (default: all)")
    p.set_defaults(func=cmd_selftest)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (SnapshotError, VocabularyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except OutputError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
