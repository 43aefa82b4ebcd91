"""Run artifacts: per-seed CSVs, cross-seed aggregates, SVG curves, ledgers."""

from __future__ import annotations

import csv
import io
import json
import statistics
from pathlib import Path
from typing import Sequence

from .meta import RewardLedger, SuccessTracker, dump_models
from .options import save_options
from .runner import CSV_COLUMNS, EpisodeLog, RunResult
from .symbolic import StatePair, Vocabulary

LEDGER_HEADER = "# symopt ledger v1"


class OutputError(OSError):
    pass


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, int):
        return str(v)
    return repr(float(v))


def _csv_text(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _write(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as e:
        raise OutputError(f"cannot write {path}: {e.strerror or e}") from None


def run_csv(logs: Sequence[EpisodeLog]) -> str:
    return _csv_text(CSV_COLUMNS, (rec.row() for rec in logs))


def eval_csv(evals: Sequence[tuple]) -> str:
    return _csv_text(("env_steps", "eval_reward"), evals)


def read_csv(path) -> list[dict]:
    with open(path, newline="") as f:
        return [{k: float(v) for k, v in row.items()} for row in csv.DictReader(f)]


def _mean_std(xs: Sequence[float]) -> tuple[float, float]:
    m = statistics.fmean(xs)
    return m, (statistics.stdev(xs) if len(xs) > 1 else 0.0)


def aggregate_rows(tables: Sequence[Sequence[Sequence[float]]], key_index: int = 0) -> list[tuple]:
    """Mean and sample std per column over the rows all tables share.

    Rows are matched by position; the key column (episode number or
    checkpoint) is copied from the first table.
    """
    n = min(len(t) for t in tables) if tables else 0
    out = []
    for i in range(n):
        rows = [t[i] for t in tables]
        rec = [rows[0][key_index]]
        for j in range(len(rows[0])):
            if j == key_index:
                continue
            rec.extend(_mean_std([float(r[j]) for r in rows]))
        out.append(tuple(rec))
    return out


def aggregate_header(columns: Sequence[str], key_index: int = 0) -> list[str]:
    head = [columns[key_index]]
    for j, c in enumerate(columns):
        if j != key_index:
            head += [f"{c}_mean", f"{c}_std"]
    return head


def aggregate_csv(results: Sequence[RunResult]) -> str:
    tables = [[rec.row() for rec in r.logs] for r in results]
    return _csv_text(aggregate_header(CSV_COLUMNS), aggregate_rows(tables))


def aggregate_eval_csv(results: Sequence[RunResult]) -> str:
    tables = [list(r.evals) for r in results]
    return _csv_text(aggregate_header(("env_steps", "eval_reward")), aggregate_rows(tables))


def plot_curves(curves: dict, path, title: str = "", ylabel: str = "greedy episode reward") -> None:
    """``curves`` maps label -> (steps, mean, std). Writes a standalone SVG."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "symopt"
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    for label, (xs, mean, std) in sorted(curves.items()):
        ax.plot(xs, mean, label=label)
        ax.fill_between(xs, [m - s for m, s in zip(mean, std)], [m + s for m, s in zip(mean, std)], alpha=0.2)
    ax.set_xlabel("environment steps")
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    if curves:
        ax.legend(loc="lower right")
    fig.tight_layout()
    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    _write(Path(path), buf.getvalue())


def curve_of(results: Sequence[RunResult]) -> tuple[list, list, list]:
    rows = aggregate_rows([list(r.evals) for r in results])
    if rows:
        return [r[0] for r in rows], [r[1] for r in rows], [r[2] for r in rows]
    rows = aggregate_rows([[(rec.env_steps, rec.reward) for rec in r.logs] for r in results])
    return [r[0] for r in rows], [r[1] for r in rows], [r[2] for r in rows]


def curve_from_csv(path) -> tuple[list, list, list]:
    rows = read_csv(path)
    if rows and "eval_reward_mean" in rows[0]:
        return ([r["env_steps"] for r in rows], [r["eval_reward_mean"] for r in rows],
                [r["eval_reward_std"] for r in rows])
    return ([r["env_steps_mean"] for r in rows], [r["reward_mean"] for r in rows],
            [r["reward_std"] for r in rows])


# -- ledger persistence --------------------------------------------------------

def save_ledger(path, ledger: RewardLedger, tracker: SuccessTracker, vocab: Vocabulary) -> None:
    body = {"vocab": list(vocab.props), "pairs": []}
    for i, pair in enumerate(ledger.pairs()):
        body["pairs"].append({"before": vocab.sort(pair.before), "after": vocab.sort(pair.after),
                              "rewards": ledger[pair], "sr_history": [int(b) for b in tracker._hist.get(i, ())]})
    _write(Path(path), LEDGER_HEADER + "\n" + json.dumps(body, indent=1) + "\n")


def load_ledger(path, vocab: Vocabulary | None = None):
    text = Path(path).read_text()
    header, _, rest = text.partition("\n")
    if header.strip() != LEDGER_HEADER:
        raise ValueError(f"{path}: not a ledger file")
    body = json.loads(rest)
    vocab = vocab or Vocabulary(body["vocab"])
    ledger, tracker = RewardLedger(), SuccessTracker()
    for i, rec in enumerate(body["pairs"]):
        vocab.check(rec["before"] + rec["after"], f"{path} pair {i}")
        pair = StatePair(frozenset(rec["before"]), frozenset(rec["after"]))
        for r in rec["rewards"]:
            ledger.append(pair, r)
        for b in rec["sr_history"]:
            tracker.record(i, bool(b))
    return vocab, ledger, tracker


# -- everything for one experiment ---------------------------------------------

def emit_outputs(results: Sequence[RunResult], out_dir, title: str = "", config_text: str = "") -> Path:
    out = Path(out_dir)
    if config_text:
        _write(out / "config.txt", config_text)
    for r in results:
        stem = f"seed_{r.seed}"
        _write(out / f"{stem}.csv", run_csv(r.logs))
        _write(out / f"{stem}_eval.csv", eval_csv(r.evals))
        if r.options is not None and r.vocab is not None:
            try:
                save_options(out / f"{stem}_options.txt", r.options, r.vocab)
            except OSError as e:
                raise OutputError(f"cannot write {out / f'{stem}_options.txt'}: {e}") from None
            if r.ledger is not None:
                save_ledger(out / f"{stem}_ledger.txt", r.ledger, r.tracker, r.vocab)
                _write(out / f"{stem}_models.txt",
                       dump_models(r.vocab, r.actions, r.amap, r.options, r.tracker, r.methods, r.ledger))
        _write(out / f"{stem}_plan.txt", "\n".join(r.plan) + ("\n" if r.plan else ""))
    if results:
        _write(out / "aggregate.csv", aggregate_csv(results))
        _write(out / "aggregate_eval.csv", aggregate_eval_csv(results))
        plot_curves({results[0].algo: curve_of(results)}, out / "learning_curve.svg", title)
    return out
