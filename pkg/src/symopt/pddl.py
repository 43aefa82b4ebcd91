"""PDDL text for learned domains, plus the readers needed to round-trip it.

Only the fragment we emit is supported: 0-ary predicates, grounded actions,
one numeric fluent ``quality`` increased by each action's gain.
"""

from __future__ import annotations

import re
from typing import AbstractSet, Iterable

from .symbolic import ActionModel, Vocabulary

DOMAIN_NAME = "sorl"
PROBLEM_NAME = "sorl-problem"


class PDDLParseError(ValueError):
    pass


class PlanParseError(ValueError):
    def __init__(self, lineno: int, line: str, reason: str):
        self.lineno = lineno
        super().__init__(f"line {lineno}: {reason}: {line.strip()!r}")


def fmt_real(x: float) -> str:
    s = f"{float(x):.6f}"
    return "0.000000" if s == "-0.000000" else s


def _literals(pos: Iterable[str], neg: Iterable[str]) -> list[str]:
    return [f"({p})" for p in pos] + [f"(not ({p}))" for p in neg]


def serialize_domain(vocab: Vocabulary, actions: Iterable[ActionModel]) -> str:
    lines = [
        f"(define (domain {DOMAIN_NAME})",
        "  (:requirements :strips :fluents)",
        "  (:predicates " + " ".join(f"({p})" for p in vocab) + ")",
        "  (:functions (quality))",
    ]
    for a in actions:
        vocab.check(a.props, a.name)
        pre = _literals(vocab.sort(a.pre_pos), vocab.sort(a.pre_neg))
        eff = _literals(vocab.sort(a.eff_pos), vocab.sort(a.eff_neg))
        eff.append(f"(increase (quality) {fmt_real(a.gain)})")
        lines.append(f"  (:action {a.name}")
        lines.append("    :parameters ()")
        lines.append("    :precondition (and " + " ".join(pre) + ")" if pre else "    :precondition (and)")
        lines.append("    :effect (and " + " ".join(eff) + "))")
    lines.append(")")
    return "\n".join(lines) + "\n"


def serialize_problem(initial: AbstractSet[str], q: float, vocab: Vocabulary | None = None) -> str:
    if vocab is not None:
        vocab.check(initial, "initial state")
        props = vocab.sort(initial)
    else:
        props = sorted(initial)
    init = " ".join([f"({p})" for p in props] + ["(= (quality) 0)"])
    return "\n".join([
        f"(define (problem {PROBLEM_NAME})",
        f"  (:domain {DOMAIN_NAME})",
        f"  (:init {init})",
        f"  (:goal (> (quality) {fmt_real(q)}))",
        "  (:metric maximize (quality))",
        ")",
    ]) + "\n"


# -- reading -----------------------------------------------------------------

_TOKEN_RE = re.compile(r"\(|\)|[^\s()]+")


def _sexpr(text: str):
    text = re.sub(r";[^\n]*", "", text)
    stack: list[list] = [[]]
    for tok in _TOKEN_RE.findall(text):
        if tok == "(":
            stack.append([])
        elif tok == ")":
            if len(stack) == 1:
                raise PDDLParseError("unbalanced ')'")
            done = stack.pop()
            stack[-1].append(done)
        else:
            stack[-1].append(tok.lower())
    if len(stack) != 1 or len(stack[0]) != 1:
        raise PDDLParseError("expected exactly one top-level expression")
    return stack[0][0]


def _conjuncts(expr) -> list:
    if isinstance(expr, list) and expr and expr[0] == "and":
        return expr[1:]
    return [expr]


def _split_literals(exprs, where: str):
    pos, neg, gain = [], [], None
    for e in exprs:
        if not isinstance(e, list) or not e:
            raise PDDLParseError(f"bad literal {e!r} in {where}")
        if e[0] == "not":
            if len(e) != 2 or not isinstance(e[1], list) or len(e[1]) != 1:
                raise PDDLParseError(f"bad negation {e!r} in {where}")
            neg.append(e[1][0])
        elif e[0] == "increase":
            if e[1:2] != [["quality"]] or len(e) != 3:
                raise PDDLParseError(f"bad numeric effect {e!r} in {where}")
            gain = float(e[2])
        elif len(e) == 1 and isinstance(e[0], str):
            pos.append(e[0])
        else:
            raise PDDLParseError(f"unsupported expression {e!r} in {where}")
    return pos, neg, gain


def parse_domain(text: str) -> tuple[Vocabulary, list[ActionModel]]:
    tree = _sexpr(text)
    if not tree or tree[0] != "define":
        raise PDDLParseError("domain must start with (define ...)")
    preds: list[str] = []
    actions: list[ActionModel] = []
    for section in tree[1:]:
        head = section[0]
        if head == ":predicates":
            preds = [p[0] for p in section[1:]]
        elif head == ":action":
            name = section[1]
            fields = dict(zip(section[2::2], section[3::2]))
            pre_pos, pre_neg, _ = _split_literals(_conjuncts(fields.get(":precondition", ["and"])), name)
            eff_pos, eff_neg, gain = _split_literals(_conjuncts(fields.get(":effect", ["and"])), name)
            actions.append(ActionModel(name, frozenset(pre_pos), frozenset(pre_neg),
                                       frozenset(eff_pos), frozenset(eff_neg), gain or 0.0))
    vocab = Vocabulary(preds)
    for a in actions:
        vocab.check(a.props, a.name)
    return vocab, actions


def parse_problem(text: str) -> tuple[frozenset[str], float]:
    tree = _sexpr(text)
    initial: list[str] = []
    q = None
    for section in tree[1:]:
        if section[0] == ":init":
            initial = [e[0] for e in section[1:] if len(e) == 1]
        elif section[0] == ":goal":
            g = section[1]
            if g[0] != ">" or g[1] != ["quality"]:
                raise PDDLParseError(f"unsupported goal {g!r}")
            q = float(g[2])
    if q is None:
        raise PDDLParseError("problem has no quality goal")
    return frozenset(initial), q


_STEP_RE = re.compile(r"^\s*(?:step\s+)?(\d+)\s*:\s*(.*?)\s*$", re.IGNORECASE)
_ACT_RE = re.compile(r"^act_\d+$", re.IGNORECASE)
_UNSOLVABLE = ("unsolvable", "no plan will solve it", "no solution")


def parse_external_plan(text: str) -> list[str]:
    """Extract ``<k>: ACT_<i>`` step lines from a Metric-FF style transcript."""
    lowered = text.lower()
    if any(marker in lowered for marker in _UNSOLVABLE):
        return []
    steps: list[str] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        m = _STEP_RE.match(line)
        if not m:
            continue
        k, rest = int(m.group(1)), m.group(2)
        if not _ACT_RE.match(rest):
            raise PlanParseError(lineno, line, "expected a single ACT_<i> name")
        if k != len(steps):
            raise PlanParseError(lineno, line, f"step {k} out of sequence (expected {len(steps)})")
        steps.append(rest.lower())
    return steps
