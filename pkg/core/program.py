"""
CHR Program Model
Rules in generalized simpagation form, programs, variable classification and pretty printing
"""

import itertools
import logging
import threading
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Set, Tuple

from core.errors import ContractError
from core.terms import Atom, Compound, Int, Term, Var, format_term, term_vars

logger = logging.getLogger(__name__)

_fresh_counter = itertools.count(1)
_fresh_lock = threading.Lock()


def fresh_suffix() -> int:
    with _fresh_lock:
        return next(_fresh_counter)


@dataclass(frozen=True)
class Rule:
    """H1 \\ H2 <=> G | C with optional name"""

    kept: Tuple[Term, ...]
    removed: Tuple[Term, ...]
    guard: Tuple[Term, ...] = ()
    body: Tuple[Term, ...] = ()
    name: Optional[str] = None

    def __post_init__(self):
        if not self.kept and not self.removed:
            raise ContractError("a rule needs at least one head constraint")

    @property
    def heads(self) -> Tuple[Term, ...]:
        return self.kept + self.removed

    @property
    def kind(self) -> str:
        if not self.kept:
            return "simplification"
        if not self.removed:
            return "propagation"
        return "simpagation"

    @property
    def label(self) -> str:
        return self.name or "rule"

    def substitute(self, bindings) -> "Rule":
        return Rule(
            kept=tuple(t.substitute(bindings) for t in self.kept),
            removed=tuple(t.substitute(bindings) for t in self.removed),
            guard=tuple(t.substitute(bindings) for t in self.guard),
            body=tuple(t.substitute(bindings) for t in self.body),
            name=self.name,
        )

    def __str__(self):
        return format_rule(self)


@dataclass
class Program:
    """Ordered rules plus declared user-constraint signatures"""

    rules: List[Rule] = field(default_factory=list)
    constraints: Set[Tuple[str, int]] = field(default_factory=set)
    source: Optional[str] = None

    def rule(self, name: str) -> Rule:
        for rule in self.rules:
            if rule.name == name:
                return rule
        raise KeyError(name)

    def atoms(self) -> List[str]:
        """Constant symbols occurring in rules, in order of appearance"""
        found: Dict[str, None] = {}
        for rule in self.rules:
            for term in rule.heads + rule.guard + rule.body:
                _collect(term, found, "atom")
        return [name for name in found if name not in ("[]", "true")]

    def integers(self) -> List[int]:
        found: Dict[int, None] = {}
        for rule in self.rules:
            for term in rule.heads + rule.guard + rule.body:
                _collect(term, found, "int")
        return list(found)


def _collect(term: Term, found: Dict, kind: str):
    stack = [term]
    while stack:
        current = stack.pop()
        if kind == "atom" and isinstance(current, Atom):
            found.setdefault(current.name, None)
        elif kind == "int" and isinstance(current, Int):
            found.setdefault(current.value, None)
        elif isinstance(current, Compound):
            stack.extend(reversed(current.args))
        else:
            stack.extend(reversed(current.subterms()))


def head_vars(rule: Rule) -> List[Var]:
    return term_vars(rule.heads)


def local_vars(rule: Rule) -> List[Var]:
    heads = set(head_vars(rule))
    return [v for v in term_vars(rule.guard + rule.body) if v not in heads]


def fresh_variant(rule: Rule, tag: str = "") -> Rule:
    """Consistently rename every variable of the rule to a globally fresh one"""
    suffix = fresh_suffix()
    mapping = {v: Var(f"{v.name}#{tag}{suffix}") for v in term_vars(rule.heads + rule.guard + rule.body)}
    return rule.substitute(mapping)


def base_name(var: Var) -> str:
    """Source name of a variable renamed by fresh_variant"""
    return var.name.split("#", 1)[0]


def format_sequence(terms: Sequence[Term]) -> str:
    return ", ".join(format_term(t) for t in terms)


def format_rule(rule: Rule) -> str:
    prefix = f"{rule.name} @ " if rule.name else ""
    if rule.kept and rule.removed:
        head = f"{format_sequence(rule.kept)} \\ {format_sequence(rule.removed)}"
        arrow = "<=>"
    elif rule.kept:
        head = format_sequence(rule.kept)
        arrow = "==>"
    else:
        head = format_sequence(rule.removed)
        arrow = "<=>"
    guard = f"{format_sequence(rule.guard)} | " if rule.guard else ""
    body = format_sequence(rule.body) if rule.body else "true"
    return f"{prefix}{head} {arrow} {guard}{body}."


def format_program(program: Program) -> str:
    lines = []
    if program.constraints:
        decls = ", ".join(f"{name}/{arity}" for name, arity in sorted(program.constraints))
        lines.append(f":- chr_constraint {decls}.")
    lines.extend(format_rule(rule) for rule in program.rules)
    return "\n".join(lines) + ("\n" if lines else "")

