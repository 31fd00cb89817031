"""
Object-Level Semantics
The concrete CHR transition system: rule applications, built-in steps, bounded
exhaustive exploration and the joinability oracle used to confirm witnesses
"""

import itertools
import logging
from collections import deque
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Dict, Iterable, List, Optional, Sequence, Set, Tuple

from core.builtins import BuiltinTable, default_table
from core.program import Program, Rule, fresh_variant
from core.terms import (
    ERROR_STATE,
    FAILURE_STATE,
    Bag,
    ProperState,
    State,
    Term,
    Var,
    VarName,
    apply,
    format_store,
    make_state,
    match,
    term_vars,
)

if TYPE_CHECKING:
    from core.solver import Solver

logger = logging.getLogger(__name__)

DEFAULT_FUEL = 1000
MAX_STATES = 20000

# Oracle answers
JOINABLE = "joinable"
NOT_JOINABLE = "not_joinable"
UNKNOWN = "unknown"


@dataclass
class RuleApplication:
    """A fresh rule variant matched into a store, with the guard's proper substitution"""

    rule: Rule
    kept: Tuple[Term, ...]
    removed: Tuple[Term, ...]
    rest: Tuple[Term, ...]
    matcher: Dict[Var, Term]
    guard_bindings: Dict[Var, Term]

    def result(self) -> State:
        body = tuple(t.substitute(self.matcher) for t in self.rule.body)
        items = [t.substitute(self.guard_bindings) for t in self.kept + body + self.rest]
        return make_state(items)


@dataclass
class Derivation:
    """Explored transition graph rooted at a state"""

    root: State
    states: Dict[State, int] = field(default_factory=dict)
    edges: List[Tuple[State, str, State]] = field(default_factory=list)
    expanded: Set[State] = field(default_factory=set)
    truncated: bool = False
    cyclic: bool = False

    @property
    def exhausted(self) -> bool:
        return self.truncated or self.cyclic

    @property
    def complete(self) -> bool:
        """Every reachable state was found and expanded"""
        return not self.truncated

    def reachable(self) -> Set[State]:
        return set(self.states)

    def normal_forms(self) -> Set[State]:
        sources = {source for source, _, _ in self.edges}
        return {state for state in self.states if state not in sources and state in self.expanded}


def _choose(items: Sequence[Term], count: int) -> Iterable[Tuple[int, ...]]:
    """Ordered selections of distinct positions"""
    return itertools.permutations(range(len(items)), count)


def _reorient(bindings: Dict[Var, Term], protected: Set[Var]) -> Optional[Dict[Var, Term]]:
    """
    Turn a guard substitution binding head variables to local variables around

    Returns None when the substitution really instantiates a protected variable.
    """
    swap: Dict[Var, Term] = {}
    for var, image in bindings.items():
        if var not in protected:
            continue
        if not isinstance(image, Var) or image in protected or image in swap:
            return None
        swap[image] = var
    if not swap:
        return bindings
    result = {v: t.substitute(swap) for v, t in bindings.items() if v not in protected}
    result.update(swap)
    result = {v: t for v, t in result.items() if v != t}
    if any(v in protected for v in result):
        return None
    return result


def rule_applications(
    program: Program, state: State, builtins: Optional[BuiltinTable] = None
) -> List[RuleApplication]:
    """Every way a rule of the program applies to a proper state"""
    if not state.is_proper:
        return []
    table = builtins or default_table()
    store = state.store
    found: List[RuleApplication] = []
    for rule in program.rules:
        variant = fresh_variant(rule, "o")
        heads = variant.heads
        if len(heads) > len(store):
            continue
        rule_vars = set(term_vars(variant.heads + variant.guard + variant.body))
        for positions in _choose(store, len(heads)):
            matcher: Optional[Dict[Var, Term]] = {}
            for head, index in zip(heads, positions):
                matcher = match(head, store[index], matcher, rule_vars)
                if matcher is None:
                    break
            if matcher is None:
                continue
            guard = [g.substitute(matcher) for g in variant.guard]
            outcome = table.exe_seq(guard)
            if not outcome.is_proper:
                continue
            matched = [store[i] for i in positions]
            protected = set(term_vars(matched))
            guard_bindings = _reorient(dict(outcome.bindings), protected)
            if guard_bindings is None:
                continue
            kept_count = len(variant.kept)
            rest = tuple(t for i, t in enumerate(store) if i not in positions)
            found.append(
                RuleApplication(
                    variant,
                    tuple(matched[:kept_count]),
                    tuple(matched[kept_count:]),
                    rest,
                    matcher,
                    guard_bindings,
                )
            )
    return found


def successors(
    program: Program, state: State, builtins: Optional[BuiltinTable] = None
) -> List[Tuple[str, State]]:
    """
    Labelled successor states of a proper state

    Rule applications are labelled with the rule label, built-in steps with the
    executed call. Failure and error states have no successors.
    """
    if not state.is_proper:
        return []
    table = builtins or default_table()
    result: List[Tuple[str, State]] = []
    seen: Set[Tuple[str, State]] = set()

    def add(label: str, target: State):
        if (label, target) not in seen:
            seen.add((label, target))
            result.append((label, target))

    for application in rule_applications(program, state, table):
        add(application.rule.label, application.result())
    store = state.store
    for index, item in enumerate(store):
        if not table.is_builtin(item):
            continue
        rest = store[:index] + store[index + 1 :]
        outcome = table.exe(item)
        target = apply(outcome, rest)
        add(str(item), make_state(target) if outcome.is_proper else target)
    return result


def explore(
    program: Program,
    state: State,
    fuel: int = DEFAULT_FUEL,
    builtins: Optional[BuiltinTable] = None,
    max_states: int = MAX_STATES,
) -> Derivation:
    """
    Breadth-first exploration of every derivation from state

    States are memoized modulo renaming. A branch deeper than fuel steps, more than
    max_states states, or a cycle in the explored graph marks the derivation exhausted.
    """
    table = builtins or default_table()
    root = make_state(state.store) if state.is_proper else state
    derivation = Derivation(root)
    derivation.states[root] = 0
    queue = deque([root])
    while queue:
        current = queue.popleft()
        depth = derivation.states[current]
        steps = successors(program, current, table)
        if steps and depth >= fuel:
            derivation.truncated = True
            continue
        derivation.expanded.add(current)
        for label, target in steps:
            derivation.edges.append((current, label, target))
            if target in derivation.states:
                continue
            if len(derivation.states) >= max_states:
                derivation.truncated = True
                continue
            derivation.states[target] = depth + 1
            queue.append(target)
    if _has_cycle(derivation):
        derivation.cyclic = True
    if derivation.exhausted:
        logger.debug("Exploration from %s exhausted (%d states)", root, len(derivation.states))
    return derivation


def _has_cycle(derivation: Derivation) -> bool:
    graph: Dict[State, List[State]] = {}
    for source, _, target in derivation.edges:
        graph.setdefault(source, []).append(target)
    white, grey, black = 0, 1, 2
    colour = {state: white for state in derivation.states}
    for start in derivation.states:
        if colour[start] != white:
            continue
        stack = [(start, iter(graph.get(start, [])))]
        colour[start] = grey
        while stack:
            node, children = stack[-1]
            child = next(children, None)
            if child is None:
                colour[node] = black
                stack.pop()
            elif colour.get(child, white) == grey:
                return True
            elif colour.get(child, white) == white:
                colour[child] = grey
                stack.append((child, iter(graph.get(child, []))))
    return False


def normal_forms(
    program: Program, state: State, fuel: int = DEFAULT_FUEL, builtins: Optional[BuiltinTable] = None
) -> Tuple[Set[State], bool]:
    derivation = explore(program, state, fuel, builtins)
    return derivation.normal_forms(), derivation.exhausted


def query_state(goals: Iterable[Term]) -> ProperState:
    return make_state(goals)


# ---------------------------------------------------------------------------
# Equivalence and invariant membership of concrete states
# ---------------------------------------------------------------------------


def name_state(state: ProperState) -> Bag:
    """Meta-level name of a concrete store: variables become variable names"""
    naming = {v: VarName(v.name) for v in term_vars(state.store)}
    return Bag(tuple(t.substitute(naming) for t in state.store))


def sim_equiv(s1: State, s2: State, solver: Optional["Solver"] = None) -> bool:
    """s1 ~ s2 under the solver's equivalence; identity degenerates to variance"""
    if s1 == s2:
        return True
    if not (s1.is_proper and s2.is_proper) or solver is None or solver.equiv.is_identity:
        return False
    return solver.equiv_holds(name_state(s1), name_state(s2))


def inv_member(state: State, solver: "Solver") -> bool:
    """Whether a concrete state satisfies the invariant (special states never do)"""
    if not state.is_proper:
        return solver.invariant.trivial
    return solver.inv_holds(name_state(state))


def obj_joinable(
    program: Program,
    s1: State,
    s2: State,
    solver: Optional["Solver"] = None,
    fuel: int = DEFAULT_FUEL,
    builtins: Optional[BuiltinTable] = None,
) -> str:
    """Joinable, NotJoinable (both reachable sets complete and unrelated) or Unknown"""
    first = explore(program, s1, fuel, builtins)
    second = explore(program, s2, fuel, builtins)
    left = first.reachable()
    right = second.reachable()
    if left & right:
        return JOINABLE
    for a in left:
        for b in right:
            if sim_equiv(a, b, solver):
                return JOINABLE
    if first.states and second.states and first.complete and second.complete:
        return NOT_JOINABLE
    return UNKNOWN



# ---------------------------------------------------------------------------
# Trace rendering
# ---------------------------------------------------------------------------


def render_state(state: State) -> str:
    if not state.is_proper:
        return str(state)
    return format_store(state.store)


def render_trace(derivation: Derivation) -> str:
    """Edge list `sN label sM` followed by the table of states"""
    index = {state: f"s{i}" for i, state in enumerate(derivation.states)}
    lines = [f"{index[source]}  {label}  {index.get(target, 's?')}" for source, label, target in derivation.edges]
    lines.append("")
    lines.extend(f"{index[state]} = {render_state(state)}" for state in derivation.states)
    if derivation.exhausted:
        lines.append("(exhausted)")
    return "\n".join(lines)


__all__ = [
    "DEFAULT_FUEL",
    "ERROR_STATE",
    "FAILURE_STATE",
    "Derivation",
    "RuleApplication",
    "explore",
    "inv_member",
    "name_state",
    "normal_forms",
    "obj_joinable",
    "query_state",
    "render_trace",
    "rule_applications",
    "sim_equiv",
    "successors",
]
