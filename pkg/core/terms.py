"""
Term Core Module
First-order terms, proper/failure/error substitutions, unification with occurs-check,
one-way matching, object-level states and canonical variable renaming
"""

import logging
import re
from dataclasses import dataclass, field
from typing import Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

from core.errors import ContractError

logger = logging.getLogger(__name__)

# name -> (priority, type); only binary operators are used by the analyzer
INFIX_OPERATORS: Dict[str, Tuple[int, str]] = {
    "is": (700, "xfx"),
    "=": (700, "xfx"),
    "\\=": (700, "xfx"),
    "==": (700, "xfx"),
    "\\==": (700, "xfx"),
    "<": (700, "xfx"),
    ">": (700, "xfx"),
    "=<": (700, "xfx"),
    ">=": (700, "xfx"),
    "=:=": (700, "xfx"),
    "=\\=": (700, "xfx"),
    "+": (500, "yfx"),
    "-": (500, "yfx"),
    "*": (400, "yfx"),
    "/": (400, "yfx"),
    "//": (400, "yfx"),
    "mod": (400, "yfx"),
}

_PLAIN_ATOM = re.compile(r"^[a-z][A-Za-z0-9_]*$")


class Term:
    """Base class of object-level (and lifted meta-level) terms"""

    def variables(self) -> Iterator["Var"]:
        """Variables in left-to-right order, repeats included"""
        return iter(())

    def substitute(self, bindings: Mapping["Var", "Term"]) -> "Term":
        return self

    def subterms(self) -> Tuple["Term", ...]:
        """Immediate structural children (empty for atomic terms)"""
        return ()

    def rebuild(self, children: Sequence["Term"]) -> "Term":
        return self

    def same_shape(self, other: "Term") -> bool:
        """True when both terms have the same principal symbol and arity"""
        return self == other

    @property
    def is_ground(self) -> bool:
        return next(self.variables(), None) is None

    def __str__(self) -> str:
        return format_term(self)


@dataclass(frozen=True)
class Var(Term):
    name: str

    def variables(self):
        yield self

    def substitute(self, bindings):
        return bindings.get(self, self)

    def same_shape(self, other):
        return False


@dataclass(frozen=True)
class Atom(Term):
    name: str


@dataclass(frozen=True)
class Int(Term):
    value: int


@dataclass(frozen=True)
class Float(Term):
    value: float


@dataclass(frozen=True)
class Compound(Term):
    functor: str
    args: Tuple[Term, ...]

    def __post_init__(self):
        if not self.args:
            raise ContractError(f"compound {self.functor} needs at least one argument")

    @property
    def arity(self) -> int:
        return len(self.args)

    def variables(self):
        for arg in self.args:
            yield from arg.variables()

    def substitute(self, bindings):
        return Compound(self.functor, tuple(arg.substitute(bindings) for arg in self.args))

    def subterms(self):
        return self.args

    def rebuild(self, children):
        return Compound(self.functor, tuple(children))

    def same_shape(self, other):
        return (
            isinstance(other, Compound)
            and other.functor == self.functor
            and len(other.args) == len(self.args)
        )


@dataclass(frozen=True)
class ListCell(Term):
    head: Term
    tail: Term

    def variables(self):
        yield from self.head.variables()
        yield from self.tail.variables()

    def substitute(self, bindings):
        return ListCell(self.head.substitute(bindings), self.tail.substitute(bindings))

    def subterms(self):
        return (self.head, self.tail)

    def rebuild(self, children):
        return ListCell(children[0], children[1])

    def same_shape(self, other):
        return isinstance(other, ListCell)


@dataclass(frozen=True)
class VarName(Term):
    """Ground meta-level name of an object variable, written 'X'"""

    name: str

    def __str__(self):
        return f"'{self.name}'"


@dataclass(frozen=True)
class Bag(Term):
    """Multiset of terms with an optional residual multiset variable"""

    items: Tuple[Term, ...]
    rest: Optional[Var] = None

    def variables(self):
        for item in self.items:
            yield from item.variables()
        if self.rest is not None:
            yield self.rest

    def substitute(self, bindings):
        items = tuple(item.substitute(bindings) for item in self.items)
        rest = self.rest
        if rest is not None and rest in bindings:
            bound = bindings[rest]
            if isinstance(bound, Bag):
                items, rest = items + bound.items, bound.rest
            elif isinstance(bound, Var):
                rest = bound
        return Bag(items, rest)

    def __str__(self):
        text = format_store(self.items)
        if self.rest is None:
            return text
        return f"{text} ++ {self.rest.name}" if self.items else self.rest.name


EMPTY_LIST = Atom("[]")
TRUE = Atom("true")


def make_list(items: Iterable[Term], tail: Term = EMPTY_LIST) -> Term:
    result = tail
    for item in reversed(list(items)):
        result = ListCell(item, result)
    return result


def list_items(term: Term) -> Tuple[List[Term], Term]:
    """Split a (partial) list into its elements and its tail"""
    items = []
    while isinstance(term, ListCell):
        items.append(term.head)
        term = term.tail
    return items, term


def signature(term: Term) -> Tuple[str, int]:
    """Predicate key name/arity of a constraint"""
    if isinstance(term, Compound):
        return term.functor, len(term.args)
    if isinstance(term, Atom):
        return term.name, 0
    return type(term).__name__, 0


def term_vars(e: Union[Term, Iterable[Term]]) -> List[Var]:
    """Distinct variables in first-occurrence order"""
    terms = [e] if isinstance(e, Term) else list(e)
    seen: Dict[Var, None] = {}
    for term in terms:
        for var in term.variables():
            seen.setdefault(var, None)
    return list(seen)


# ---------------------------------------------------------------------------
# Substitutions
# ---------------------------------------------------------------------------


class Substitution:
    is_proper = False


@dataclass(frozen=True, eq=True)
class Proper(Substitution):
    """Idempotent finite map Var -> Term"""

    bindings: Mapping[Var, Term] = field(default_factory=dict)
    is_proper = True

    def __eq__(self, other):
        return isinstance(other, Proper) and dict(self.bindings) == dict(other.bindings)

    __hash__ = None

    def __repr__(self):
        inner = ", ".join(f"{v.name}/{format_term(t)}" for v, t in sorted(self.bindings.items(), key=lambda kv: kv[0].name))
        return "{" + inner + "}"


@dataclass(frozen=True)
class Failure(Substitution):
    def __repr__(self):
        return "failure"


@dataclass(frozen=True)
class Error(Substitution):
    def __repr__(self):
        return "error"


EMPTY = Proper({})
FAILURE = Failure()
ERROR = Error()


def compose(s1: Substitution, s2: Substitution) -> Substitution:
    """s1 followed by s2; the first special substitution met is absorbing"""
    if not s1.is_proper:
        return s1
    if not s2.is_proper:
        return s2
    result: Dict[Var, Term] = {}
    for var, term in s1.bindings.items():
        image = term.substitute(s2.bindings)
        if image != var:
            result[var] = image
    for var, term in s2.bindings.items():
        if var not in s1.bindings and term != var:
            result[var] = term
    return Proper(result)


def _walk(term: Term, bindings: Mapping[Var, Term]) -> Term:
    while isinstance(term, Var) and term in bindings:
        term = bindings[term]
    return term


def _occurs(var: Var, term: Term, bindings: Mapping[Var, Term]) -> bool:
    stack = [term]
    while stack:
        current = _walk(stack.pop(), bindings)
        if current == var:
            return True
        if isinstance(current, Var):
            continue
        children = current.subterms()
        if children:
            stack.extend(children)
        else:
            stack.extend(v for v in current.variables() if v != current)
    return False


def _resolve(bindings: Dict[Var, Term]) -> Dict[Var, Term]:
    resolved = {}
    for var, term in bindings.items():
        while any(v in bindings for v in term.variables()):
            term = term.substitute(bindings)
        resolved[var] = term
    return resolved


def unify_into(t1: Term, t2: Term, bindings: Dict[Var, Term]) -> bool:
    """Extend triangular bindings with an mgu of t1 and t2 (occurs-check on)"""
    stack = [(t1, t2)]
    while stack:
        a, b = stack.pop()
        a = _walk(a, bindings)
        b = _walk(b, bindings)
        if a == b:
            continue
        if isinstance(a, Var):
            if _occurs(a, b, bindings):
                return False
            bindings[a] = b
        elif isinstance(b, Var):
            if _occurs(b, a, bindings):
                return False
            bindings[b] = a
        elif a.subterms() and a.same_shape(b):
            stack.extend(zip(a.subterms(), b.subterms()))
        else:
            return False
    return True


def unify(t1: Term, t2: Term) -> Substitution:
    """Most general unifier of t1 and t2, or FAILURE; never ERROR"""
    bindings: Dict[Var, Term] = {}
    if unify_into(t1, t2, bindings):
        return Proper(_resolve(bindings))
    return FAILURE


def unify_all(pairs: Iterable[Tuple[Term, Term]]) -> Substitution:
    bindings: Dict[Var, Term] = {}
    for a, b in pairs:
        if not unify_into(a, b, bindings):
            return FAILURE
    return Proper(_resolve(bindings))


def match(
    pattern: Term,
    term: Term,
    bindings: Optional[Dict[Var, Term]] = None,
    pattern_vars: Optional[Iterable[Var]] = None,
) -> Optional[Dict[Var, Term]]:
    """
    One-way matching: bind variables of pattern so that it becomes term

    Args:
        pattern: Term whose variables may be bound
        term: Term that is never instantiated
        bindings: Existing bindings to extend (copied)
        pattern_vars: Restrict bindable variables (others must match literally)

    Returns:
        Extended bindings, or None when the term is not an instance
    """
    result = dict(bindings or {})
    bindable = set(pattern_vars) if pattern_vars is not None else None
    stack = [(pattern, term)]
    while stack:
        p, t = stack.pop()
        if isinstance(p, Var) and (bindable is None or p in bindable):
            bound = result.get(p)
            if bound is None:
                result[p] = t
            elif bound != t:
                return None
        elif p == t:
            continue
        elif p.subterms() and p.same_shape(t):
            stack.extend(zip(p.subterms(), t.subterms()))
        else:
            return None
    return result


# ---------------------------------------------------------------------------
# Object-level states
# ---------------------------------------------------------------------------


class State:
    is_proper = False


@dataclass(frozen=True)
class ProperState(State):
    """Multiset of constraints in canonical presentation (see make_state)"""

    store: Tuple[Term, ...]
    is_proper = True

    def __str__(self):
        return format_store(self.store)


@dataclass(frozen=True)
class FailureState(State):
    def __str__(self):
        return "failure"


@dataclass(frozen=True)
class ErrorState(State):
    def __str__(self):
        return "error"


FAILURE_STATE = FailureState()
ERROR_STATE = ErrorState()


def make_state(items: Iterable[Term]) -> ProperState:
    """Proper state identified modulo variable renaming"""
    return ProperState(canonical_store(items))


def special_state(s: Substitution) -> State:
    return FAILURE_STATE if isinstance(s, Failure) else ERROR_STATE


def apply(s: Substitution, e):
    """
    Apply a substitution to a term, a multiset of terms or a state

    Failure and error map multisets and proper states to the failure/error state;
    applying them to a bare term is outside the contract.
    """
    if isinstance(e, Term):
        if not s.is_proper:
            raise ContractError(f"cannot apply {s!r} to the term {format_term(e)}")
        return e.substitute(s.bindings)
    if isinstance(e, State):
        if not e.is_proper:
            return e
        if not s.is_proper:
            return special_state(s)
        return make_state(t.substitute(s.bindings) for t in e.store)
    items = tuple(e)
    if not s.is_proper:
        return special_state(s)
    return tuple(t.substitute(s.bindings) for t in items)


# ---------------------------------------------------------------------------
# Canonical renaming
# ---------------------------------------------------------------------------


def canonical_var(index: int) -> Var:
    return Var(f"_{index}")


def rename_by_occurrence(terms: Sequence[Term], fixed: Iterable[Var] = ()) -> Tuple[Term, ...]:
    """Rename non-fixed variables to _0, _1, ... by first occurrence"""
    keep = set(fixed)
    mapping: Dict[Var, Term] = {}
    for var in term_vars(terms):
        if var not in keep and var not in mapping:
            mapping[var] = canonical_var(len(mapping))
    return tuple(t.substitute(mapping) for t in terms)


def blind_text(term: Term, fixed: Iterable[Var] = ()) -> str:
    """Rendering with renamable variables hidden; used as a sort key"""
    keep = set(fixed)
    hidden = {v: Var("_") for v in term.variables() if v not in keep}
    return format_term(term.substitute(hidden))


def _shape_key(term: Term, fixed=()) -> Tuple:
    name, arity = signature(term)
    return (name, arity, blind_text(term, fixed))


def canonical_store(items: Iterable[Term], fixed: Iterable[Var] = ()) -> Tuple[Term, ...]:
    """
    Canonical presentation of a multiset of terms modulo renaming

    Items are sorted by predicate, arity and variable-blind rendering. Within a group
    of equal shape the order with the lexicographically least renamed rendering wins;
    it is built one position at a time, keeping every partial order that ties.
    Tied items whose new variables occur nowhere else are interchangeable, so only
    one of them is followed.
    """
    keep = set(fixed)
    items = list(items)
    shapes = [_shape_key(t, keep) for t in items]
    occurs = [set(t.variables()) - keep for t in items]
    frontier = [((), {}, tuple(range(len(items))))]
    for _ in range(len(items)):
        best_text = None
        expanded: Dict[Tuple, Tuple] = {}
        for chosen, mapping, remaining in frontier:
            shape = min(shapes[i] for i in remaining)
            private_seen = set()
            for i in remaining:
                if shapes[i] != shape:
                    continue
                renamed, extended = _rename_next(items[i], mapping, keep)
                text = format_term(renamed)
                if best_text is not None and text > best_text:
                    continue
                rest = tuple(j for j in remaining if j != i)
                new_vars = occurs[i] - set(mapping)
                if not any(new_vars & occurs[j] for j in rest):
                    if text in private_seen:
                        continue
                    private_seen.add(text)
                if best_text is None or text < best_text:
                    best_text, expanded = text, {}
                live = frozenset((v, w) for v, w in extended.items() if any(v in occurs[j] for j in rest))
                expanded.setdefault((rest, live), (chosen + (renamed,), extended, rest))
        frontier = list(expanded.values())
    return frontier[0][0]


def _rename_next(term: Term, mapping: Dict[Var, Term], keep) -> Tuple[Term, Dict[Var, Term]]:
    extended = dict(mapping)
    for var in term_vars(term):
        if var not in keep and var not in extended:
            extended[var] = canonical_var(len(extended))
    return term.substitute(extended), extended


def canonical_rename(e: Union[Term, Iterable[Term]]):
    """Variables renamed to _0, _1, ... by first occurrence; multisets are sorted first"""
    if isinstance(e, Term):
        return rename_by_occurrence([e])[0]
    return canonical_store(e)


def variants(t1: Union[Term, Iterable[Term]], t2: Union[Term, Iterable[Term]]) -> bool:
    return canonical_rename(t1) == canonical_rename(t2)


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------


def format_atom(name: str) -> str:
    if _PLAIN_ATOM.match(name) or name in ("[]", "{}", "!", ";"):
        return name
    if all(ch in "+-*/\\^<>=~:.?@#&$" for ch in name):
        return name
    escaped = name.replace("\\", "\\\\").replace("'", "\\'")
    return f"'{escaped}'"


def format_term(term: Term, max_priority: int = 999) -> str:
    """Render a term in Prolog syntax"""
    if isinstance(term, Var):
        return term.name
    if isinstance(term, Atom):
        return format_atom(term.name)
    if isinstance(term, Int):
        return str(term.value)
    if isinstance(term, Float):
        return repr(term.value)
    if isinstance(term, ListCell):
        items, tail = list_items(term)
        inner = ",".join(format_term(item) for item in items)
        if tail != EMPTY_LIST:
            inner += "|" + format_term(tail)
        return f"[{inner}]"
    if isinstance(term, Compound):
        if len(term.args) == 2 and term.functor in INFIX_OPERATORS:
            priority, kind = INFIX_OPERATORS[term.functor]
            left_max = priority if kind == "yfx" else priority - 1
            left = format_term(term.args[0], left_max)
            right = format_term(term.args[1], priority - 1)
            if term.functor.isalpha():
                text = f"{left} {term.functor} {right}"
            else:
                separator = " " if right.startswith("-") or left.endswith(("<", ">", "=")) else ""
                text = f"{left}{term.functor}{separator}{right}"
            return f"({text})" if priority > max_priority else text
        args = ",".join(format_term(arg) for arg in term.args)
        return f"{format_atom(term.functor)}({args})"
    return term.__str__() if type(term).__str__ is not Term.__str__ else repr(term)


def format_store(items: Iterable[Term]) -> str:
    return "{" + ", ".join(format_term(t) for t in items) + "}"
