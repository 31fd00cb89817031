"""
Built-in Predicates Module
Exe semantics of Prolog-style built-ins: evaluation to proper, failure or error substitutions
"""

import logging
import math
from abc import ABC, abstractmethod
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

from core.errors import UnknownBuiltinError
from core.terms import (
    EMPTY,
    ERROR,
    FAILURE,
    Compound,
    Float,
    Int,
    Substitution,
    Term,
    Var,
    apply,
    compose,
    signature,
    unify,
)

logger = logging.getLogger(__name__)

Number = Union[int, float]

ARITHMETIC_FUNCTORS = {"+", "-", "*", "/", "//", "mod"}

# Templates used by the analyzer unless overridden from the command line
CORE_BUILTINS = ["=", "is", "<", "=<", ">", ">=", "==", "var", "nonvar", "ground"]


def eval_arith(term: Term) -> Optional[Number]:
    """
    Evaluate a ground arithmetic expression

    Returns:
        The integer or float value, or None when evaluation raises an
        instantiation, type, zero-division or float overflow error
    """
    if isinstance(term, Int):
        return term.value
    if isinstance(term, Float):
        return term.value
    if isinstance(term, Compound) and term.functor in ARITHMETIC_FUNCTORS:
        if len(term.args) == 1 and term.functor == "-":
            value = eval_arith(term.args[0])
            return None if value is None else -value
        if len(term.args) == 1 and term.functor == "+":
            return eval_arith(term.args[0])
        if len(term.args) != 2:
            return None
        left = eval_arith(term.args[0])
        right = eval_arith(term.args[1])
        if left is None or right is None:
            return None
        return _binary(term.functor, left, right)
    # Variables, atoms, lists and other compounds cannot be evaluated
    return None


def _binary(op: str, left: Number, right: Number) -> Optional[Number]:
    try:
        value = _apply_operator(op, left, right)
    except OverflowError:
        return None
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def _apply_operator(op: str, left: Number, right: Number) -> Optional[Number]:
    if op == "+":
        return left + right
    if op == "-":
        return left - right
    if op == "*":
        return left * right
    if op == "/":
        if right == 0:
            return None
        if isinstance(left, int) and isinstance(right, int) and left % right == 0:
            return left // right
        return left / right
    if op == "//":
        if not (isinstance(left, int) and isinstance(right, int)) or right == 0:
            return None
        quotient = abs(left) // abs(right)
        return quotient if (left >= 0) == (right >= 0) else -quotient
    if op == "mod":
        if not (isinstance(left, int) and isinstance(right, int)) or right == 0:
            return None
        return left % right
    return None


def number_term(value: Number) -> Term:
    if isinstance(value, float) and not math.isfinite(value):
        raise ValueError(f"non-finite arithmetic result {value}")
    return Int(value) if isinstance(value, int) else Float(value)


class Builtin(ABC):
    """Base class for built-in predicates"""

    def __init__(self, name: str, arity: int):
        self.name = name
        self.arity = arity

    @property
    def key(self) -> Tuple[str, int]:
        return self.name, self.arity

    @abstractmethod
    def execute(self, args: Sequence[Term]) -> Substitution:
        """Exe of one call: a proper substitution, FAILURE or ERROR"""
        pass

    def __repr__(self):
        return f"{self.name}/{self.arity}"


class UnifyBuiltin(Builtin):
    """=/2, most general unifier"""

    def __init__(self):
        super().__init__("=", 2)

    def execute(self, args):
        return unify(args[0], args[1])


class NotUnifiableBuiltin(Builtin):
    """\\=/2"""

    def __init__(self):
        super().__init__("\\=", 2)

    def execute(self, args):
        return FAILURE if unify(args[0], args[1]).is_proper else EMPTY


class IsBuiltin(Builtin):
    """is/2, arithmetic evaluation of the right-hand side"""

    def __init__(self):
        super().__init__("is", 2)

    def execute(self, args):
        value = eval_arith(args[1])
        if value is None:
            return ERROR
        try:
            result = number_term(value)
        except ValueError:
            return ERROR
        return unify(args[0], result)


class CompareBuiltin(Builtin):
    """Arithmetic comparison; both sides are evaluated first"""

    OPERATORS = {
        "<": lambda a, b: a < b,
        "=<": lambda a, b: a <= b,
        ">": lambda a, b: a > b,
        ">=": lambda a, b: a >= b,
        "=:=": lambda a, b: a == b,
        "=\\=": lambda a, b: a != b,
    }

    def __init__(self, name: str):
        super().__init__(name, 2)
        self.test = self.OPERATORS[name]

    def execute(self, args):
        left = eval_arith(args[0])
        right = eval_arith(args[1])
        if left is None or right is None:
            return ERROR
        return EMPTY if self.test(left, right) else FAILURE


class IdenticalBuiltin(Builtin):
    """==/2 and \\==/2, syntactic identity without binding"""

    def __init__(self, negated: bool = False):
        super().__init__("\\==" if negated else "==", 2)
        self.negated = negated

    def execute(self, args):
        same = args[0] == args[1]
        return EMPTY if same != self.negated else FAILURE


class TypeTestBuiltin(Builtin):
    """var/1, nonvar/1 and ground/1"""

    def __init__(self, name: str):
        super().__init__(name, 1)

    def execute(self, args):
        term = args[0]
        if self.name == "var":
            ok = isinstance(term, Var)
        elif self.name == "nonvar":
            ok = not isinstance(term, Var)
        else:
            ok = term.is_ground
        return EMPTY if ok else FAILURE


class BuiltinTable:
    """Registry of built-in predicates keyed by name/arity"""

    def __init__(self, builtins: Optional[Iterable[Builtin]] = None):
        self.builtins: Dict[Tuple[str, int], Builtin] = {}
        for builtin in builtins if builtins is not None else _catalogue():
            self.register(builtin)

    def register(self, builtin: Builtin):
        """Add or replace a built-in"""
        self.builtins[builtin.key] = builtin

    def is_builtin(self, term: Term) -> bool:
        return signature(term) in self.builtins

    def is_builtin_name(self, name: str, arity: int) -> bool:
        return (name, arity) in self.builtins

    def names(self) -> List[str]:
        return [name for name, _ in self.builtins]

    def get(self, name: str, arity: int) -> Builtin:
        builtin = self.builtins.get((name, arity))
        if builtin is None:
            raise UnknownBuiltinError(f"unknown built-in {name}/{arity}")
        return builtin

    def exe(self, call: Term) -> Substitution:
        """Exe(b) for a single built-in call"""
        name, arity = signature(call)
        builtin = self.get(name, arity)
        args = call.args if isinstance(call, Compound) else ()
        return builtin.execute(args)

    def exe_seq(self, calls: Sequence[Term]) -> Substitution:
        """
        Exe of a sequence, left to right

        Bindings of earlier calls are applied to later ones; the first failure
        or error is returned unchanged.
        """
        result: Substitution = EMPTY
        for call in calls:
            step = self.exe(apply(result, call))
            if not step.is_proper:
                return step
            result = compose(result, step)
        return result

    def select(self, names: Iterable[str]) -> List[Builtin]:
        """Built-ins for a list of names, e.g. ["is", "="] or ["var/1"]"""
        selected = []
        for raw in names:
            name = raw.strip()
            if not name:
                continue
            arity = None
            if "/" in name and name.rsplit("/", 1)[1].isdigit():
                name, arity_text = name.rsplit("/", 1)
                arity = int(arity_text)
            matches = [b for (n, a), b in self.builtins.items() if n == name and (arity is None or a == arity)]
            if not matches:
                raise UnknownBuiltinError(f"unknown built-in {raw.strip()}")
            for builtin in matches:
                if builtin not in selected:
                    selected.append(builtin)
        return selected

    def core(self) -> List[Builtin]:
        return self.select(CORE_BUILTINS)


def _catalogue() -> List[Builtin]:
    return [
        UnifyBuiltin(),
        NotUnifiableBuiltin(),
        IsBuiltin(),
        *(CompareBuiltin(op) for op in CompareBuiltin.OPERATORS),
        IdenticalBuiltin(),
        IdenticalBuiltin(negated=True),
        TypeTestBuiltin("var"),
        TypeTestBuiltin("nonvar"),
        TypeTestBuiltin("ground"),
    ]


_DEFAULT_TABLE: Optional[BuiltinTable] = None


def default_table() -> BuiltinTable:
    global _DEFAULT_TABLE
    if _DEFAULT_TABLE is None:
        _DEFAULT_TABLE = BuiltinTable()
    return _DEFAULT_TABLE


def exe(call: Term, table: Optional[BuiltinTable] = None) -> Substitution:
    return (table or default_table()).exe(call)


def exe_seq(calls: Sequence[Term], table: Optional[BuiltinTable] = None) -> Substitution:
    return (table or default_table()).exe_seq(calls)
