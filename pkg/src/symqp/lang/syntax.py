"""Abstract syntax of first-order logical quadratic programs.

All nodes are frozen dataclasses, so structurally equal programs compare
equal and can be hashed. :func:`to_source` prints a program back in the
concrete grammar accepted by :func:`symqp.lang.parse`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Union

# ----------------------------------------------------------------------
# formulas


@dataclass(frozen=True)
class Const:
    value: bool


@dataclass(frozen=True)
class Bit:
    """Bit ``index`` (MSB first) of an index vector."""

    vec: str
    index: int


@dataclass(frozen=True)
class Eq:
    """``left == right`` for a vector and another vector, a code or a domain constant."""

    left: str
    right: Union[str, int]


@dataclass(frozen=True)
class Atom:
    """Predicate atom; arguments are vector names, logical variables or constants."""

    pred: str
    args: tuple


@dataclass(frozen=True)
class Not:
    arg: "Formula"


@dataclass(frozen=True)
class And:
    args: tuple


@dataclass(frozen=True)
class Or:
    args: tuple


@dataclass(frozen=True)
class Implies:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Iff:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Exists:
    var: str
    body: "Formula"


@dataclass(frozen=True)
class Forall:
    var: str
    body: "Formula"


Formula = Union[Const, Bit, Eq, Atom, Not, And, Or, Implies, Iff, Exists, Forall]

TRUE = Const(True)
FALSE = Const(False)

# ----------------------------------------------------------------------
# coefficient expressions


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Ind:
    """Indicator ``[formula]``: 1 where the formula holds, else 0."""

    formula: Formula


@dataclass(frozen=True)
class Param:
    """Lookup in a declared table, indexed by the concatenated bits of ``args``."""

    name: str
    args: tuple


@dataclass(frozen=True)
class BinOp:
    op: str  # '+', '-', '*'
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Neg:
    arg: "Expr"


Expr = Union[Num, Ind, Param, BinOp, Neg]

ONE = Num(1.0)

# ----------------------------------------------------------------------
# program structure


@dataclass(frozen=True)
class Term:
    """``sum{bound : guard} coef * v(args) [* v(args2)]``.

    ``args2`` is ``None`` for linear terms. A term written without ``sum``
    has no bound vectors and a true guard.
    """

    coef: Expr
    args: tuple
    args2: tuple | None = None
    bound: tuple = ()
    guard: Formula = TRUE

    @property
    def quadratic(self) -> bool:
        return self.args2 is not None


@dataclass(frozen=True)
class Constraint:
    rows: tuple
    guard: Formula
    body: tuple
    sense: str  # '>=' or '='
    rhs: Expr
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class VecDecl:
    name: str
    width: int
    domain: str | None = None


@dataclass(frozen=True)
class DomainDecl:
    name: str
    constants: tuple


@dataclass(frozen=True)
class PredDecl:
    name: str
    arg_domains: tuple


@dataclass(frozen=True)
class ParamDecl:
    name: str
    width: int
    values: tuple


@dataclass(frozen=True)
class Foqp:
    vectors: tuple = ()
    domains: tuple = ()
    preds: tuple = ()
    params: tuple = ()
    facts: frozenset = field(default_factory=frozenset)
    objective: tuple = ()
    constraints: tuple = ()

    def vector(self, name: str) -> VecDecl:
        for v in self.vectors:
            if v.name == name:
                return v
        base = name.rstrip("'")
        if base != name:
            d = self.vector(base)
            return VecDecl(name, d.width, d.domain)
        raise KeyError(name)

    def has_vector(self, name: str) -> bool:
        try:
            self.vector(name)
            return True
        except KeyError:
            return False

    def domain(self, name: str) -> DomainDecl:
        for d in self.domains:
            if d.name == name:
                return d
        raise KeyError(name)

    def pred(self, name: str) -> PredDecl:
        for p in self.preds:
            if p.name == name:
                return p
        raise KeyError(name)

    def param(self, name: str) -> ParamDecl:
        for p in self.params:
            if p.name == name:
                return p
        raise KeyError(name)

    def width(self, names) -> int:
        return sum(self.vector(n).width for n in names)

    def all_terms(self) -> Iterator[Term]:
        yield from self.objective
        for c in self.constraints:
            yield from c.body


# ----------------------------------------------------------------------
# traversal helpers


def formula_children(f) -> tuple:
    if isinstance(f, Not):
        return (f.arg,)
    if isinstance(f, (And, Or)):
        return f.args
    if isinstance(f, (Implies, Iff)):
        return (f.left, f.right)
    if isinstance(f, (Exists, Forall)):
        return (f.body,)
    return ()


def walk_formula(f) -> Iterator:
    yield f
    for c in formula_children(f):
        yield from walk_formula(c)


def walk_expr(e) -> Iterator:
    yield e
    if isinstance(e, BinOp):
        yield from walk_expr(e.left)
        yield from walk_expr(e.right)
    elif isinstance(e, Neg):
        yield from walk_expr(e.arg)


def expr_formulas(e) -> Iterator:
    for node in walk_expr(e):
        if isinstance(node, Ind):
            yield node.formula


def program_formulas(f: Foqp) -> Iterator:
    """Every formula occurring in the program (guards and indicators)."""
    for t in f.all_terms():
        yield t.guard
        yield from expr_formulas(t.coef)
    for c in f.constraints:
        yield c.guard
        yield from expr_formulas(c.rhs)


def is_propositional(f: Foqp) -> bool:
    for g in program_formulas(f):
        for node in walk_formula(g):
            if isinstance(node, (Atom, Exists, Forall)):
                return False
            if isinstance(node, Eq) and isinstance(node.right, str) and not f.has_vector(node.right):
                return False
    return True


# ----------------------------------------------------------------------
# printing

_PREC = {Iff: 1, Implies: 2, Or: 3, And: 4}


def formula_str(f, prec: int = 0) -> str:
    if isinstance(f, Const):
        return "true" if f.value else "false"
    if isinstance(f, Bit):
        return f"{f.vec}[{f.index}]"
    if isinstance(f, Eq):
        s = f"{f.left} == {f.right}"
        return f"({s})" if prec >= 9 else s
    if isinstance(f, Atom):
        return f"{f.pred}({', '.join(str(a) for a in f.args)})"
    if isinstance(f, Not):
        return "!" + formula_str(f.arg, 9)
    if isinstance(f, (Exists, Forall)):
        kw = "exists" if isinstance(f, Exists) else "forall"
        s = f"{kw} {f.var}: {formula_str(f.body, 0)}"
        return f"({s})" if prec > 0 else s
    p = _PREC[type(f)]
    if isinstance(f, (And, Or)):
        sep = " & " if isinstance(f, And) else " | "
        s = sep.join(formula_str(a, p + 1) for a in f.args)
    elif isinstance(f, Implies):
        s = f"{formula_str(f.left, p + 1)} -> {formula_str(f.right, p)}"
    else:
        s = f"{formula_str(f.left, p + 1)} <-> {formula_str(f.right, p + 1)}"
    return f"({s})" if p < prec else s


def expr_str(e, prec: int = 0) -> str:
    if isinstance(e, Num):
        v = e.value
        s = repr(float(v))
        if s.endswith(".0"):
            s = s[:-2]
        return f"({s})" if v < 0 else s
    if isinstance(e, Ind):
        return f"[{formula_str(e.formula)}]"
    if isinstance(e, Param):
        return f"{e.name}({', '.join(e.args)})"
    if isinstance(e, Neg):
        inner = expr_str(e.arg, 3)
        return f"-({inner})" if isinstance(e.arg, Num) else "-" + inner
    p = 1 if e.op in "+-" else 2
    right_prec = p + 1
    s = f"{expr_str(e.left, p)} {e.op} {expr_str(e.right, right_prec)}"
    return f"({s})" if p < prec else s


def term_str(t: Term) -> str:
    prod = f"{expr_str(t.coef, 2)} * v({', '.join(t.args)})"
    if t.args2 is not None:
        prod += f" * v({', '.join(t.args2)})"
    if not t.bound and t.guard == TRUE:
        return prod
    return f"sum{{{', '.join(t.bound)} : {formula_str(t.guard)}}} {prod}"


def to_source(f: Foqp) -> str:
    """Render a program in the concrete model grammar."""
    out: list[str] = []
    for d in f.domains:
        out.append(f"domain {d.name} = {{{', '.join(d.constants)}}};")
    for v in f.vectors:
        out.append(f"var {v.name} in {v.domain};" if v.domain else f"var {v.name}[{v.width}];")
    for p in f.preds:
        out.append(f"pred {p.name}({', '.join(p.arg_domains)});")
    for atom in sorted(f.facts):
        out.append(f"fact {atom[0]}({', '.join(atom[1:])});")
    for p in f.params:
        vals = ", ".join(repr(float(x)) for x in p.values)
        out.append(f"param {p.name}[{p.width}] = [{vals}];")
    if f.objective:
        out.append("minimize " + "\n    + ".join(term_str(t) for t in f.objective) + ";")
    for c in f.constraints:
        body = "\n    + ".join(term_str(t) for t in c.body) if c.body else "0"
        out.append(
            f"constraint {{{', '.join(c.rows)} : {formula_str(c.guard)}}}:\n    {body}\n    {c.sense} {expr_str(c.rhs)};"
        )
    return "\n".join(out) + "\n"
