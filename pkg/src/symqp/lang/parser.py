"""Recursive-descent parser for the model grammar.

Example::

    var x[1];
    var y[1];
    minimize sum{x : true} v(x);
    constraint {y : true}: sum{x : x | y} v(x) >= 1;
    constraint {y : true}: v(y) >= 0;

Statements:

* ``var x[3];`` bit vector, ``var p in People;`` finite-domain vector
* ``domain People = {ann, bob};``
* ``pred Friends(People, People);`` and ``fact Friends(bob, ann);``
* ``param w[3] = [0.5, 1, ...];`` a table indexed by 3 bits
* ``minimize <terms>;``
* ``constraint {y, ... : guard}: <terms> >= <expr>;`` (or ``=``)

A name with trailing primes (``x'``) is an implicit copy of ``x``.
Comments start with ``#`` or ``//``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .syntax import (
    ONE,
    TRUE,
    And,
    Atom,
    BinOp,
    Bit,
    Const,
    Constraint,
    DomainDecl,
    Eq,
    Exists,
    Foqp,
    Forall,
    Iff,
    Implies,
    Ind,
    Neg,
    Not,
    Num,
    Or,
    Param,
    ParamDecl,
    PredDecl,
    Term,
    VecDecl,
)

__all__ = ["parse", "FoqpSyntaxError"]


class FoqpSyntaxError(ValueError):
    """A parse error with a 1-based source position."""

    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"line {line}, column {col}: {message}")
        self.message = message
        self.line = line
        self.col = col


_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+|\#[^\n]*|//[^\n]*)
  | (?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*'*)
  | (?P<op><->|->|==|!=|>=|<=|[;,:{}()\[\]=&|!~+\-*])
    """,
    re.VERBOSE,
)

_KEYWORDS = {"var", "in", "domain", "pred", "fact", "param", "minimize", "constraint", "sum", "exists", "forall", "true", "false"}


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _lex(text: str) -> list[_Tok]:
    toks: list[_Tok] = []
    pos = 0
    line, line_start = 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise FoqpSyntaxError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        s = m.group()
        if kind != "ws":
            if kind == "ident" and s in _KEYWORDS:
                kind = "kw"
            toks.append(_Tok(kind, s, line, pos - line_start + 1))
        nl = s.count("\n")
        if nl:
            line += nl
            line_start = pos + s.rfind("\n") + 1
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - line_start + 1))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.toks = _lex(text)
        self.i = 0
        self.vectors: dict[str, VecDecl] = {}
        self.domains: dict[str, DomainDecl] = {}
        self.constants: dict[str, str] = {}  # constant -> domain
        self.preds: dict[str, PredDecl] = {}
        self.params: dict[str, ParamDecl] = {}
        self.facts: set = set()
        self.objective: list[Term] = []
        self.constraints: list[Constraint] = []
        self.scope: list[str] = []

    # token helpers

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def error(self, msg: str, tok: _Tok | None = None):
        t = tok or self.tok
        return FoqpSyntaxError(msg, t.line, t.col)

    def at(self, text: str) -> bool:
        return self.tok.text == text and self.tok.kind in ("op", "kw")

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> _Tok:
        if not self.at(text):
            found = self.tok.text or "end of input"
            raise self.error(f"expected {text!r}, found {found!r}")
        t = self.tok
        self.i += 1
        return t

    def ident(self) -> str:
        t = self.tok
        if t.kind != "ident":
            raise self.error(f"expected a name, found {t.text or 'end of input'!r}")
        self.i += 1
        return t.text

    def integer(self) -> int:
        t = self.tok
        if t.kind != "num" or not t.text.isdigit():
            raise self.error("expected an integer")
        self.i += 1
        return int(t.text)

    def number(self) -> float:
        neg = self.accept("-")
        t = self.tok
        if t.kind != "num":
            raise self.error("expected a number")
        self.i += 1
        return -float(t.text) if neg else float(t.text)

    # symbols

    def vector(self, name: str, tok: _Tok) -> VecDecl:
        if name in self.vectors:
            return self.vectors[name]
        base = name.rstrip("'")
        if base != name and base in self.vectors:
            d = self.vectors[base]
            return VecDecl(name, d.width, d.domain)
        raise self.error(f"unknown symbol {name!r}", tok)

    def is_vector(self, name: str) -> bool:
        return name in self.vectors or name.rstrip("'") in self.vectors

    # statements

    def program(self) -> Foqp:
        while self.tok.kind != "eof":
            self.statement()
        return Foqp(
            vectors=tuple(self.vectors.values()),
            domains=tuple(self.domains.values()),
            preds=tuple(self.preds.values()),
            params=tuple(self.params.values()),
            facts=frozenset(self.facts),
            objective=tuple(self.objective),
            constraints=tuple(self.constraints),
        )

    def statement(self) -> None:
        t = self.tok
        if t.kind != "kw":
            raise self.error(f"expected a statement, found {t.text!r}")
        handler = {
            "var": self.stmt_var,
            "domain": self.stmt_domain,
            "pred": self.stmt_pred,
            "fact": self.stmt_fact,
            "param": self.stmt_param,
            "minimize": self.stmt_minimize,
            "constraint": self.stmt_constraint,
        }.get(t.text)
        if handler is None:
            raise self.error(f"unexpected {t.text!r}")
        self.i += 1
        handler()
        self.expect(";")

    def _fresh(self, name: str, tok: _Tok) -> None:
        if name in self.vectors or name in self.domains or name in self.constants or name in self.params:
            raise self.error(f"{name!r} is already declared", tok)
        if name == "v":
            raise self.error("'v' is reserved for the decision variables", tok)

    def stmt_var(self) -> None:
        t = self.tok
        name = self.ident()
        self._fresh(name, t)
        if name.endswith("'"):
            raise self.error("primed names are implicit copies and cannot be declared", t)
        if self.accept("["):
            width = self.integer()
            self.expect("]")
            if width < 1:
                raise self.error("vector width must be positive", t)
            self.vectors[name] = VecDecl(name, width)
        else:
            self.expect("in")
            dt = self.tok
            dom = self.ident()
            if dom not in self.domains:
                raise self.error(f"unknown domain {dom!r}", dt)
            n = len(self.domains[dom].constants)
            width = max(1, (n - 1).bit_length())
            self.vectors[name] = VecDecl(name, width, dom)

    def stmt_domain(self) -> None:
        t = self.tok
        name = self.ident()
        self._fresh(name, t)
        self.expect("=")
        self.expect("{")
        consts = []
        while True:
            ct = self.tok
            c = self.ident()
            if c in self.constants or c in consts:
                raise self.error(f"constant {c!r} declared twice", ct)
            consts.append(c)
            if not self.accept(","):
                break
        self.expect("}")
        self.domains[name] = DomainDecl(name, tuple(consts))
        for c in consts:
            self.constants[c] = name

    def stmt_pred(self) -> None:
        t = self.tok
        name = self.ident()
        if name in self.preds:
            raise self.error(f"predicate {name!r} declared twice", t)
        self.expect("(")
        doms = []
        if not self.at(")"):
            while True:
                dt = self.tok
                d = self.ident()
                if d not in self.domains:
                    raise self.error(f"unknown domain {d!r}", dt)
                doms.append(d)
                if not self.accept(","):
                    break
        self.expect(")")
        self.preds[name] = PredDecl(name, tuple(doms))

    def stmt_fact(self) -> None:
        t = self.tok
        name = self.ident()
        if name not in self.preds:
            raise self.error(f"unknown predicate {name!r}", t)
        self.expect("(")
        args = []
        if not self.at(")"):
            while True:
                at = self.tok
                a = self.ident()
                if a not in self.constants:
                    raise self.error(f"unknown constant {a!r}", at)
                args.append(a)
                if not self.accept(","):
                    break
        self.expect(")")
        decl = self.preds[name]
        if len(args) != len(decl.arg_domains):
            raise self.error(f"arity mismatch: {name} takes {len(decl.arg_domains)} arguments", t)
        self.facts.add((name, *args))

    def stmt_param(self) -> None:
        t = self.tok
        name = self.ident()
        self._fresh(name, t)
        self.expect("[")
        width = self.integer()
        self.expect("]")
        self.expect("=")
        self.expect("[")
        vals = [self.number()]
        while self.accept(","):
            vals.append(self.number())
        self.expect("]")
        if len(vals) != 1 << width:
            raise self.error(f"table {name!r} needs {1 << width} values, got {len(vals)}", t)
        self.params[name] = ParamDecl(name, width, tuple(vals))

    def stmt_minimize(self) -> None:
        if self.objective:
            raise self.error("only one objective is allowed")
        self.objective = self.terms()

    def stmt_constraint(self) -> None:
        line = self.toks[self.i - 1].line
        self.expect("{")
        rows = self.name_list()
        self.expect(":")
        guard = self.guard()
        self.expect("}")
        self.expect(":")
        if self.tok.kind == "num" and self.tok.text in ("0", "0.0") and self.toks[self.i + 1].text in (">=", "="):
            self.i += 1
            body: list[Term] = []
        else:
            body = self.terms()
        st = self.tok
        if self.accept(">="):
            sense = ">="
        elif self.accept("="):
            sense = "="
        else:
            raise self.error(f"expected '>=' or '=', found {st.text!r}")
        rhs = self.expr()
        self.constraints.append(Constraint(tuple(rows), guard, tuple(body), sense, rhs, line))

    def name_list(self) -> list[str]:
        names = []
        while True:
            t = self.tok
            n = self.ident()
            self.vector(n, t)
            if n in names:
                raise self.error(f"{n!r} listed twice", t)
            names.append(n)
            if not self.accept(","):
                return names

    # terms

    def terms(self) -> list[Term]:
        lead = self.at("-") and self.toks[self.i + 1].text in ("v", "sum")
        if lead:
            self.i += 1
        out = [self.term(lead)]
        while True:
            if self.accept("+"):
                out.append(self.term(False))
            elif self.accept("-"):
                out.append(self.term(True))
            else:
                return out

    def term(self, negate: bool) -> Term:
        bound: tuple = ()
        guard = TRUE
        if self.accept("sum"):
            self.expect("{")
            bound = tuple(self.name_list())
            self.expect(":")
            guard = self.guard()
            self.expect("}")
        start = self.tok
        coef = None
        vs: list[tuple] = []
        while True:
            if self.tok.kind == "ident" and self.tok.text == "v" and self.toks[self.i + 1].text == "(":
                self.i += 2
                args = []
                while True:
                    at = self.tok
                    a = self.ident()
                    self.vector(a, at)
                    args.append(a)
                    if not self.accept(","):
                        break
                self.expect(")")
                vs.append(tuple(args))
            else:
                f = self.unary()
                coef = f if coef is None else BinOp("*", coef, f)
            if not self.accept("*"):
                break
        if not vs:
            raise self.error("a term needs a decision variable v(...)", start)
        if len(vs) > 2:
            raise self.error("terms are at most quadratic in v", start)
        coef = ONE if coef is None else coef
        if negate:
            coef = Neg(coef)
        return Term(coef, vs[0], vs[1] if len(vs) == 2 else None, bound, guard)

    # expressions

    def expr(self):
        e = self.mul()
        while True:
            if self.accept("+"):
                e = BinOp("+", e, self.mul())
            elif self.accept("-"):
                e = BinOp("-", e, self.mul())
            else:
                return e

    def mul(self):
        e = self.unary()
        while self.at("*"):
            self.i += 1
            e = BinOp("*", e, self.unary())
        return e

    def unary(self):
        if self.accept("-"):
            if self.tok.kind == "num":
                t = self.tok
                self.i += 1
                return Num(-float(t.text))
            return Neg(self.unary())
        t = self.tok
        if t.kind == "num":
            self.i += 1
            return Num(float(t.text))
        if self.accept("["):
            g = self.guard()
            self.expect("]")
            return Ind(g)
        if self.accept("("):
            e = self.expr()
            self.expect(")")
            return e
        if t.kind == "ident" and t.text in self.params:
            self.i += 1
            self.expect("(")
            args = []
            while True:
                at = self.tok
                a = self.ident()
                self.vector(a, at)
                args.append(a)
                if not self.accept(","):
                    break
            self.expect(")")
            w = sum(self.vector(a, t).width for a in args)
            if w != self.params[t.text].width:
                raise self.error(f"arity mismatch: table {t.text!r} is indexed by {self.params[t.text].width} bits", t)
            return Param(t.text, tuple(args))
        if t.kind == "eof":
            raise self.error("unexpected end of input in expression")
        raise self.error(f"unexpected {t.text!r} in expression")

    # guards

    def guard(self):
        op = self.tok
        left = self.implication()
        while self.at("<->"):
            op = self.tok
            self.i += 1
            left = Iff(left, self.operand(self.implication, op))
        return left

    def operand(self, rule, op: _Tok):
        if self.tok.kind == "eof" or self.tok.text in (")", "}", "]", ";", ":", ","):
            raise self.error(f"missing operand after {op.text!r}", op)
        return rule()

    def implication(self):
        left = self.disjunction()
        if self.at("->"):
            op = self.tok
            self.i += 1
            return Implies(left, self.operand(self.implication, op))
        return left

    def disjunction(self):
        args = [self.conjunction()]
        while self.at("|"):
            op = self.tok
            self.i += 1
            args.append(self.operand(self.conjunction, op))
        return args[0] if len(args) == 1 else Or(tuple(args))

    def conjunction(self):
        args = [self.negation()]
        while self.at("&"):
            op = self.tok
            self.i += 1
            args.append(self.operand(self.negation, op))
        return args[0] if len(args) == 1 else And(tuple(args))

    def negation(self):
        if self.at("!") or self.at("~"):
            op = self.tok
            self.i += 1
            return Not(self.operand(self.negation, op))
        if self.at("exists") or self.at("forall"):
            kw = self.tok.text
            self.i += 1
            var = self.ident()
            self.expect(":")
            self.scope.append(var)
            try:
                body = self.operand(self.guard, self.toks[self.i - 1])
            finally:
                self.scope.pop()
            return Exists(var, body) if kw == "exists" else Forall(var, body)
        return self.atom()

    def atom(self):
        t = self.tok
        if self.accept("true"):
            return Const(True)
        if self.accept("false"):
            return Const(False)
        if self.accept("("):
            g = self.guard()
            self.expect(")")
            return g
        if t.kind != "ident":
            raise self.error(f"expected a guard, found {t.text or 'end of input'!r}")
        name = self.ident()
        if self.at("("):
            return self.pred_atom(name, t)
        if self.accept("["):
            idx = self.integer()
            self.expect("]")
            d = self.vector(name, t)
            if idx >= d.width:
                raise self.error(f"bit index {idx} out of range for {name!r}", t)
            return Bit(name, idx)
        if self.at("==") or self.at("!="):
            neg = self.tok.text == "!="
            self.i += 1
            self.term_ref(name, t)
            rt = self.tok
            if rt.kind == "num":
                self.i += 1
                if not rt.text.isdigit():
                    raise self.error("codes must be integers", rt)
                right: str | int = int(rt.text)
            else:
                right = self.ident()
                self.term_ref(right, rt)
            e = Eq(name, right)
            return Not(e) if neg else e
        if name in self.scope:
            if self.is_vector(name) and self.vector(name, t).width == 1:
                return Bit(name, 0)
            raise self.error(f"logical variable {name!r} cannot be used as a proposition", t)
        d = self.vector(name, t)
        if d.width != 1:
            raise self.error(f"{name!r} has {d.width} bits; use {name}[i] or a comparison", t)
        return Bit(name, 0)

    def term_ref(self, name: str, tok: _Tok) -> None:
        if name in self.scope or name in self.constants or self.is_vector(name):
            return
        raise self.error(f"unknown symbol {name!r}", tok)

    def pred_atom(self, name: str, tok: _Tok):
        if name not in self.preds:
            raise self.error(f"unknown predicate {name!r}", tok)
        self.expect("(")
        args = []
        if not self.at(")"):
            while True:
                at = self.tok
                a = self.ident()
                self.term_ref(a, at)
                args.append(a)
                if not self.accept(","):
                    break
        self.expect(")")
        decl = self.preds[name]
        if len(args) != len(decl.arg_domains):
            raise self.error(f"arity mismatch: {name} takes {len(decl.arg_domains)} arguments", tok)
        return Atom(name, tuple(args))


def parse(text: str) -> Foqp:
    """Parse model source into a :class:`~symqp.lang.syntax.Foqp`."""
    return _Parser(text).program()
