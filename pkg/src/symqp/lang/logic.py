"""Quantifier elimination and finite-domain grounding of guards.

After :func:`propositionalize` every guard is built from ``Bit``, ``Eq``
(vector against vector, or vector against an integer code), constants and
the Boolean connectives. Typed vectors become plain bit vectors whose
unused codes are excluded by validity conjuncts.
"""

from __future__ import annotations

from dataclasses import replace

from .syntax import (
    FALSE,
    TRUE,
    And,
    Atom,
    BinOp,
    Bit,
    Const,
    Constraint,
    Eq,
    Exists,
    Foqp,
    Forall,
    Iff,
    Implies,
    Ind,
    Neg,
    Not,
    Or,
    Term,
    VecDecl,
    is_propositional,
)

__all__ = ["propositionalize", "simplify", "QuantifierError"]


class QuantifierError(ValueError):
    """A quantified variable has no finite domain to range over."""


# ----------------------------------------------------------------------
# simplification


def simplify(f):
    """Constant folding and flattening; keeps the order of operands."""
    if isinstance(f, Not):
        a = simplify(f.arg)
        if isinstance(a, Const):
            return Const(not a.value)
        if isinstance(a, Not):
            return a.arg
        return Not(a)
    if isinstance(f, (And, Or)):
        unit, zero = (TRUE, FALSE) if isinstance(f, And) else (FALSE, TRUE)
        out = []
        for a in f.args:
            a = simplify(a)
            if a == zero:
                return zero
            if a == unit:
                continue
            for b in a.args if type(a) is type(f) else (a,):
                if b not in out:
                    out.append(b)
        if not out:
            return unit
        return out[0] if len(out) == 1 else type(f)(tuple(out))
    if isinstance(f, Implies):
        return simplify(Or((Not(f.left), f.right)))
    if isinstance(f, Iff):
        left, right = simplify(f.left), simplify(f.right)
        if isinstance(left, Const):
            return right if left.value else simplify(Not(right))
        if isinstance(right, Const):
            return left if right.value else simplify(Not(left))
        return Iff(left, right)
    if isinstance(f, (Exists, Forall)):
        return type(f)(f.var, simplify(f.body))
    return f


# ----------------------------------------------------------------------
# grounding context


class _Ctx:
    def __init__(self, prog: Foqp, domain, database):
        self.prog = prog
        self.codes: dict[str, dict[str, int]] = {d.name: {c: i for i, c in enumerate(d.constants)} for d in prog.domains}
        self.const_domain = {c: d.name for d in prog.domains for c in d.constants}
        self.domain = list(domain) if domain is not None else None
        db = set(prog.facts)
        if database:
            db |= {tuple(a) for a in database}
        self.db = db
        self.by_pred: dict[str, list[tuple]] = {}
        for atom in sorted(db):
            self.by_pred.setdefault(atom[0], []).append(atom[1:])

    def is_vec(self, name) -> bool:
        return isinstance(name, str) and self.prog.has_vector(name)

    # domain of a quantified variable

    def quant_values(self, var: str, body) -> list:
        if self.prog.has_vector(var):
            d = self.prog.vector(var)
            n = len(self.prog.domain(d.domain).constants) if d.domain else 1 << d.width
            return list(range(n))
        dom = self._infer(var, body)
        if dom is not None:
            return list(self.prog.domain(dom).constants)
        if self.domain:
            return list(self.domain)
        raise QuantifierError(f"quantified variable {var!r} has no declared domain")

    def _infer(self, var, f):
        if isinstance(f, Atom):
            decl = self.prog.pred(f.pred)
            for a, dom in zip(f.args, decl.arg_domains):
                if a == var:
                    return dom
        elif isinstance(f, Eq):
            other = f.right if f.left == var else f.left if f.right == var else None
            if isinstance(other, str):
                if self.is_vec(other):
                    return self.prog.vector(other).domain
                return self.const_domain.get(other)
        elif isinstance(f, (Exists, Forall)):
            if f.var == var:
                return None
            return self._infer(var, f.body)
        else:
            for c in _children(f):
                d = self._infer(var, c)
                if d is not None:
                    return d
        return None

    # expansion

    def expand(self, f):
        if isinstance(f, (Exists, Forall)):
            body = self.expand(f.body)
            vals = self.quant_values(f.var, body)
            parts = tuple(_subst(self, body, f.var, v) for v in vals)
            return Or(parts) if isinstance(f, Exists) else And(parts)
        if isinstance(f, Not):
            return Not(self.expand(f.arg))
        if isinstance(f, (And, Or)):
            return type(f)(tuple(self.expand(a) for a in f.args))
        if isinstance(f, (Implies, Iff)):
            return type(f)(self.expand(f.left), self.expand(f.right))
        return f

    def code_of(self, vec: str, value):
        """Code of a constant or integer in the domain of ``vec`` (None if absent)."""
        d = self.prog.vector(vec)
        if isinstance(value, int):
            limit = len(self.prog.domain(d.domain).constants) if d.domain else 1 << d.width
            return value if 0 <= value < limit else None
        if d.domain is None:
            raise QuantifierError(f"constant {value!r} compared with untyped vector {vec!r}")
        return self.codes[d.domain].get(value)

    def resolve(self, f):
        """Turn remaining atoms and symbolic equalities into propositional guards."""
        if isinstance(f, Eq):
            left, right = f.left, f.right
            if not self.is_vec(left) and self.is_vec(right):
                left, right = right, left
            if self.is_vec(left):
                if self.is_vec(right):
                    return f
                code = self.code_of(left, right)
                return FALSE if code is None else Eq(left, code)
            return Const(left == right)
        if isinstance(f, Atom):
            return self.atom(f)
        if isinstance(f, Not):
            return Not(self.resolve(f.arg))
        if isinstance(f, (And, Or)):
            return type(f)(tuple(self.resolve(a) for a in f.args))
        if isinstance(f, (Implies, Iff)):
            return type(f)(self.resolve(f.left), self.resolve(f.right))
        if isinstance(f, (Exists, Forall)):
            return type(f)(f.var, self.resolve(f.body))
        return f

    def atom(self, f: Atom):
        decl = self.prog.pred(f.pred)
        args = []
        for a, dom in zip(f.args, decl.arg_domains):
            if isinstance(a, int):
                consts = self.prog.domain(dom).constants
                a = consts[a] if a < len(consts) else None
            args.append(a)
        if any(a is None for a in args):
            return FALSE
        vec_pos = [i for i, a in enumerate(args) if self.is_vec(a)]
        if not vec_pos:
            return Const((f.pred, *args) in self.db)
        disj = []
        for fact in self.by_pred.get(f.pred, ()):
            assign: dict[str, int] = {}
            ok = True
            for i, (a, c) in enumerate(zip(args, fact)):
                if i in vec_pos:
                    code = self.code_of(a, c)
                    if code is None or assign.setdefault(a, code) != code:
                        ok = False
                        break
                elif a != c:
                    ok = False
                    break
            if ok:
                conj = tuple(Eq(v, k) for v, k in assign.items())
                g = conj[0] if len(conj) == 1 else And(conj)
                if g not in disj:
                    disj.append(g)
        if not disj:
            return FALSE
        return disj[0] if len(disj) == 1 else Or(tuple(disj))


def _children(f):
    if isinstance(f, Not):
        return (f.arg,)
    if isinstance(f, (And, Or)):
        return f.args
    if isinstance(f, (Implies, Iff)):
        return (f.left, f.right)
    if isinstance(f, (Exists, Forall)):
        return (f.body,)
    return ()


def _subst(ctx: _Ctx, f, var: str, value):
    if isinstance(f, Bit):
        if f.vec != var:
            return f
        d = ctx.prog.vector(var)
        code = value if isinstance(value, int) else ctx.code_of(var, value)
        return Const(bool((code >> (d.width - 1 - f.index)) & 1))
    if isinstance(f, Eq):
        return Eq(value if f.left == var else f.left, value if f.right == var else f.right)
    if isinstance(f, Atom):
        return Atom(f.pred, tuple(value if a == var else a for a in f.args))
    if isinstance(f, Not):
        return Not(_subst(ctx, f.arg, var, value))
    if isinstance(f, (And, Or)):
        return type(f)(tuple(_subst(ctx, a, var, value) for a in f.args))
    if isinstance(f, (Implies, Iff)):
        return type(f)(_subst(ctx, f.left, var, value), _subst(ctx, f.right, var, value))
    if isinstance(f, (Exists, Forall)):
        if f.var == var:
            return f
        return type(f)(f.var, _subst(ctx, f.body, var, value))
    return f


# ----------------------------------------------------------------------
# programs


def _validity(prog: Foqp, name: str):
    d = prog.vector(name)
    if d.domain is None:
        return TRUE
    n = len(prog.domain(d.domain).constants)
    full = 1 << d.width
    if n == full:
        return TRUE
    if full - n < n:
        parts = tuple(Not(Eq(name, k)) for k in range(n, full))
        return parts[0] if len(parts) == 1 else And(parts)
    parts = tuple(Eq(name, k) for k in range(n))
    return parts[0] if len(parts) == 1 else Or(parts)


def _guarded(prog: Foqp, guard, names):
    extra = [_validity(prog, n) for n in names]
    extra = [g for g in extra if g != TRUE]
    if not extra:
        return guard
    return simplify(And((*extra, guard)))


def propositionalize(f: Foqp, domain=None, database=None) -> Foqp:
    """Eliminate quantifiers, predicate atoms and domain constants.

    ``domain`` lists the constants an otherwise untyped quantified variable
    ranges over; ``database`` adds ground atoms (tuples ``(pred, arg, ...)``)
    to the program's facts. Atoms absent from both are false. A program
    that is already propositional is returned unchanged.
    """
    if is_propositional(f) and not any(v.domain for v in f.vectors):
        return f
    ctx = _Ctx(f, domain, database)

    def g(formula):
        return simplify(ctx.resolve(ctx.expand(formula)))

    def e(expr):
        if isinstance(expr, Ind):
            return Ind(g(expr.formula))
        if isinstance(expr, BinOp):
            return BinOp(expr.op, e(expr.left), e(expr.right))
        if isinstance(expr, Neg):
            return Neg(e(expr.arg))
        return expr

    def t(term: Term) -> Term:
        return replace(term, coef=e(term.coef), guard=_guarded(f, g(term.guard), term.bound))

    objective = tuple(t(x) for x in f.objective)
    constraints = tuple(
        Constraint(c.rows, _guarded(f, g(c.guard), c.rows), tuple(t(x) for x in c.body), c.sense, e(c.rhs), c.line)
        for c in f.constraints
    )
    vectors = tuple(VecDecl(v.name, v.width) for v in f.vectors)
    return replace(f, vectors=vectors, objective=objective, constraints=constraints)
