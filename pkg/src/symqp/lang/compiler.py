"""Direct compilation of a program to decision-diagram matrices.

Nothing is enumerated: guards become 0/1 diagrams, coefficient
expressions become diagrams by structural recursion, and sums over bound
vectors that do not index a column become sum-abstractions.

Layout of the manager's variable order (top to bottom)::

    beta                       slack selector, used by the solver
    r0 c0 c0' r1 c1 c1' ...    row, column and second-column bits, interleaved
    aux pool                   bits of bound vectors that are summed out

Rows are block-major. The top ``B = ceil(log2(#constraints))`` row bits
select the constraint block; the remaining bits hold the block's row
vectors, left aligned, with unused low bits fixed to zero by the row mask.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .. import _kernels as K
from ..add import AddManager
from ..linalg import MatF, VecF, equality
from .logic import propositionalize
from .syntax import (
    And,
    BinOp,
    Bit,
    Const,
    Eq,
    Foqp,
    Iff,
    Implies,
    Ind,
    Neg,
    Not,
    Num,
    Or,
    Param,
    Term,
)

__all__ = ["compile", "Layout", "QpStandard", "CompileError", "plan"]


class CompileError(ValueError):
    pass


def _nbits(n: int) -> int:
    return 0 if n <= 1 else (n - 1).bit_length()


# ----------------------------------------------------------------------
# binding plan shared with the grounding oracle


@dataclass(frozen=True)
class TermPlan:
    """How the vectors of one term map onto index spaces.

    ``cols`` lists ``(vector, offset)`` for the bound vectors that index a
    column directly, ``checks`` lists ``(space, offset, vector)`` equalities
    between a slice of a column space and a vector that is already bound,
    and ``aux`` names the bound vectors that are summed out (in order).
    ``space`` is 0 for the first ``v(...)`` and 1 for the second.
    """

    term: Term
    cols: tuple
    cols2: tuple
    checks: tuple
    aux: tuple


@dataclass(frozen=True)
class BlockPlan:
    index: int
    rows: tuple  # (vector, offset) in the row space, offset counted from the block bits
    row_width: int
    terms: tuple


@dataclass(frozen=True)
class Plan:
    program: Foqp
    col_width: int
    row_width: int
    block_bits: int
    aux_width: int
    blocks: tuple
    objective: tuple

    @property
    def row_bits_total(self) -> int:
        return self.block_bits + self.row_width


def _free_vectors(prog: Foqp, formula) -> set:
    out = set()
    stack = [formula]
    while stack:
        f = stack.pop()
        if isinstance(f, Bit):
            out.add(f.vec)
        elif isinstance(f, Eq):
            out.add(f.left)
            if isinstance(f.right, str):
                out.add(f.right)
        elif isinstance(f, Not):
            stack.append(f.arg)
        elif isinstance(f, (And, Or)):
            stack.extend(f.args)
        elif isinstance(f, (Implies, Iff)):
            stack.extend((f.left, f.right))
        elif not isinstance(f, Const):
            raise CompileError(f"unsupported guard node {type(f).__name__}; propositionalize first")
    return out


def _expr_vectors(prog: Foqp, e) -> set:
    if isinstance(e, Ind):
        return _free_vectors(prog, e.formula)
    if isinstance(e, Param):
        return set(e.args)
    if isinstance(e, BinOp):
        return _expr_vectors(prog, e.left) | _expr_vectors(prog, e.right)
    if isinstance(e, Neg):
        return _expr_vectors(prog, e.arg)
    return set()


def _plan_term(prog: Foqp, term: Term, rows: set, col_width: int, where: str) -> TermPlan:
    for b in term.bound:
        if b in rows:
            raise CompileError(f"{where}: bound vector {b!r} shadows a row vector")
    env = set(rows)
    bound = set(term.bound)
    used = {}
    cols: list = []
    cols2: list = []
    checks: list = []
    for space, args, out in ((0, term.args, cols), (1, term.args2, cols2)):
        if args is None:
            continue
        off = 0
        for a in args:
            w = prog.vector(a).width
            if a in bound and a not in used:
                used[a] = (space, off)
                out.append((a, off))
            elif a in env or a in used:
                checks.append((space, off, a))
            else:
                raise CompileError(f"{where}: v({a}) uses a vector that is neither bound nor a row vector")
            off += w
        if off != col_width:
            raise CompileError(f"{where}: v({', '.join(args)}) has {off} bits, expected {col_width}")
    aux = tuple(b for b in term.bound if b not in used)
    scope = env | bound
    free = (_free_vectors(prog, term.guard) | _expr_vectors(prog, term.coef)) - scope
    if free:
        raise CompileError(f"{where}: unbound vector(s) {sorted(free)}")
    return TermPlan(term, tuple(cols), tuple(cols2), tuple(checks), aux)


def plan(prog: Foqp) -> Plan:
    """Check scoping and widths and fix how every vector is indexed."""
    widths = {prog.width(t.args) for t in prog.all_terms()}
    widths |= {prog.width(t.args2) for t in prog.all_terms() if t.args2 is not None}
    if len(widths) > 1:
        raise CompileError(f"all v(...) arguments must have the same width, found {sorted(widths)}")
    C = widths.pop() if widths else 0
    R = max((prog.width(c.rows) for c in prog.constraints), default=0)
    B = _nbits(len(prog.constraints))
    blocks = []
    aux_width = 0
    for i, con in enumerate(prog.constraints):
        where = f"constraint {i + 1}" + (f" (line {con.line})" if con.line else "")
        rows, off = [], 0
        for r in con.rows:
            rows.append((r, off))
            off += prog.vector(r).width
        rowset = set(con.rows)
        free = (_free_vectors(prog, con.guard) | _expr_vectors(prog, con.rhs)) - rowset
        if free:
            raise CompileError(f"{where}: row guard or right-hand side uses unbound vector(s) {sorted(free)}")
        terms = []
        for t in con.body:
            if t.quadratic:
                raise CompileError(f"{where}: constraints must be linear in v")
            tp = _plan_term(prog, t, rowset, C, where)
            aux_width = max(aux_width, prog.width(tp.aux))
            terms.append(tp)
        blocks.append(BlockPlan(i, tuple(rows), off, tuple(terms)))
    objective = []
    for t in prog.objective:
        tp = _plan_term(prog, t, set(), C, "objective")
        aux_width = max(aux_width, prog.width(tp.aux))
        objective.append(tp)
    return Plan(prog, C, R, B, aux_width, tuple(blocks), tuple(objective))


# ----------------------------------------------------------------------
# layout


@dataclass
class Layout:
    """Manager variables assigned to the index spaces of a program."""

    manager: AddManager
    beta: int
    row_bits: tuple  # all row bits, block bits first
    col_bits: tuple  # K = max(C, rows) column bits; the program uses the first C
    col2_bits: tuple
    aux_bits: tuple
    block_bits: int
    row_width: int
    col_width: int

    @classmethod
    def allocate(cls, m: AddManager, p: Plan) -> "Layout":
        Rt = p.row_bits_total
        Kc = max(p.col_width, Rt)
        beta = m.add_vars(1)[0]
        r, c, c2 = [], [], []
        for i in range(max(Rt, Kc)):
            if i < Rt:
                r.append(m.add_vars(1)[0])
            if i < Kc:
                c.append(m.add_vars(1)[0])
                c2.append(m.add_vars(1)[0])
        aux = m.add_vars(p.aux_width)
        return cls(m, beta, tuple(r), tuple(c), tuple(c2), tuple(aux), p.block_bits, p.row_width, p.col_width)

    @property
    def rows(self) -> tuple:
        return self.row_bits

    @property
    def cols(self) -> tuple:
        return self.col_bits[: self.col_width]

    @property
    def cols2(self) -> tuple:
        return self.col2_bits[: self.col_width]


# ----------------------------------------------------------------------
# result


@dataclass
class QpStandard:
    """``minimize c'x + 1/2 x'Qx  s.t.  Ax (>= | =) b, x >= 0`` as diagrams.

    ``A`` has one row per assignment of the row bits (block-major) and one
    column per assignment of the program's column bits. Rows outside
    ``row_mask`` and columns outside ``col_mask`` are structurally zero.
    ``ineq_mask`` marks the active rows of ``>=`` blocks.
    """

    A: MatF
    b: VecF
    c: VecF
    Q: MatF
    row_mask: VecF
    col_mask: VecF
    ineq_mask: VecF
    senses: tuple
    layout: Layout
    program: Foqp
    plan: Plan = field(repr=False, default=None)

    @property
    def manager(self) -> AddManager:
        return self.A.manager

    @property
    def shape(self) -> tuple:
        return self.A.shape

    @property
    def has_quadratic(self) -> bool:
        return self.Q.fun != K.ZERO

    def active_rows(self) -> int:
        return int(round(self.manager.element_sum(self.row_mask.fun, self.row_mask.bits)))

    def active_cols(self) -> int:
        return int(round(self.manager.element_sum(self.col_mask.fun, self.col_mask.bits)))

    def summary(self) -> dict:
        """Machine-readable description: dimensions, node counts, masks."""
        m = self.manager
        return {
            "rows": self.shape[0],
            "cols": self.shape[1],
            "row_bits": len(self.layout.rows),
            "col_bits": len(self.layout.cols),
            "block_bits": self.layout.block_bits,
            "aux_bits": len(self.layout.aux_bits),
            "blocks": [{"index": i, "sense": s} for i, s in enumerate(self.senses)],
            "active_rows": self.active_rows(),
            "active_cols": self.active_cols(),
            "inequality_rows": int(round(m.element_sum(self.ineq_mask.fun, self.ineq_mask.bits))),
            "quadratic": self.has_quadratic,
            "nodes": {
                "A": m.node_count(self.A.fun),
                "b": m.node_count(self.b.fun),
                "c": m.node_count(self.c.fun),
                "Q": m.node_count(self.Q.fun),
                "row_mask": m.node_count(self.row_mask.fun),
                "col_mask": m.node_count(self.col_mask.fun),
                "total": m.node_count(self.A.fun, self.b.fun, self.c.fun, self.Q.fun),
            },
        }

    def summary_json(self) -> str:
        return json.dumps(self.summary(), indent=2, sort_keys=True)


# ----------------------------------------------------------------------
# diagram construction


def cube(m: AddManager, literals) -> int:
    """Indicator of a conjunction of ``(var, bit)`` literals."""
    f = K.ONE
    for v, bit in sorted(literals, reverse=True):
        f = m.node(v, f, K.ZERO) if bit else m.node(v, K.ZERO, f)
    return f


def code_cube(m: AddManager, bits, code: int) -> int:
    w = len(bits)
    if code >> w:
        return K.ZERO
    return cube(m, [(b, (code >> (w - 1 - i)) & 1) for i, b in enumerate(bits)])


def table(m: AddManager, values, axes) -> int:
    """Diagram of ``values[idx]`` where ``idx`` concatenates the bits ``axes`` (MSB first).

    ``axes`` may repeat variables and need not be sorted.
    """
    values = np.asarray(values, dtype=np.float64)
    uniq = sorted(set(axes))
    k = np.arange(1 << len(uniq), dtype=np.int64)
    pos = {v: i for i, v in enumerate(uniq)}
    w = len(axes)
    idx = np.zeros_like(k)
    for j, v in enumerate(axes):
        bit = (k >> (len(uniq) - 1 - pos[v])) & 1
        idx |= bit << (w - 1 - j)
    return m.from_leaves(values[idx], uniq)


class _Builder:
    def __init__(self, prog: Foqp, m: AddManager):
        self.prog = prog
        self.m = m

    def guard(self, f, env) -> int:
        m = self.m
        if isinstance(f, Const):
            return K.ONE if f.value else K.ZERO
        if isinstance(f, Bit):
            return m.var(env[f.vec][f.index])
        if isinstance(f, Eq):
            left = env[f.left]
            if isinstance(f.right, int):
                return code_cube(m, left, f.right)
            right = env[f.right]
            if len(left) != len(right):
                raise CompileError(f"cannot compare {f.left!r} and {f.right!r}: widths differ")
            return equality(m, left, right)
        if isinstance(f, Not):
            return m.sub(K.ONE, self.guard(f.arg, env))
        if isinstance(f, And):
            r = self.guard(f.args[0], env)
            for a in f.args[1:]:
                r = m.mul(r, self.guard(a, env))
            return r
        if isinstance(f, Or):
            r = self.guard(f.args[0], env)
            for a in f.args[1:]:
                r = m.apply("max", r, self.guard(a, env))
            return r
        if isinstance(f, Implies):
            return m.apply("max", m.sub(K.ONE, self.guard(f.left, env)), self.guard(f.right, env))
        if isinstance(f, Iff):
            a, b = self.guard(f.left, env), self.guard(f.right, env)
            return m.sub(K.ONE, m.apply("max", m.sub(a, b), m.sub(b, a)))
        raise CompileError(f"unsupported guard node {type(f).__name__}")

    def expr(self, e, env) -> int:
        m = self.m
        if isinstance(e, Num):
            return m.terminal(e.value)
        if isinstance(e, Ind):
            return self.guard(e.formula, env)
        if isinstance(e, Param):
            decl = self.prog.param(e.name)
            axes = [v for a in e.args for v in env[a]]
            if len(axes) != decl.width:
                raise CompileError(f"table {e.name!r} is indexed by {decl.width} bits, got {len(axes)}")
            return table(m, decl.values, axes)
        if isinstance(e, Neg):
            return m.sub(K.ZERO, self.expr(e.arg, env))
        if isinstance(e, BinOp):
            return m.apply(e.op, self.expr(e.left, env), self.expr(e.right, env))
        raise CompileError(f"unsupported expression node {type(e).__name__}")

    def term(self, tp: TermPlan, env, spaces, pool) -> tuple[int, int]:
        """Return (value diagram, 0/1 support diagram) with aux vectors summed out."""
        m = self.m
        env = dict(env)
        for a, off in tp.cols:
            env[a] = spaces[0][off : off + self.prog.vector(a).width]
        for a, off in tp.cols2:
            env[a] = spaces[1][off : off + self.prog.vector(a).width]
        aux_vars: list[int] = []
        for a in tp.aux:
            w = self.prog.vector(a).width
            env[a] = tuple(pool[len(aux_vars) : len(aux_vars) + w])
            aux_vars.extend(env[a])
        ind = self.guard(tp.term.guard, env)
        for space, off, a in tp.checks:
            bits = env[a]
            ind = m.mul(ind, equality(m, spaces[space][off : off + len(bits)], bits))
        val = m.mul(ind, self.expr(tp.term.coef, env))
        if aux_vars:
            val = m.sum_abstract(val, aux_vars)
            ind = m.max_abstract(ind, aux_vars)
        return val, ind


def _nonzero(m: AddManager, f: int) -> int:
    return m.map_terminals(f, lambda t: (t != 0).astype(np.float64))


def _fold(m: AddManager, parts) -> int:
    if not parts:
        return K.ZERO
    r = parts[0]
    for p in parts[1:]:
        r = m.add(r, p)
    return r


def compile(f: Foqp, m: AddManager | None = None) -> QpStandard:  # noqa: A001
    """Compile a program into a :class:`QpStandard` without grounding it."""
    prog = propositionalize(f)
    p = plan(prog)
    if m is None:
        m = AddManager()
    L = Layout.allocate(m, p)
    bld = _Builder(prog, m)
    B, R = p.block_bits, p.row_width
    rbits = L.rows
    cols, cols2 = L.cols, L.cols2

    A_parts, b_parts, rmask_parts, imask_parts = [], [], [], []
    for bp in p.blocks:
        env = {}
        for r, off in bp.rows:
            env[r] = rbits[B + off : B + off + prog.vector(r).width]
        sel = cube(m, [(rbits[i], (bp.index >> (B - 1 - i)) & 1) for i in range(B)])
        pad = cube(m, [(v, 0) for v in rbits[B + bp.row_width :]])
        frame = m.mul(sel, pad)
        con = prog.constraints[bp.index]
        psi = m.mul(frame, bld.guard(con.guard, env))
        body = _fold(m, [bld.term(tp, env, (cols, cols2), L.aux_bits)[0] for tp in bp.terms])
        A_parts.append(m.mul(psi, body))
        b_parts.append(m.mul(psi, bld.expr(con.rhs, env)))
        rmask_parts.append(psi)
        if con.sense == ">=":
            imask_parts.append(psi)
    A = _fold(m, A_parts)
    b = _fold(m, b_parts)
    row_mask = _fold(m, rmask_parts)
    ineq_mask = _fold(m, imask_parts)

    lin, quad, quad_sw, supp = [], [], [], []
    for tp in p.objective:
        if tp.term.quadratic:
            quad.append(bld.term(tp, {}, (cols, cols2), L.aux_bits)[0])
            quad_sw.append(bld.term(tp, {}, (cols2, cols), L.aux_bits)[0])
        else:
            val, ind = bld.term(tp, {}, (cols, cols2), L.aux_bits)
            lin.append(val)
            supp.append(ind)
    c = _fold(m, lin)
    Q = m.add(_fold(m, quad), _fold(m, quad_sw)) if quad else K.ZERO

    col_mask = K.ZERO
    for s in supp:
        col_mask = m.apply("max", col_mask, s)
    if Q != K.ZERO:
        col_mask = m.apply("max", col_mask, m.max_abstract(_nonzero(m, Q), cols2))
    if A != K.ZERO:
        col_mask = m.apply("max", col_mask, m.max_abstract(_nonzero(m, A), rbits))

    nrows = 1 << len(rbits)
    ncols = 1 << len(cols)
    return QpStandard(
        A=MatF(m, A, rbits, cols, (nrows, ncols)),
        b=VecF(m, b, rbits),
        c=VecF(m, c, cols),
        Q=MatF(m, Q, cols, cols2),
        row_mask=VecF(m, row_mask, rbits),
        col_mask=VecF(m, col_mask, cols),
        ineq_mask=VecF(m, ineq_mask, rbits),
        senses=tuple(con.sense for con in prog.constraints),
        layout=L,
        program=prog,
        plan=p,
    )
