"""Ground-form oracle: enumerate every assignment with numpy.

This path never touches decision diagrams. Each term is evaluated on a
broadcast grid ``(row, column, second column, aux)`` of integer codes and
summed over the aux axis one bit at a time, lowest bit first.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .compiler import CompileError, Plan, TermPlan, plan
from .logic import propositionalize
from .syntax import And, BinOp, Bit, Const, Eq, Foqp, Iff, Implies, Ind, Neg, Not, Num, Or, Param

__all__ = ["ground", "GroundQp", "BitBudgetError"]

DEFAULT_BUDGET = 24


class BitBudgetError(ValueError):
    """Grounding would enumerate more than ``2**budget`` assignments."""


@dataclass
class GroundQp:
    """Dense normal form, indexed exactly like the compiled diagrams."""

    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    Q: np.ndarray
    row_mask: np.ndarray
    col_mask: np.ndarray
    ineq_mask: np.ndarray
    senses: tuple

    @property
    def shape(self) -> tuple:
        return self.A.shape


def _formula(prog: Foqp, f, env):
    if isinstance(f, Const):
        return np.bool_(f.value)
    if isinstance(f, Bit):
        w = prog.vector(f.vec).width
        return ((env[f.vec] >> (w - 1 - f.index)) & 1).astype(bool)
    if isinstance(f, Eq):
        right = f.right if isinstance(f.right, int) else env[f.right]
        if not isinstance(f.right, int) and prog.vector(f.left).width != prog.vector(f.right).width:
            raise CompileError(f"cannot compare {f.left!r} and {f.right!r}: widths differ")
        return env[f.left] == right
    if isinstance(f, Not):
        return np.logical_not(_formula(prog, f.arg, env))
    if isinstance(f, And):
        r = _formula(prog, f.args[0], env)
        for a in f.args[1:]:
            r = np.logical_and(r, _formula(prog, a, env))
        return r
    if isinstance(f, Or):
        r = _formula(prog, f.args[0], env)
        for a in f.args[1:]:
            r = np.logical_or(r, _formula(prog, a, env))
        return r
    if isinstance(f, Implies):
        return np.logical_or(np.logical_not(_formula(prog, f.left, env)), _formula(prog, f.right, env))
    if isinstance(f, Iff):
        return _formula(prog, f.left, env) == _formula(prog, f.right, env)
    raise CompileError(f"unsupported guard node {type(f).__name__}")


def _expr(prog: Foqp, e, env):
    if isinstance(e, Num):
        return np.float64(e.value)
    if isinstance(e, Ind):
        return _formula(prog, e.formula, env).astype(np.float64)
    if isinstance(e, Param):
        decl = prog.param(e.name)
        idx = np.int64(0)
        for a in e.args:
            idx = (idx << prog.vector(a).width) | env[a]
        return np.asarray(decl.values, dtype=np.float64)[idx]
    if isinstance(e, Neg):
        return np.float64(0.0) - _expr(prog, e.arg, env)
    if isinstance(e, BinOp):
        left, right = _expr(prog, e.left, env), _expr(prog, e.right, env)
        if e.op == "+":
            return left + right
        if e.op == "-":
            return left - right
        return left * right
    raise CompileError(f"unsupported expression node {type(e).__name__}")


def _field(index, total: int, off: int, width: int):
    return (index >> (total - off - width)) & ((1 << width) - 1)


def _term(prog: Foqp, tp: TermPlan, row_env, C: int):
    """Values on the grid (row, col, col2) and the 0/1 support over (row, col)."""
    aux_w = prog.width(tp.aux)
    j1 = np.arange(1 << C, dtype=np.int64).reshape(1, -1, 1, 1)
    j2 = np.arange(1 << C, dtype=np.int64).reshape(1, 1, -1, 1) if tp.term.quadratic else None
    z = np.arange(1 << aux_w, dtype=np.int64).reshape(1, 1, 1, -1)
    env = dict(row_env)
    for a, off in tp.cols:
        env[a] = _field(j1, C, off, prog.vector(a).width)
    for a, off in tp.cols2:
        env[a] = _field(j2, C, off, prog.vector(a).width)
    off = 0
    for a in tp.aux:
        w = prog.vector(a).width
        env[a] = _field(z, aux_w, off, w)
        off += w
    ind = _formula(prog, tp.term.guard, env)
    for space, o, a in tp.checks:
        j = j1 if space == 0 else j2
        ind = np.logical_and(ind, _field(j, C, o, prog.vector(a).width) == env[a])
    shape = np.broadcast_shapes(
        np.shape(ind), (1, 1 << C, (1 << C) if tp.term.quadratic else 1, 1 << aux_w)
    )
    rows = next(iter(row_env.values())).shape[0] if row_env else 1
    shape = (rows,) + shape[1:]
    ind = np.broadcast_to(ind, shape)
    val = np.broadcast_to(ind.astype(np.float64) * _expr(prog, tp.term.coef, env), shape)
    for _ in range(aux_w):
        val = val.reshape(val.shape[:3] + (-1, 2)).sum(axis=4)
    supp = ind.any(axis=3)
    return val[..., 0], supp


def _check_budget(p: Plan, budget: int) -> None:
    prog = p.program
    Rt, C = p.row_bits_total, p.col_width
    if Rt + C > budget:
        raise BitBudgetError(f"normal form needs {Rt + C} bits, budget is {budget}")
    for blk in p.blocks:
        for tp in blk.terms:
            need = blk.row_width + C + prog.width(tp.aux)
            if need > budget:
                raise BitBudgetError(f"a term needs {need} bits, budget is {budget}")
    for tp in p.objective:
        need = C * (2 if tp.term.quadratic else 1) + prog.width(tp.aux)
        if need > budget:
            raise BitBudgetError(f"an objective term needs {need} bits, budget is {budget}")


def _fold(parts, shape):
    if not parts:
        return np.zeros(shape)
    r = parts[0]
    for x in parts[1:]:
        r = r + x
    return np.array(r, dtype=np.float64)


def ground(f: Foqp, budget: int = DEFAULT_BUDGET) -> GroundQp:
    """Instantiate every guard and return the dense normal form."""
    prog = propositionalize(f)
    p = plan(prog)
    _check_budget(p, budget)
    B, R, C = p.block_bits, p.row_width, p.col_width
    nrows = 1 << (B + R)
    ncols = 1 << C
    A = np.zeros((nrows, ncols))
    b = np.zeros(nrows)
    row_mask = np.zeros(nrows)
    ineq_mask = np.zeros(nrows)
    for blk in p.blocks:
        con = prog.constraints[blk.index]
        y = np.arange(1 << blk.row_width, dtype=np.int64)
        env = {r: _field(y, blk.row_width, off, prog.vector(r).width) for r, off in blk.rows}
        psi = np.broadcast_to(_formula(prog, con.guard, env), y.shape).astype(np.float64)
        row_env = {k: v.reshape(-1, 1, 1, 1) for k, v in env.items()}
        body = _fold([_term(prog, tp, row_env, C)[0][:, :, 0] for tp in blk.terms], (y.size, ncols))
        body = np.broadcast_to(body, (y.size, ncols))
        rows = (blk.index << R) + (y << (R - blk.row_width))
        A[rows] = psi[:, None] * body
        b[rows] = psi * np.broadcast_to(_expr(prog, con.rhs, env), y.shape)
        row_mask[rows] = psi
        if con.sense == ">=":
            ineq_mask[rows] = psi

    lin, quad, supp = [], [], []
    for tp in p.objective:
        val, ind = _term(prog, tp, {}, C)
        if tp.term.quadratic:
            quad.append(val[0])
        else:
            lin.append(val[0, :, 0])
            supp.append(ind[0, :, 0])
    c = _fold(lin, ncols)
    Q = np.zeros((ncols, ncols))
    if quad:
        Qraw = _fold(quad, (ncols, ncols))
        Q = Qraw + Qraw.T
    col_mask = np.zeros(ncols, dtype=bool)
    for s in supp:
        col_mask |= s
    col_mask |= (Q != 0).any(axis=1)
    col_mask |= (A != 0).any(axis=0)
    return GroundQp(
        A=A,
        b=b,
        c=c + 0.0,
        Q=Q + 0.0,
        row_mask=row_mask,
        col_mask=col_mask.astype(np.float64),
        ineq_mask=ineq_mask,
        senses=tuple(con.sense for con in prog.constraints),
    )
