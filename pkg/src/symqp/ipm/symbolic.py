"""Decision-diagram backend for the barrier method.

The compiled program is put in equality standard form by adding one slack
column per inequality row. Slack columns share the program's column bits
and are told apart by the selector bit ``beta`` at the top of the order::

    A_std = [ A | -I_ineq ]      (beta = 0 | beta = 1)

so ``A_std`` costs only a handful of nodes more than ``A``.
"""

from __future__ import annotations

import math

import numpy as np

from .. import _kernels as K
from ..add import AddManager, Op
from ..linalg import (
    MatF,
    VecF,
    argmax,
    diagonal,
    dot,
    equality,
    map_elements,
    matvec,
    matvec_t,
    max_abs,
    norm2,
    row_extract,
    to_dense,
    unit,
    vmax,
)


COMPACT_FLOOR = 1 << 20  # nodes; below this the store is never compacted


class AddLinearAlgebra:
    """Vector primitives on :class:`VecF`."""

    def __init__(self, m: AddManager):
        self.m = m

    def dot(self, u, v) -> float:
        return dot(u, v)

    def norm(self, u) -> float:
        return norm2(u)

    def amax(self, u) -> float:
        return max_abs(u)

    def vmax(self, u) -> float:
        return vmax(u)

    def argmax(self, u) -> int:
        return argmax(u)

    def entry(self, u, i: int) -> float:
        k = len(u.bits)
        return self.m.eval(u.fun, {b: (i >> (k - 1 - j)) & 1 for j, b in enumerate(u.bits)})

    def zeros_like(self, u):
        return VecF(self.m, K.ZERO, u.bits, u.length)

    def div0(self, u, v):
        """``u / v`` with 0 wherever ``v == 0``."""
        return VecF(self.m, self.m.apply(Op.DIV0, u.fun, v.fun), u.bits, u.length)

    def clip(self, u, lo: float, hi: float):
        return map_elements(u, lambda t: np.clip(t, lo, hi))

    def maximum(self, u, floor: float):
        return VecF(self.m, self.m.apply(Op.MAX, u.fun, self.m.terminal(floor)), u.bits, u.length)

    def min_ratio(self, x, dx) -> float:
        """``min(-x_i / dx_i)`` over ``dx_i < 0`` (``inf`` if there is none)."""
        m = self.m
        neg = m.sub(K.ZERO, m.apply(Op.MIN, dx.fun, K.ZERO))
        ratio = m.apply(Op.DIV0, x.fun, neg)
        vals = m.terminal_values(ratio)
        pos = vals[vals > 0]
        return float(pos.min()) if pos.size else float("inf")

    def min_value(self, u, mask) -> float:
        """Smallest entry of ``u`` on the support of the 0/1 ``mask``."""
        m = self.m
        big = m.terminal(1e308)
        f = m.add(m.mul(u.fun, mask.fun), m.mul(m.sub(K.ONE, mask.fun), big))
        return float(m.terminal_values(f).min())

    def quantize(self, u, digits: int):
        def q(t):
            out = t.copy()
            nz = t != 0
            e = np.floor(np.log10(np.abs(t[nz])))
            scale = 10.0 ** (digits - 1 - e)
            out[nz] = np.round(t[nz] * scale) / scale
            return out

        return map_elements(u, q)

    def to_numpy(self, u) -> np.ndarray:
        return to_dense(u, logical=False)


class DiagQ:
    """Separable Q held as its diagonal."""

    diagonal_only = True

    def __init__(self, diag: VecF):
        self.diag = diag

    def mv(self, x):
        return self.diag * x

    def diagonal(self):
        return self.diag

    def node_count(self) -> int:
        return self.diag.node_count()


class EmbeddedQ:
    """A general Q over the program's columns acting on the standard-form space."""

    diagonal_only = False

    def __init__(self, Q: MatF, beta: int, cols, cols2, pad: VecF, std_bits, diag: VecF):
        self.Q = Q
        self.beta = beta
        self.cols = tuple(cols)
        self.cols2 = tuple(cols2)
        self.pad = pad
        self.std_bits = tuple(std_bits)
        self.diag = diag
        self.shift = dict(zip(self.cols, self.cols2))
        self.cube = {beta: 0, **{v: 0 for v in std_bits[1 + len(self.cols):]}}

    def mv(self, x):
        m = self.Q.manager
        x0 = m.relabel(m.restrict(x.fun, self.cube), self.shift)
        y = matvec(self.Q, VecF(m, x0, self.cols2))
        f = m.mul(y.fun, self.pad.fun)
        return VecF(m, m.node(self.beta, K.ZERO, f) if f != K.ZERO else K.ZERO, self.std_bits, x.length)

    def diagonal(self):
        return self.diag

    def node_count(self) -> int:
        return self.Q.node_count()


class AddProblem:
    """Equality-form QP ``min c'x + x'Qx/2 + offset, A x = b, x >= 0`` on diagrams."""

    def __init__(
        self,
        manager: AddManager,
        A: MatF | None,
        b: VecF | None,
        c: VecF,
        Q,
        col_mask: VecF,
        row_mask: VecF | None,
        offset: float = 0.0,
        extract=None,
        box=None,
        xpart: VecF | None = None,
        A_x: MatF | None = None,
    ):
        self.m = manager
        self.la = AddLinearAlgebra(manager)
        self.A = A
        self.c = c
        self.Q = Q
        self.col_mask = col_mask
        self.col_bits = c.bits
        self.offset = float(offset)
        self._extract = extract
        self._box = box
        self.xpart = xpart  # program columns (the rest are slacks), if any
        self._Ax = A_x  # A restricted to the program columns
        self.has_rows = A is not None and row_mask is not None and row_mask.fun != K.ZERO
        if self.has_rows:
            self.b = b
            self.row_mask = row_mask
            self.row_bits = A.row_bits
            self.A2 = MatF(manager, manager.mul(A.fun, A.fun), A.row_bits, A.col_bits, A.shape)
        else:
            self.row_bits = ()
            self.b = VecF(manager, K.ZERO, ())
            self.row_mask = VecF(manager, K.ZERO, ())
        self.n_active = int(round(manager.element_sum(col_mask.fun, col_mask.bits)))
        self.n_rows_active = (
            int(round(manager.element_sum(self.row_mask.fun, self.row_mask.bits))) if self.has_rows else 0
        )
        self._last_size = manager.size

    # products

    def A_mv(self, x):
        return matvec(self.A, x)

    def At_mv(self, y):
        return matvec_t(self.A, y)

    def A_row(self, i: int):
        return row_extract(self.A, i)

    def A2_mv(self, d):
        return matvec(self.A2, d)

    def A2t_mv(self, e):
        return matvec_t(self.A2, e)

    def Ax_mv(self, x):
        return matvec(self._Ax, x) if self._Ax is not None else self.A_mv(x * self.xpart)

    def Axt_mv(self, y):
        return matvec_t(self._Ax, y) if self._Ax is not None else self.At_mv(y) * self.xpart

    def Q_mv(self, x):
        if self.Q is None:
            return self.la.zeros_like(x)
        return self.Q.mv(x)

    def Q_diag(self):
        if self.Q is None:
            return self.la.zeros_like(self.c)
        return self.Q.diagonal()

    def q_is_diagonal(self) -> bool:
        return self.Q is None or self.Q.diagonal_only

    def a_is_diagonal(self) -> bool:
        return self._box is not None

    def A_inv_mv(self, r):
        return self._box.inv(r)

    def A_inv_t_mv(self, v):
        return self._box.inv_t(v)

    # vectors

    def unit_row(self, i: int, value: float = 1.0):
        return unit(self.m, i, self.row_bits, value)

    def unit_col(self, i: int, value: float = 1.0):
        return unit(self.m, i, self.col_bits, value)

    def zeros_row(self):
        return VecF(self.m, K.ZERO, self.row_bits)

    def extract(self, x) -> np.ndarray:
        if self._extract is not None:
            return self._extract(x)
        return to_dense(x)

    # store

    def maintenance(self, opts) -> None:
        m = self.m
        if m.size > max(opts.compact_factor * self._last_size, COMPACT_FLOOR):
            m.compact()
            self._last_size = m.size

    def store_size(self) -> int:
        return self.m.size

    def node_counts(self) -> tuple[int, int]:
        a = self.A.node_count() if self.has_rows else 1
        q = self.Q.node_count() if self.Q is not None else 1
        return a, q


class _Box:
    """Inverse of a diagonal constraint matrix whose row i pairs with column i."""

    def __init__(self, m, adiag_rows: VecF, rows, std_bits, beta, pad: VecF, ncols):
        self.m = m
        self.a = adiag_rows
        self.rows = tuple(rows)
        self.std_bits = tuple(std_bits)
        self.beta = beta
        self.pad = pad
        self.to_cols = dict(zip(self.rows, self.std_bits[1:]))
        self.to_rows = {v: k for k, v in self.to_cols.items()}
        self.cube = {beta: 0, **{v: 0 for v in self.std_bits[1 + len(self.rows):]}}

    def inv(self, r):
        m = self.m
        q = m.apply(Op.DIV0, r.fun, self.a.fun)
        f = m.mul(m.relabel(q, self.to_cols), self.pad.fun)
        return VecF(m, m.node(self.beta, K.ZERO, f) if f != K.ZERO else K.ZERO, self.std_bits)

    def inv_t(self, v):
        m = self.m
        f = m.relabel(m.restrict(v.fun, self.cube), self.to_rows)
        return VecF(m, m.apply(Op.DIV0, f, self.a.fun), self.rows)


def _cube(m: AddManager, literals) -> int:
    f = K.ONE
    for v, bit in sorted(literals, reverse=True):
        f = m.node(v, f, K.ZERO) if bit else m.node(v, K.ZERO, f)
    return f


def _beta(m: AddManager, beta: int, hi: int, lo: int) -> int:
    return m.node(beta, hi, lo) if hi != lo else hi


def problem_from_standard(qp) -> AddProblem:
    """Standard equality form of a compiled program (slack columns added)."""
    m = qp.manager
    L = qp.layout
    beta = L.beta
    rows = L.rows
    C = L.col_width
    Rt = len(rows)
    kbits = L.col_bits
    std_bits = (beta,) + tuple(kbits)
    pad_x = _cube(m, [(v, 0) for v in kbits[C:]])
    pad_s = _cube(m, [(v, 0) for v in kbits[Rt:]])
    ineq_cols = m.relabel(qp.ineq_mask.fun, dict(zip(rows, kbits)))

    A_ext = m.mul(qp.A.fun, pad_x)
    S = m.mul(m.mul(m.sub(K.ZERO, equality(m, rows, kbits[:Rt])), pad_s), qp.ineq_mask.fun) if Rt else K.ZERO
    A_std = _beta(m, beta, S, A_ext)
    col_mask = _beta(m, beta, m.mul(ineq_cols, pad_s), m.mul(qp.col_mask.fun, pad_x))
    c_std = _beta(m, beta, K.ZERO, m.mul(qp.c.fun, pad_x))
    nstd = 1 << len(std_bits)

    Q = None
    qf = qp.Q.fun
    if qf != K.ZERO:
        off = m.mul(qf, m.sub(K.ONE, equality(m, L.cols, L.cols2)))
        qd = diagonal(qp.Q, out_bits=L.cols)
        qd_std = VecF(m, _beta(m, beta, K.ZERO, m.mul(qd.fun, pad_x)), std_bits, nstd)
        if off == K.ZERO:
            Q = DiagQ(qd_std)
        else:
            Q = EmbeddedQ(qp.Q, beta, L.cols, L.cols2, VecF(m, pad_x, kbits), std_bits, qd_std)

    box = None
    if Q is not None and not Q.diagonal_only and qp.ineq_mask.fun == K.ZERO and Rt == C and Rt > 0:
        off = m.mul(qp.A.fun, m.sub(K.ONE, equality(m, rows, L.cols)))
        ad = diagonal(MatF(m, qp.A.fun, rows, L.cols), out_bits=rows)
        rmask_cols = m.relabel(qp.row_mask.fun, dict(zip(rows, kbits)))
        nz = m.map_terminals(ad.fun, lambda t: (t != 0).astype(np.float64))
        if off == K.ZERO and rmask_cols == qp.col_mask.fun and nz == qp.row_mask.fun:
            box = _Box(m, ad, rows, std_bits, beta, VecF(m, pad_x, kbits), C)

    cube0 = {beta: 0, **{v: 0 for v in kbits[C:]}}

    def extract(x):
        f = m.restrict(x.fun, cube0)
        return to_dense(VecF(m, f, L.cols))

    prob = AddProblem(
        m,
        MatF(m, A_std, rows, std_bits, (1 << Rt, nstd)),
        VecF(m, qp.b.fun, rows),
        VecF(m, c_std, std_bits, nstd),
        Q,
        VecF(m, col_mask, std_bits, nstd),
        VecF(m, qp.row_mask.fun, rows),
        extract=extract,
        box=box,
        xpart=VecF(m, m.node(beta, K.ZERO, K.ONE), std_bits, nstd),
        A_x=MatF(m, _beta(m, beta, K.ZERO, A_ext), rows, std_bits, (1 << Rt, nstd)),
    )
    prob.source = qp
    return prob
