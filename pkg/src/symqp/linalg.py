"""Vectors and matrices represented as decision diagrams.

A vector of length ``2**k`` is a diagram over ``k`` variables (its
*bits*, MSB first). A matrix is a diagram over row bits and column bits
that usually interleave in the variable order (row bit i directly above
column bit i), which keeps block-structured matrices small.

Logical sizes that are not powers of two are zero padded; the ``length``
and ``shape`` attributes remember the logical size for dense export.
"""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np

from . import _kernels as K
from .add import AddArithmeticError, AddManager, Op

__all__ = [
    "VecF",
    "MatF",
    "DiagF",
    "alloc_bits",
    "alloc_matrix_bits",
    "matvec",
    "matvec_t",
    "vec_add",
    "vec_sub",
    "vec_hadamard",
    "scalar_mul",
    "element_sum",
    "map_elements",
    "dot",
    "norm2_sq",
    "norm2",
    "diag_apply",
    "diag_reciprocal",
    "walsh",
    "identity",
    "from_dense",
    "to_dense",
    "vector_from_dense",
    "row_extract",
    "diagonal",
    "argmax",
    "unit",
    "constant",
    "save_dense",
    "load_dense",
]


def _nbits(n: int) -> int:
    return 0 if n <= 1 else int(math.ceil(math.log2(n)))


def alloc_bits(m: AddManager, k: int) -> tuple[int, ...]:
    return tuple(m.add_vars(k))


def alloc_matrix_bits(m: AddManager, nrow: int, ncol: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Fresh row and column bits, interleaved pairwise at the bottom of the order."""
    rows: list[int] = []
    cols: list[int] = []
    for i in range(max(nrow, ncol)):
        if i < nrow:
            rows.append(m.add_vars(1)[0])
        if i < ncol:
            cols.append(m.add_vars(1)[0])
    return tuple(rows), tuple(cols)


class VecF:
    """A vector held as a diagram over ``bits``."""

    __slots__ = ("manager", "fun", "bits", "length", "__weakref__")

    def __init__(self, manager: AddManager, fun: int, bits: Sequence[int], length: int | None = None):
        self.manager = manager
        self.fun = int(fun)
        self.bits = tuple(bits)
        self.length = (1 << len(self.bits)) if length is None else int(length)
        manager.track(self)

    def _roots(self):
        return (self.fun,)

    def _remap(self, mapping):
        self.fun = mapping[self.fun]

    def _like(self, fun: int) -> "VecF":
        return VecF(self.manager, fun, self.bits, self.length)

    @property
    def size(self) -> int:
        return 1 << len(self.bits)

    def node_count(self) -> int:
        return self.manager.node_count(self.fun)

    def to_dense(self) -> np.ndarray:
        return to_dense(self)

    def __eq__(self, other):
        if not isinstance(other, VecF):
            return NotImplemented
        return self.manager is other.manager and self.fun == other.fun and self.bits == other.bits

    def __hash__(self):
        return hash((id(self.manager), self.fun, self.bits))

    def __repr__(self):
        return f"VecF(fun={self.fun}, bits={self.bits}, nodes={self.node_count()})"

    def __add__(self, other):
        if isinstance(other, VecF):
            return vec_add(self, other)
        return self._like(self.manager.add(self.fun, self.manager.terminal(other)))

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, VecF):
            return vec_sub(self, other)
        return self._like(self.manager.sub(self.fun, self.manager.terminal(other)))

    def __rsub__(self, other):
        return self._like(self.manager.sub(self.manager.terminal(other), self.fun))

    def __mul__(self, other):
        if isinstance(other, VecF):
            return vec_hadamard(self, other)
        return scalar_mul(other, self)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, VecF):
            _same_space(self, other)
            return self._like(self.manager.apply(Op.DIV, self.fun, other.fun))
        return scalar_mul(1.0 / other, self)

    def __neg__(self):
        return self._like(self.manager.neg(self.fun))


class MatF:
    """A matrix held as a diagram over ``row_bits`` and ``col_bits``."""

    __slots__ = ("manager", "fun", "row_bits", "col_bits", "shape", "__weakref__")

    def __init__(
        self,
        manager: AddManager,
        fun: int,
        row_bits: Sequence[int],
        col_bits: Sequence[int],
        shape: tuple[int, int] | None = None,
    ):
        self.manager = manager
        self.fun = int(fun)
        self.row_bits = tuple(row_bits)
        self.col_bits = tuple(col_bits)
        if set(self.row_bits) & set(self.col_bits):
            raise ValueError("row and column bits must be disjoint")
        self.shape = (1 << len(self.row_bits), 1 << len(self.col_bits)) if shape is None else tuple(shape)
        manager.track(self)

    def _roots(self):
        return (self.fun,)

    def _remap(self, mapping):
        self.fun = mapping[self.fun]

    @property
    def T(self) -> "_Transposed":
        return _Transposed(self)

    def __matmul__(self, v: VecF) -> VecF:
        return matvec(self, v)

    def node_count(self) -> int:
        return self.manager.node_count(self.fun)

    def to_dense(self) -> np.ndarray:
        return to_dense(self)

    def row(self, i: int) -> VecF:
        return row_extract(self, i)

    def diagonal(self) -> VecF:
        return diagonal(self)

    def __repr__(self):
        return f"MatF(shape={self.shape}, nodes={self.node_count()})"


class _Transposed:
    __slots__ = ("mat",)

    def __init__(self, mat: MatF):
        self.mat = mat

    def __matmul__(self, v: VecF) -> VecF:
        return matvec_t(self.mat, v)


class DiagF:
    """A diagonal matrix stored as the vector of its diagonal."""

    __slots__ = ("diag",)

    def __init__(self, diag: VecF):
        self.diag = diag

    def __matmul__(self, v: VecF) -> VecF:
        return diag_apply(self, v)

    @property
    def T(self) -> "DiagF":
        return self

    def diagonal(self) -> VecF:
        return self.diag

    def to_dense(self) -> np.ndarray:
        return np.diag(to_dense(self.diag))


def _same_space(u: VecF, v: VecF) -> None:
    if u.manager is not v.manager:
        raise ValueError("vectors live in different managers")
    if u.bits != v.bits:
        raise ValueError(f"dimension mismatch: bits {u.bits} vs {v.bits}")


# ----------------------------------------------------------------------
# elementwise operations


def vec_add(u: VecF, v: VecF) -> VecF:
    _same_space(u, v)
    return u._like(u.manager.add(u.fun, v.fun))


def vec_sub(u: VecF, v: VecF) -> VecF:
    _same_space(u, v)
    return u._like(u.manager.sub(u.fun, v.fun))


def vec_hadamard(u: VecF, v: VecF) -> VecF:
    _same_space(u, v)
    return u._like(u.manager.mul(u.fun, v.fun))


def vec_apply(op, u: VecF, v: VecF) -> VecF:
    """Any pointwise binary operator of :class:`~symqp.add.Op`."""
    _same_space(u, v)
    return u._like(u.manager.apply(op, u.fun, v.fun))


def scalar_mul(k: float, v: VecF) -> VecF:
    k = float(k)
    if k == 1.0:
        return v
    if k == 0.0:
        return v._like(K.ZERO)
    m = v.manager
    return v._like(m.mul(m.terminal(k), v.fun))


def map_elements(v, fn: Callable[[np.ndarray], np.ndarray]):
    """Apply a vectorised scalar map to every entry (vector or matrix)."""
    m = v.manager
    fun = m.map_terminals(v.fun, fn)
    if isinstance(v, MatF):
        return MatF(m, fun, v.row_bits, v.col_bits, v.shape)
    return v._like(fun)


def element_sum(v) -> float:
    """Sum of all entries, including the zero padding."""
    if isinstance(v, MatF):
        return v.manager.element_sum(v.fun, v.row_bits + v.col_bits)
    return v.manager.element_sum(v.fun, v.bits)


def dot(u: VecF, v: VecF) -> float:
    _same_space(u, v)
    return u.manager.element_sum(u.manager.mul(u.fun, v.fun), u.bits)


def norm2_sq(v: VecF) -> float:
    return dot(v, v)


def norm2(v: VecF) -> float:
    return math.sqrt(norm2_sq(v))


def max_abs(v: VecF) -> float:
    m = v.manager
    return max(abs(m.extreme(v.fun, True)), abs(m.extreme(v.fun, False)))


def vmax(v: VecF) -> float:
    return v.manager.extreme(v.fun, True)


def vmin(v: VecF) -> float:
    return v.manager.extreme(v.fun, False)


def argmax(v: VecF) -> int:
    """Smallest index attaining the maximum entry."""
    return v.manager.arg_extreme(v.fun, v.bits, True)


def entry(v: VecF, i: int) -> float:
    k = len(v.bits)
    return v.manager.eval(v.fun, {b: (i >> (k - 1 - j)) & 1 for j, b in enumerate(v.bits)})


def constant(m: AddManager, value: float, bits: Sequence[int], length: int | None = None) -> VecF:
    return VecF(m, m.terminal(value), bits, length)


def unit(m: AddManager, i: int, bits: Sequence[int], value: float = 1.0) -> VecF:
    """The vector ``value * e_i``."""
    k = len(bits)
    f = m.terminal(value)
    for j in range(k - 1, -1, -1):
        b = (i >> (k - 1 - j)) & 1
        f = m.node(bits[j], f, K.ZERO) if b else m.node(bits[j], K.ZERO, f)
    return VecF(m, f, bits)


def diag_apply(d: DiagF, v: VecF) -> VecF:
    return vec_hadamard(d.diag, v)


def diag_reciprocal(d: DiagF) -> DiagF:
    """Entrywise reciprocal of a diagonal; a zero entry is an error."""
    v = d.diag
    if 0.0 in v.manager.terminal_values(v.fun):
        raise AddArithmeticError("diagonal has a zero entry")
    return DiagF(map_elements(v, lambda t: 1.0 / t))


# ----------------------------------------------------------------------
# products


def _schedule(m: AddManager, sums, outs, tag_key):
    events = sorted([(a, 1, x) for a, x in sums] + [(a, 0, x) for a, x in outs])
    kind = np.array([e[1] for e in events], dtype=np.int64)
    avar = np.array([e[0] for e in events], dtype=np.int64)
    vvar = np.array([e[2] if e[1] == 1 else -1 for e in events], dtype=np.int64)
    outv = np.array([e[2] if e[1] == 0 else -1 for e in events], dtype=np.int64)
    nsum = np.zeros(len(events) + 1, dtype=np.int64)
    for t in range(len(events) - 1, -1, -1):
        nsum[t] = nsum[t + 1] + kind[t]
    sv = [x for _, x in sorted(sums)]
    ov = [x for _, x in sorted(outs)]
    if any(b <= a for a, b in zip(sv, sv[1:])) or any(b <= a for a, b in zip(ov, ov[1:])):
        raise ValueError("vector bits must follow the matrix bit order")
    tag = m.tag(("mv", tag_key))
    return kind, avar, vvar, outv, nsum, tag


def _product(A: MatF, v: VecF, sum_bits, out_src, out_bits, length) -> VecF:
    m = A.manager
    if v.manager is not m:
        raise ValueError("operands live in different managers")
    if len(v.bits) != len(sum_bits):
        raise ValueError(f"dimension mismatch: matrix has {len(sum_bits)} bits, vector {len(v.bits)}")
    out_bits = tuple(out_src if out_bits is None else out_bits)
    if len(out_bits) != len(out_src):
        raise ValueError("output bit count mismatch")
    sums = list(zip(sum_bits, v.bits))
    outs = list(zip(out_src, out_bits))
    kind, avar, vvar, outv, nsum, tag = _schedule(m, sums, outs, (tuple(sums), tuple(outs)))
    fun = m._run(
        lambda: K.matvec(m.nodes, m.vals, m.utab, m.ctab, m.meta, A.fun, v.fun, 0, kind, avar, vvar, outv, nsum, tag)
    )
    return VecF(m, fun, out_bits, length)


def matvec(A: MatF, v: VecF, out_bits: Sequence[int] | None = None) -> VecF:
    """``A @ v``; the result lives on ``A.row_bits`` unless ``out_bits`` is given."""
    return _product(A, v, A.col_bits, A.row_bits, out_bits, A.shape[0])


def matvec_t(A: MatF, v: VecF, out_bits: Sequence[int] | None = None) -> VecF:
    """``A.T @ v``; the result lives on ``A.col_bits`` unless ``out_bits`` is given."""
    return _product(A, v, A.row_bits, A.col_bits, out_bits, A.shape[1])


def row_extract(A: MatF, i: int) -> VecF:
    """Row ``i`` of ``A`` as a vector over the column bits."""
    k = len(A.row_bits)
    cube = {b: (i >> (k - 1 - j)) & 1 for j, b in enumerate(A.row_bits)}
    return VecF(A.manager, A.manager.restrict(A.fun, cube), A.col_bits, A.shape[1])


def col_extract(A: MatF, j: int) -> VecF:
    k = len(A.col_bits)
    cube = {b: (j >> (k - 1 - t)) & 1 for t, b in enumerate(A.col_bits)}
    return VecF(A.manager, A.manager.restrict(A.fun, cube), A.row_bits, A.shape[0])


def diagonal(A: MatF, out_bits: Sequence[int] | None = None) -> VecF:
    """Main diagonal of a square matrix."""
    if len(A.row_bits) != len(A.col_bits):
        raise ValueError("matrix is not square")
    m = A.manager
    out_bits = tuple(A.row_bits if out_bits is None else out_bits)
    rv = np.array(A.row_bits, dtype=np.int64)
    cv = np.array(A.col_bits, dtype=np.int64)
    ov = np.array(out_bits, dtype=np.int64)
    tag = m.tag(("diag", A.row_bits, A.col_bits, out_bits))
    fun = m._run(lambda: K.diagonal(m.nodes, m.vals, m.utab, m.ctab, m.meta, A.fun, 0, rv, cv, ov, tag))
    return VecF(m, fun, out_bits, min(A.shape))


def transpose(A: MatF) -> MatF:
    """Swap the roles of row and column bits (no diagram work needed)."""
    return MatF(A.manager, A.fun, A.col_bits, A.row_bits, (A.shape[1], A.shape[0]))


# ----------------------------------------------------------------------
# constructors


def walsh(n: int, m: AddManager | None = None, row_bits=None, col_bits=None) -> MatF:
    """Unnormalised Walsh matrix of order ``2**n``.

    Built from the block recursion W_k = [[W, W], [W, -W]] with W = W_(k-1),
    which needs only four nodes per bit pair.
    """
    if m is None:
        m = AddManager()
    if row_bits is None or col_bits is None:
        row_bits, col_bits = alloc_matrix_bits(m, n, n)
    if len(row_bits) != n or len(col_bits) != n:
        raise ValueError("need n row bits and n column bits")
    pos = m.terminal(1.0)
    neg = m.terminal(-1.0)
    for i in range(n - 1, -1, -1):
        r, c = row_bits[i], col_bits[i]
        if r > c:
            raise ValueError("walsh expects each row bit above its column bit")
        p_hi = m.node(c, neg, pos)
        n_hi = m.node(c, pos, neg)
        pos, neg = m.node(r, p_hi, pos), m.node(r, n_hi, neg)
    return MatF(m, pos, row_bits, col_bits)


def equality(m: AddManager, xs: Sequence[int], ys: Sequence[int]) -> int:
    """Indicator diagram of ``xs == ys`` bitwise."""
    pairs = sorted((min(x, y), max(x, y)) for x, y in zip(xs, ys))
    nested = all(p[1] < q[0] for p, q in zip(pairs, pairs[1:]))
    if not nested:
        f = K.ONE
        for x, y in zip(xs, ys):
            vx, vy = m.var(x), m.var(y)
            both = m.mul(vx, vy)
            neither = m.mul(m.sub(K.ONE, vx), m.sub(K.ONE, vy))
            f = m.mul(f, m.add(both, neither))
        return f
    f = K.ONE
    for a, b in reversed(pairs):
        same1 = m.node(b, f, K.ZERO)
        same0 = m.node(b, K.ZERO, f)
        f = m.node(a, same1, same0)
    return f


def identity(n: int, m: AddManager | None = None, row_bits=None, col_bits=None) -> MatF:
    """Identity of order ``2**n``."""
    if m is None:
        m = AddManager()
    if row_bits is None or col_bits is None:
        row_bits, col_bits = alloc_matrix_bits(m, n, n)
    return MatF(m, equality(m, row_bits, col_bits), row_bits, col_bits)


def _leaf_order(row_bits, col_bits):
    tagged = [(b, 0, i) for i, b in enumerate(row_bits)] + [(b, 1, i) for i, b in enumerate(col_bits)]
    tagged.sort()
    return tagged


def from_dense(M, m: AddManager | None = None, row_bits=None, col_bits=None) -> MatF:
    """Matrix diagram from a dense array, zero padded to powers of two."""
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2:
        raise ValueError("expected a 2-d array")
    if m is None:
        m = AddManager()
    R, C = _nbits(M.shape[0]), _nbits(M.shape[1])
    if row_bits is None or col_bits is None:
        row_bits, col_bits = alloc_matrix_bits(m, R, C)
    row_bits, col_bits = tuple(row_bits), tuple(col_bits)
    if (1 << len(row_bits)) < M.shape[0] or (1 << len(col_bits)) < M.shape[1]:
        raise ValueError("not enough bits for the matrix")
    R, C = len(row_bits), len(col_bits)
    P = np.zeros((1 << R, 1 << C))
    P[: M.shape[0], : M.shape[1]] = M
    tagged = _leaf_order(row_bits, col_bits)
    axes = [t[2] if t[1] == 0 else R + t[2] for t in tagged]
    leaves = P.reshape([2] * (R + C)).transpose(axes).ravel() if R + C else P.ravel()
    fun = m.from_leaves(leaves, [t[0] for t in tagged])
    return MatF(m, fun, row_bits, col_bits, M.shape)


def vector_from_dense(x, m: AddManager | None = None, bits=None) -> VecF:
    x = np.asarray(x, dtype=np.float64).ravel()
    if m is None:
        m = AddManager()
    if bits is None:
        bits = alloc_bits(m, _nbits(x.shape[0]))
    bits = tuple(bits)
    if (1 << len(bits)) < x.shape[0]:
        raise ValueError("not enough bits for the vector")
    if any(b <= a for a, b in zip(bits, bits[1:])):
        raise ValueError("bits must be increasing")
    leaves = np.zeros(1 << len(bits))
    leaves[: x.shape[0]] = x
    return VecF(m, m.from_leaves(leaves, bits), bits, x.shape[0])


def to_dense(A, logical: bool = True) -> np.ndarray:
    """Dense copy of a vector or matrix (cropped to the logical size)."""
    m = A.manager
    if isinstance(A, VecF):
        out = m.to_dense(A.fun, A.bits)
        return out[: A.length] if logical else out
    if isinstance(A, DiagF):
        return A.to_dense()
    R, C = len(A.row_bits), len(A.col_bits)
    tagged = _leaf_order(A.row_bits, A.col_bits)
    flat = m.to_dense(A.fun, [t[0] for t in tagged])
    axes = [t[2] if t[1] == 0 else R + t[2] for t in tagged]
    full = flat.reshape([2] * (R + C)).transpose(np.argsort(axes)).reshape(1 << R, 1 << C) if R + C else flat.reshape(1, 1)
    if logical:
        return full[: A.shape[0], : A.shape[1]].copy()
    return full


def nnz(A) -> int:
    """Number of nonzero entries, counted on the diagram."""
    m = A.manager
    ind = m.map_terminals(A.fun, lambda t: (t != 0).astype(np.float64))
    bits = A.bits if isinstance(A, VecF) else A.row_bits + A.col_bits
    return int(round(m.element_sum(ind, bits)))


# ----------------------------------------------------------------------
# dense text IO


def save_dense(path, A) -> None:
    """Write a dense array, one row per line, full float precision."""
    arr = np.atleast_2d(np.asarray(A, dtype=np.float64))
    np.savetxt(path, arr, fmt="%.17g")


def load_dense(path) -> np.ndarray:
    return np.atleast_2d(np.loadtxt(path, dtype=np.float64, ndmin=2))
