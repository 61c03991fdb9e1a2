"""Ground-and-solve baseline.

Grounded matrices are held as :class:`SparseMatrix` (a thin wrapper over
a scipy CSR matrix with a coordinate text format). The solver runs the same
outer loop as the symbolic path with a numpy backend and a direct or CG
inner solve.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .ipm.cg import CgStats, cg_solve
from .ipm.core import ipm_loop
from .ipm.options import SolveOptions, SolveReport

__all__ = [
    "SparseMatrix",
    "GroundedQp",
    "ground_qp",
    "ground_ipm_solve",
    "solve_ground",
    "NumpyLinearAlgebra",
    "NumpyProblem",
]

DEFAULT_BUDGET = 24


class SparseMatrix:
    """Sorted, deduplicated nonzero triplets with a compressed-row view."""

    def __init__(self, shape, rows=(), cols=(), vals=()):
        nr, nc = int(shape[0]), int(shape[1])
        m = sp.coo_matrix(
            (np.asarray(vals, dtype=np.float64), (np.asarray(rows, dtype=np.int64), np.asarray(cols, dtype=np.int64))),
            shape=(nr, nc),
        ).tocsr()
        m.sum_duplicates()
        m.eliminate_zeros()
        m.sort_indices()
        self.csr = m

    @classmethod
    def from_csr(cls, m) -> "SparseMatrix":
        out = cls.__new__(cls)
        m = sp.csr_matrix(m, dtype=np.float64)
        m.sum_duplicates()
        m.eliminate_zeros()
        m.sort_indices()
        out.csr = m
        return out

    @classmethod
    def from_dense(cls, M) -> "SparseMatrix":
        return cls.from_csr(sp.csr_matrix(np.atleast_2d(np.asarray(M, dtype=np.float64))))

    @property
    def shape(self) -> tuple:
        return self.csr.shape

    @property
    def nnz(self) -> int:
        return int(self.csr.nnz)

    def triplets(self):
        coo = self.csr.tocoo()
        return coo.row.astype(np.int64), coo.col.astype(np.int64), coo.data.copy()

    def to_dense(self) -> np.ndarray:
        return self.csr.toarray()

    def __matmul__(self, x):
        return self.csr @ x

    def rmatvec(self, y):
        return self.csr.T @ y

    def __eq__(self, other):
        if not isinstance(other, SparseMatrix):
            return NotImplemented
        if self.shape != other.shape or self.nnz != other.nnz:
            return False
        a, b = self.triplets(), other.triplets()
        return all(np.array_equal(u, v) for u, v in zip(a, b))

    def __repr__(self):
        return f"SparseMatrix(shape={self.shape}, nnz={self.nnz})"

    def save(self, path) -> None:
        """Coordinate text: ``rows cols nnz`` then one ``row col value`` per line."""
        r, c, v = self.triplets()
        with open(path, "w") as fh:
            fh.write(f"{self.shape[0]} {self.shape[1]} {self.nnz}\n")
            for i, j, x in zip(r, c, v):
                fh.write(f"{int(i)} {int(j)} {float(x)!r}\n")

    @classmethod
    def load(cls, path) -> "SparseMatrix":
        text = Path(path).read_text().split("\n")
        header = text[0].split()
        if len(header) != 3:
            raise ValueError("expected a header 'rows cols nnz'")
        nr, nc, nnz = (int(t) for t in header)
        body = [ln.split() for ln in text[1:] if ln.strip()]
        if len(body) != nnz:
            raise ValueError(f"header announces {nnz} entries, found {len(body)}")
        rows = [int(b[0]) for b in body]
        cols = [int(b[1]) for b in body]
        vals = [float(b[2]) for b in body]
        if rows and (max(rows) >= nr or max(cols) >= nc or min(rows) < 0 or min(cols) < 0):
            raise ValueError("triplet index out of range")
        return cls((nr, nc), rows, cols, vals)


# ----------------------------------------------------------------------
# grounding compiled diagrams


def _matrix_triplets(M):
    m = M.manager
    order = sorted(M.row_bits + M.col_bits)
    R, C = len(M.row_bits), len(M.col_bits)
    rpos = {b: R - 1 - i for i, b in enumerate(M.row_bits)}
    cpos = {b: C - 1 - i for i, b in enumerate(M.col_bits)}
    wr = [1 << rpos[v] if v in rpos else 0 for v in order]
    wc = [1 << cpos[v] if v in cpos else 0 for v in order]
    return m.nonzeros(M.fun, order, wr, wc)


def matf_to_sparse(M) -> SparseMatrix:
    r, c, v = _matrix_triplets(M)
    return SparseMatrix(M.shape, r, c, v)


@dataclass
class GroundedQp:
    A: SparseMatrix
    Q: SparseMatrix
    b: np.ndarray
    c: np.ndarray
    row_mask: np.ndarray
    col_mask: np.ndarray
    ineq_mask: np.ndarray


def ground_qp(qp, budget: int = DEFAULT_BUDGET) -> GroundedQp:
    """Sparse copies of a compiled program's diagrams (entrywise identical)."""
    bits = len(qp.A.row_bits) + len(qp.A.col_bits)
    if max(len(qp.A.row_bits), 2 * len(qp.A.col_bits)) > budget or bits > budget:
        raise ValueError(f"grounding needs {bits} index bits, budget is {budget}")
    from .linalg import to_dense

    return GroundedQp(
        A=matf_to_sparse(qp.A),
        Q=matf_to_sparse(qp.Q),
        b=to_dense(qp.b),
        c=to_dense(qp.c),
        row_mask=to_dense(qp.row_mask),
        col_mask=to_dense(qp.col_mask),
        ineq_mask=to_dense(qp.ineq_mask),
    )


# ----------------------------------------------------------------------
# numpy backend


class NumpyLinearAlgebra:
    def dot(self, u, v) -> float:
        return float(np.dot(u, v))

    def norm(self, u) -> float:
        return float(np.linalg.norm(u))

    def amax(self, u) -> float:
        return float(np.max(np.abs(u))) if u.size else 0.0

    def vmax(self, u) -> float:
        return float(np.max(u))

    def argmax(self, u) -> int:
        return int(np.argmax(u))

    def entry(self, u, i: int) -> float:
        return float(u[i])

    def zeros_like(self, u):
        return np.zeros_like(u)

    def div0(self, u, v):
        out = np.zeros(np.broadcast_shapes(np.shape(u), np.shape(v)))
        np.divide(u, v, out=out, where=v != 0)
        return out

    def clip(self, u, lo, hi):
        return np.clip(u, lo, hi)

    def maximum(self, u, floor):
        return np.maximum(u, floor)

    def min_ratio(self, x, dx) -> float:
        neg = dx < 0
        if not np.any(neg):
            return float("inf")
        r = -x[neg] / dx[neg]
        r = r[r > 0]
        return float(r.min()) if r.size else float("inf")

    def min_value(self, u, mask) -> float:
        sel = mask != 0
        return float(u[sel].min()) if np.any(sel) else float("inf")

    def quantize(self, u, digits: int):
        out = u.copy()
        nz = u != 0
        e = np.floor(np.log10(np.abs(u[nz])))
        scale = 10.0 ** (digits - 1 - e)
        out[nz] = np.round(u[nz] * scale) / scale
        return out

    def to_numpy(self, u):
        return np.asarray(u)


def _as_operator(Q, n):
    if Q is None:
        return None
    if isinstance(Q, SparseMatrix):
        return Q.csr
    if sp.issparse(Q):
        return sp.csr_matrix(Q)
    if isinstance(Q, np.ndarray):
        return sp.csr_matrix(Q) if Q.ndim == 2 else sp.diags(Q).tocsr()
    return Q  # an object with matvec(x) and diagonal()


class NumpyProblem:
    """Equality-form QP on numpy arrays and scipy sparse matrices."""

    def __init__(self, A, b, c, Q=None, col_mask=None, row_mask=None, offset: float = 0.0, inner: str = "direct", ncols_user=None, xpart=None):
        self.la = NumpyLinearAlgebra()
        c = np.asarray(c, dtype=np.float64)
        n = c.shape[0]
        self.c = c
        self.col_mask = np.ones(n) if col_mask is None else np.asarray(col_mask, dtype=np.float64)
        self.offset = float(offset)
        self.Qop = _as_operator(Q, n)
        if A is not None:
            A = A.csr if isinstance(A, SparseMatrix) else sp.csr_matrix(A)
        self.has_rows = A is not None and A.shape[0] > 0
        if row_mask is not None and self.has_rows and not np.any(np.asarray(row_mask) != 0):
            self.has_rows = False
        if self.has_rows:
            self.A = A
            self.At = A.T.tocsr()
            self.A2 = A.multiply(A).tocsr()
            self.b = np.asarray(b, dtype=np.float64)
            self.row_mask = np.ones(A.shape[0]) if row_mask is None else np.asarray(row_mask, dtype=np.float64)
        else:
            self.A = None
            self.b = np.zeros(0)
            self.row_mask = np.zeros(0)
        self.n_active = int(np.count_nonzero(self.col_mask))
        self.n_rows_active = int(np.count_nonzero(self.row_mask))
        if inner not in ("direct", "cg"):
            raise ValueError("inner must be 'direct' or 'cg'")
        self.direct = inner == "direct"
        self.ncols_user = n if ncols_user is None else ncols_user
        self.xpart = None if xpart is None else np.asarray(xpart, dtype=np.float64)

    def A_mv(self, x):
        return self.A @ x

    def At_mv(self, y):
        return self.At @ y

    def A_row(self, i: int):
        return self.A.getrow(i).toarray().ravel()

    def A2_mv(self, d):
        return self.A2 @ d

    def A2t_mv(self, e):
        return self.A2.T @ e

    def Ax_mv(self, x):
        return self.A @ (x * self.xpart)

    def Axt_mv(self, y):
        return (self.At @ y) * self.xpart

    def Q_mv(self, x):
        if self.Qop is None:
            return np.zeros_like(x)
        if sp.issparse(self.Qop):
            return self.Qop @ x
        return self.Qop.matvec(x)

    def Q_diag(self):
        if self.Qop is None:
            return np.zeros_like(self.c)
        return np.asarray(self.Qop.diagonal(), dtype=np.float64)

    def q_is_diagonal(self) -> bool:
        if self.Qop is None:
            return True
        if not sp.issparse(self.Qop):
            return False
        return (self.Qop - sp.diags(self.Qop.diagonal())).count_nonzero() == 0

    def a_is_diagonal(self) -> bool:
        if not self.has_rows or self.A.shape[0] != self.A.shape[1]:
            return False
        off = self.A - sp.diags(self.A.diagonal())
        d = self.A.diagonal()
        return off.count_nonzero() == 0 and np.array_equal(d != 0, self.row_mask != 0) and np.array_equal(
            self.row_mask != 0, self.col_mask != 0
        )

    def A_inv_mv(self, r):
        return self.la.div0(r, self.A.diagonal())

    def A_inv_t_mv(self, v):
        return self.la.div0(v, self.A.diagonal())

    def unit_row(self, i: int, value: float = 1.0):
        e = np.zeros(self.A.shape[0])
        e[i] = value
        return e

    def unit_col(self, i: int, value: float = 1.0):
        e = np.zeros(self.c.shape[0])
        e[i] = value
        return e

    def zeros_row(self):
        return np.zeros(self.A.shape[0] if self.has_rows else 0)

    def extract(self, x):
        return np.asarray(x)[: self.ncols_user].copy()

    def maintenance(self, opts) -> None:
        pass

    def store_size(self) -> int:
        return 0

    # direct inner solves

    def solve_separable(self, D, rho_d: float, f):
        act = np.flatnonzero(self.row_mask)
        Asub = self.A[act]
        N = (Asub @ sp.diags(D) @ Asub.T).toarray()
        if rho_d:
            N[np.diag_indices_from(N)] += rho_d
        z = np.zeros_like(f)
        try:
            cf = scipy.linalg.cho_factor(N, check_finite=False)
            z[act] = scipy.linalg.cho_solve(cf, f[act], check_finite=False)
        except (np.linalg.LinAlgError, ValueError):
            z[act] = np.linalg.lstsq(N, f[act], rcond=None)[0]
        return z

    def solve_inequality(self, H, E, rhs):
        act = np.flatnonzero(self.col_mask * self.xpart)
        Ax = self.A[:, act]
        N = (Ax.T @ sp.diags(E) @ Ax).toarray()
        N[np.diag_indices_from(N)] += H[act]
        if self.Qop is not None:
            N += self._q_block(act)
        z = np.zeros_like(rhs)
        z[act] = scipy.linalg.solve(N, rhs[act], assume_a="sym", check_finite=False)
        return z

    def _q_block(self, act):
        if sp.issparse(self.Qop):
            return self.Qop[act][:, act].toarray()
        E = np.zeros((self.c.shape[0], act.size))
        E[act, np.arange(act.size)] = 1.0
        return np.column_stack([self.Q_mv(E[:, j]) for j in range(act.size)])[act]

    def solve_bounds(self, H, rhs):
        act = np.flatnonzero(self.col_mask)
        if self.Qop is None:
            return self.la.div0(rhs, H)
        N = self._q_block(act)
        N[np.diag_indices_from(N)] += H[act]
        z = np.zeros_like(rhs)
        z[act] = scipy.linalg.solve(N, rhs[act], assume_a="sym", check_finite=False)
        return z


def ground_ipm_solve(A, Q, b, c, opts: SolveOptions | None = None, *, col_mask=None, row_mask=None, offset: float = 0.0, inner: str = "direct") -> SolveReport:
    """Solve ``min c'x + x'Qx/2 s.t. A x = b, x >= 0`` with sparse linear algebra.

    ``A`` may be ``None`` (bounds only). Same loop and stopping rule as the
    symbolic solver; ``inner`` selects a direct factorization or CG.
    """
    prob = NumpyProblem(A, b, c, Q, col_mask, row_mask, offset, inner)
    return ipm_loop(prob, opts, backend=f"ground-{inner}")


def standard_form(g: GroundedQp):
    """Append ``-I`` slack columns for the inequality rows."""
    A = g.A.csr
    nr, nc = A.shape
    ineq = np.asarray(g.ineq_mask, dtype=np.float64)
    if nr and np.any(ineq):
        S = -sp.diags(ineq).tocsr()
        A_std = sp.hstack([A, S]).tocsr()
        c_std = np.concatenate([g.c, np.zeros(nr)])
        mask = np.concatenate([g.col_mask, ineq])
        Q = g.Q.csr
        Q_std = sp.block_diag([Q, sp.csr_matrix((nr, nr))]).tocsr()
        xpart = np.concatenate([np.ones(nc), np.zeros(nr)])
    else:
        A_std, c_std, mask, Q_std = A, g.c.copy(), np.asarray(g.col_mask, dtype=np.float64), g.Q.csr
        xpart = np.ones(nc)
    return A_std, c_std, mask, Q_std, xpart


def solve_ground(qp_or_grounded, opts: SolveOptions | None = None, inner: str = "direct") -> SolveReport:
    """Ground a compiled program (if needed) and solve it with the baseline."""
    t0 = time.perf_counter()
    g = qp_or_grounded if isinstance(qp_or_grounded, GroundedQp) else ground_qp(qp_or_grounded)
    t_ground = time.perf_counter() - t0
    A_std, c_std, mask, Q_std, xpart = standard_form(g)
    Q = Q_std if Q_std.nnz else None
    prob = NumpyProblem(A_std, g.b, c_std, Q, mask, g.row_mask, 0.0, inner, ncols_user=g.c.shape[0], xpart=xpart)
    report = ipm_loop(prob, opts, backend=f"ground-{inner}")
    report.time_compile = t_ground
    return report
