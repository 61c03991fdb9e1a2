"""Random equality-form QPs with a diagonal Q, on both backends."""

from __future__ import annotations

import numpy as np

from symqp.add import AddManager
from symqp.ipm import AddProblem, DiagQ
from symqp.linalg import VecF, alloc_matrix_bits, from_dense, vector_from_dense


def random_separable(seed: int, n: int | None = None, m: int | None = None, lp: bool = False):
    """``(A, b, c, q)``: feasible ``A x = b, x >= 0`` with ``Q = diag(q) > 0``."""
    rng = np.random.default_rng(seed)
    n = n or int(rng.integers(2, 65))
    m = m or int(rng.integers(1, max(2, n // 2) + 1))
    A = rng.standard_normal((m, n)) * (rng.random((m, n)) < 0.5)
    A[np.arange(m), rng.choice(n, m, replace=False)] += 2.0  # no empty rows
    x0 = rng.random(n) + 0.1
    b = A @ x0
    c = rng.standard_normal(n)
    q = np.zeros(n) if lp else rng.random(n) + 0.1
    return A, b, c, q


def add_problem(A, b, c, q) -> AddProblem:
    m_rows, n = A.shape
    mgr = AddManager()
    rb, cb = alloc_matrix_bits(mgr, max(1, int(np.ceil(np.log2(m_rows)))), max(1, int(np.ceil(np.log2(n)))))
    Am = from_dense(A, mgr, rb, cb)
    Q = DiagQ(vector_from_dense(q, mgr, cb)) if np.any(q) else None
    return AddProblem(
        mgr,
        Am,
        vector_from_dense(b, mgr, rb),
        vector_from_dense(c, mgr, cb),
        Q,
        vector_from_dense(np.ones(n), mgr, cb),
        vector_from_dense(np.ones(m_rows), mgr, rb),
    )


def padded(A, b, c, q):
    """The same data zero padded to the diagram's power-of-two shape."""
    m_rows, n = A.shape
    R = 1 << max(1, int(np.ceil(np.log2(m_rows))))
    C = 1 << max(1, int(np.ceil(np.log2(n))))
    Ap = np.zeros((R, C))
    Ap[:m_rows, :n] = A
    pad = lambda v, k: np.concatenate([v, np.zeros(k - len(v))])  # noqa: E731
    return Ap, pad(b, R), pad(c, C), pad(q, C), pad(np.ones(n), C)
