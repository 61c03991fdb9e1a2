"""Scaling contrast between diagram and sparse matrix-vector products.

The ``block`` family stacks ``2**j`` copies of the Walsh matrix ``W_p``::

    A_j = [W; W; ...; W]

Each step doubles ``nnz(A)``. The diagram does not change, since the copy
selector bits never occur in it, so a symbolic product costs the same at
every step while a CSR product pays for every stored entry.

The ``mdp`` family solves factory MDP value LPs with both solvers.
"""

from __future__ import annotations

import gc
import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ..add import AddManager
from ..linalg import MatF, alloc_bits, alloc_matrix_bits, matvec, vector_from_dense, walsh

__all__ = ["BenchRow", "HEADER", "block_family", "mdp_family", "FAMILIES", "format_table", "growth"]

HEADER = ("name", "#vars", "#constr", "nnz(A)", "|ADD|", "time_symbolic", "time_ground")


@dataclass
class BenchRow:
    name: str
    n_vars: int
    n_constr: int
    nnz: int
    add_nodes: int
    time_symbolic: float
    time_ground: float

    def cells(self) -> tuple:
        return (
            self.name,
            str(self.n_vars),
            str(self.n_constr),
            str(self.nnz),
            str(self.add_nodes),
            f"{self.time_symbolic:.6g}",
            f"{self.time_ground:.6g}",
        )


def format_table(rows) -> str:
    lines = ["\t".join(HEADER)]
    lines += ["\t".join(r.cells()) for r in rows]
    return "\n".join(lines) + "\n"


def growth(values) -> list[float]:
    """Ratios of consecutive entries."""
    return [b / a for a, b in zip(values, values[1:])]


def _hadamard_csr(p: int, copies: int) -> sp.csr_matrix:
    W = np.array([[1.0]])
    for _ in range(p):
        W = np.block([[W, W], [W, -W]])
    return sp.csr_matrix(np.tile(W, (copies, 1)))


def _sample_ground(A: sp.csr_matrix, rng, inner: int = 5) -> float:
    x = rng.standard_normal(A.shape[1])
    t0 = time.perf_counter()
    for _ in range(inner):
        A @ x
    return (time.perf_counter() - t0) / inner


def _sample_symbolic(M: MatF, m: AddManager, rng, inner: int = 5) -> float:
    total = 0.0
    for _ in range(inner):
        v = vector_from_dense(rng.standard_normal(M.shape[1]), m, M.col_bits)
        m.clear_cache()  # no reuse between iterations, as in a solve
        t0 = time.perf_counter()
        matvec(M, v)
        total += time.perf_counter() - t0
    return total / inner


def block_family(p: int = 10, steps: int = 5, reps: int = 7, seed: int = 0) -> list[BenchRow]:
    """Per-product times for ``2**j`` stacked copies of ``W_p``, ``j < steps``.

    Each repetition visits every step once (so slow drift hits all steps
    alike) with the garbage collector paused; a step reports its best time.
    """
    rng = np.random.default_rng(seed)
    m = AddManager()
    copy_bits = alloc_bits(m, steps - 1)
    rows, cols = alloc_matrix_bits(m, p, p)
    W = walsh(p, m, rows, cols)
    matvec(W, vector_from_dense(rng.standard_normal(1 << p), m, cols))  # compile the kernels
    mats = [MatF(m, W.fun, copy_bits[steps - 1 - j :] + rows, cols) for j in range(steps)]
    csrs = [_hadamard_csr(p, 1 << j) for j in range(steps)]
    t_sym = [[] for _ in range(steps)]
    t_gr = [[] for _ in range(steps)]
    paused = gc.isenabled()
    gc.disable()
    try:
        for _ in range(reps):
            for j in range(steps):
                t_sym[j].append(_sample_symbolic(mats[j], m, rng))
                t_gr[j].append(_sample_ground(csrs[j], rng))
    finally:
        if paused:
            gc.enable()
    return [
        BenchRow(f"block_{j}", M.shape[1], M.shape[0], int(A.nnz), M.node_count(), min(t_sym[j]), min(t_gr[j]))
        for j, (M, A) in enumerate(zip(mats, csrs))
    ]


def mdp_family(sizes=((1, 3, 0), (1, 4, 1), (2, 3, 1)), precond_k: int = 10) -> list[BenchRow]:
    """Whole solves of factory value LPs, symbolic against ground."""
    from ..baseline import ground_qp, solve_ground
    from ..ipm import SolveOptions, ipm_solve
    from ..lang import compile
    from .mdp import factory_mdp, gen_mdp_lp

    out = []
    for objects, features, tools in sizes:
        mdp = factory_mdp(objects, features, tools)
        t0 = time.perf_counter()
        qp = compile(gen_mdp_lp(mdp))
        t_c = time.perf_counter() - t0
        opts = SolveOptions(precond_k=precond_k)
        t0 = time.perf_counter()
        ipm_solve(qp, opts)
        t_s = time.perf_counter() - t0 + t_c
        t0 = time.perf_counter()
        g = ground_qp(qp)
        solve_ground(g, SolveOptions())
        t_g = time.perf_counter() - t0
        s = qp.summary()
        out.append(BenchRow(mdp.name, s["cols"], s["rows"], int(g.A.nnz), s["nodes"]["total"], t_s, t_g))
    return out


FAMILIES = {"block": block_family, "mdp": mdp_family}
