"""Partial pivoted Cholesky preconditioner.

``k`` greedy pivots on the largest remaining diagonal entry give a
trapezoidal factor ``L`` (``k`` columns, each a full vector); the Schur
complement is replaced by its diagonal, so

    P = L L' + diag(d)        with d = 0 on the pivots.

Each pivot reads one row of the operator. Applying ``P^-1`` costs ``k``
inner products, ``k`` axpys and two ``k x k`` triangular solves.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.linalg import solve_triangular


class PartialCholesky:
    def __init__(self, op, k: int, rel_floor: float = 1e-14):
        la = op.la
        self.la = la
        self.mask = op.mask
        d = op.diagonal()
        self.pivots: list[int] = []
        self.cols: list = []
        self.stopped_early = False
        dmax0 = la.vmax(d) if k else 0.0
        floor = rel_floor * max(dmax0, 1e-300)
        for _ in range(k):
            p = la.argmax(d)
            dp = la.entry(d, p)
            if not dp > floor or p in self.pivots:
                self.stopped_early = True
                break
            col = op.row(p)
            for piv_col in self.cols:
                lp = la.entry(piv_col, p)
                if lp != 0.0:
                    col = col - lp * piv_col
            col = col * (1.0 / math.sqrt(dp))
            self.pivots.append(p)
            self.cols.append(col)
            d = d - col * col
            for q in self.pivots:
                dq = la.entry(d, q)
                if dq != 0.0:
                    d = d - op.unit(q, dq)
        kk = len(self.pivots)
        self.L11 = np.zeros((kk, kk))
        for j, col in enumerate(self.cols):
            for a in range(j, kk):
                self.L11[a, j] = la.entry(col, self.pivots[a])
        self.d = d
        self.dinv = la.div0(self.mask, la.maximum(d, floor if floor > 0 else 1e-300))
        for q in self.pivots:
            v = la.entry(self.dinv, q)
            if v != 0.0:
                self.dinv = self.dinv - op.unit(q, v)
        self._unit = op.unit

    @property
    def k(self) -> int:
        return len(self.pivots)

    def solve(self, v):
        """Approximately ``N^-1 v``: exactly ``P^-1 v`` on the active set."""
        la = self.la
        if not self.pivots:
            return v * self.dinv
        v1 = np.array([la.entry(v, p) for p in self.pivots])
        w = solve_triangular(self.L11, v1, lower=True)
        t = v
        for wj, col in zip(w, self.cols):
            if wj != 0.0:
                t = t - wj * col
        z2 = t * self.dinv
        u = np.array([la.dot(col, z2) for col in self.cols])
        z1 = solve_triangular(self.L11.T, w - u, lower=False)
        z = z2
        for a, p in enumerate(self.pivots):
            if z1[a] != 0.0:
                z = z + self._unit(p, float(z1[a]))
        return z

    def apply(self, v):
        """``P v``."""
        la = self.la
        out = self.d * v
        for col in self.cols:
            c = la.dot(col, v)
            if c != 0.0:
                out = out + c * col
        return out


class IdentityPreconditioner:
    k = 0
    pivots: list = []

    def solve(self, v):
        return v

    def apply(self, v):
        return v


def build_preconditioner(op, k: int):
    """``k`` pivots of ``op``; ``k = 0`` returns ``None`` (plain CG)."""
    if k <= 0:
        return None
    return PartialCholesky(op, k)
