"""Compressed sensing with a row-selected Walsh matrix.

The basis pursuit denoising problem

    min  tau * ||x||_1 + ||A x - b||^2 / 2

is split as ``x = u - v`` with ``u, v >= 0``, which leaves a QP with bounds
only. Its Hessian ``[[G, -G], [-G, G]]`` (``G = A'A``) is never formed:
products go through two Walsh matvecs and a 0/1 row mask, all on diagrams.

Two row selections are offered. ``"leading"`` keeps the first ``m`` rows (a
cofactor block), but in Sylvester order those rows cannot tell apart columns
that agree modulo ``m``, so sparse recovery is hopeless. ``"random"`` (the
default) keeps a seeded random subset, stored as a row-mask diagram.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass

import numpy as np

from .. import _kernels as K
from ..add import AddManager
from ..linalg import MatF, VecF, alloc_matrix_bits, matvec, matvec_t, to_dense, vector_from_dense, walsh

__all__ = [
    "BpdnError",
    "BpdnInstance",
    "gen_bpdn",
    "fwht",
    "sense",
    "sense_t",
    "bpdn_objective",
    "ista",
    "WalshGram",
    "bpdn_problem",
    "solve_bpdn",
    "ground_bpdn",
]


class BpdnError(ValueError):
    pass


def _log2(n: int, what: str) -> int:
    if n < 1 or n & (n - 1):
        raise BpdnError(f"{what} must be a power of two, got {n}")
    return n.bit_length() - 1


@dataclass
class BpdnInstance:
    n: int
    m: int
    k: int
    tau: float
    seed: int
    rows: np.ndarray  # selected row indices, sorted
    x_true: np.ndarray
    b: np.ndarray  # length n, zero off the selected rows
    selection: str = "random"
    noise: float = 0.0

    @property
    def row_mask(self) -> np.ndarray:
        mask = np.zeros(self.n)
        mask[self.rows] = 1.0
        return mask

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.x_true)

    def to_json(self) -> str:
        return json.dumps(
            {
                "kind": "bpdn",
                "n": self.n,
                "m": self.m,
                "k": self.k,
                "tau": self.tau,
                "seed": self.seed,
                "selection": self.selection,
                "noise": self.noise,
                "rows": self.rows.tolist(),
                "x_true": self.x_true.tolist(),
                "b": self.b.tolist(),
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "BpdnInstance":
        d = json.loads(text)
        if d.get("kind") != "bpdn":
            raise BpdnError("not a BPDN instance file")
        inst = cls(
            n=int(d["n"]),
            m=int(d["m"]),
            k=int(d["k"]),
            tau=float(d["tau"]),
            seed=int(d["seed"]),
            rows=np.asarray(d["rows"], dtype=np.int64),
            x_true=np.asarray(d["x_true"], dtype=np.float64),
            b=np.asarray(d["b"], dtype=np.float64),
            selection=d.get("selection", "random"),
            noise=float(d.get("noise", 0.0)),
        )
        _log2(inst.n, "n")
        if inst.rows.size != inst.m or inst.x_true.size != inst.n or inst.b.size != inst.n:
            raise BpdnError("inconsistent instance sizes")
        return inst


def gen_bpdn(n: int, m: int, k: int, tau: float = 1.0, seed: int = 0, selection: str = "random", noise: float = 0.0) -> BpdnInstance:
    """A ``k``-sparse Gaussian signal observed through ``m`` rows of ``W_log2(n)``."""
    _log2(n, "n")
    _log2(m, "m")
    if m > n:
        raise BpdnError(f"m = {m} exceeds n = {n}")
    if not 0 <= k <= m:
        raise BpdnError(f"need 0 <= k <= m, got k = {k}")
    if not tau > 0:
        raise BpdnError("tau must be positive")
    rng = np.random.default_rng(seed)
    if selection == "leading":
        rows = np.arange(m)
    elif selection == "random":
        rows = np.sort(rng.choice(n, size=m, replace=False))
    else:
        raise BpdnError(f"unknown row selection {selection!r}")
    x = np.zeros(n)
    x[rng.choice(n, size=k, replace=False)] = rng.standard_normal(k)
    inst = BpdnInstance(n, m, k, float(tau), seed, rows, x, np.zeros(n), selection, float(noise))
    b = sense(inst, x)
    if noise:
        b[rows] += noise * rng.standard_normal(m)
    inst.b = b
    return inst


# numeric route


def fwht(v) -> np.ndarray:
    """Unnormalised fast Walsh-Hadamard transform (Sylvester order)."""
    a = np.array(v, dtype=np.float64)
    n = a.shape[0]
    _log2(n, "length")
    h = 1
    while h < n:
        a = a.reshape(-1, 2, h)
        a = np.stack((a[:, 0] + a[:, 1], a[:, 0] - a[:, 1]), axis=1)
        h *= 2
    return a.reshape(n)


def sense(inst: BpdnInstance, x) -> np.ndarray:
    """``A x`` as a length-``n`` vector, zero off the selected rows."""
    return fwht(x) * inst.row_mask


def sense_t(inst: BpdnInstance, r) -> np.ndarray:
    return fwht(np.asarray(r) * inst.row_mask)


def bpdn_objective(inst: BpdnInstance, x) -> float:
    r = sense(inst, x) - inst.b
    return float(inst.tau * np.abs(x).sum() + 0.5 * r @ r)


def ista(inst: BpdnInstance, max_iter: int = 20000, tol: float = 1e-13, accelerate: bool = True) -> np.ndarray:
    """Proximal gradient (FISTA with restarts unless ``accelerate`` is off)."""
    step = 1.0 / inst.n  # rows of W are orthogonal with squared norm n
    thresh = inst.tau * step
    x = np.zeros(inst.n)
    z = x.copy()
    t = 1.0
    for _ in range(max_iter):
        g = sense_t(inst, sense(inst, z) - inst.b)
        w = z - step * g
        x_new = np.sign(w) * np.maximum(np.abs(w) - thresh, 0.0)
        change = np.linalg.norm(x_new - x)
        if accelerate:
            if np.dot(z - x_new, x_new - x) > 0:  # restart on a bad momentum step
                t = 1.0
            t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
            z = x_new + ((t - 1.0) / t_new) * (x_new - x)
            t = t_new
        else:
            z = x_new
        x = x_new
        if change <= tol * max(1.0, np.linalg.norm(x)):
            break
    return x


# symbolic route


class WalshGram:
    """``[[G, -G], [-G, G]]`` with ``G = W' S W`` on the split space.

    ``S`` is the row mask. The split selector ``sigma`` is the top column bit:
    ``sigma = 0`` holds ``u`` and ``sigma = 1`` holds ``v``.
    """

    diagonal_only = False

    def __init__(self, W: MatF, mask: VecF, sigma: int, m_rows: int):
        self.W = W
        self.mask = mask
        self.sigma = sigma
        self.bits = (sigma,) + tuple(W.col_bits)
        self.diag = VecF(W.manager, W.manager.terminal(float(m_rows)), self.bits)

    def difference(self, z: VecF) -> VecF:
        m = self.W.manager
        u = m.restrict(z.fun, {self.sigma: 0})
        v = m.restrict(z.fun, {self.sigma: 1})
        return VecF(m, m.sub(u, v), self.W.col_bits)

    def gram(self, w: VecF) -> VecF:
        r = matvec(self.W, w) * self.mask
        return matvec_t(self.W, r)

    def split(self, g: VecF) -> VecF:
        m = self.W.manager
        return VecF(m, m.node(self.sigma, m.neg(g.fun), g.fun), self.bits)

    def mv(self, z: VecF) -> VecF:
        return self.split(self.gram(self.difference(z)))

    def diagonal(self) -> VecF:
        return self.diag

    def node_count(self) -> int:
        return self.W.node_count() + self.mask.node_count()


def bpdn_problem(inst: BpdnInstance, manager: AddManager | None = None):
    """The split QP as an :class:`~symqp.ipm.AddProblem` (bounds only)."""
    from ..ipm.symbolic import AddProblem

    m = manager if manager is not None else AddManager()
    p = _log2(inst.n, "n")
    sigma = m.add_vars(1)[0]
    row_bits, col_bits = alloc_matrix_bits(m, p, p)
    W = walsh(p, m, row_bits, col_bits)
    mask = vector_from_dense(inst.row_mask, m, row_bits)
    Q = WalshGram(W, mask, sigma, inst.m)
    b = vector_from_dense(inst.b * inst.row_mask, m, row_bits)
    atb = matvec_t(W, b)
    tau = m.terminal(inst.tau)
    c = VecF(m, m.node(sigma, m.add(tau, atb.fun), m.sub(tau, atb.fun)), Q.bits)
    ones = VecF(m, K.ONE, Q.bits)

    def extract(z):
        return to_dense(Q.difference(z))

    prob = AddProblem(m, None, None, c, Q, ones, None, offset=0.5 * float(inst.b @ inst.b), extract=extract)
    prob.walsh = W
    return prob


def solve_bpdn(inst: BpdnInstance, opts=None):
    """Solve symbolically; ``report.x`` is the recovered signal ``u - v``."""
    from ..ipm import ipm_solve

    t0 = time.perf_counter()
    prob = bpdn_problem(inst)
    t_build = time.perf_counter() - t0
    report = ipm_solve(prob, opts)
    report.time_compile = t_build
    return report


class _FwhtGram:
    """Numeric twin of :class:`WalshGram`, used by the ground baseline."""

    def __init__(self, inst: BpdnInstance):
        self.inst = inst

    def matvec(self, z):
        n = self.inst.n
        g = sense_t(self.inst, sense(self.inst, z[:n] - z[n:]))
        return np.concatenate([g, -g])

    def diagonal(self):
        return np.full(2 * self.inst.n, float(self.inst.m))


def ground_bpdn(inst: BpdnInstance, opts=None):
    """Same split QP on numpy vectors with FWHT products and CG inner solves."""
    from ..baseline import NumpyProblem
    from ..ipm.core import ipm_loop

    n = inst.n
    atb = sense_t(inst, inst.b)
    c = np.concatenate([inst.tau - atb, inst.tau + atb])
    prob = NumpyProblem(None, None, c, _FwhtGram(inst), offset=0.5 * float(inst.b @ inst.b), inner="cg", ncols_user=2 * n)
    report = ipm_loop(prob, opts, backend="ground-cg")
    report.x = report.x[:n] - report.x[n:]
    return report
