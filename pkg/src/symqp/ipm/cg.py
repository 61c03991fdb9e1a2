"""Conjugate gradients using only products, inner products and axpys."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from .options import CgBreakdown


@dataclass
class CgStats:
    iterations: int
    converged: bool
    ratio: float  # final ||r|| / ||r0||
    breakdown: bool = False


def cg_solve(
    apply: Callable,
    f,
    la,
    precond=None,
    reduction: float = 1e-2,
    max_iter: int = 500,
    raise_on_breakdown: bool = False,
    housekeeping: Callable | None = None,
    abs_target: float | None = None,
):
    """Solve ``N z = f`` from ``z0 = 0`` until ``||r|| <= reduction * ||f||``.

    ``apply`` computes ``N @ v``; ``precond`` (optional) has ``solve(v)``
    returning an approximation of ``N^-1 v``. Without a preconditioner the
    recurrences are the textbook ones: ``mu = r'r / p'Np`` and
    ``tau = r_k'r_k / r_(k-1)'r_(k-1)``.
    """
    r = f
    rr0 = la.dot(r, r)
    z = la.zeros_like(f)
    if rr0 == 0.0:
        return z, CgStats(0, True, 0.0)
    target = reduction * reduction * rr0
    if abs_target is not None:
        target = min(target, abs_target * abs_target)
    w = precond.solve(r) if precond is not None else r
    rw = la.dot(r, w) if precond is not None else rr0
    p = w
    rr = rr0
    for k in range(1, max_iter + 1):
        q = apply(p)
        pq = la.dot(p, q)
        if not pq > 0.0:
            if raise_on_breakdown:
                raise CgBreakdown(f"p'Np = {pq:.3e} at iteration {k}")
            return z, CgStats(k - 1, False, (rr / rr0) ** 0.5, breakdown=True)
        mu = rw / pq
        z = z + mu * p
        r = r - mu * q
        rr = la.dot(r, r)
        if rr <= target:
            return z, CgStats(k, True, (rr / rr0) ** 0.5)
        if precond is not None:
            w = precond.solve(r)
            rw_new = la.dot(r, w)
        else:
            w = r
            rw_new = rr
        tau = rw_new / rw
        rw = rw_new
        p = w + tau * p
        if housekeeping is not None:
            housekeeping()
    return z, CgStats(max_iter, False, (rr / rr0) ** 0.5)
