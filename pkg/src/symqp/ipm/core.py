"""Primal-dual barrier method, generic over the linear-algebra backend.

A *problem* object supplies the products with ``A``, ``A'`` and ``Q`` plus
masks of the active rows and columns; its ``la`` attribute supplies the
vector primitives. The symbolic solver and the ground baseline run this
same loop with different backends.

Newton system at ``(x, y, s)`` with ``mu`` the centering target::

    A dx                = r_p = b - A x
    -Q dx + A' dy + ds  = r_d = c + Q x - A' y - s
    S dx + X ds         = r_c = mu e - X s

Eliminating ``ds`` and ``dx`` leaves ``A D A' dy = r_p + A D g`` with
``D = (Q + Theta^-1)^-1``, ``Theta^-1 = S X^-1`` and ``g = r_d - X^-1 r_c``;
then ``dx = D (A' dy - g)`` and ``ds = r_d + Q dx - A' dy``.
"""

from __future__ import annotations

import time

from .cg import CgStats, cg_solve
from .normal import BoundsNormal, InequalityNormal, SeparableNormal
from .options import IpmState, SolveOptions, SolveReport, UnsupportedStructure
from .precond import build_preconditioner


def slack_covered(prob) -> bool:
    """Every active row is an inequality with its own ``-1`` slack column.

    ``prob.xpart`` marks the program's own columns; the rest of the active
    columns are slacks. Then ``-A @ slack_mask`` is exactly the row mask.
    """
    xpart = getattr(prob, "xpart", None)
    if xpart is None or not prob.has_rows or prob.n_rows_active == 0:
        return False
    la = prob.la
    wmask = prob.col_mask - prob.col_mask * xpart
    return la.amax(prob.A_mv(wmask) + prob.row_mask) == 0.0


def detect_structure(prob, requested: str = "auto") -> str:
    """Pick the reduced Newton system.

    ``bounds`` without rows; ``inequality`` (column space) when every row
    has a slack and either Q is not diagonal or there are no more columns
    than rows; else ``separable`` (diagonal Q) or ``box`` (diagonal A).
    """
    covered = slack_covered(prob)
    if not prob.has_rows:
        found = "bounds"
    elif covered and (not prob.q_is_diagonal() or prob.la.dot(prob.col_mask, prob.xpart) <= prob.n_rows_active):
        found = "inequality"
    elif prob.q_is_diagonal():
        found = "separable"
    elif prob.a_is_diagonal():
        found = "box"
    else:
        found = None
    if requested != "auto":
        ok = {
            "bounds": not prob.has_rows,
            "separable": prob.has_rows and prob.q_is_diagonal(),
            "inequality": covered,
            "box": prob.has_rows and prob.a_is_diagonal(),
        }[requested]
        if not ok:
            raise UnsupportedStructure(f"problem does not have the requested {requested!r} structure")
        return requested
    if found is None:
        raise UnsupportedStructure(
            "Q is not diagonal, A is not diagonal and some row is an equality:"
            " the reduced system would need a general inverse of Q + Theta^-1"
        )
    return found


def residuals(prob, st: IpmState, mu: float = 0.0):
    """``(r_p, r_d, r_c)`` at the state (see the module docstring)."""
    Qx = prob.Q_mv(st.x)
    rp = prob.b - prob.A_mv(st.x)
    rd = prob.c + Qx - st.s
    if prob.has_rows:
        rd = rd - prob.At_mv(st.y)
    rc = mu * prob.col_mask - st.x * st.s
    return rp, rd, rc


def step_length(la, x, dx, s, ds, fraction: float) -> float:
    """Largest ``alpha <= 1`` keeping ``x + alpha dx >= (1 - fraction) x`` (same for s)."""
    alpha = 1.0
    for v, dv in ((x, dx), (s, ds)):
        r = la.min_ratio(v, dv)
        if r < float("inf"):
            alpha = min(alpha, fraction * r)
    return alpha


def scaling(prob, st: IpmState, opts: SolveOptions):
    la = prob.la
    lo, hi = opts.theta_clip
    return la.clip(la.div0(st.s, st.x), lo, hi) * prob.col_mask


class Direction:
    __slots__ = ("dx", "dy", "ds", "cg", "pivots", "normal_rhs")

    def __init__(self, dx, dy, ds, cg: CgStats, pivots: int = 0, normal_rhs=None):
        self.dx, self.dy, self.ds = dx, dy, ds
        self.cg = cg
        self.pivots = pivots
        self.normal_rhs = normal_rhs


def newton_direction(prob, st: IpmState, rp, rd, rc, theta_inv, structure: str, opts: SolveOptions, rho_p: float, rho_d: float, k: int, caps=(None, None)):
    """One Newton direction. ``caps`` are optional absolute CG targets for the
    structures whose CG error ends up in the primal or the dual residual."""
    la = prob.la
    mask = prob.col_mask
    g = rd - la.div0(rc, st.x)
    H = theta_inv + rho_p * mask if rho_p else theta_inv
    direct = getattr(prob, "direct", False)
    keep = lambda: prob.maintenance(opts)  # noqa: E731
    if structure == "bounds":
        rhs = -g
        if direct:
            dx, stats, pre = prob.solve_bounds(H, rhs), CgStats(0, True, 0.0), None
        else:
            op = BoundsNormal(prob, H)
            pre = build_preconditioner(op, k)
            dx, stats = cg_solve(op, rhs, la, pre, opts.cg_reduction, opts.max_cg, housekeeping=keep, abs_target=caps[1])
        dy = prob.zeros_row()
        # from the complementarity rows: CG error stays in the dual residual
        ds = la.div0(rc - st.s * dx, st.x)
        return Direction(dx, dy, ds, stats, pre.k if pre else 0, rhs)
    if structure == "inequality":
        return _inequality_direction(prob, st, rp, rc, g, H, opts, rho_d, k, keep, caps[1])
    if structure == "box":
        dx = prob.A_inv_mv(rp)
        dy = prob.A_inv_t_mv(prob.Q_mv(dx) + H * dx + g)
        ds = rd + prob.Q_mv(dx) - prob.At_mv(dy)
        return Direction(dx, dy, ds, CgStats(0, True, 0.0), 0, None)
    D = la.div0(mask, prob.Q_diag() + H)
    f = rp + prob.A_mv(D * g)
    if direct:
        dy, stats, pre = prob.solve_separable(D, rho_d, f), CgStats(0, True, 0.0), None
    else:
        op = SeparableNormal(prob, D, rho_d)
        pre = build_preconditioner(op, k)
        dy, stats = cg_solve(op, f, la, pre, opts.cg_reduction, opts.max_cg, housekeeping=keep, abs_target=caps[0])
    Atdy = prob.At_mv(dy)
    dx = D * (Atdy - g)
    ds = rd + prob.Q_diag() * dx - Atdy
    return Direction(dx, dy, ds, stats, pre.k if pre else 0, f)


def _inequality_direction(prob, st: IpmState, rp, rc, g, H, opts: SolveOptions, rho_d: float, k: int, keep, cap=None):
    """Column-space elimination when every row owns a slack column.

    With ``w`` the slacks (``A_std = [A | -I]``) and ``H_w``, ``g_w`` their
    parts of ``H`` and ``g`` moved to rows::

        E     = H_w / (1 + rho_d H_w)
        t     = r_p - g_w / H_w
        (Q + H_x + A' E A) dx_x = A' E t - g_x
        dy    = E (t - A dx_x)
        dw    = (-dy - g_w) / H_w
        ds    = (r_c - S dx) / X

    Taking ``ds`` from the complementarity rows leaves any CG error in the
    dual residual, which the next iteration reduces (with an exact solve
    this equals ``r_d + Q dx - A' dy``).
    """
    la = prob.la
    xpart = prob.xpart
    wpart = prob.col_mask - prob.col_mask * xpart
    Hw = -prob.A_mv(H * wpart)
    gw = -prob.A_mv(g * wpart)
    E = la.div0(Hw, 1.0 + rho_d * Hw) if rho_d else Hw
    t = rp - la.div0(gw, Hw)
    rhs = prob.Axt_mv(E * t) - g * xpart
    if getattr(prob, "direct", False):
        dxx, stats, pre = prob.solve_inequality(H, E, rhs), CgStats(0, True, 0.0), None
    else:
        op = InequalityNormal(prob, H, E)
        pre = build_preconditioner(op, k)
        dxx, stats = cg_solve(op, rhs, la, pre, opts.cg_reduction, opts.max_cg, housekeeping=keep, abs_target=cap)
    dy = E * (t - prob.Ax_mv(dxx))
    Atdy = prob.At_mv(dy)
    dw = la.div0((Atdy - g) * wpart, H)
    dx = dxx + dw
    ds = la.div0(rc - st.s * dx, st.x)
    return Direction(dx, dy, ds, stats, pre.k if pre else 0, rhs)


def recover_directions(prob, st: IpmState, dy, rd, rc, theta_inv, rho_p: float = 0.0):
    """``dx`` and ``ds`` from ``dy`` for the separable structure."""
    la = prob.la
    mask = prob.col_mask
    if la.min_value(st.x, mask) <= 0 or la.min_value(st.s, mask) <= 0:
        raise ZeroDivisionError("x and s must be strictly positive on the active set")
    g = rd - la.div0(rc, st.x)
    H = theta_inv + rho_p * mask if rho_p else theta_inv
    D = la.div0(mask, prob.Q_diag() + H)
    Atdy = prob.At_mv(dy)
    dx = D * (Atdy - g)
    ds = rd + prob.Q_diag() * dx - Atdy
    return dx, ds


def starting_point(prob) -> IpmState:
    la = prob.la
    mask = prob.col_mask
    x0 = max(1.0, la.amax(prob.b)) if prob.has_rows else 1.0
    s0 = max(1.0, la.amax(prob.c))
    return IpmState(x=x0 * mask, y=prob.zeros_row(), s=s0 * mask)


def ipm_loop(prob, opts: SolveOptions | None = None, backend: str = "") -> SolveReport:
    """Run the barrier method on a backend problem."""
    opts = opts or SolveOptions()
    la = prob.la
    t0 = time.perf_counter()
    structure = detect_structure(prob, opts.structure)
    n = prob.n_active
    k = opts.pivots_for(prob.n_rows_active if prob.has_rows else n)
    st = starting_point(prob)
    nb = la.norm(prob.b) if prob.has_rows else 0.0
    nc = la.norm(prob.c)
    rho_p, rho_d = opts.rho_primal, opts.rho_dual
    report = SolveReport(status="max_iter", x=None, objective=float("nan"), iterations=0, cg_total=0, structure=structure, backend=backend)
    phases = {"residuals": 0.0, "direction": 0.0, "update": 0.0}
    mu = 0.0
    status = "max_iter"
    message = ""
    for it in range(opts.max_iter + 1):
        st.iter = it
        ta = time.perf_counter()
        Qx = prob.Q_mv(st.x)
        rp = prob.b - prob.A_mv(st.x) if prob.has_rows else prob.zeros_row()
        rd = prob.c + Qx - st.s
        if prob.has_rows:
            rd = rd - prob.At_mv(st.y)
        gap = la.dot(st.x, st.s)
        obj = la.dot(prob.c, st.x) + 0.5 * la.dot(st.x, Qx) + prob.offset
        rel_p = la.norm(rp) / (1.0 + nb) if prob.has_rows else 0.0
        rel_d = la.norm(rd) / (1.0 + nc)
        rel_g = gap / (1.0 + abs(obj))
        report.primal_residuals.append(rel_p)
        report.dual_residuals.append(rel_d)
        report.gap_residuals.append(rel_g)
        phases["residuals"] += time.perf_counter() - ta
        entry = {"iter": it, "primal": rel_p, "dual": rel_d, "gap": rel_g, "objective": obj, "mu": mu}
        report.history.append(entry)
        report.objective = obj
        if max(rel_p, rel_d, rel_g) <= opts.tol:
            status = "optimal"
            break
        if it == opts.max_iter:
            break
        tb = time.perf_counter()
        mu = opts.sigma * gap / max(n, 1)
        rc = mu * prob.col_mask - st.x * st.s
        theta_inv = scaling(prob, st, opts)
        caps = (None, None)
        if opts.cg_forcing:
            # the primal cap also follows the whole Newton right-hand side,
            # so the separable direction solves its system to cg_reduction
            newton_rhs = (la.norm(rp) ** 2 + la.norm(rd) ** 2 + la.norm(rc) ** 2) ** 0.5
            caps = (
                min(0.1 * max(rel_p * (1.0 + nb), opts.tol * (1.0 + nb)), opts.cg_reduction * newton_rhs),
                0.1 * max(rel_d * (1.0 + nc), opts.tol * (1.0 + nc)),
            )
        while True:
            d = newton_direction(prob, st, rp, rd, rc, theta_inv, structure, opts, rho_p, rho_d, k, caps)
            if not d.cg.breakdown:
                break
            if max(rho_p, rho_d) >= opts.rho_max:
                break
            rho_p = min(opts.rho_max, max(rho_p, 1e-12) * opts.rho_growth)
            rho_d = min(opts.rho_max, max(rho_d, 1e-12) * opts.rho_growth)
        phases["direction"] += time.perf_counter() - tb
        report.cg_total += d.cg.iterations
        entry.update(cg=d.cg.iterations, cg_ratio=d.cg.ratio, cg_converged=d.cg.converged, pivots=d.pivots)
        if d.cg.breakdown:
            status = "cg_breakdown"
            message = "CG lost positive definiteness even at the largest regularization"
            break
        tc = time.perf_counter()
        alpha = step_length(la, st.x, d.dx, st.s, d.ds, opts.fraction)
        entry["alpha"] = alpha
        if opts.callback is not None:
            opts.callback(
                {
                    "iter": it, "state": st, "dx": d.dx, "dy": d.dy, "ds": d.ds, "rp": rp, "rd": rd, "rc": rc,
                    "mu": mu, "theta_inv": theta_inv, "rho_primal": rho_p, "rho_dual": rho_d, "cg": d.cg,
                    "structure": structure, "problem": prob, "alpha": alpha,
                }
            )
        st = IpmState(st.x + alpha * d.dx, st.y + alpha * d.dy if prob.has_rows else st.y, st.s + alpha * d.ds, mu, it + 1)
        if opts.quantize:
            st = IpmState(la.quantize(st.x, opts.quantize), la.quantize(st.y, opts.quantize), la.quantize(st.s, opts.quantize), mu, it + 1)
        del d, rp, rd, rc, theta_inv, Qx
        prob.maintenance(opts)
        entry["nodes"] = prob.store_size()
        phases["update"] += time.perf_counter() - tc
    report.status = status
    report.message = message
    report.iterations = st.iter
    report.rho_primal, report.rho_dual = rho_p, rho_d
    report.state = st
    report.x = prob.extract(st.x)
    report.phases = phases
    report.time_solve = time.perf_counter() - t0
    report.add_nodes_max = max((h.get("nodes", 0) for h in report.history), default=0)
    if opts.raise_on_failure and status != "optimal":
        from .options import IpmError

        raise IpmError(f"solver stopped with status {status!r}")
    return report
