"""Matrix-free primal-dual interior point solver."""

from __future__ import annotations

import time

from .cg import CgStats, cg_solve
from .core import detect_structure, ipm_loop, newton_direction, recover_directions, residuals, starting_point, step_length
from .normal import BoundsNormal, SeparableNormal, build_normal_operator
from .options import (
    CgBreakdown,
    IpmError,
    IpmState,
    IterationLimit,
    SolveOptions,
    SolveReport,
    UnsupportedStructure,
)
from .precond import PartialCholesky, build_preconditioner
from .symbolic import AddLinearAlgebra, AddProblem, DiagQ, EmbeddedQ, problem_from_standard

__all__ = [
    "ipm_solve",
    "SolveOptions",
    "SolveReport",
    "IpmState",
    "IpmError",
    "CgBreakdown",
    "IterationLimit",
    "UnsupportedStructure",
    "cg_solve",
    "CgStats",
    "PartialCholesky",
    "build_preconditioner",
    "build_normal_operator",
    "SeparableNormal",
    "BoundsNormal",
    "residuals",
    "recover_directions",
    "step_length",
    "starting_point",
    "detect_structure",
    "newton_direction",
    "AddProblem",
    "AddLinearAlgebra",
    "DiagQ",
    "EmbeddedQ",
    "problem_from_standard",
]


def ipm_solve(qp, opts: SolveOptions | None = None) -> SolveReport:
    """Solve a compiled program (or an :class:`AddProblem`) symbolically."""
    t0 = time.perf_counter()
    prob = qp if isinstance(qp, AddProblem) else problem_from_standard(qp)
    t_setup = time.perf_counter() - t0
    report = ipm_loop(prob, opts, backend="add")
    report.add_nodes_A, report.add_nodes_Q = prob.node_counts()
    report.phases["setup"] = t_setup
    return report
