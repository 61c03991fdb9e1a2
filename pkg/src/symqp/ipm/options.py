"""Solver options, state and report."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Any, Callable

import numpy as np

STRUCTURES = ("auto", "separable", "inequality", "box", "bounds")


class IpmError(RuntimeError):
    """Base class for solver failures."""


class UnsupportedStructure(IpmError):
    """No reduced system applies: Q is not diagonal, A is not diagonal and
    some active row is an equality."""


class CgBreakdown(IpmError):
    """CG met a direction of non-positive curvature."""


class IterationLimit(IpmError):
    pass


@dataclass
class SolveOptions:
    tol: float = 1e-5
    cg_reduction: float = 1e-2
    cg_forcing: bool = True  # also cap the CG residual by the outer residual it feeds
    max_iter: int = 200
    max_cg: int = 500
    fraction: float = 0.995
    sigma: float = 0.1
    rho_primal: float = 1e-8
    rho_dual: float = 1e-8
    rho_growth: float = 10.0
    rho_max: float = 1e-2
    precond_k: int | None = None  # None: 0, or 50 above 4096 rows
    structure: str = "auto"
    theta_clip: tuple = (1e-12, 1e12)
    quantize: int | None = None  # significant digits kept in the iterates
    compact_factor: float = 4.0
    raise_on_failure: bool = False
    callback: Callable[[dict], None] | None = None

    def __post_init__(self):
        if self.tol <= 0 or self.cg_reduction <= 0:
            raise ValueError("tolerances must be positive")
        for name in ("cg_reduction", "fraction", "sigma"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise ValueError(f"{name} must lie in (0, 1), got {v}")
        if self.structure not in STRUCTURES:
            raise ValueError(f"structure must be one of {STRUCTURES}")
        if self.rho_primal < 0 or self.rho_dual < 0:
            raise ValueError("regularization must be non-negative")
        if self.max_iter < 1 or self.max_cg < 1:
            raise ValueError("iteration limits must be positive")
        if self.precond_k is not None and self.precond_k < 0:
            raise ValueError("precond_k must be non-negative")

    def pivots_for(self, rows: int) -> int:
        if self.precond_k is not None:
            return self.precond_k
        return 50 if rows > 4096 else 0

    @classmethod
    def from_pairs(cls, pairs) -> "SolveOptions":
        """Build from ``key=value`` strings, converting to the field's type."""
        kwargs: dict[str, Any] = {}
        defaults = cls()
        for item in pairs:
            if "=" not in item:
                raise ValueError(f"expected key=value, got {item!r}")
            key, value = item.split("=", 1)
            key = key.strip().replace("-", "_")
            if key in ("callback", "theta_clip") or not hasattr(defaults, key):
                raise ValueError(f"unknown solver option {key!r}")
            current = getattr(defaults, key)
            if key in ("precond_k", "quantize"):
                kwargs[key] = None if value.lower() == "none" else int(value)
            elif isinstance(current, bool):
                kwargs[key] = value.lower() in ("1", "true", "yes", "on")
            elif isinstance(current, int):
                kwargs[key] = int(value)
            elif isinstance(current, float):
                kwargs[key] = float(value)
            else:
                kwargs[key] = value
        return cls(**kwargs)


@dataclass
class IpmState:
    x: Any
    y: Any
    s: Any
    mu: float = 0.0
    iter: int = 0


@dataclass
class SolveReport:
    """Outcome of a solve; the same schema for both backends."""

    status: str
    x: np.ndarray
    objective: float
    iterations: int
    cg_total: int
    primal_residuals: list = field(default_factory=list)
    dual_residuals: list = field(default_factory=list)
    gap_residuals: list = field(default_factory=list)
    history: list = field(default_factory=list)
    structure: str = ""
    backend: str = ""
    add_nodes_A: int = 0
    add_nodes_Q: int = 0
    add_nodes_max: int = 0
    time_compile: float = 0.0
    time_solve: float = 0.0
    phases: dict = field(default_factory=dict)
    rho_primal: float = 0.0
    rho_dual: float = 0.0
    message: str = ""
    state: Any = None

    @property
    def converged(self) -> bool:
        return self.status == "optimal"

    @property
    def residual(self) -> float:
        if not self.primal_residuals:
            return float("inf")
        return max(self.primal_residuals[-1], self.dual_residuals[-1], self.gap_residuals[-1])

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("state")
        d["x"] = [float(v) for v in np.asarray(self.x).ravel()]
        d["residual"] = self.residual
        return d

    def to_text(self) -> str:
        """``key: value`` lines with fixed field names."""
        lines = [
            f"status: {self.status}",
            f"objective: {self.objective!r}",
            f"iterations: {self.iterations}",
            f"cg_total: {self.cg_total}",
            "residuals: primal={:.3e} dual={:.3e} gap={:.3e}".format(
                *(h[-1] if h else float("nan") for h in (self.primal_residuals, self.dual_residuals, self.gap_residuals))
            ),
            f"structure: {self.structure}",
            f"backend: {self.backend}",
            f"add_nodes_A: {self.add_nodes_A}",
            f"add_nodes_Q: {self.add_nodes_Q}",
            f"time_compile: {self.time_compile:.6f}",
            f"time_solve: {self.time_solve:.6f}",
        ]
        if self.message:
            lines.append(f"message: {self.message}")
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)
