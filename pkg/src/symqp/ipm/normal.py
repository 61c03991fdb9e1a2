"""Reduced Newton systems, applied matrix-free.

``SeparableNormal`` is ``w -> A D A' w + rho_d w`` with the diagonal
``D = (Q + Theta^-1 + rho_p)^-1``; ``BoundsNormal`` is
``w -> (Q + Theta^-1 + rho_p) w`` for problems without equality rows.
``InequalityNormal`` is the column-space system
``v -> (Q + H_x + A' E A) v`` used when every active row is an inequality
with its own slack column (see ``core.newton_direction``). All expose
``row(i)`` and ``diagonal()`` for the preconditioner.
"""

from __future__ import annotations


class SeparableNormal:
    kind = "separable"

    def __init__(self, prob, D, rho_dual: float):
        self.prob = prob
        self.D = D
        self.rho = rho_dual
        self.la = prob.la
        self.products = 0

    def __call__(self, w):
        self.products += 1
        out = self.prob.A_mv(self.D * self.prob.At_mv(w))
        return out + self.rho * w if self.rho else out

    def row(self, i: int):
        out = self.prob.A_mv(self.D * self.prob.A_row(i))
        if self.rho:
            out = out + self.prob.unit_row(i, self.rho)
        return out

    def diagonal(self):
        d = self.prob.A2_mv(self.D)
        return d + self.rho * self.prob.row_mask if self.rho else d

    @property
    def mask(self):
        return self.prob.row_mask

    def unit(self, i: int, value: float = 1.0):
        return self.prob.unit_row(i, value)


class BoundsNormal:
    kind = "bounds"

    def __init__(self, prob, H):
        self.prob = prob
        self.H = H  # Theta^-1 + rho_p on the active columns
        self.la = prob.la
        self.products = 0

    def __call__(self, w):
        self.products += 1
        return self.prob.Q_mv(w) + self.H * w

    def row(self, i: int):
        e = self.prob.unit_col(i)
        return self.prob.Q_mv(e) + self.H * e

    def diagonal(self):
        return self.prob.Q_diag() + self.H

    @property
    def mask(self):
        return self.prob.col_mask

    def unit(self, i: int, value: float = 1.0):
        return self.prob.unit_col(i, value)


class InequalityNormal:
    kind = "inequality"

    def __init__(self, prob, H, E):
        self.prob = prob
        self.H = H  # Theta^-1 + rho_p, standard-form columns
        self.E = E  # row weights H_w / (1 + rho_d H_w)
        self.la = prob.la
        self.xpart = prob.xpart
        self.products = 0

    def __call__(self, v):
        self.products += 1
        p = self.prob
        out = (p.Q_mv(v) + self.H * v) * self.xpart
        return out + p.Axt_mv(self.E * p.Ax_mv(v))

    def row(self, i: int):
        return self(self.prob.unit_col(i))

    def diagonal(self):
        p = self.prob
        return (p.Q_diag() + self.H + p.A2t_mv(self.E)) * self.xpart

    @property
    def mask(self):
        return self.prob.col_mask * self.xpart

    def unit(self, i: int, value: float = 1.0):
        return self.prob.unit_col(i, value)


def build_normal_operator(prob, D=None, H=None, rho_dual: float = 0.0):
    """The operator for the problem's structure (see the module docstring)."""
    if prob.has_rows:
        return SeparableNormal(prob, D, rho_dual)
    return BoundsNormal(prob, H)
