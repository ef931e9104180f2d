"""
Direct evaluation of the rescaled 3D energy J(h) = I(h) + K(h) on the unit cylinder.

The deformation lives on omega x [-1/2, 1/2]; the thickness only enters through
the rescaled gradients and through the geometry sampled at (x1, x2, h*x3).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .elasticity import MaterialParams, cee, strain
from .fields import Field3D, Grid3D
from .geometry import Chart, check_thickness, inv_derivs, jacobian_coeffs
from .tensor3 import QuadraticForm3, contract, contract_left, qform, transpose23

__all__ = ["EvalContext", "EnergyParts", "rescaled_grads", "energy_J", "strain_and_hessian"]


@dataclass(frozen=True)
class EvalContext:
    """Per-node geometry for one thickness h, shared by every energy evaluation.

    ``c0, c1, c2`` give det grad Psi(x1, x2, h*x3) = c0 + h*c1 + h**2*c2.
    ``D1, D2`` are the derivatives of Psi^-1 at offset ``t = h*x3``, or at
    ``t = 0`` when the context is built with ``at_zero=True``.
    """

    grid: Grid3D
    chart: Chart
    h: float
    mat: MaterialParams
    qform: QuadraticForm3
    c0: np.ndarray
    c1: np.ndarray
    c2: np.ndarray
    D1: np.ndarray
    D2: np.ndarray
    at_zero: bool = False

    @classmethod
    def build(cls, grid: Grid3D, chart: Chart, h: float, mat: MaterialParams,
              qf: QuadraticForm3, at_zero: bool = False, method: str = "identity") -> "EvalContext":
        if not h > 0:
            raise ValueError(f"thickness must be positive, got {h}")
        x1, x2, x3 = grid.mesh()
        check_thickness(chart, x1, x2, x3, h)
        jc = jacobian_coeffs(chart, x1, x2, x3)
        t = np.zeros_like(x3) if at_zero else h * x3
        inv = inv_derivs(chart, x1, x2, t, method=method)
        return cls(grid, chart, float(h), mat, qf, jc.c0, jc.c1, jc.c2, inv.D1, inv.D2, at_zero)

    @property
    def dh(self) -> np.ndarray:
        return self.c0 + self.h * self.c1 + self.h**2 * self.c2


class EnergyParts(NamedTuple):
    I: float
    K: float
    total: float


def rescaled_grads(phi: Field3D, h: float):
    """Rescaled gradient and second-derivative tensor at every node.

    The transverse derivative is divided by h, the mixed ones by h and the
    double transverse one by h**2.
    """
    s = np.array([1.0, 1.0, 1.0 / h])
    gh = phi.grad * s
    hh = phi.hess * s[:, None] * s[None, :]
    return gh, hh


def strain_and_hessian(phi: Field3D, ctx: EvalContext):
    """Strain of the deformation in physical coordinates and its second-derivative tensor.

    Returns ``(E[..., 3, 3], P[..., 3, 3, 3])`` with
    ``P = (grad_h^2 phi (x) A)^T23 (x) A + grad_h phi (x) B``.
    """
    gh, hh = rescaled_grads(phi, ctx.h)
    F = gh @ ctx.D1
    P = contract(transpose23(contract(hh, ctx.D1)), ctx.D1) + contract_left(gh, ctx.D2)
    return strain(F), P


def energy_J(phi: Field3D, ctx: EvalContext) -> EnergyParts:
    """Trapezoidal quadrature of C E:E and Q(P) against the volume factor d_h."""
    if phi.grid != ctx.grid:
        raise ValueError("field and context live on different grids")
    E, P = strain_and_hessian(phi, ctx)
    w = ctx.grid.weights() * ctx.dh
    I_part = float(np.sum(w * cee(E, ctx.mat)))
    K_part = float(np.sum(w * qform(ctx.qform, P)))
    return EnergyParts(I_part, K_part, I_part + K_part)
