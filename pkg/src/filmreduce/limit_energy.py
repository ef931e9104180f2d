"""
The order-zero limit energy J^0 and the reduced director problems.

``j0_general`` evaluates J^0 for any chart from its definition: the strain
coefficient E^0 and the second-derivative coefficient d^0 of the lifted
deformation, with the derivatives of Psi^-1 taken on the midsurface.

``j0_specialized`` evaluates the closed forms for the three built-in charts,
either verbatim (``EnergyVariant.AS_PRINTED``) or with the metric factors
that follow from the general formula (``EnergyVariant.DERIVED``).

``ReducedProblem`` holds the reduced functional in the director u with the
other limit fields frozen: a = phi0,1, b = phi0,2 and c = phi0,22.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
import scipy.sparse as sp

from .elasticity import MaterialParams, cee
from .errors import UnsupportedChart
from .fields import ChartNormal, ChartPsi, Field2D, Grid2D, TrigField, d2, trapezoid_weights
from .geometry import Chart, Cylinder, Planar, SphereBand, frame, inv_derivs
from .tensor3 import QuadraticForm3, qform

__all__ = [
    "MembraneState",
    "EnergyVariant",
    "EnergySplit",
    "FrozenData",
    "ReducedProblem",
    "ELResidual",
    "identity_state",
    "random_state",
    "j0_general",
    "j0_specialized",
    "reduced_functional",
    "el_residual",
    "boundary_director",
]


class EnergyVariant(str, enum.Enum):
    AS_PRINTED = "printed"
    DERIVED = "derived"

    @classmethod
    def parse(cls, v) -> "EnergyVariant":
        if isinstance(v, cls):
            return v
        key = str(v).lower()
        aliases = {"printed": cls.AS_PRINTED, "asprinted": cls.AS_PRINTED,
                   "derived": cls.DERIVED, "derivedfromgeneral": cls.DERIVED}
        if key not in aliases:
            raise ValueError(f"unknown energy variant {v!r}")
        return aliases[key]


class EnergySplit(NamedTuple):
    membrane: float
    second_order: float
    total: float


@dataclass
class MembraneState:
    """Limit fields on omega: phi0, the director u = phi1,3 and w = phi2,33."""

    grid: Grid2D
    phi0: Field2D
    u: Field2D
    w: Optional[Field2D] = None

    def __post_init__(self):
        for f in (self.phi0, self.u, self.w):
            if f is None:
                continue
            if f.grid != self.grid:
                raise ValueError("state fields must share the state grid")
            if not np.all(np.isfinite(f.values)):
                raise ValueError("state fields must be finite")

    @property
    def w_values(self) -> np.ndarray:
        return np.zeros(self.grid.shape + (3,)) if self.w is None else self.w.values


def identity_state(chart: Chart, grid: Grid2D) -> MembraneState:
    """phi0 = psi, u = a3, w = 0: the limit fields of the undeformed film."""
    return MembraneState(grid, Field2D.from_surface(grid, ChartPsi(chart)),
                         Field2D.from_surface(grid, ChartNormal(chart)))


def random_state(chart: Chart, grid: Grid2D, rng: np.random.Generator, amplitude: float = 0.1,
                 modes: int = 3, with_w: bool = False) -> MembraneState:
    """Smooth perturbation of the identity state by random trigonometric modes."""
    phi0 = Field2D.from_surface(grid, ChartPsi(chart) + TrigField.random(rng, amplitude, modes))
    u = Field2D.from_surface(grid, ChartNormal(chart) + TrigField.random(rng, amplitude, modes))
    w = Field2D.from_surface(grid, TrigField.random(rng, amplitude, modes)) if with_w else None
    return MembraneState(grid, phi0, u, w)


# --------------------------------------------------------------------------- general J0


def _midsurface_terms(state: MembraneState, chart: Chart):
    """E^0 and d^0 at every node, plus the area factor c0."""
    x1, x2 = state.grid.mesh()
    fr = frame(chart, x1, x2)
    inv = inv_derivs(chart, x1, x2, np.zeros_like(x1))
    D1, D2 = inv.D1, inv.D2
    Dp, v = D1[..., :2, :], D1[..., 2, :]
    g0, h0 = state.phi0.grad, state.phi0.hess
    u, du = state.u.values, state.u.grad
    w = state.w_values

    H0 = np.einsum("...la,...lb->...ab", g0, g0)
    A0 = np.einsum("...ai,...bj,...ab->...ij", Dp, Dp, H0)
    ua = np.einsum("...l,...la->...a", u, g0)
    mix = np.einsum("...i,...aj,...a->...ij", v, Dp, ua)
    B1 = mix + np.swapaxes(mix, -1, -2)
    C2 = np.einsum("...i,...j->...ij", v, v) * np.sum(u * u, axis=-1)[..., None, None]
    E0 = 0.5 * (A0 + B1 + C2 - np.eye(3))

    xi0 = np.einsum("...lab,...ai,...bj->...lij", h0, Dp, Dp) + np.einsum(
        "...la,...aij->...lij", g0, D2[..., :2, :, :]
    )
    m = np.einsum("...la,...i,...aj->...lij", du, v, Dp)
    gamma1 = m + np.swapaxes(m, -1, -2) + u[..., :, None, None] * D2[..., 2, None, :, :]
    zeta2 = w[..., :, None, None] * np.einsum("...i,...j->...ij", v, v)[..., None, :, :]
    d0 = xi0 + gamma1 + zeta2
    c0 = np.linalg.det(fr.A)
    return E0, d0, c0


def j0_general(state: MembraneState, chart: Chart, mat: MaterialParams,
               qf: Optional[QuadraticForm3] = None, return_parts: bool = False):
    """Limit energy from its definition, integrated over omega against c0."""
    qf = QuadraticForm3.frobenius() if qf is None else qf
    E0, d0, c0 = _midsurface_terms(state, chart)
    w = state.grid.weights() * c0
    mem = float(np.sum(w * cee(E0, mat)))
    sec = float(np.sum(w * qform(qf, d0)))
    split = EnergySplit(mem, sec, mem + sec)
    return split if return_parts else split.total


# --------------------------------------------------------------------------- closed forms


def _dot(x, y):
    return np.sum(x * y, axis=-1)


def _sq(x):
    return np.sum(x * x, axis=-1)


def _membrane(a, b, u, beta, gamma, mat):
    """lambda/4 (|a|^2 + beta|b|^2 + |u|^2 - 3)^2 + mu/2 [...] with metric weights beta, gamma.

    ``beta`` multiplies |b|^2 inside the squares; ``gamma`` multiplies the
    squared products involving b.
    """
    tr = _sq(a) + beta * _sq(b) + _sq(u) - 3.0
    shear = (
        (_sq(a) - 1.0) ** 2
        + (beta * _sq(b) - 1.0) ** 2
        + (_sq(u) - 1.0) ** 2
        + 2.0 * gamma * _dot(a, b) ** 2
        + 2.0 * _dot(a, u) ** 2
        + 2.0 * gamma * _dot(b, u) ** 2
    )
    return mat.lam / 4.0 * tr**2 + mat.mu / 2.0 * shear


def j0_specialized(state: MembraneState, chart: Chart, mat: MaterialParams,
                   variant=EnergyVariant.DERIVED, qf: Optional[QuadraticForm3] = None,
                   return_parts: bool = False):
    """Closed-form limit energy of a built-in chart.

    The curved charts assume the Frobenius quadratic form. The planar chart
    accepts any diagonal form ``qf``.
    """
    variant = EnergyVariant.parse(variant)
    grid = state.grid
    x1, _ = grid.mesh()
    g, hs = state.phi0.grad, state.phi0.hess
    a, b = g[..., 0], g[..., 1]
    p11, p12, p22 = hs[..., 0, 0], hs[..., 0, 1], hs[..., 1, 1]
    u, du = state.u.values, state.u.grad
    u1, u2 = du[..., 0], du[..., 1]
    w = state.w_values

    if isinstance(chart, Planar):
        qf = QuadraticForm3.frobenius() if qf is None else qf
        mem = _membrane(a, b, u, 1.0, 1.0, mat)
        T = np.zeros(grid.shape + (3, 3, 3))
        T[..., :, :2, :2] = hs
        T[..., :, 0, 2] = u1
        T[..., :, 1, 2] = u2
        T[..., :, 2, 0] = u1
        T[..., :, 2, 1] = u2
        T[..., :, 2, 2] = w
        sec = qform(qf, T)
        measure = np.ones_like(x1)
    elif isinstance(chart, Cylinder):
        _require_frobenius(qf, chart)
        r = chart.radius
        if variant is EnergyVariant.AS_PRINTED:
            mem = _membrane(a, b, u, 1.0 / r, 1.0, mat)
            wterm = 0.0
        else:
            mem = _membrane(a, b, u, 1.0 / r**2, 1.0 / r**2, mat)
            wterm = _sq(w)
        sec = (
            _sq(p11)
            + 2.0 / r**2 * _sq(p12)
            + 2.0 * _sq(u1)
            + _sq(p22 / r**2 - u / r)
            + 2.0 * _sq(u2 / r + b / r**2)
            + wterm
        )
        measure = np.full_like(x1, r)
    elif isinstance(chart, SphereBand):
        _require_frobenius(qf, chart)
        s, co = np.sin(x1), np.cos(x1)
        s2 = s**2
        mem = _membrane(a, b, u, 1.0 / s2, 1.0 / s2, mat)
        cot = co / s
        if variant is EnergyVariant.AS_PRINTED:
            sec = (
                _sq(p11)
                + 2.0 / s2 * _sq(p12)
                + 2.0 * _sq(u1 - a)
                + 2.0 / s2 * _sq(u2 - b)
                + 2.0 * co / s**3 * _dot(p22, a)
                - 4.0 * co / s**3 * _dot(p12, b)
                + _sq(p22 / s2[..., None] + u)
                + _sq(a) * (4.0 * co**2 * s2 + cot**2 + 1.0)
                + _sq(b) * (1.0 - 2.0 / s2)
            )
        else:
            sec = (
                _sq(p11 + u)
                + 2.0 / s2 * _sq(p12 - cot[..., None] * b)
                + _sq(p22 / s2[..., None] + cot[..., None] * a + u)
                + 2.0 * _sq(u1 - a)
                + 2.0 / s2 * _sq(u2 - b)
                + _sq(w)
            )
        measure = s
    else:
        raise UnsupportedChart(f"no closed-form limit energy for chart {chart.kind!r}")

    wts = grid.weights() * measure
    m = float(np.sum(wts * mem))
    q = float(np.sum(wts * sec))
    split = EnergySplit(m, q, m + q)
    return split if return_parts else split.total


def _require_frobenius(qf, chart):
    if qf is not None and not qf.is_frobenius:
        raise UnsupportedChart(f"closed form for {chart.kind} assumes the Frobenius quadratic form")


# --------------------------------------------------------------------------- reduced problems


@dataclass
class FrozenData:
    """Nodal a = phi0,1, b = phi0,2, c = phi0,22 held fixed in the reduced problem."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray

    @classmethod
    def from_phi0(cls, phi0: Field2D) -> "FrozenData":
        return cls(phi0.grad[..., 0].copy(), phi0.grad[..., 1].copy(), phi0.hess[..., 1, 1].copy())

    @classmethod
    def identity(cls, chart: Chart, grid: Grid2D) -> "FrozenData":
        return cls.from_phi0(Field2D.from_surface(grid, ChartPsi(chart)))

    @classmethod
    def constant(cls, grid: Grid2D, a, b, c=(0.0, 0.0, 0.0)) -> "FrozenData":
        s = grid.shape + (3,)
        return cls(*(np.broadcast_to(np.asarray(v, dtype=float), s).copy() for v in (a, b, c)))


def boundary_director(chart: Chart, grid: Grid2D, Atilde) -> np.ndarray:
    """Nodal values Atilde @ a3(x) prescribed on the boundary."""
    x1, x2 = grid.mesh()
    return np.einsum("ab,...b->...a", np.asarray(Atilde, dtype=float), chart.normal(x1, x2))


class ELResidual(NamedTuple):
    interior: np.ndarray  # (n1, n2, 3), zero on boundary nodes
    boundary: np.ndarray  # (n1, n2, 3), zero on interior nodes
    interior_norm: float  # weighted L2 norm over interior nodes
    boundary_max: float


class ReducedProblem:
    """Discrete reduced functional in the director u for one chart.

    The functional is a pointwise density integrated with trapezoid weights
    plus gradient terms kappa_alpha m |u,alpha + g_alpha|^2. Gradient terms
    live on grid edges: midpoint rule along the edge, trapezoid across it,
    with g averaged over the two end nodes. Its exact gradient is then a
    compact five-point operator.
    """

    def __init__(self, chart: Chart, grid: Grid2D, frozen: FrozenData, mat: MaterialParams):
        if not isinstance(chart, (Planar, Cylinder, SphereBand)):
            raise UnsupportedChart(f"no reduced functional for chart {chart.kind!r}")
        self.chart, self.grid, self.frozen, self.mat = chart, grid, frozen, mat
        x1 = grid.x1
        h1, h2 = grid.spacing
        w1 = trapezoid_weights(grid.n1, h1)
        w2 = trapezoid_weights(grid.n2, h2)
        xm = 0.5 * (x1[1:] + x1[:-1])
        a, b, c = frozen.a, frozen.b, frozen.c
        one = np.ones_like(x1)
        if isinstance(chart, Planar):
            m, m_mid = one, np.ones_like(xm)
            k1_mid, k2 = 2.0 * np.ones_like(xm), 2.0 * one
            g1 = g2 = np.zeros_like(a)
            beta, gamma = one, one
            p, q = None, None
            self._const_membrane = True
        elif isinstance(chart, Cylinder):
            r = chart.radius
            m, m_mid = r * one, r * np.ones_like(xm)
            k1_mid, k2 = 2.0 * np.ones_like(xm), 2.0 / r**2 * one
            g1, g2 = np.zeros_like(a), b / r
            beta, gamma = one / r, one
            p, q = one / r, -one / r**2
            self._const_membrane = False
        else:
            s = np.sin(x1)
            m, m_mid = s, np.sin(xm)
            k1_mid, k2 = 2.0 * np.ones_like(xm), 2.0 / s**2
            g1, g2 = -a, -b
            beta, gamma = 1.0 / s**2, 1.0 / s**2
            p, q = one, 1.0 / s**2
            self._const_membrane = False

        self.node_w = np.outer(w1 * m, w2)  # trapezoid weight times measure
        self.m = np.broadcast_to(m[:, None], grid.shape)
        # edge weights: along x1 (n1-1, n2), along x2 (n1, n2-1)
        self.W1 = np.outer(h1 * k1_mid * m_mid, w2)
        self.W2 = np.outer(w1 * k2 * m, np.full(grid.n2 - 1, h2))
        self.g1 = 0.5 * (g1[1:] + g1[:-1])
        self.g2 = 0.5 * (g2[:, 1:] + g2[:, :-1])
        self.beta = beta[:, None]
        self.gamma = gamma[:, None]
        self.p = None if p is None else p[:, None, None]
        self.q = None if q is None else q[:, None, None]
        self.h1, self.h2 = h1, h2
        self.interior = ~grid.boundary_mask()

    # -- pointwise density and its u-derivative
    def _pointwise(self, u):
        a, b, c = self.frozen.a, self.frozen.b, self.frozen.c
        lam, mu = self.mat.lam, self.mat.mu
        uu = _sq(u)
        S = _sq(a) + self.beta * _sq(b) + uu - 3.0
        au, bu = _dot(a, u), _dot(b, u)
        dens = lam / 4.0 * S**2 + mu / 2.0 * ((uu - 1.0) ** 2 + 2.0 * au**2 + 2.0 * self.gamma * bu**2)
        grad = (lam * S + 2.0 * mu * (uu - 1.0))[..., None] * u + 2.0 * mu * (
            au[..., None] * a + (self.gamma * bu)[..., None] * b
        )
        if self._const_membrane:
            dens = dens + mu / 2.0 * ((_sq(a) - 1.0) ** 2 + (_sq(b) - 1.0) ** 2 + 2.0 * _dot(a, b) ** 2)
        if self.p is not None:
            lin = self.p * u + self.q * c
            dens = dens + _sq(lin)
            grad = grad + 2.0 * self.p * lin
        return dens, grad

    def _edges(self, u):
        e1 = (u[1:] - u[:-1]) / self.h1 + self.g1
        e2 = (u[:, 1:] - u[:, :-1]) / self.h2 + self.g2
        return e1, e2

    def energy(self, u: np.ndarray) -> float:
        dens, _ = self._pointwise(u)
        e1, e2 = self._edges(u)
        return float(np.sum(self.node_w * dens) + np.sum(self.W1 * _sq(e1)) + np.sum(self.W2 * _sq(e2)))

    def gradient(self, u: np.ndarray) -> np.ndarray:
        """Exact derivative of ``energy`` with respect to every nodal value."""
        _, gp = self._pointwise(u)
        G = self.node_w[..., None] * gp
        e1, e2 = self._edges(u)
        f1 = (2.0 / self.h1) * self.W1[..., None] * e1
        f2 = (2.0 / self.h2) * self.W2[..., None] * e2
        G[1:] += f1
        G[:-1] -= f1
        G[:, 1:] += f2
        G[:, :-1] -= f2
        return G

    def gradient_density(self, u: np.ndarray) -> np.ndarray:
        """Gradient divided by the nodal quadrature weight: a pointwise EL residual."""
        return self.gradient(u) / self.node_w[..., None]

    def weighted_norm(self, r: np.ndarray) -> float:
        """sqrt(sum over interior nodes of weight * |r|^2)."""
        return float(np.sqrt(np.sum((self.node_w * _sq(r))[self.interior])))

    def stiffness(self) -> sp.csr_matrix:
        """Hessian of the gradient terms for one vector component (scalar graph Laplacian)."""
        n1, n2 = self.grid.shape
        idx = np.arange(n1 * n2).reshape(n1, n2)
        rows, cols, vals = [], [], []
        for (i, j, wts, hh) in (
            (idx[:-1].ravel(), idx[1:].ravel(), self.W1.ravel(), self.h1),
            (idx[:, :-1].ravel(), idx[:, 1:].ravel(), self.W2.ravel(), self.h2),
        ):
            k = 2.0 * wts / hh**2
            rows += [i, j, i, j]
            cols += [i, j, j, i]
            vals += [k, k, -k, -k]
        K = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(n1 * n2, n1 * n2))
        return K.tocsr()


def reduced_functional(chart: Chart, u: np.ndarray, frozen: FrozenData, mat: MaterialParams,
                       grid: Grid2D) -> float:
    """Value of the reduced functional at nodal director values u."""
    return ReducedProblem(chart, grid, frozen, mat).energy(np.asarray(u, dtype=float))


def el_residual(chart: Chart, u: np.ndarray, frozen: FrozenData, mat: MaterialParams,
                grid: Grid2D, Atilde=None, variant=EnergyVariant.DERIVED) -> ELResidual:
    """Euler-Lagrange residual of the reduced problem and the boundary mismatch.

    ``DERIVED`` returns the exact gradient density of the discrete functional,
    which includes the derivatives of the frozen fields. ``AS_PRINTED``
    evaluates the printed PDE left-hand side with the five-point
    chart Laplacian.
    """
    variant = EnergyVariant.parse(variant)
    u = np.asarray(u, dtype=float)
    prob = ReducedProblem(chart, grid, frozen, mat)
    if variant is EnergyVariant.DERIVED:
        r = prob.gradient_density(u)
    else:
        r = _printed_el(chart, u, frozen, mat, grid)
    interior = np.where(prob.interior[..., None], r, 0.0)
    A = np.eye(3) if Atilde is None else Atilde
    bmis = np.where(prob.interior[..., None], 0.0, u - boundary_director(chart, grid, A))
    return ELResidual(interior, bmis, prob.weighted_norm(interior),
                      float(np.max(np.linalg.norm(bmis, axis=-1))))


def _printed_el(chart, u, frozen, mat, grid):
    a, b, c = frozen.a, frozen.b, frozen.c
    h1, h2 = grid.spacing
    lam, mu = mat.lam, mat.mu
    x1, _ = grid.mesh()
    u11, u22 = d2(u, h1, 0), d2(u, h2, 1)
    uu = _sq(u)
    if isinstance(chart, Planar):
        S = _sq(a) + _sq(b) + uu - 3.0
        r = (lam * S + 2 * mu * (uu - 1))[..., None] * u
        r = r + 2 * mu * (_dot(u, a)[..., None] * a + _dot(u, b)[..., None] * b) - 4.0 * (u11 + u22)
    elif isinstance(chart, Cylinder):
        rad = chart.radius
        S = _sq(a) + _sq(b) / rad + uu - 3.0
        r = (lam * S + 2 * mu * (uu - 1))[..., None] * u
        r = r + 2 * mu * (_dot(u, a)[..., None] * a + _dot(u, b)[..., None] * b)
        r = r + (2.0 / rad) * (u / rad - c / rad**2) - 4.0 * (u11 + u22 / rad**2)
    elif isinstance(chart, SphereBand):
        s2 = np.sin(x1) ** 2
        S = _sq(a) + _sq(b) / s2 + uu - 3.0
        r = (lam * S + 2 * mu * (uu - 1) + 2.0)[..., None] * u
        r = r + 2 * mu * (_dot(u, a)[..., None] * a + (_dot(u, b) / s2)[..., None] * b)
        r = r - 4.0 * (u11 + u22 / s2[..., None]) + (2.0 / np.sin(x1))[..., None] * c
    else:
        raise UnsupportedChart(chart.kind)
    return r
