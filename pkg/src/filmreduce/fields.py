"""
Structured grids, finite-difference stencils and derivative jets of vector fields.

A field is stored together with its first and second derivatives at the nodes
(a "jet"). Jets come either from nodal values through finite differences, or
exactly from analytic surface fields. A 3D field on the unit cylinder is a
polynomial in x3 with surface-field coefficients, ``sum_m x3**m f_m(x1, x2)``,
which covers every deformation the expansion machinery needs.

Index conventions: ``grad[..., l, m] = d f_l / d x_m`` and
``hess[..., l, m, n] = d2 f_l / d x_m d x_n``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Tuple

import numpy as np

__all__ = [
    "Grid2D",
    "Grid3D",
    "trapezoid_weights",
    "d1",
    "d2",
    "Field2D",
    "Field3D",
    "SurfaceField",
    "ConstantField",
    "AffineField",
    "TrigField",
    "ChartPsi",
    "ChartNormal",
    "SumField",
    "ScaledField",
    "LinearMap",
]

Interval = Tuple[float, float]


def trapezoid_weights(n: int, spacing: float) -> np.ndarray:
    w = np.full(n, spacing)
    w[0] = w[-1] = 0.5 * spacing
    return w


@dataclass(frozen=True)
class Grid2D:
    """Uniform node grid on the closed rectangle omega."""

    n1: int
    n2: int
    domain: Tuple[Interval, Interval] = ((0.0, 1.0), (0.0, 1.0))

    def __post_init__(self):
        if self.n1 < 5 or self.n2 < 5:
            raise ValueError(f"grid needs at least 5 nodes per axis, got {self.n1}x{self.n2}")
        (a1, b1), (a2, b2) = self.domain
        if not (a1 < b1 and a2 < b2):
            raise ValueError("grid domain intervals must be nonempty")

    @property
    def shape(self):
        return (self.n1, self.n2)

    @property
    def spacing(self) -> Tuple[float, float]:
        (a1, b1), (a2, b2) = self.domain
        return ((b1 - a1) / (self.n1 - 1), (b2 - a2) / (self.n2 - 1))

    @property
    def x1(self) -> np.ndarray:
        return np.linspace(*self.domain[0], self.n1)

    @property
    def x2(self) -> np.ndarray:
        return np.linspace(*self.domain[1], self.n2)

    def mesh(self):
        return np.meshgrid(self.x1, self.x2, indexing="ij")

    def weights(self) -> np.ndarray:
        h1, h2 = self.spacing
        return np.outer(trapezoid_weights(self.n1, h1), trapezoid_weights(self.n2, h2))

    def area(self) -> float:
        (a1, b1), (a2, b2) = self.domain
        return (b1 - a1) * (b2 - a2)

    def boundary_mask(self) -> np.ndarray:
        m = np.zeros(self.shape, dtype=bool)
        m[0, :] = m[-1, :] = m[:, 0] = m[:, -1] = True
        return m

    def integrate(self, f: np.ndarray) -> float:
        return float(np.sum(self.weights() * f))


@dataclass(frozen=True)
class Grid3D:
    """Uniform node grid on omega x [-1/2, 1/2]."""

    n1: int
    n2: int
    n3: int
    domain: Tuple[Interval, Interval] = ((0.0, 1.0), (0.0, 1.0))

    def __post_init__(self):
        if min(self.n1, self.n2, self.n3) < 5:
            raise ValueError(
                f"grid needs at least 5 nodes per axis, got {self.n1}x{self.n2}x{self.n3}"
            )
        Grid2D(self.n1, self.n2, self.domain)

    @property
    def plane(self) -> Grid2D:
        return Grid2D(self.n1, self.n2, self.domain)

    @property
    def shape(self):
        return (self.n1, self.n2, self.n3)

    @property
    def spacing(self) -> Tuple[float, float, float]:
        return self.plane.spacing + (1.0 / (self.n3 - 1),)

    @property
    def x3(self) -> np.ndarray:
        return np.linspace(-0.5, 0.5, self.n3)

    def mesh(self):
        return np.meshgrid(self.plane.x1, self.plane.x2, self.x3, indexing="ij")

    def weights(self) -> np.ndarray:
        h1, h2, h3 = self.spacing
        return np.einsum(
            "i,j,k->ijk",
            trapezoid_weights(self.n1, h1),
            trapezoid_weights(self.n2, h2),
            trapezoid_weights(self.n3, h3),
        )

    def integrate(self, f: np.ndarray) -> float:
        return float(np.sum(self.weights() * f))


# --------------------------------------------------------------------------- stencils


def d1(f: np.ndarray, spacing: float, axis: int) -> np.ndarray:
    """First derivative: central interior, second-order one-sided at the ends."""
    return np.gradient(f, spacing, axis=axis, edge_order=2)


def d2(f: np.ndarray, spacing: float, axis: int) -> np.ndarray:
    """Second derivative: 3-point interior, 4-point second-order one-sided at the ends."""
    f = np.moveaxis(np.asarray(f, dtype=float), axis, 0)
    out = np.empty_like(f)
    out[1:-1] = f[2:] - 2.0 * f[1:-1] + f[:-2]
    out[0] = 2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]
    out[-1] = 2.0 * f[-1] - 5.0 * f[-2] + 4.0 * f[-3] - f[-4]
    return np.moveaxis(out / spacing**2, 0, axis)


def _fd_jet(values: np.ndarray, spacings: Sequence[float]):
    """Gradient and Hessian of nodal values (..., 3) over the leading grid axes."""
    dim = len(spacings)
    firsts = [d1(values, spacings[m], m) for m in range(dim)]
    grad = np.stack(firsts, axis=-1)
    hess = np.empty(values.shape + (dim, dim))
    for m in range(dim):
        hess[..., m, m] = d2(values, spacings[m], m)
        for n in range(m + 1, dim):
            mixed = d1(firsts[m], spacings[n], n)
            hess[..., m, n] = mixed
            hess[..., n, m] = mixed
    return grad, hess


# --------------------------------------------------------------------------- jets


@dataclass
class Field2D:
    """Vector field on a Grid2D with nodal first and second derivatives."""

    grid: Grid2D
    values: np.ndarray  # (n1, n2, 3)
    grad: np.ndarray  # (n1, n2, 3, 2)
    hess: np.ndarray  # (n1, n2, 3, 2, 2)

    @classmethod
    def from_values(cls, grid: Grid2D, values) -> "Field2D":
        values = np.asarray(values, dtype=float)
        if values.shape != grid.shape + (3,):
            raise ValueError(f"expected nodal values of shape {grid.shape + (3,)}, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("field values must be finite")
        grad, hess = _fd_jet(values, grid.spacing)
        return cls(grid, values, grad, hess)

    @classmethod
    def from_surface(cls, grid: Grid2D, f: "SurfaceField") -> "Field2D":
        x1, x2 = grid.mesh()
        v, d, dd = f.jet(x1, x2)
        return cls(grid, v, d, dd)

    @classmethod
    def zeros(cls, grid: Grid2D) -> "Field2D":
        return cls(grid, np.zeros(grid.shape + (3,)), np.zeros(grid.shape + (3, 2)), np.zeros(grid.shape + (3, 2, 2)))

    def __add__(self, other: "Field2D") -> "Field2D":
        return Field2D(self.grid, self.values + other.values, self.grad + other.grad, self.hess + other.hess)

    def scale(self, s: float) -> "Field2D":
        return Field2D(self.grid, s * self.values, s * self.grad, s * self.hess)


@dataclass
class Field3D:
    """Vector field on a Grid3D with nodal first and second derivatives in (x1, x2, x3)."""

    grid: Grid3D
    values: np.ndarray  # (n1, n2, n3, 3)
    grad: np.ndarray  # (n1, n2, n3, 3, 3)
    hess: np.ndarray  # (n1, n2, n3, 3, 3, 3)

    @classmethod
    def from_values(cls, grid: Grid3D, values) -> "Field3D":
        values = np.asarray(values, dtype=float)
        if values.shape != grid.shape + (3,):
            raise ValueError(f"expected nodal values of shape {grid.shape + (3,)}, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("field values must be finite")
        grad, hess = _fd_jet(values, grid.spacing)
        return cls(grid, values, grad, hess)

    @classmethod
    def from_function(cls, grid: Grid3D, fn) -> "Field3D":
        """Sample ``fn(x1, x2, x3) -> (..., 3)`` at the nodes; derivatives by finite differences."""
        x1, x2, x3 = grid.mesh()
        return cls.from_values(grid, fn(x1, x2, x3))

    @classmethod
    def from_surface_terms(cls, grid: Grid3D, terms: Sequence["SurfaceField"]) -> "Field3D":
        """Exact jet of ``sum_m x3**m * terms[m](x1, x2)``."""
        x1, x2 = grid.plane.mesh()
        return cls.from_plane_jets(grid, [None if f is None else f.jet(x1, x2) for f in terms])

    @classmethod
    def from_plane_jets(cls, grid: Grid3D, jets) -> "Field3D":
        """Exact jet of ``sum_m x3**m f_m`` from in-plane jets ``(value, d, dd)`` or Field2D."""
        x3 = grid.x3
        shape = grid.shape
        values = np.zeros(shape + (3,))
        grad = np.zeros(shape + (3, 3))
        hess = np.zeros(shape + (3, 3, 3))
        for m, jet in enumerate(jets):
            if jet is None:
                continue
            if isinstance(jet, Field2D):
                jet = (jet.values, jet.grad, jet.hess)
            v, d, dd = (np.asarray(a, dtype=float)[:, :, None] for a in jet)
            p0 = (x3**m)[None, None, :, None]
            values += p0 * v
            grad[..., :2] += p0[..., None] * d
            hess[..., :2, :2] += p0[..., None, None] * dd
            if m >= 1:
                p1 = (m * x3 ** (m - 1))[None, None, :, None]
                grad[..., 2] += p1 * v
                hess[..., :2, 2] += p1[..., None] * d
                hess[..., 2, :2] += p1[..., None] * d
            if m >= 2:
                p2 = (m * (m - 1) * x3 ** (m - 2))[None, None, :, None]
                hess[..., 2, 2] += p2 * v
        return cls(grid, values, grad, hess)

    @classmethod
    def zeros(cls, grid: Grid3D) -> "Field3D":
        s = grid.shape
        return cls(grid, np.zeros(s + (3,)), np.zeros(s + (3, 3)), np.zeros(s + (3, 3, 3)))

    def __add__(self, other: "Field3D") -> "Field3D":
        return Field3D(self.grid, self.values + other.values, self.grad + other.grad, self.hess + other.hess)

    def scale(self, s: float) -> "Field3D":
        return Field3D(self.grid, s * self.values, s * self.grad, s * self.hess)


# --------------------------------------------------------------------------- analytic surface fields


class SurfaceField:
    """Analytic R^3-valued field on omega with exact first and second derivatives."""

    def jet(self, x1, x2):
        """Return (value[..., 3], d[..., 3, 2], dd[..., 3, 2, 2])."""
        raise NotImplementedError

    def __add__(self, other: "SurfaceField") -> "SurfaceField":
        return SumField((self, other))

    def __mul__(self, s: float) -> "SurfaceField":
        return ScaledField(self, float(s))

    __rmul__ = __mul__


def _shape(x1, x2):
    return np.broadcast(np.asarray(x1), np.asarray(x2)).shape


@dataclass(frozen=True)
class ConstantField(SurfaceField):
    vector: Tuple[float, float, float]

    def jet(self, x1, x2):
        s = _shape(x1, x2)
        v = np.broadcast_to(np.asarray(self.vector, dtype=float), s + (3,)).copy()
        return v, np.zeros(s + (3, 2)), np.zeros(s + (3, 2, 2))


@dataclass(frozen=True)
class AffineField(SurfaceField):
    """M @ (x1, x2) + c with M of shape (3, 2)."""

    matrix: np.ndarray
    offset: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def jet(self, x1, x2):
        s = _shape(x1, x2)
        M = np.asarray(self.matrix, dtype=float)
        x1, x2 = np.broadcast_arrays(np.asarray(x1, dtype=float), np.asarray(x2, dtype=float))
        v = x1[..., None] * M[:, 0] + x2[..., None] * M[:, 1] + np.asarray(self.offset, dtype=float)
        d = np.broadcast_to(M, s + (3, 2)).copy()
        return v, d, np.zeros(s + (3, 2, 2))


@dataclass(frozen=True)
class TrigField(SurfaceField):
    """Sum of modes ``amp[k, l] * sin(k1[k] x1 + k2[k] x2 + phase[k, l])`` per component l."""

    k1: np.ndarray
    k2: np.ndarray
    amp: np.ndarray  # (modes, 3)
    phase: np.ndarray  # (modes, 3)

    @classmethod
    def random(cls, rng: np.random.Generator, amplitude: float = 0.1, modes: int = 3,
               max_wavenumber: float = 3.0) -> "TrigField":
        k1 = rng.uniform(-max_wavenumber, max_wavenumber, modes)
        k2 = rng.uniform(-max_wavenumber, max_wavenumber, modes)
        amp = amplitude * rng.uniform(-1.0, 1.0, (modes, 3)) / modes
        phase = rng.uniform(0.0, 2 * np.pi, (modes, 3))
        return cls(k1, k2, amp, phase)

    def jet(self, x1, x2):
        x1, x2 = np.broadcast_arrays(np.asarray(x1, dtype=float), np.asarray(x2, dtype=float))
        s = x1.shape
        v = np.zeros(s + (3,))
        d = np.zeros(s + (3, 2))
        dd = np.zeros(s + (3, 2, 2))
        for k in range(len(self.k1)):
            kk = np.array([self.k1[k], self.k2[k]])
            arg = (self.k1[k] * x1 + self.k2[k] * x2)[..., None] + self.phase[k]
            sn = self.amp[k] * np.sin(arg)
            cs = self.amp[k] * np.cos(arg)
            v += sn
            d += cs[..., None] * kk
            dd -= sn[..., None, None] * np.outer(kk, kk)
        return v, d, dd


@dataclass(frozen=True)
class ChartPsi(SurfaceField):
    """The chart map psi itself."""

    chart: object

    def jet(self, x1, x2):
        return self.chart.psi(x1, x2), self.chart.dpsi(x1, x2), self.chart.ddpsi(x1, x2)


@dataclass(frozen=True)
class ChartNormal(SurfaceField):
    """The unit normal a3 of the chart."""

    chart: object

    def jet(self, x1, x2):
        return self.chart.normal(x1, x2), self.chart.dnormal(x1, x2), self.chart.ddnormal(x1, x2)


@dataclass(frozen=True)
class SumField(SurfaceField):
    parts: Tuple[SurfaceField, ...]

    def jet(self, x1, x2):
        jets = [p.jet(x1, x2) for p in self.parts]
        return tuple(sum(j[i] for j in jets) for i in range(3))


@dataclass(frozen=True)
class ScaledField(SurfaceField):
    base: SurfaceField
    factor: float

    def jet(self, x1, x2):
        return tuple(self.factor * a for a in self.base.jet(x1, x2))


@dataclass(frozen=True)
class LinearMap(SurfaceField):
    """x -> M @ f(x) for a constant 3x3 matrix M."""

    matrix: np.ndarray
    base: SurfaceField

    def jet(self, x1, x2):
        M = np.asarray(self.matrix, dtype=float)
        v, d, dd = self.base.jet(x1, x2)
        return (
            np.einsum("ab,...b->...a", M, v),
            np.einsum("ab,...bi->...ai", M, d),
            np.einsum("ab,...bij->...aij", M, dd),
        )
