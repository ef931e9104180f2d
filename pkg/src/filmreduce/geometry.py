"""
Midsurface charts and the curvilinear geometry of the film.

A chart maps the parameter rectangle omega onto the midsurface. From it we get
the covariant basis (a1, a2, a3), the fattening map

    Psi(x1, x2, x3) = psi(x1, x2) + x3 * a3(x1, x2),

its first and second derivatives, the Jacobian coefficients c0, c1, c2 with
det grad Psi(x1, x2, h*x3) = c0 + h*c1 + h**2*c2, and the first and second
derivatives of Psi^-1 evaluated along the normal.

All chart methods are vectorized: ``x1`` and ``x2`` may be arrays of any
(broadcastable) shape and the returned arrays carry those shapes as leading
axes. Index conventions for trailing axes:

* ``dpsi[..., l, a]``      = d psi_l / d x_a          (a in {0, 1})
* ``ddpsi[..., l, a, b]``  = d2 psi_l / d x_a d x_b
* ``grad[..., l, m]``      = d Psi_l / d x_m          (m in {0, 1, 2})
* ``D1[..., k, i]``        = d (Psi^-1)_k / d z_i
* ``D2[..., k, i, j]``     = d2 (Psi^-1)_k / d z_i d z_j
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .errors import ChartSingular, ThicknessTooLarge

__all__ = [
    "Chart",
    "Planar",
    "Cylinder",
    "SphereBand",
    "ChartFrame",
    "JacobianCoeffs",
    "InverseDerivs",
    "parse_chart",
    "frame",
    "fattening_map",
    "psi_and_grad",
    "jacobian_coeffs",
    "inv_derivs",
    "check_thickness",
]

Interval = Tuple[float, float]


def _stack(*cols):
    """Stack broadcast scalars/arrays along a new trailing axis."""
    cols = np.broadcast_arrays(*[np.asarray(c, dtype=float) for c in cols])
    return np.stack(cols, axis=-1)


def _zeros_like(x1, x2, *trailing):
    shape = np.broadcast(np.asarray(x1), np.asarray(x2)).shape
    return np.zeros(shape + tuple(trailing))


# --------------------------------------------------------------------------- charts


class Chart:
    """Base class for a single-chart midsurface.

    Subclasses provide ``psi``, ``dpsi`` and ``ddpsi``. The unit normal and its
    first derivatives follow from those; the second derivatives of the normal
    default to central differences of the first, which needs psi of class C3.
    Built-in charts override all of these with closed forms.
    """

    kind = "custom"
    domain: Tuple[Interval, Interval]
    delta: float

    # -- to be provided by subclasses
    def psi(self, x1, x2):
        raise NotImplementedError

    def dpsi(self, x1, x2):
        raise NotImplementedError

    def ddpsi(self, x1, x2):
        raise NotImplementedError

    # -- normal field
    def normal(self, x1, x2):
        d = self.dpsi(x1, x2)
        c = np.cross(d[..., :, 0], d[..., :, 1])
        return c / np.linalg.norm(c, axis=-1, keepdims=True)

    def dnormal(self, x1, x2):
        d = self.dpsi(x1, x2)
        dd = self.ddpsi(x1, x2)
        a1, a2 = d[..., :, 0], d[..., :, 1]
        c = np.cross(a1, a2)
        norm = np.linalg.norm(c, axis=-1, keepdims=True)
        n = c / norm
        out = []
        for a in range(2):
            dc = np.cross(dd[..., :, 0, a], a2) + np.cross(a1, dd[..., :, 1, a])
            dn = (dc - n * np.sum(n * dc, axis=-1, keepdims=True)) / norm
            out.append(dn)
        return np.stack(out, axis=-1)

    def ddnormal(self, x1, x2, step: float = 1e-5):
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        cols = []
        for b in range(2):
            e1, e2 = (step, 0.0) if b == 0 else (0.0, step)
            plus = self.dnormal(x1 + e1, x2 + e2)
            minus = self.dnormal(x1 - e1, x2 - e2)
            cols.append((plus - minus) / (2 * step))
        dd = np.stack(cols, axis=-1)
        return 0.5 * (dd + np.swapaxes(dd, -1, -2))

    # -- closed-form inverse of the fattening map, when one is known
    def inverse(self, z):
        raise NotImplementedError(f"{self.kind} chart has no closed-form inverse")

    @property
    def has_closed_inverse(self) -> bool:
        return False

    def measure_factor(self, x1, x2):
        """det A(x) = |a1 ^ a2| on the midsurface."""
        d = self.dpsi(x1, x2)
        return np.linalg.norm(np.cross(d[..., :, 0], d[..., :, 1]), axis=-1)

    def to_config(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Planar(Chart):
    """psi(x) = (x1, x2, 0); Psi is the identity."""

    domain: Tuple[Interval, Interval] = ((0.0, 1.0), (0.0, 1.0))
    delta: float = 1.0
    kind = "planar"

    def psi(self, x1, x2):
        return _stack(x1, x2, np.zeros_like(np.asarray(x1, dtype=float)))

    def dpsi(self, x1, x2):
        out = _zeros_like(x1, x2, 3, 2)
        out[..., 0, 0] = 1.0
        out[..., 1, 1] = 1.0
        return out

    def ddpsi(self, x1, x2):
        return _zeros_like(x1, x2, 3, 2, 2)

    def normal(self, x1, x2):
        out = _zeros_like(x1, x2, 3)
        out[..., 2] = 1.0
        return out

    def dnormal(self, x1, x2):
        return _zeros_like(x1, x2, 3, 2)

    def ddnormal(self, x1, x2, step=None):
        return _zeros_like(x1, x2, 3, 2, 2)

    def inverse(self, z):
        return np.asarray(z, dtype=float).copy()

    @property
    def has_closed_inverse(self) -> bool:
        return True

    def measure_factor(self, x1, x2):
        return np.ones(np.broadcast(np.asarray(x1), np.asarray(x2)).shape)

    def to_config(self):
        return {"kind": "planar", "domain": [list(self.domain[0]), list(self.domain[1])]}


@dataclass(frozen=True)
class Cylinder(Chart):
    """psi(x) = (x1, r cos x2, r sin x2) with inward normal (0, -cos x2, -sin x2)."""

    radius: float = 1.0
    domain: Tuple[Interval, Interval] = ((0.0, 1.0), (0.0, math.pi / 2))
    delta: float = None  # type: ignore[assignment]
    kind = "cylinder"

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"cylinder radius must be positive, got {self.radius}")
        if self.delta is None:
            object.__setattr__(self, "delta", float(self.radius))

    def psi(self, x1, x2):
        r = self.radius
        return _stack(x1, r * np.cos(x2), r * np.sin(x2))

    def dpsi(self, x1, x2):
        r = self.radius
        out = _zeros_like(x1, x2, 3, 2)
        out[..., 0, 0] = 1.0
        out[..., 1, 1] = -r * np.sin(x2)
        out[..., 2, 1] = r * np.cos(x2)
        return out

    def ddpsi(self, x1, x2):
        r = self.radius
        out = _zeros_like(x1, x2, 3, 2, 2)
        out[..., 1, 1, 1] = -r * np.cos(x2)
        out[..., 2, 1, 1] = -r * np.sin(x2)
        return out

    def normal(self, x1, x2):
        out = _zeros_like(x1, x2, 3)
        out[..., 1] = -np.cos(x2)
        out[..., 2] = -np.sin(x2)
        return out

    def dnormal(self, x1, x2):
        out = _zeros_like(x1, x2, 3, 2)
        out[..., 1, 1] = np.sin(x2)
        out[..., 2, 1] = -np.cos(x2)
        return out

    def ddnormal(self, x1, x2, step=None):
        out = _zeros_like(x1, x2, 3, 2, 2)
        out[..., 1, 1, 1] = np.cos(x2)
        out[..., 2, 1, 1] = np.sin(x2)
        return out

    def inverse(self, z):
        z = np.asarray(z, dtype=float)
        rho = np.hypot(z[..., 1], z[..., 2])
        return _stack(z[..., 0], np.arctan2(z[..., 2], z[..., 1]), self.radius - rho)

    @property
    def has_closed_inverse(self) -> bool:
        return True

    def measure_factor(self, x1, x2):
        return np.full(np.broadcast(np.asarray(x1), np.asarray(x2)).shape, float(self.radius))

    def to_config(self):
        return {
            "kind": "cylinder",
            "radius": self.radius,
            "domain": [list(self.domain[0]), list(self.domain[1])],
        }


@dataclass(frozen=True)
class SphereBand(Chart):
    """Unit sphere in (colatitude x1, longitude x2) with outward normal.

    The colatitude interval must stay away from the poles.
    """

    domain: Tuple[Interval, Interval] = ((math.pi / 4, 3 * math.pi / 4), (0.0, math.pi / 2))
    delta: float = None  # type: ignore[assignment]
    kind = "sphere"

    def __post_init__(self):
        lo, hi = self.domain[0]
        if not (0.0 < lo <= hi < math.pi):
            raise ValueError(f"sphere latitude interval must lie inside (0, pi), got {self.domain[0]}")
        if self.delta is None:
            # sin is concave on (0, pi): its minimum over the band sits at an endpoint
            object.__setattr__(self, "delta", float(min(math.sin(lo), math.sin(hi))))

    def psi(self, x1, x2):
        s1, c1 = np.sin(x1), np.cos(x1)
        return _stack(s1 * np.cos(x2), s1 * np.sin(x2), c1)

    def dpsi(self, x1, x2):
        s1, c1, s2, c2 = np.sin(x1), np.cos(x1), np.sin(x2), np.cos(x2)
        out = _zeros_like(x1, x2, 3, 2)
        out[..., :, 0] = _stack(c1 * c2, c1 * s2, -s1)
        out[..., :, 1] = _stack(-s1 * s2, s1 * c2, np.zeros_like(s1 * c2))
        return out

    def ddpsi(self, x1, x2):
        s1, c1, s2, c2 = np.sin(x1), np.cos(x1), np.sin(x2), np.cos(x2)
        out = _zeros_like(x1, x2, 3, 2, 2)
        zero = np.zeros_like(s1 * c2)
        out[..., :, 0, 0] = _stack(-s1 * c2, -s1 * s2, -c1 + zero)
        mixed = _stack(-c1 * s2, c1 * c2, zero)
        out[..., :, 0, 1] = mixed
        out[..., :, 1, 0] = mixed
        out[..., :, 1, 1] = _stack(-s1 * c2, -s1 * s2, zero)
        return out

    def normal(self, x1, x2):
        return self.psi(x1, x2)

    def dnormal(self, x1, x2):
        return self.dpsi(x1, x2)

    def ddnormal(self, x1, x2, step=None):
        return self.ddpsi(x1, x2)

    def inverse(self, z):
        z = np.asarray(z, dtype=float)
        s = np.hypot(z[..., 0], z[..., 1])
        radius = np.sqrt(s**2 + z[..., 2] ** 2)
        return _stack(np.arctan2(s, z[..., 2]), np.arctan2(z[..., 1], z[..., 0]), radius - 1.0)

    @property
    def has_closed_inverse(self) -> bool:
        return True

    def measure_factor(self, x1, x2):
        x1, x2 = np.broadcast_arrays(np.asarray(x1, dtype=float), np.asarray(x2, dtype=float))
        return np.sin(x1)

    def to_config(self):
        return {"kind": "sphere", "domain": [list(self.domain[0]), list(self.domain[1])]}


def parse_chart(cfg: dict) -> Chart:
    """Build a chart from ``{"kind", "radius", "domain", "delta"}``."""
    cfg = dict(cfg)
    kind = cfg.pop("kind", None)
    kwargs = {}
    if "domain" in cfg:
        dom = cfg.pop("domain")
        if len(dom) != 2 or any(len(iv) != 2 for iv in dom):
            raise ValueError("domain must be [[x1min, x1max], [x2min, x2max]]")
        lo1, hi1 = map(float, dom[0])
        lo2, hi2 = map(float, dom[1])
        if not (lo1 < hi1 and lo2 < hi2):
            raise ValueError("domain intervals must be nonempty")
        kwargs["domain"] = ((lo1, hi1), (lo2, hi2))
    if "delta" in cfg:
        kwargs["delta"] = float(cfg.pop("delta"))
    if kind == "planar":
        chart = Planar(**kwargs)
    elif kind == "cylinder":
        chart = Cylinder(radius=float(cfg.pop("radius", 1.0)), **kwargs)
    elif kind == "sphere":
        chart = SphereBand(**kwargs)
    else:
        raise ValueError(f"unknown chart kind {kind!r}")
    if cfg:
        raise ValueError(f"unknown chart keys: {sorted(cfg)}")
    return chart


# --------------------------------------------------------------------------- frames


@dataclass(frozen=True)
class ChartFrame:
    a1: np.ndarray
    a2: np.ndarray
    a3: np.ndarray
    A: np.ndarray
    Ainv: np.ndarray
    detA: np.ndarray


def frame(chart: Chart, x1, x2) -> ChartFrame:
    """Covariant and contravariant bases at parameter points (x1, x2).

    Raises ChartSingular when |a1 ^ a2| drops below ``chart.delta``.
    """
    d = chart.dpsi(x1, x2)
    a1, a2 = d[..., :, 0], d[..., :, 1]
    a3 = chart.normal(x1, x2)
    det = np.linalg.norm(np.cross(a1, a2), axis=-1)
    if np.any(det < chart.delta * (1.0 - 1e-12)):
        raise ChartSingular(
            f"|a1 ^ a2| = {float(np.min(det)):.6g} below delta = {chart.delta:.6g}"
        )
    A = np.stack([a1, a2, a3], axis=-1)
    return ChartFrame(a1=a1, a2=a2, a3=a3, A=A, Ainv=np.linalg.inv(A), detA=det)


def fattening_map(chart: Chart, x1, x2, t):
    """Psi, grad Psi and the second derivatives of Psi at (x1, x2, t).

    Returns ``(value[..., 3], grad[..., 3, 3], hess[..., 3, 3, 3])`` with
    ``hess[..., l, m, n] = d2 Psi_l / dx_m dx_n``.
    """
    x1, x2, t = np.broadcast_arrays(
        np.asarray(x1, dtype=float), np.asarray(x2, dtype=float), np.asarray(t, dtype=float)
    )
    tt = t[..., None]
    n = chart.normal(x1, x2)
    dn = chart.dnormal(x1, x2)
    value = chart.psi(x1, x2) + tt * n
    grad = np.empty(x1.shape + (3, 3))
    grad[..., :, :2] = chart.dpsi(x1, x2) + tt[..., None] * dn
    grad[..., :, 2] = n
    hess = np.zeros(x1.shape + (3, 3, 3))
    hess[..., :, :2, :2] = chart.ddpsi(x1, x2) + tt[..., None, None] * chart.ddnormal(x1, x2)
    hess[..., :, :2, 2] = dn
    hess[..., :, 2, :2] = dn
    return value, grad, hess


def psi_and_grad(chart: Chart, x, h: float):
    """Psi and grad Psi at (x1, x2, h*x3) for ``x = (x1, x2, x3)`` in Omega_1.

    Raises ThicknessTooLarge where det grad Psi <= 0.
    """
    x = np.asarray(x, dtype=float)
    value, grad, _ = fattening_map(chart, x[..., 0], x[..., 1], h * x[..., 2])
    det = np.linalg.det(grad)
    if np.any(det <= 0):
        raise ThicknessTooLarge(f"det grad Psi = {float(np.min(det)):.6g} <= 0 at h = {h}")
    return value, grad


@dataclass(frozen=True)
class JacobianCoeffs:
    c0: np.ndarray
    c1: np.ndarray
    c2: np.ndarray

    def det(self, h):
        return self.c0 + h * self.c1 + h * h * self.c2


def _det3(u, v, w):
    return np.sum(np.cross(u, v) * w, axis=-1)


def jacobian_coeffs(chart: Chart, x1, x2, x3) -> JacobianCoeffs:
    """Coefficients of det grad Psi(x1, x2, h*x3) as a quadratic in h."""
    fr = frame(chart, x1, x2)
    dn = chart.dnormal(x1, x2)
    n1, n2 = dn[..., :, 0], dn[..., :, 1]
    x3 = np.asarray(x3, dtype=float)
    # det[a1, a2, a3] = |a1 ^ a2|; the chart's closed form avoids round-off in c0
    c0 = chart.measure_factor(x1, x2)
    c1 = x3 * (_det3(fr.a1, n2, fr.a3) + _det3(n1, fr.a2, fr.a3))
    c2 = x3**2 * _det3(n1, n2, fr.a3)
    c0, c1, c2 = np.broadcast_arrays(c0, c1, c2)
    return JacobianCoeffs(c0=np.array(c0), c1=np.array(c1), c2=np.array(c2))


def check_thickness(chart: Chart, x1, x2, x3, h: float) -> None:
    """Fail fast if det grad Psi(x1, x2, h*x3) <= 0 at any of the given nodes."""
    det = jacobian_coeffs(chart, x1, x2, x3).det(h)
    if np.any(det <= 0) or not np.all(np.isfinite(det)):
        raise ThicknessTooLarge(
            f"h = {h} exceeds the admissible thickness: min det grad Psi = {float(np.min(det)):.6g}"
        )


# --------------------------------------------------------------------------- Psi^-1 derivatives


@dataclass(frozen=True)
class InverseDerivs:
    D1: np.ndarray
    D2: np.ndarray


def inv_derivs(chart: Chart, x1, x2, t, method: str = "identity") -> InverseDerivs:
    """First and second derivatives of Psi^-1 at the point Psi(x1, x2, t).

    ``method="identity"`` inverts grad Psi and applies the inverse-function
    identity D2[k,i,j] = -D1[k,l] Psi_l,mn D1[m,i] D1[n,j]; it works for every
    chart. ``method="analytic"`` differentiates the chart's closed-form inverse
    symbolically (planar, cylinder, sphere only).
    """
    if method == "analytic":
        z, _, _ = fattening_map(chart, x1, x2, t)
        return _closed_form_inverse_derivs(chart, z)
    if method != "identity":
        raise ValueError(f"unknown method {method!r}")
    _, grad, hess = fattening_map(chart, x1, x2, t)
    det = np.linalg.det(grad)
    if np.any(np.abs(det) < 1e-14):
        raise ChartSingular("grad Psi is not invertible")
    D1 = np.linalg.inv(grad)
    D2 = -np.einsum("...kl,...lmn,...mi,...nj->...kij", D1, hess, D1, D1)
    return InverseDerivs(D1=D1, D2=D2)


@functools.lru_cache(maxsize=None)
def _symbolic_inverse(kind: str, radius: float):
    import sympy as sp

    z = sp.symbols("z1 z2 z3", real=True)
    z1, z2, z3 = z
    if kind == "planar":
        inv = [z1, z2, z3]
    elif kind == "cylinder":
        inv = [z1, sp.atan2(z3, z2), radius - sp.sqrt(z2**2 + z3**2)]
    elif kind == "sphere":
        inv = [
            sp.atan2(sp.sqrt(z1**2 + z2**2), z3),
            sp.atan2(z2, z1),
            -1 + sp.sqrt(z1**2 + z2**2 + z3**2),
        ]
    else:
        raise NotImplementedError(kind)
    jac = [[sp.diff(f, v) for v in z] for f in inv]
    hess = [[[sp.diff(f, v, w) for w in z] for v in z] for f in inv]
    return sp.lambdify(z, jac, "numpy"), sp.lambdify(z, hess, "numpy")


def _closed_form_inverse_derivs(chart: Chart, z) -> InverseDerivs:
    if not chart.has_closed_inverse:
        raise NotImplementedError(f"{chart.kind} chart has no closed-form inverse")
    radius = float(getattr(chart, "radius", 0.0))
    jac_f, hess_f = _symbolic_inverse(chart.kind, radius)
    z = np.asarray(z, dtype=float)
    shape = z.shape[:-1]
    args = (z[..., 0], z[..., 1], z[..., 2])
    D1 = np.empty(shape + (3, 3))
    D2 = np.empty(shape + (3, 3, 3))
    jac = jac_f(*args)
    hess = hess_f(*args)
    for k in range(3):
        for i in range(3):
            D1[..., k, i] = jac[k][i]
            for j in range(3):
                D2[..., k, i, j] = hess[k][i][j]
    return InverseDerivs(D1=D1, D2=D2)


def closed_form_inverse_jacobian(chart: Chart, z) -> np.ndarray:
    """Jacobian of the closed-form Psi^-1 at points z (symbolic differentiation)."""
    return _closed_form_inverse_derivs(chart, z).D1
