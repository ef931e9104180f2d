"""
Formal expansion of the rescaled energy in powers of h.

For a truncated series phi(h) = sum_n h**n phi^n the strain and the
second-derivative tensor expand as

    E = sum_{n >= -2} h**n E^n,      P = sum_{n >= -2} h**n d^n,

and, with det grad Psi = c0 + h c1 + h**2 c2, the energy expands as
J(h) = sum_n h**n J^n_h. Every coefficient here is built from the same nodal
jets and quadrature as ``energy_J``, so the finite series reproduces the
direct evaluation up to round-off.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from .elasticity import elasticity_contract
from .fields import (
    ChartNormal,
    ChartPsi,
    Field3D,
    Grid3D,
    LinearMap,
    SurfaceField,
    TrigField,
)
from .geometry import Chart, fattening_map
from .rescaled_energy import EvalContext
from .tensor3 import bform, qform

__all__ = [
    "DeformationExpansion",
    "BoundaryCondition",
    "ExpansionCoeffs",
    "TermEnergies",
    "ConstraintReport",
    "expansion_coeffs",
    "term_energies",
    "j_minus4_closed_form",
    "j_minus2_closed_form",
    "cascade_constraints",
    "identity_expansion",
    "random_q0_expansion",
]


@dataclass(frozen=True)
class BoundaryCondition:
    """Affine boundary data: the film is clamped to x -> Atilde @ x on its lateral boundary."""

    Atilde: np.ndarray = field(default_factory=lambda: np.eye(3))

    def __post_init__(self):
        A = np.array(self.Atilde, dtype=float)
        if A.size != 9:
            raise ValueError(f"boundary matrix needs 9 entries, got {A.size}")
        A = A.reshape(3, 3)
        if not np.all(np.isfinite(A)):
            raise ValueError("boundary matrix must be finite")
        A.setflags(write=False)
        object.__setattr__(self, "Atilde", A)

    @classmethod
    def from_config(cls, values) -> "BoundaryCondition":
        return cls(np.asarray(values, dtype=float))

    def to_config(self):
        return [float(v) for v in self.Atilde.ravel()]


@dataclass
class DeformationExpansion:
    """Terms phi^0 ... phi^N of a truncated series, all on one grid."""

    terms: List[Field3D]

    def __post_init__(self):
        if len(self.terms) < 3:
            raise ValueError("an expansion needs at least the terms phi^0, phi^1, phi^2")
        g = self.terms[0].grid
        if any(t.grid != g for t in self.terms):
            raise ValueError("all expansion terms must share one grid")

    @property
    def order(self) -> int:
        return len(self.terms) - 1

    @property
    def grid(self) -> Grid3D:
        return self.terms[0].grid

    def term(self, n: int) -> Optional[Field3D]:
        return self.terms[n] if 0 <= n <= self.order else None

    def evaluate(self, h: float) -> Field3D:
        """The deformation sum_n h**n phi^n."""
        out = self.terms[0]
        for n in range(1, self.order + 1):
            out = out + self.terms[n].scale(h**n)
        return out


@dataclass
class ExpansionCoeffs:
    """Nodal series coefficients. Dicts are keyed by the power of h."""

    H: Dict[int, np.ndarray]
    A: Dict[int, np.ndarray]
    B: Dict[int, np.ndarray]
    C: Dict[int, np.ndarray]
    E: Dict[int, np.ndarray]
    xi: Dict[int, np.ndarray]
    gamma: Dict[int, np.ndarray]
    zeta: Dict[int, np.ndarray]
    d: Dict[int, np.ndarray]

    def E_at(self, n: int) -> Optional[np.ndarray]:
        return self.E.get(n)

    def d_at(self, n: int) -> Optional[np.ndarray]:
        return self.d.get(n)


def expansion_coeffs(exp: DeformationExpansion, ctx: EvalContext) -> ExpansionCoeffs:
    """Strain and second-derivative coefficients at every node of the context grid.

    The derivatives of Psi^-1 are taken from the context, i.e. at offset
    h*x3 (or at 0 for a context built with ``at_zero=True``).
    """
    D1, D2 = ctx.D1, ctx.D2
    N = exp.order
    grads = [t.grad for t in exp.terms]
    hess = [t.hess for t in exp.terms]
    shape = grads[0].shape[:-2]

    H = {}
    for n in range(0, 2 * N + 1):
        acc = np.zeros(shape + (3, 3))
        for p in range(max(0, n - N), min(n, N) + 1):
            acc += np.einsum("...lm,...ln->...mn", grads[p], grads[n - p])
        H[n] = acc

    Dp = D1[..., :2, :]  # rows alpha
    v = D1[..., 2, :]  # row 3
    A, B, C = {}, {}, {}
    for n, Hn in H.items():
        A[n] = np.einsum("...ai,...bj,...ab->...ij", Dp, Dp, Hn[..., :2, :2])
        mix = np.einsum("...i,...aj,...a->...ij", v, Dp, Hn[..., 2, :2])
        B[n] = mix + np.swapaxes(mix, -1, -2)
        C[n] = np.einsum("...i,...j->...ij", v, v) * Hn[..., 2, 2][..., None, None]

    zero2 = np.zeros(shape + (3, 3))
    eye = np.eye(3)
    E = {}
    for n in range(-2, 2 * N + 1):
        e = A.get(n, zero2) + B.get(n + 1, zero2) + C.get(n + 2, zero2)
        if n == 0:
            e = e - eye
        E[n] = 0.5 * e

    xi, gamma, zeta = {}, {}, {}
    D2p = D2[..., :2, :, :]
    D23 = D2[..., 2, :, :]
    for p in range(N + 1):
        g, hs = grads[p], hess[p]
        xi[p] = np.einsum("...lab,...ai,...bj->...lij", hs[..., :2, :2], Dp, Dp) + np.einsum(
            "...la,...aij->...lij", g[..., :2], D2p
        )
        m = np.einsum("...la,...i,...aj->...lij", hs[..., :2, 2], v, Dp)
        gamma[p] = m + np.swapaxes(m, -1, -2) + g[..., 2][..., None, None] * D23[..., None, :, :]
        zeta[p] = hs[..., 2, 2][..., None, None] * np.einsum("...i,...j->...ij", v, v)[..., None, :, :]

    zero3 = np.zeros(shape + (3, 3, 3))
    d = {}
    for n in range(-2, N + 1):
        d[n] = xi.get(n, zero3) + gamma.get(n + 1, zero3) + zeta.get(n + 2, zero3)

    return ExpansionCoeffs(H, A, B, C, E, xi, gamma, zeta, d)


@dataclass
class TermEnergies:
    """J^n_h for n = -4 ... N with their elastic (C) and second-order (Q) parts."""

    orders: List[int]
    values: List[float]
    I_parts: List[float]
    K_parts: List[float]
    truncated: bool
    max_order: int

    def __getitem__(self, n: int) -> float:
        return self.values[self.orders.index(n)]

    def as_dict(self) -> Dict[int, float]:
        return dict(zip(self.orders, self.values))

    def series(self, h: float) -> float:
        return float(sum(v * h**n for n, v in zip(self.orders, self.values)))


def term_energies(exp: DeformationExpansion, ctx: EvalContext, N: int,
                  coeffs: Optional[ExpansionCoeffs] = None) -> TermEnergies:
    """Coefficients J^n_h of the energy series for n = -4 ... N.

    Terms phi^k with k beyond the expansion order count as zero. ``truncated``
    is set when some requested J^n would need such a term.
    """
    if coeffs is None:
        coeffs = expansion_coeffs(exp, ctx)
    w = ctx.grid.weights()
    cs = (ctx.c0, ctx.c1, ctx.c2)
    cache_I: Dict[tuple, np.ndarray] = {}
    cache_K: Dict[tuple, np.ndarray] = {}

    def pair(a, b):
        key = (min(a, b), max(a, b))
        if key not in cache_I:
            Ea, Eb = coeffs.E.get(a), coeffs.E.get(b)
            da, db = coeffs.d.get(a), coeffs.d.get(b)
            cache_I[key] = 0.0 if Ea is None or Eb is None else elasticity_contract(Ea, Eb, ctx.mat)
            cache_K[key] = 0.0 if da is None or db is None else bform(ctx.qform, da, db)
        return cache_I[key], cache_K[key]

    orders, values, Is, Ks = [], [], [], []
    for n in range(-4, N + 1):
        I_n = 0.0
        K_n = 0.0
        for k in range(3):
            m = n - k
            for a in range(-2, m + 3):
                b = m - a
                if b < -2:
                    continue
                ia, ka = pair(a, b)
                I_n += float(np.sum(w * ia * cs[k]))
                K_n += float(np.sum(w * ka * cs[k]))
        orders.append(n)
        Is.append(I_n)
        Ks.append(K_n)
        values.append(I_n + K_n)
    return TermEnergies(orders, values, Is, Ks, truncated=(N + 4 > exp.order), max_order=N)


def j_minus4_closed_form(exp: DeformationExpansion, ctx: EvalContext) -> float:
    """Leading coefficient written out: only phi^0,3 and phi^0,33 contribute."""
    phi0 = exp.terms[0]
    v = ctx.D1[..., 2, :]
    p3 = phi0.grad[..., 2]
    p33 = phi0.hess[..., 2, 2]
    t = np.einsum("...l,...i,...j->...lij", p33, v, v)
    vv = np.sum(v * v, axis=-1)
    membrane = 0.25 * (ctx.mat.lam + 2 * ctx.mat.mu) * np.sum(p3 * p3, axis=-1) ** 2 * vv**2
    return float(np.sum(ctx.grid.weights() * ctx.c0 * (qform(ctx.qform, t) + membrane)))


def j_minus2_closed_form(exp: DeformationExpansion, ctx: EvalContext) -> float:
    """J^-2 on expansions with phi^0,3 = 0: only phi^1,33 survives."""
    v = ctx.D1[..., 2, :]
    p33 = exp.terms[1].hess[..., 2, 2]
    t = np.einsum("...l,...i,...j->...lij", p33, v, v)
    return float(np.sum(ctx.grid.weights() * ctx.c0 * qform(ctx.qform, t)))


# --------------------------------------------------------------------------- constraints


@dataclass
class ConstraintReport:
    rows: List[tuple]  # (quantity, value, tolerance, passed)

    @property
    def passed(self) -> bool:
        return all(r[3] for r in self.rows)

    def value(self, name: str) -> float:
        for r in self.rows:
            if r[0] == name:
                return r[1]
        raise KeyError(name)

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["quantity", "value", "tolerance", "pass"])
        for name, val, tol, ok in self.rows:
            wr.writerow([name, f"{val:.17g}", f"{tol:.17g}", "true" if ok else "false"])
        return buf.getvalue()

    def summary(self) -> str:
        failed = [r[0] for r in self.rows if not r[3]]
        if not failed:
            return f"constraints: PASS ({len(self.rows)} checks)"
        return f"constraints: FAIL ({', '.join(failed)})"


def cascade_constraints(exp: DeformationExpansion, bc: BoundaryCondition, chart: Chart,
                        h: float, tol: float = 1e-10) -> ConstraintReport:
    """Check the constraints that make J^-4 ... J^-1 vanish, plus the boundary traces."""
    grid = exp.grid
    A = bc.Atilde
    phi0, phi1 = exp.terms[0], exp.terms[1]
    rows = []

    def add(name, val):
        val = float(val)
        rows.append((name, val, tol, bool(val <= tol)))

    add("max_abs_phi0_3", np.max(np.abs(phi0.grad[..., 2])))
    add("max_abs_phi1_33", np.max(np.abs(phi1.hess[..., 2, 2])))

    x1, x2, x3 = grid.mesh()
    mask = np.broadcast_to(grid.plane.boundary_mask()[:, :, None], grid.shape)
    psi = np.einsum("ab,...b->...a", A, chart.psi(x1, x2))
    a3 = np.einsum("ab,...b->...a", A, chart.normal(x1, x2))

    def bmax(arr):
        return np.max(np.linalg.norm(arr, axis=-1)[mask])

    add("boundary_phi0", bmax(phi0.values - psi))
    add("boundary_phi1", bmax(phi1.values - x3[..., None] * a3))
    for n in range(2, exp.order + 1):
        add(f"boundary_phi{n}", bmax(exp.terms[n].values))
    target, _, _ = fattening_map(chart, x1, x2, h * x3)
    target = np.einsum("ab,...b->...a", A, target)
    add("boundary_series", bmax(exp.evaluate(h).values - target))
    return ConstraintReport(rows)


# --------------------------------------------------------------------------- constructors


def identity_expansion(chart: Chart, grid: Grid3D, bc: Optional[BoundaryCondition] = None,
                       order: int = 2) -> DeformationExpansion:
    """phi^0 = A psi, phi^1 = x3 A a3, higher terms zero: the series of A Psi(x1, x2, h x3)."""
    A = np.eye(3) if bc is None else bc.Atilde
    t0 = Field3D.from_surface_terms(grid, [LinearMap(A, ChartPsi(chart))])
    t1 = Field3D.from_surface_terms(grid, [None, LinearMap(A, ChartNormal(chart))])
    rest = [Field3D.zeros(grid) for _ in range(order - 1)]
    return DeformationExpansion([t0, t1] + rest)


def random_q0_expansion(chart: Chart, grid: Grid3D, rng: np.random.Generator,
                        amplitude: float = 0.1, modes: int = 3,
                        violate: Optional[str] = None, lead_amplitude: Optional[float] = None,
                        coherent: bool = False) -> DeformationExpansion:
    """Random smooth expansion of order 2 built to satisfy phi^0,3 = 0 and phi^1,33 = 0.

    phi^0 = psi + T0, phi^1 = T1 + x3 (a3 + T1'), phi^2 = T2 + x3 T2' + x3**2 T2''
    with random trigonometric fields T. ``lead_amplitude`` sets the size of T0.
    With ``coherent=True`` the x3-independent part of phi^1 is T0 itself, so the
    order-one energy coefficient is a sum of squares rather than a random-sign
    cross term.

    ``violate="phi0_3"`` adds an x3-linear part to phi^0; ``violate="phi1_33"``
    adds an x3-quadratic part to phi^1.
    """

    def trig(a=amplitude) -> SurfaceField:
        return TrigField.random(rng, a, modes)

    psi, a3 = ChartPsi(chart), ChartNormal(chart)
    t0 = trig(amplitude if lead_amplitude is None else lead_amplitude)
    t0_terms: List[Optional[SurfaceField]] = [psi + t0]
    t1_terms: List[Optional[SurfaceField]] = [t0 if coherent else trig(), a3 + trig()]
    if violate == "phi0_3":
        t0_terms.append(trig())
    elif violate == "phi1_33":
        t1_terms.append(trig())
    elif violate is not None:
        raise ValueError(f"unknown constraint {violate!r}")
    t2_terms = [trig(), trig(), trig()]
    return DeformationExpansion([
        Field3D.from_surface_terms(grid, t0_terms),
        Field3D.from_surface_terms(grid, t1_terms),
        Field3D.from_surface_terms(grid, t2_terms),
    ])
