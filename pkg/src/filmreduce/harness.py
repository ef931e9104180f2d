"""
End-to-end numerical validation.

* ``series_fit``: direct J(h) against the truncated series sum_{n<=N} J^n_h h^n.
* ``gamma_limit_check``: J(h) of a lifted state against the limit energy J^0.
* ``consistency_report``: general, printed and derived limit energies side by side.
* ``refinement_study``: grid-refinement order of the reduced solver on a
  manufactured planar problem with a known smooth minimizer.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from .elasticity import MaterialParams
from .errors import DegenerateFit
from .expansion import DeformationExpansion, term_energies
from .fields import Field3D, Grid2D, Grid3D
from .geometry import Chart, Planar
from .limit_energy import (
    EnergyVariant,
    FrozenData,
    MembraneState,
    identity_state,
    j0_general,
    j0_specialized,
    random_state,
)
from .rescaled_energy import EvalContext, energy_J
from .solver import SolveOptions, minimize
from .tensor3 import QuadraticForm3

__all__ = [
    "HSchedule",
    "FitReport",
    "loglog_fit",
    "series_fit",
    "lift_state",
    "gamma_limit_check",
    "ConsistencyReport",
    "consistency_report",
    "RefinementReport",
    "manufactured_planar",
    "refinement_study",
]

ROUND_OFF = 1e-14
MAX_FIT_RESIDUAL = 0.1


@dataclass(frozen=True)
class HSchedule:
    """Geometric thickness sequence h_k = h0 * rho**k, k = 0..K."""

    h0: float = 1.0 / 8.0
    rho: float = 0.5
    K: int = 5

    def __post_init__(self):
        if not self.h0 > 0:
            raise ValueError("h0 must be positive")
        if not 0.0 < self.rho < 1.0:
            raise ValueError("rho must lie in (0, 1)")
        if self.K < 3:
            raise ValueError("a schedule needs at least 4 thickness values (K >= 3)")

    @property
    def values(self) -> np.ndarray:
        return self.h0 * self.rho ** np.arange(self.K + 1)

    @classmethod
    def from_config(cls, cfg: dict) -> "HSchedule":
        cfg = dict(cfg)
        out = cls(float(cfg.pop("h0", 1 / 8)), float(cfg.pop("rho", 0.5)), int(cfg.pop("K", 5)))
        if cfg:
            raise ValueError(f"unknown schedule keys: {sorted(cfg)}")
        return out


def loglog_fit(hs: Sequence[float], rs: Sequence[float]):
    """Least-squares line through (log h, log r).

    Returns ``(slope, intercept, fit_residual)`` where the residual is the RMS
    deviation in natural-log units. Raises DegenerateFit when all residuals
    sit at round-off level.
    """
    hs = np.asarray(hs, dtype=float)
    rs = np.abs(np.asarray(rs, dtype=float))
    if len(hs) < 4:
        raise ValueError("a slope fit needs at least 4 points")
    if np.all(rs < ROUND_OFF):
        raise DegenerateFit("all residuals are at round-off level")
    if np.any(rs <= 0):
        raise DegenerateFit("some residuals are exactly zero; log-log fit undefined")
    x, y = np.log(hs), np.log(rs)
    slope, intercept = np.polyfit(x, y, 1)
    fit_res = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
    return float(slope), float(intercept), fit_res


@dataclass
class FitReport:
    label: str
    hs: List[float]
    direct: List[float]
    reference: List[float]
    residuals: List[float]
    slope: float
    intercept: float
    fit_residual: float
    min_slope: float
    exact: bool = False
    extra: Dict[str, List[float]] = field(default_factory=dict)
    extra_fits: Dict[str, tuple] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        if self.exact:
            return True
        return self.slope >= self.min_slope and self.fit_residual < MAX_FIT_RESIDUAL

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        extra_keys = list(self.extra)
        wr.writerow(["h", "J_direct", "J_series_or_limit", "residual"] + extra_keys)
        for k, h in enumerate(self.hs):
            row = [h, self.direct[k], self.reference[k], self.residuals[k]]
            row += [self.extra[key][k] for key in extra_keys]
            wr.writerow([f"{v:.17g}" for v in row])
        return buf.getvalue()

    def summary(self) -> dict:
        nan_to_none = lambda v: None if not np.isfinite(v) else v  # noqa: E731
        return {
            "slope": nan_to_none(self.slope),
            "intercept": nan_to_none(self.intercept),
            "fit_residual": nan_to_none(self.fit_residual),
            "pass": bool(self.passed),
        }

    def summary_json(self) -> str:
        return json.dumps(self.summary(), sort_keys=True)


def _fit_or_exact(hs, rs):
    try:
        return (*loglog_fit(hs, rs), False)
    except DegenerateFit:
        return float("nan"), float("nan"), float("nan"), True


# --------------------------------------------------------------------------- series


def series_fit(exp: DeformationExpansion, chart: Chart, mat: MaterialParams,
               qf: QuadraticForm3, sched: HSchedule, N: int) -> FitReport:
    """Truncation error of the energy series against the direct evaluation.

    A residual that is at round-off for every h is reported as exact agreement.
    """
    hs, direct, ref, res = [], [], [], []
    for h in sched.values:
        ctx = EvalContext.build(exp.grid, chart, float(h), mat, qf)
        d = energy_J(exp.evaluate(h), ctx).total
        s = term_energies(exp, ctx, N).series(h)
        hs.append(float(h))
        direct.append(d)
        ref.append(s)
        res.append(abs(d - s))
    slope, icpt, fres, exact = _fit_or_exact(hs, res)
    return FitReport(f"series N={N}", hs, direct, ref, res, slope, icpt, fres, N + 0.9, exact)


# --------------------------------------------------------------------------- limit


def lift_state(state: MembraneState, n3: int = 9) -> DeformationExpansion:
    """phi^0 = phi0, phi^1 = x3 u, phi^2 = x3**2 w / 2: a recovery sequence for the state."""
    g = state.grid
    grid3 = Grid3D(g.n1, g.n2, n3, g.domain)
    t0 = Field3D.from_plane_jets(grid3, [state.phi0])
    t1 = Field3D.from_plane_jets(grid3, [None, state.u])
    t2 = Field3D.from_plane_jets(grid3, [None, None, None if state.w is None else state.w.scale(0.5)])
    return DeformationExpansion([t0, t1, t2])


def gamma_limit_check(state: MembraneState, chart: Chart, mat: MaterialParams, qf: QuadraticForm3,
                      sched: HSchedule, n3: int = 9, min_slope: float = 0.9) -> FitReport:
    """|J(h)(lifted state) - J^0(state)| over the schedule, with membrane and
    second-order parts tracked separately."""
    exp = lift_state(state, n3)
    lim = j0_general(state, chart, mat, qf, return_parts=True)
    hs, direct, ref, res, rI, rK = [], [], [], [], [], []
    for h in sched.values:
        ctx = EvalContext.build(exp.grid, chart, float(h), mat, qf)
        e = energy_J(exp.evaluate(h), ctx)
        hs.append(float(h))
        direct.append(e.total)
        ref.append(lim.total)
        res.append(abs(e.total - lim.total))
        rI.append(abs(e.I - lim.membrane))
        rK.append(abs(e.K - lim.second_order))
    slope, icpt, fres, exact = _fit_or_exact(hs, res)
    rep = FitReport("limit", hs, direct, ref, res, slope, icpt, fres, min_slope, exact,
                    extra={"residual_membrane": rI, "residual_second_order": rK})
    for key, vals in (("membrane", rI), ("second_order", rK)):
        rep.extra_fits[key] = _fit_or_exact(hs, vals)
    return rep


# --------------------------------------------------------------------------- variants


@dataclass
class ConsistencyReport:
    chart: str
    rows: List[tuple]  # (sample, general, printed, derived, |g-p|, |g-d|, |p-d|)

    @property
    def max_general_printed(self) -> float:
        return max(r[4] for r in self.rows)

    @property
    def max_general_derived(self) -> float:
        return max(r[5] for r in self.rows)

    @property
    def max_printed_derived(self) -> float:
        return max(r[6] for r in self.rows)

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["sample", "general", "printed", "derived",
                     "abs_general_printed", "abs_general_derived", "abs_printed_derived"])
        for r in self.rows:
            wr.writerow([r[0]] + [f"{v:.17g}" for v in r[1:]])
        wr.writerow(["max", "", "", "", f"{self.max_general_printed:.17g}",
                     f"{self.max_general_derived:.17g}", f"{self.max_printed_derived:.17g}"])
        return buf.getvalue()


def consistency_report(chart: Chart, n_samples: int, mat: MaterialParams, grid: Grid2D,
                       rng: np.random.Generator, amplitude: float = 0.1, modes: int = 3,
                       include_identity: bool = True) -> ConsistencyReport:
    """General, printed and derived limit energies on random states (w = 0)."""
    states = []
    if include_identity:
        states.append(("identity", identity_state(chart, grid)))
    for k in range(n_samples):
        states.append((str(k), random_state(chart, grid, rng, amplitude, modes)))
    rows = []
    for name, st in states:
        g = j0_general(st, chart, mat)
        p = j0_specialized(st, chart, mat, EnergyVariant.AS_PRINTED)
        d = j0_specialized(st, chart, mat, EnergyVariant.DERIVED)
        rows.append((name, g, p, d, abs(g - p), abs(g - d), abs(p - d)))
    return ConsistencyReport(chart.kind, rows)


# --------------------------------------------------------------------------- solver refinement


def manufactured_planar(grid: Grid2D, mat: MaterialParams, amplitude: float = 0.05):
    """Planar reduced problem whose continuum minimizer is u* = g e3.

    g = 1 + amplitude sin(pi x1) sin(pi x2) equals 1 on the boundary of the
    unit square; the frozen field a = alpha(x) e1 is chosen so that u* solves
    the continuum Euler-Lagrange equation, and b = e2.
    Returns ``(frozen, exact_u)``.
    """
    x1, x2 = grid.mesh()
    s = np.sin(np.pi * x1) * np.sin(np.pi * x2)
    g = 1.0 + amplitude * s
    lap_g = -2.0 * np.pi**2 * amplitude * s
    alpha2 = 2.0 - g**2 + (4.0 * lap_g / g - 2.0 * mat.mu * (g**2 - 1.0)) / mat.lam
    if np.any(alpha2 <= 0):
        raise ValueError("manufactured data needs a larger lambda or a smaller amplitude")
    z = np.zeros_like(x1)
    a = np.stack([np.sqrt(alpha2), z, z], axis=-1)
    b = np.stack([z, 1.0 + z, z], axis=-1)
    frozen = FrozenData(a, b, np.zeros_like(a))
    exact = np.stack([z, z, g], axis=-1)
    return frozen, exact


def _lap4(u: np.ndarray, h1: float, h2: float) -> np.ndarray:
    """Laplacian with the fourth-order five-point stencil per axis, second order next to the boundary."""
    out = np.zeros_like(u)
    for axis, hh in ((0, h1), (1, h2)):
        f = np.moveaxis(u, axis, 0)
        d = np.zeros_like(f)
        d[1:-1] = (f[2:] - 2 * f[1:-1] + f[:-2]) / hh**2
        d[2:-2] = (-f[4:] + 16 * f[3:-1] - 30 * f[2:-2] + 16 * f[1:-3] - f[:-4]) / (12 * hh**2)
        out += np.moveaxis(d, 0, axis)
    return out


def continuum_el_residual_planar(u: np.ndarray, frozen: FrozenData, mat: MaterialParams,
                                 grid: Grid2D) -> float:
    """Weighted L2 norm over interior nodes of the planar Euler-Lagrange operator applied to u."""
    a, b = frozen.a, frozen.b
    uu = np.sum(u * u, axis=-1)
    S = np.sum(a * a, axis=-1) + np.sum(b * b, axis=-1) + uu - 3.0
    r = (mat.lam * S + 2 * mat.mu * (uu - 1.0))[..., None] * u
    r += 2 * mat.mu * (np.sum(u * a, axis=-1)[..., None] * a + np.sum(u * b, axis=-1)[..., None] * b)
    r -= 4.0 * _lap4(u, *grid.spacing)
    inner = ~grid.boundary_mask()
    return float(np.sqrt(np.sum((grid.weights() * np.sum(r * r, axis=-1))[inner])))


@dataclass
class RefinementReport:
    ns: List[int]
    residuals: List[float]
    errors: List[float]
    iterations: List[int]
    order: float
    error_order: float
    monotone: bool


def refinement_study(ns: Sequence[int] = (17, 33, 65), mat: Optional[MaterialParams] = None,
                     opts: Optional[SolveOptions] = None) -> RefinementReport:
    """Solve the manufactured planar problem on nested grids and fit the residual order."""
    mat = MaterialParams(10.0, 1.0) if mat is None else mat
    chart = Planar()
    res, errs, its, mono = [], [], [], True
    for n in ns:
        grid = Grid2D(n, n, chart.domain)
        frozen, exact = manufactured_planar(grid, mat)
        out = minimize(chart, frozen, mat, np.eye(3), grid, opts=opts)
        res.append(continuum_el_residual_planar(out.u, frozen, mat, grid))
        errs.append(float(np.max(np.abs(out.u - exact))))
        its.append(out.iterations)
        mono &= bool(np.all(np.diff(out.energy_history) <= 0))
    spacing = [1.0 / (n - 1) for n in ns]
    order = float(np.polyfit(np.log(spacing), np.log(res), 1)[0])
    err_order = float(np.polyfit(np.log(spacing), np.log(errs), 1)[0])
    return RefinementReport(list(ns), res, errs, its, order, err_order, mono)
