"""
Command-line front end.

    filmreduce <geometry|energy|cascade|solve|validate|crosscheck> --config run.json
               [--out DIR] [--variant printed|derived]

Exit codes: 0 on success, 2 when a validation check fails, 1 on any error.
"""
from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .elasticity import MaterialParams
from .errors import ConfigInvalid, FilmReduceError
from .expansion import (
    BoundaryCondition,
    cascade_constraints,
    identity_expansion,
    random_q0_expansion,
    term_energies,
)
from .fields import Grid2D, Grid3D
from .geometry import Chart, frame, jacobian_coeffs, parse_chart
from .harness import HSchedule, consistency_report, gamma_limit_check, lift_state, series_fit
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

log = logging.getLogger("filmreduce")

COMMANDS = ("geometry", "energy", "cascade", "solve", "validate", "crosscheck")
TOP_KEYS = {
    "chart", "material", "qform", "boundary", "grid", "schedule", "solver", "variant",
    "output_dir", "seed", "state", "series_order", "samples", "tolerance",
}
STATE_KEYS = {"kind", "amplitude", "modes", "lead_amplitude"}
GRID_KEYS = {"n1", "n2", "n3"}


def _fmt(v) -> str:
    return f"{float(v):.17g}"


@dataclass
class RunConfig:
    chart: Chart
    material: MaterialParams
    qform: QuadraticForm3
    boundary: BoundaryCondition
    grid: dict
    schedule: HSchedule
    solver: SolveOptions
    variant: EnergyVariant
    output_dir: str
    seed: int
    state: dict = field(default_factory=dict)
    series_order: int = 0
    samples: int = 10
    tolerance: float = 1e-10

    @property
    def grid2(self) -> Grid2D:
        return Grid2D(self.grid["n1"], self.grid["n2"], self.chart.domain)

    @property
    def grid3(self) -> Grid3D:
        return Grid3D(self.grid["n1"], self.grid["n2"], self.grid["n3"], self.chart.domain)

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)


def _wrap(key, fn, *args):
    try:
        return fn(*args)
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigInvalid(f"{key}: {exc}") from exc


def parse_config(raw: dict) -> RunConfig:
    """Validate a configuration document. Errors name the offending key."""
    if not isinstance(raw, dict):
        raise ConfigInvalid("config: top level must be a JSON object")
    raw = copy.deepcopy(raw)
    unknown = set(raw) - TOP_KEYS
    if unknown:
        raise ConfigInvalid(f"unknown config key(s): {', '.join(sorted(unknown))}")
    chart = _wrap("chart", parse_chart, raw.get("chart", {"kind": "planar"}))
    material = _wrap("material", MaterialParams.from_config, raw.get("material", {}))
    qf = _wrap("qform", QuadraticForm3.parse, raw.get("qform", "frobenius"))
    boundary = _wrap("boundary", BoundaryCondition.from_config,
                     raw.get("boundary", [1, 0, 0, 0, 1, 0, 0, 0, 1]))
    grid = dict(raw.get("grid", {}))
    if set(grid) - GRID_KEYS:
        raise ConfigInvalid(f"grid: unknown key(s) {sorted(set(grid) - GRID_KEYS)}")
    grid = {k: grid.get(k, d) for k, d in (("n1", 17), ("n2", 17), ("n3", 9))}
    for k, v in grid.items():
        if not isinstance(v, int) or v < 5:
            raise ConfigInvalid(f"grid.{k}: must be an integer >= 5, got {v!r}")
    schedule = _wrap("schedule", HSchedule.from_config, raw.get("schedule", {}))
    solver = _wrap("solver", SolveOptions.from_config, raw.get("solver", {}))
    variant = _wrap("variant", EnergyVariant.parse, raw.get("variant", "derived"))
    state = dict(raw.get("state", {}))
    if set(state) - STATE_KEYS:
        raise ConfigInvalid(f"state: unknown key(s) {sorted(set(state) - STATE_KEYS)}")
    if state.get("kind", "random") not in ("identity", "random"):
        raise ConfigInvalid(f"state.kind: must be 'identity' or 'random', got {state['kind']!r}")
    seed = raw.get("seed", 42)
    if not isinstance(seed, int) or seed < 0:
        raise ConfigInvalid(f"seed: must be a nonnegative integer, got {seed!r}")
    order = raw.get("series_order", 0)
    if not isinstance(order, int) or not -4 <= order <= 4:
        raise ConfigInvalid(f"series_order: must be an integer in [-4, 4], got {order!r}")
    samples = raw.get("samples", 10)
    if not isinstance(samples, int) or samples < 1:
        raise ConfigInvalid(f"samples: must be a positive integer, got {samples!r}")
    tol = raw.get("tolerance", 1e-10)
    if not isinstance(tol, (int, float)) or not tol > 0:
        raise ConfigInvalid(f"tolerance: must be positive, got {tol!r}")
    return RunConfig(chart, material, qf, boundary, grid, schedule, solver, variant,
                     str(raw.get("output_dir", "out")), seed, state, order, samples, float(tol))


# --------------------------------------------------------------------------- helpers


def _state(cfg: RunConfig, default_kind: str) -> MembraneState:
    kind = cfg.state.get("kind", default_kind)
    if kind == "identity":
        return identity_state(cfg.chart, cfg.grid2)
    return random_state(cfg.chart, cfg.grid2, cfg.rng(), float(cfg.state.get("amplitude", 0.1)),
                        int(cfg.state.get("modes", 3)))


def _expansion(cfg: RunConfig, default_kind: str, coherent: bool = False):
    kind = cfg.state.get("kind", default_kind)
    if kind == "identity":
        return identity_expansion(cfg.chart, cfg.grid3, cfg.boundary)
    lead = cfg.state.get("lead_amplitude", 0.5 if coherent else None)
    return random_q0_expansion(cfg.chart, cfg.grid3, cfg.rng(),
                               float(cfg.state.get("amplitude", 0.1)),
                               int(cfg.state.get("modes", 3)),
                               lead_amplitude=lead, coherent=coherent)


def _write(out: Path, name: str, text: str) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / name).write_text(text)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(header)
    for r in rows:
        wr.writerow(r)
    return buf.getvalue()


# --------------------------------------------------------------------------- commands


def cmd_geometry(cfg: RunConfig, out: Path) -> int:
    """Frames and Jacobian coefficients; c1 and c2 are given per unit x3 and x3**2."""
    g = cfg.grid2
    x1, x2 = g.mesh()
    fr = frame(cfg.chart, x1, x2)
    jc = jacobian_coeffs(cfg.chart, x1, x2, np.ones_like(x1))
    header = ["x1", "x2", "c0", "c1", "c2", "detA"]
    header += [f"a{k}_{c}" for k in (1, 2, 3) for c in (1, 2, 3)]
    rows = []
    for i in range(g.n1):
        for j in range(g.n2):
            vals = [x1[i, j], x2[i, j], jc.c0[i, j], jc.c1[i, j], jc.c2[i, j], fr.detA[i, j]]
            vals += list(fr.a1[i, j]) + list(fr.a2[i, j]) + list(fr.a3[i, j])
            rows.append([_fmt(v) for v in vals])
    _write(out, "geometry.csv", _csv(header, rows))
    print(f"geometry: {len(rows)} nodes, c0 in [{jc.c0.min():.6g}, {jc.c0.max():.6g}]")
    return 0


def cmd_energy(cfg: RunConfig, out: Path) -> int:
    st = _state(cfg, "random")
    exp = lift_state(st, cfg.grid["n3"])
    rows = []
    for h in cfg.schedule.values:
        ctx = EvalContext.build(exp.grid, cfg.chart, float(h), cfg.material, cfg.qform)
        e = energy_J(exp.evaluate(h), ctx)
        rows.append([_fmt(h), _fmt(e.I), _fmt(e.K), _fmt(e.total)])
    _write(out, "energy_J.csv", _csv(["h", "I", "K", "total"], rows))
    gen = j0_general(st, cfg.chart, cfg.material, cfg.qform, return_parts=True)
    brk = [[cfg.chart.kind, "general", _fmt(gen.membrane), _fmt(gen.second_order), _fmt(gen.total)]]
    try:
        closed = j0_specialized(st, cfg.chart, cfg.material, cfg.variant, cfg.qform, return_parts=True)
        brk.append([cfg.chart.kind, cfg.variant.value, _fmt(closed.membrane),
                    _fmt(closed.second_order), _fmt(closed.total)])
    except FilmReduceError as exc:
        log.warning("no closed form: %s", exc)
    _write(out, "energy_breakdown.csv",
           _csv(["chart", "variant", "membrane", "second_order", "total"], brk))
    print(f"energy: J0 = {gen.total:.12g}")
    return 0


def cmd_cascade(cfg: RunConfig, out: Path) -> int:
    exp = _expansion(cfg, "random")
    h = float(cfg.schedule.h0)
    rep = cascade_constraints(exp, cfg.boundary, cfg.chart, h, cfg.tolerance)
    _write(out, "constraints.csv", rep.to_csv())
    ctx = EvalContext.build(exp.grid, cfg.chart, h, cfg.material, cfg.qform)
    te = term_energies(exp, ctx, cfg.series_order)
    _write(out, "term_energies.csv", _csv(
        ["n", "J", "I", "K"],
        [[n, _fmt(v), _fmt(i), _fmt(k)] for n, v, i, k in zip(te.orders, te.values, te.I_parts, te.K_parts)],
    ))
    scale = 1.0 + abs(te[0]) if 0 in te.orders else 1.0
    cancel = all(abs(te[n]) <= cfg.tolerance * scale for n in (-4, -3, -2, -1))
    print(rep.summary())
    print(f"cancellation of orders -4..-1: {'PASS' if cancel else 'FAIL'}")
    return 0 if (rep.passed and cancel) else 2


def cmd_solve(cfg: RunConfig, out: Path) -> int:
    st = _state(cfg, "identity")
    frozen = FrozenData.from_phi0(st.phi0)
    res = minimize(cfg.chart, frozen, cfg.material, cfg.boundary.Atilde, cfg.grid2, opts=cfg.solver)
    _write(out, "solve_history.csv", res.history_csv())
    _write(out, "solve_field.csv", res.field_csv())
    summary = {
        "converged": bool(res.converged),
        "iterations": int(res.iterations),
        "final_energy": float(res.energy_history[-1]),
        "final_grad_norm": float(res.final_grad_norm),
        "final_el_residual_norm": float(res.final_el_residual_norm),
        "message": res.message,
    }
    _write(out, "solve_summary.json", json.dumps(summary, sort_keys=True, indent=2) + "\n")
    print(f"solve: {res.message} after {res.iterations} iterations, "
          f"residual {res.final_el_residual_norm:.3e}")
    return 0 if res.converged else 2


def cmd_validate(cfg: RunConfig, out: Path) -> int:
    exp = _expansion(cfg, "random", coherent=True)
    sf = series_fit(exp, cfg.chart, cfg.material, cfg.qform, cfg.schedule, cfg.series_order)
    _write(out, "series.csv", sf.to_csv())
    _write(out, "series_summary.json", sf.summary_json() + "\n")
    st = _state(cfg, "random")
    gl = gamma_limit_check(st, cfg.chart, cfg.material, cfg.qform, cfg.schedule, cfg.grid["n3"])
    _write(out, "limit.csv", gl.to_csv())
    _write(out, "limit_summary.json", gl.summary_json() + "\n")
    ok = sf.passed and gl.passed
    summary = {"series": sf.summary(), "limit": gl.summary(), "pass": bool(ok)}
    _write(out, "summary.json", json.dumps(summary, sort_keys=True, indent=2) + "\n")
    print(f"series fit: slope {sf.slope:.4g}, residual {sf.fit_residual:.3g}, "
          f"{'PASS' if sf.passed else 'FAIL'}")
    print(f"limit fit:  slope {gl.slope:.4g}, residual {gl.fit_residual:.3g}, "
          f"{'PASS' if gl.passed else 'FAIL'}")
    return 0 if ok else 2


def cmd_crosscheck(cfg: RunConfig, out: Path) -> int:
    rep = consistency_report(cfg.chart, cfg.samples, cfg.material, cfg.grid2, cfg.rng(),
                             float(cfg.state.get("amplitude", 0.1)), int(cfg.state.get("modes", 3)))
    _write(out, "crosscheck.csv", rep.to_csv())
    print(f"crosscheck {rep.chart}: max |general - printed| = {rep.max_general_printed:.3e}, "
          f"max |general - derived| = {rep.max_general_derived:.3e}")
    return 0


HANDLERS = {
    "geometry": cmd_geometry,
    "energy": cmd_energy,
    "cascade": cmd_cascade,
    "solve": cmd_solve,
    "validate": cmd_validate,
    "crosscheck": cmd_crosscheck,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="filmreduce", description=__doc__.strip().splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="path to a JSON run configuration")
    p.add_argument("--out", default=None, help="output directory (overrides output_dir)")
    p.add_argument("--variant", choices=("printed", "derived"), default=None,
                   help="closed-form variant (overrides the config)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def run(command: str, cfg: RunConfig, out: Optional[Path] = None) -> int:
    return HANDLERS[command](cfg, Path(cfg.output_dir) if out is None else Path(out))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        try:
            raw = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigInvalid(f"config: cannot read {args.config}: {exc}") from exc
        cfg = parse_config(raw)
        if args.variant is not None:
            cfg.variant = EnergyVariant.parse(args.variant)
        return run(args.command, cfg, None if args.out is None else Path(args.out))
    except FilmReduceError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
