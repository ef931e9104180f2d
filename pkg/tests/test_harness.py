import csv
import io
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from filmreduce.elasticity import MaterialParams
from filmreduce.errors import DegenerateFit
from filmreduce.expansion import identity_expansion, random_q0_expansion
from filmreduce.fields import Grid2D, Grid3D
from filmreduce.geometry import Cylinder, Planar
from filmreduce.harness import (
    HSchedule,
    consistency_report,
    gamma_limit_check,
    lift_state,
    loglog_fit,
    manufactured_planar,
    series_fit,
)
from filmreduce.limit_energy import identity_state, random_state
from filmreduce.tensor3 import QuadraticForm3

from conftest import CHARTS

MAT = MaterialParams(1.0, 1.0)
QF = QuadraticForm3.frobenius()


@given(st.floats(-4, 4), st.floats(-5, 5), st.floats(0.2, 0.8), st.integers(3, 8))
@settings(max_examples=60)
def test_loglog_fit_recovers_power_law(p, logc, rho, K):
    hs = 0.5 * rho ** np.arange(K + 1)
    slope, icpt, res = loglog_fit(hs, np.exp(logc) * hs**p)
    assert slope == pytest.approx(p, abs=1e-9)
    assert icpt == pytest.approx(logc, abs=1e-8)
    assert res < 1e-9


def test_loglog_fit_degenerate_and_short():
    with pytest.raises(DegenerateFit):
        loglog_fit([1, 0.5, 0.25, 0.125], [1e-16] * 4)
    with pytest.raises(DegenerateFit):
        loglog_fit([1, 0.5, 0.25, 0.125], [1.0, 0.5, 0.0, 0.1])
    with pytest.raises(ValueError):
        loglog_fit([1, 0.5, 0.25], [1, 2, 3])


def test_schedule():
    s = HSchedule()
    np.testing.assert_allclose(s.values, [1 / 8, 1 / 16, 1 / 32, 1 / 64, 1 / 128, 1 / 256])
    assert np.all(np.diff(s.values) < 0)
    for bad in [dict(h0=0), dict(rho=1.0), dict(K=2)]:
        with pytest.raises(ValueError):
            HSchedule(**{**dict(h0=0.1, rho=0.5, K=5), **bad})
    with pytest.raises(ValueError):
        HSchedule.from_config({"h1": 0.1})


def test_identity_series_is_exact():
    chart = Planar()
    exp = identity_expansion(chart, Grid3D(9, 9, 5))
    rep = series_fit(exp, chart, MAT, QF, HSchedule(), 0)
    assert rep.exact and rep.passed
    assert max(rep.residuals) <= 1e-12
    assert rep.summary()["slope"] is None and rep.summary()["pass"] is True


@pytest.mark.parametrize("violate", ["phi0_3", "phi1_33"])
def test_unconstrained_residual_is_dominated_by_h_minus2(violate):
    # J^-2 is the first omitted coefficient; pre-asymptotic curvature vanishes below h = 1/32
    chart = Planar()
    exp = random_q0_expansion(chart, Grid3D(9, 9, 5), np.random.default_rng(5), violate=violate)
    rep = series_fit(exp, chart, MAT, QF, HSchedule(1 / 32, 0.5, 5), -3)
    assert -2.1 <= rep.slope <= -1.9 and rep.fit_residual < 0.1


def test_q0_series_truncation_order():
    chart = Cylinder(radius=2.0)
    exp = random_q0_expansion(chart, Grid3D(9, 9, 5, chart.domain), np.random.default_rng(2),
                              lead_amplitude=0.5, coherent=True)
    rep = series_fit(exp, chart, MAT, QF, HSchedule(), 0)
    assert rep.passed and rep.slope >= 0.9


def test_lift_state_traces(rng):
    chart = CHARTS["sphere"]
    st = random_state(chart, Grid2D(9, 9, chart.domain), rng, with_w=True)
    exp = lift_state(st, 5)
    np.testing.assert_allclose(exp.terms[0].values[:, :, 2], st.phi0.values)
    np.testing.assert_allclose(exp.terms[1].grad[..., 2][:, :, 0], st.u.values)
    np.testing.assert_allclose(exp.terms[2].hess[..., 2, 2][:, :, 3], st.w.values)
    assert not exp.terms[1].hess[..., 2, 2].any()


def test_identity_limit_is_exact(chart):
    rep = gamma_limit_check(identity_state(chart, Grid2D(9, 9, chart.domain)), chart, MAT, QF, HSchedule())
    assert rep.exact and rep.passed
    assert max(rep.residuals) < 1e-10


def test_limit_parts_converge_separately(rng):
    chart = Planar()
    st = random_state(chart, Grid2D(17, 17), rng)
    rep = gamma_limit_check(st, chart, MAT, QF, HSchedule())
    assert rep.passed
    for key in ("membrane", "second_order"):
        slope, _, res, exact = rep.extra_fits[key]
        assert exact or (slope >= 0.9 and res < 0.1)
    rows = list(csv.DictReader(io.StringIO(rep.to_csv())))
    assert list(rows[0]) == ["h", "J_direct", "J_series_or_limit", "residual",
                             "residual_membrane", "residual_second_order"]
    assert len(rows) == 6
    assert set(json.loads(rep.summary_json())) == {"slope", "intercept", "fit_residual", "pass"}


def test_consistency_report_planar_and_unit_cylinder(rng):
    rep = consistency_report(Planar(), 5, MAT, Grid2D(9, 9), rng)
    assert rep.max_general_printed <= 1e-10 and rep.max_general_derived <= 1e-10
    rep = consistency_report(Cylinder(radius=1.0), 5, MAT, Grid2D(9, 9, Cylinder(radius=1.0).domain), rng)
    assert rep.max_general_printed <= 1e-8
    lines = rep.to_csv().splitlines()
    assert lines[-1].startswith("max,") and len(lines) == 1 + 6 + 1


def test_manufactured_solution_satisfies_continuum_equation():
    from filmreduce.harness import continuum_el_residual_planar
    res = []
    for n in (33, 65):
        grid = Grid2D(n, n)
        frozen, exact = manufactured_planar(grid, MaterialParams(10.0, 1.0))
        res.append(continuum_el_residual_planar(exact, frozen, MaterialParams(10.0, 1.0), grid))
    assert res[1] < res[0] / 10
    with pytest.raises(ValueError):
        manufactured_planar(Grid2D(9, 9), MaterialParams(0.01, 1.0), amplitude=0.5)
