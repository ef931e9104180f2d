import numpy as np
import pytest

from filmreduce.elasticity import MaterialParams
from filmreduce.errors import UnsupportedChart
from filmreduce.fields import Grid2D
from filmreduce.geometry import Cylinder, Planar, SphereBand
from filmreduce.limit_energy import (
    EnergyVariant,
    FrozenData,
    MembraneState,
    ReducedProblem,
    boundary_director,
    el_residual,
    identity_state,
    j0_general,
    j0_specialized,
    random_state,
    reduced_functional,
)
from filmreduce.solver import fd_gradient_check
from filmreduce.tensor3 import QuadraticForm3

from conftest import CHARTS

MAT = MaterialParams(2.0, 1.0)


def test_identity_state_has_zero_limit_energy(chart):
    grid = Grid2D(33, 33, chart.domain)
    st = identity_state(chart, grid)
    assert abs(j0_general(st, chart, MAT)) < 1e-10
    assert abs(j0_specialized(st, chart, MAT, EnergyVariant.DERIVED)) < 1e-10


def test_planar_closed_form_matches_general_for_any_form(rng):
    grid = Grid2D(17, 17)
    qf = QuadraticForm3(rng.uniform(0.1, 3.0, 27))
    for _ in range(5):
        st = random_state(Planar(), grid, rng, with_w=True)
        g = j0_general(st, Planar(), MAT, qf, return_parts=True)
        for variant in EnergyVariant:
            p = j0_specialized(st, Planar(), MAT, variant, qf, return_parts=True)
            assert p.membrane == pytest.approx(g.membrane, rel=1e-12)
            assert p.second_order == pytest.approx(g.second_order, rel=1e-12)


@pytest.mark.parametrize("chart", [Cylinder(radius=2.0), Cylinder(radius=0.7), SphereBand()],
                         ids=["cyl2", "cyl07", "sphere"])
def test_derived_closed_form_matches_general(chart, rng):
    grid = Grid2D(17, 17, chart.domain)
    for _ in range(5):
        st = random_state(chart, grid, rng, amplitude=0.2, with_w=True)
        g = j0_general(st, chart, MAT)
        d = j0_specialized(st, chart, MAT, EnergyVariant.DERIVED)
        assert d == pytest.approx(g, rel=1e-10, abs=1e-12)


@pytest.mark.parametrize("r", [0.5, 1.0, 2.0, 3.0])
def test_printed_cylinder_offset_on_identity(r):
    # |b|^2 = r^2 enters as |b|^2 / r instead of |b|^2 / r^2: every squared
    # membrane term picks up (r - 1)^2, integrated against the measure r
    chart = Cylinder(radius=r)
    grid = Grid2D(17, 17, chart.domain)
    st = identity_state(chart, grid)
    printed = j0_specialized(st, chart, MAT, EnergyVariant.AS_PRINTED)
    expected = (MAT.lam / 4 + MAT.mu / 2) * (r - 1) ** 2 * grid.area() * r
    assert printed - j0_general(st, chart, MAT) == pytest.approx(expected, rel=1e-12, abs=1e-12)


def test_printed_sphere_differs_on_identity():
    chart = SphereBand()
    st = identity_state(chart, Grid2D(17, 17, chart.domain))
    assert j0_specialized(st, chart, MAT, "printed") > 1e-3
    assert abs(j0_specialized(st, chart, MAT, "derived")) < 1e-12


def test_split_parts_sum():
    chart = CHARTS["sphere"]
    st = random_state(chart, Grid2D(9, 9, chart.domain), np.random.default_rng(3), with_w=True)
    s = j0_general(st, chart, MAT, return_parts=True)
    assert s.total == pytest.approx(s.membrane + s.second_order)
    assert s.membrane >= 0 and s.second_order >= 0


def test_curved_closed_forms_need_frobenius():
    qf = QuadraticForm3(np.arange(1.0, 28.0))
    for chart in (CHARTS["cylinder"], CHARTS["sphere"]):
        st = identity_state(chart, Grid2D(9, 9, chart.domain))
        with pytest.raises(UnsupportedChart):
            j0_specialized(st, chart, MAT, qf=qf)


def test_variant_parsing():
    assert EnergyVariant.parse("Printed") is EnergyVariant.AS_PRINTED
    assert EnergyVariant.parse(EnergyVariant.DERIVED) is EnergyVariant.DERIVED
    with pytest.raises(ValueError):
        EnergyVariant.parse("both")


def test_state_grid_mismatch_rejected():
    chart = CHARTS["planar"]
    a = identity_state(chart, Grid2D(9, 9))
    b = identity_state(chart, Grid2D(11, 9))
    with pytest.raises(ValueError):
        MembraneState(a.grid, a.phi0, b.u)


def test_reduced_functional_constant_state_by_hand():
    grid = Grid2D(9, 9)
    s = 1.3
    frozen = FrozenData.constant(grid, (1, 0, 0), (0, 1, 0))
    u = np.broadcast_to([0.0, 0.0, s], grid.shape + (3,))
    expected = (MAT.lam / 4 + MAT.mu / 2) * (s**2 - 1) ** 2
    assert reduced_functional(Planar(), u, frozen, MAT, grid) == pytest.approx(expected, rel=1e-13)


def test_reduced_functional_converges_to_planar_limit(rng):
    # with phi0 frozen, the planar limit energy minus the |hess phi0|^2 term is the reduced functional
    vals = []
    for n in (17, 33, 65):
        grid = Grid2D(n, n)
        st = random_state(Planar(), grid, np.random.default_rng(1))
        red = reduced_functional(Planar(), st.u.values, FrozenData.from_phi0(st.phi0), MAT, grid)
        ref = j0_specialized(st, Planar(), MAT) - grid.integrate(np.sum(st.phi0.hess**2, axis=(-1, -2, -3)))
        vals.append(abs(red - ref))
    assert vals[2] < vals[1] < vals[0]
    assert np.log2(vals[1] / vals[2]) > 1.5


def test_gradient_matches_finite_differences(chart, rng):
    grid = Grid2D(17, 17, chart.domain)
    st = random_state(chart, grid, rng)
    err = fd_gradient_check(chart, FrozenData.from_phi0(st.phi0), MAT, st.u.values, grid, rng=rng)
    assert err <= 1e-6


def test_stiffness_is_hessian_of_gradient_terms(rng):
    chart = CHARTS["cylinder"]
    grid = Grid2D(9, 9, chart.domain)
    prob = ReducedProblem(chart, grid, FrozenData.identity(chart, grid), MaterialParams(1e-9, 1e-9, validate=False))
    u = rng.standard_normal(grid.shape + (3,))
    v = rng.standard_normal(grid.shape + (3,))
    K = prob.stiffness()
    lin = (prob.gradient(u + v) - prob.gradient(u)).reshape(-1, 3)
    # the remaining pointwise part is the linear term p * (p u + q c), plus tiny membrane terms
    pw = 2 * prob.node_w[..., None] * prob.p**2 * v
    np.testing.assert_allclose(lin, K @ v.reshape(-1, 3) + pw.reshape(-1, 3), atol=1e-6)


def test_identity_is_stationary_for_derived_residual():
    chart = Cylinder(radius=1.0)
    res = []
    for n in (17, 33, 65):
        grid = Grid2D(n, n, chart.domain)
        st = identity_state(chart, grid)
        r = el_residual(chart, st.u.values, FrozenData.identity(chart, grid), MAT, grid)
        assert r.boundary_max < 1e-15
        res.append(r.interior_norm)
    assert np.log2(res[0] / res[1]) > 1.8 and np.log2(res[1] / res[2]) > 1.8


def test_planar_printed_residual_vanishes_at_e3():
    grid = Grid2D(17, 17)
    frozen = FrozenData.identity(Planar(), grid)
    u = boundary_director(Planar(), grid, np.eye(3))
    for variant in EnergyVariant:
        r = el_residual(Planar(), u, frozen, MAT, grid, variant=variant)
        assert r.interior_norm < 1e-12


def test_boundary_director_applies_matrix():
    chart = CHARTS["sphere"]
    grid = Grid2D(5, 5, chart.domain)
    A = np.diag([1.0, 2.0, 3.0])
    x1, x2 = grid.mesh()
    np.testing.assert_allclose(boundary_director(chart, grid, A), chart.normal(x1, x2) * [1, 2, 3])
