import numpy as np
import pytest

from filmreduce.elasticity import MaterialParams
from filmreduce.errors import NonFiniteEnergy
from filmreduce.fields import Grid2D
from filmreduce.geometry import Cylinder, Planar, SphereBand
from filmreduce.harness import refinement_study
from filmreduce.limit_energy import FrozenData, ReducedProblem
from filmreduce.solver import SolveOptions, discrete_ops, fd_gradient_check, minimize

MAT = MaterialParams(2.0, 1.0)


def perturbed_start(grid, rng, base, amp=0.3):
    u = base + amp * rng.standard_normal(grid.shape + (3,))
    u[grid.boundary_mask()] = base[grid.boundary_mask()] if base.ndim == 3 else base
    return u


def test_discrete_ops_exact_on_quadratics():
    grid = Grid2D(9, 11, ((0.0, 2.0), (-1.0, 1.0)))
    ops = discrete_ops(grid, Planar(domain=grid.domain))
    x1, x2 = grid.mesh()
    f = (1 + 2 * x1 - x2 + 0.5 * x1**2 + 3 * x1 * x2 - x2**2)[..., None]
    ap = lambda op: ops.apply(op, f)[..., 0]
    np.testing.assert_allclose(ap(ops.d1), 2 + x1 + 3 * x2, atol=1e-11)
    np.testing.assert_allclose(ap(ops.d2), -1 + 3 * x1 - 2 * x2, atol=1e-11)
    np.testing.assert_allclose(ap(ops.d11), 1.0, atol=1e-10)
    np.testing.assert_allclose(ap(ops.d22), -2.0, atol=1e-10)
    np.testing.assert_allclose(ap(ops.d12), 3.0, atol=1e-10)
    np.testing.assert_allclose(ap(ops.lap), -1.0, atol=1e-10)


def test_chart_laplacian_coefficients():
    sph = SphereBand()
    grid = Grid2D(9, 9, sph.domain)
    x1, x2 = grid.mesh()
    f = (x2**2)[..., None]
    np.testing.assert_allclose(discrete_ops(grid, sph).apply(discrete_ops(grid, sph).lap, f)[..., 0],
                               2 / np.sin(x1) ** 2, rtol=1e-10)
    cyl = Cylinder(radius=2.0)
    ops = discrete_ops(Grid2D(9, 9, cyl.domain), cyl)
    np.testing.assert_allclose(ops.apply(ops.lap, f)[..., 0], 0.5, rtol=1e-10)


def test_planar_solve_recovers_e3(rng):
    grid = Grid2D(33, 33)
    e3 = np.broadcast_to([0.0, 0.0, 1.0], grid.shape + (3,)).copy()
    init = perturbed_start(grid, rng, e3)
    res = minimize(Planar(), FrozenData.identity(Planar(), grid), MAT, np.eye(3), grid, init=init)
    assert res.converged and res.iterations <= 500
    assert np.max(np.abs(res.u - e3)) <= 1e-6
    assert np.all(np.diff(res.energy_history) <= 0)
    assert res.final_el_residual_norm <= 1e-8


def test_cylinder_r1_identity_is_fixed_point_of_solver(rng):
    chart = Cylinder(radius=1.0)
    grid = Grid2D(17, 17, chart.domain)
    frozen = FrozenData.identity(chart, grid)
    a3 = chart.normal(*grid.mesh())
    res = minimize(chart, frozen, MAT, np.eye(3), grid, init=perturbed_start(grid, rng, a3, 0.1))
    assert res.converged
    # discrete minimizer differs from a3 by the O(spacing^2) truncation error
    assert np.max(np.abs(res.u - a3)) < 5e-3


def test_unpreconditioned_descent_decreases_energy(rng):
    grid = Grid2D(9, 9)
    e3 = np.broadcast_to([0.0, 0.0, 1.0], grid.shape + (3,)).copy()
    opts = SolveOptions(preconditioned=False, max_iters=20, initial_step=0.01)
    res = minimize(Planar(), FrozenData.identity(Planar(), grid), MAT, None, grid,
                   init=perturbed_start(grid, rng, e3), opts=opts)
    assert res.energy_history[-1] < res.energy_history[0]
    assert np.all(np.diff(res.energy_history) <= 0)
    assert not res.converged and res.message == "maximum iterations reached"


def test_boundary_values_are_prescribed(rng):
    chart = Cylinder(radius=2.0)
    grid = Grid2D(9, 9, chart.domain)
    A = np.diag([1.0, 1.1, 0.9])
    res = minimize(chart, FrozenData.identity(chart, grid), MAT, A, grid,
                   init=rng.standard_normal(grid.shape + (3,)))
    b = grid.boundary_mask()
    target = np.einsum("ab,...b->...a", A, chart.normal(*grid.mesh()))
    np.testing.assert_array_equal(res.u[b], target[b])


def test_refinement_order():
    rep = refinement_study((17, 33, 65))
    assert rep.order >= 1.8
    assert rep.monotone
    assert all(i <= 500 for i in rep.iterations)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_nonfinite_start_raises():
    grid = Grid2D(9, 9)
    init = np.zeros(grid.shape + (3,))
    init[4, 4] = np.inf
    with pytest.raises(NonFiniteEnergy):
        minimize(Planar(), FrozenData.identity(Planar(), grid), MAT, None, grid, init=init)


def test_options_validation():
    with pytest.raises(ValueError):
        SolveOptions(grad_tol=0)
    with pytest.raises(ValueError):
        SolveOptions(backtrack=1.0)
    with pytest.raises(ValueError):
        SolveOptions.from_config({"tolerance": 1})
    assert SolveOptions.from_config({"max_iters": 3}).max_iters == 3


def test_result_csv_shapes(rng):
    grid = Grid2D(5, 5)
    res = minimize(Planar(), FrozenData.identity(Planar(), grid), MAT, None, grid)
    assert res.iterations == 0 and res.converged
    assert len(res.field_csv().splitlines()) == 1 + 25
    assert res.history_csv().splitlines()[0] == "iteration,energy,grad_norm"


def test_fd_gradient_check_detects_wrong_gradient(rng, monkeypatch):
    grid = Grid2D(9, 9)
    u = rng.standard_normal(grid.shape + (3,))
    frozen = FrozenData.identity(Planar(), grid)
    assert fd_gradient_check(Planar(), frozen, MAT, u, grid) < 1e-6
    exact = ReducedProblem.gradient
    monkeypatch.setattr(ReducedProblem, "gradient", lambda self, v: 1.05 * exact(self, v))
    assert fd_gradient_check(Planar(), frozen, MAT, u, grid) > 1e-2
