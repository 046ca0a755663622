import numpy as np
import pytest

from contactopt import elasticity, forward, geometry, mortar, sensitivity
from contactopt.errors import DegeneracyError

import fixtures


def _spring_solution(k, f, d):
    problem = fixtures.spring_problem(k, f, d)
    return problem, forward.solve_forward(problem)


def test_spring_wall_active_derivative():
    # wall position is the design: on the active branch u follows the wall
    # one-for-one and the multiplier sheds k per unit of extra gap
    k, f, d = 3.0, 10.0, 1.0
    problem, sol = _spring_solution(k, f, d)
    du, dlam = sensitivity.solve_sensitivity(problem, sol, fixtures.spring_wall_derivs())
    assert du[0, 0] == pytest.approx(1.0, abs=1e-10)
    assert dlam[0, 0] == pytest.approx(-k, abs=1e-10)


def test_spring_wall_inactive_derivative():
    k, f, d = 3.0, 1.0, 1.0
    problem, sol = _spring_solution(k, f, d)
    du, dlam = sensitivity.solve_sensitivity(problem, sol, fixtures.spring_wall_derivs())
    assert du[0, 0] == pytest.approx(0.0, abs=1e-12)
    assert dlam[0, 0] == pytest.approx(0.0, abs=1e-12)


def test_spring_wall_grid():
    # sweep stiffness, load and wall position; the grids keep every
    # combination a safe distance from the grazing line f = k d
    ks = np.linspace(0.5, 5.0, 10)
    fs = np.linspace(0.21, 8.01, 10)
    ds = np.linspace(0.31, 1.97, 10)
    margins = np.array([f - k * d for k in ks for f in fs for d in ds])
    assert np.min(np.abs(margins)) > 1e-4
    checked = 0
    for k in ks:
        for f in fs:
            for d in ds:
                margin = f - k * d
                problem, sol = _spring_solution(k, f, d)
                du, dlam = sensitivity.solve_sensitivity(
                    problem, sol, fixtures.spring_wall_derivs()
                )
                if margin > 0.0:
                    assert abs(du[0, 0] - 1.0) <= 1e-10
                    assert abs(dlam[0, 0] + k) <= 1e-10
                else:
                    assert abs(du[0, 0]) <= 1e-10
                    assert abs(dlam[0, 0]) <= 1e-10
                checked += 1
    assert checked == 1000


def test_grazing_contact_raises_degeneracy():
    # f = k d puts the contact exactly at the kink: derivative is set-valued
    k, d = 2.0, 1.0
    problem, sol = _spring_solution(k, k * d, d)
    with pytest.raises(DegeneracyError) as exc:
        sensitivity.solve_sensitivity(problem, sol, fixtures.spring_wall_derivs())
    assert exc.value.indices == (0,)


def test_all_inactive_reduces_to_linear_solve():
    problem, sol = _spring_solution(2.0, 1.0, 1.0)
    derivs = sensitivity.DesignDerivs(
        dk_u=np.zeros((1, 1)),
        df=np.array([[0.7]]),
        dg0=np.zeros((1, 1)),
        dgt_lam=np.zeros((1, 1)),
        dg_u=np.zeros((1, 1)),
    )
    du, dlam = sensitivity.solve_sensitivity(problem, sol, derivs)
    assert du[0, 0] == pytest.approx(0.7 / 2.0, abs=1e-12)
    assert np.all(dlam == 0.0)


def _wedge_builder(rho):
    mesh = geometry.build_wedge_mesh(float(rho[0]), float(rho[1]))
    md = mortar.build_mortar(mesh)
    sysm = elasticity.assemble(
        mesh,
        elasticity.Material(200.0, 0.3),
        [
            elasticity.Traction("p1_face", "pressure", float(rho[2])),
            elasticity.Traction("p2_face", "pressure", 2.0),
        ],
    )
    return [forward.ForwardProblem.from_parts(sysm, md)]


def test_wedge_sensitivity_matches_finite_differences():
    rho = np.array([39.0, 41.0, 1.0])
    (problem,) = _wedge_builder(rho)
    sol = forward.solve_forward(problem)
    (bundle,) = sensitivity.design_derivative_bundle(
        _wedge_builder, rho, [(sol.u, sol.lam)]
    )
    du, dlam = sensitivity.solve_sensitivity(problem, sol, bundle)
    h = 1e-5
    for i in range(3):
        dr = np.zeros(3)
        dr[i] = h * (1.0 + abs(rho[i]))
        (pp,) = _wedge_builder(rho + dr)
        (pm,) = _wedge_builder(rho - dr)
        sp = forward.solve_forward(pp)
        sm = forward.solve_forward(pm)
        fd_u = (sp.u - sm.u) / (2.0 * dr[i])
        fd_lam = (sp.lam - sm.lam) / (2.0 * dr[i])
        scale_u = max(1.0, float(np.max(np.abs(fd_u))))
        scale_lam = max(1.0, float(np.max(np.abs(fd_lam))))
        assert np.max(np.abs(du[:, i] - fd_u)) <= 1e-4 * scale_u
        assert np.max(np.abs(dlam[:, i] - fd_lam)) <= 1e-4 * scale_lam


def test_active_rows_keep_zero_gap_to_first_order():
    rho = np.array([39.0, 41.0, 1.0])
    (problem,) = _wedge_builder(rho)
    sol = forward.solve_forward(problem)
    (bundle,) = sensitivity.design_derivative_bundle(
        _wedge_builder, rho, [(sol.u, sol.lam)]
    )
    du, dlam = sensitivity.solve_sensitivity(problem, sol, bundle)
    active = sensitivity.strict_active_set(
        sol,
        scale_gap=float(np.max(sol.gaps[np.asarray(problem.weights) > 0.0])),
    )
    # total gap derivative on strongly active rows must vanish
    total = problem.g @ du + (bundle.dg0 + bundle.dg_u)
    scale = max(1.0, float(np.max(np.abs(total))))
    assert np.max(np.abs(total[active])) <= 1e-9 * scale
    # inactive multiplier rows stay exactly zero
    assert np.all(dlam[~active] == 0.0)


def test_strict_active_set_masks():
    problem, sol = _spring_solution(2.0, 10.0, 1.0)
    mask = sensitivity.strict_active_set(sol)
    assert mask.tolist() == [True]
    problem, sol = _spring_solution(2.0, 1.0, 1.0)
    mask = sensitivity.strict_active_set(sol)
    assert mask.tolist() == [False]
