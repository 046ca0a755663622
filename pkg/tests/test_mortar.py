import numpy as np
import pytest

from contactopt import forward, geometry, mortar
from contactopt.errors import DomainError

import fixtures


def _upper_body_dofs(mesh):
    # the stacked patch mesh lists lower-body nodes first
    n_lower = 0
    while mesh.coords[n_lower, 1] <= 0.5 + 1e-12:
        n_lower += 1
    return np.arange(n_lower, mesh.n_nodes)


def test_coincident_chains_zero_gap():
    mesh = fixtures.stacked_patch_mesh(gap=0.0)
    md = mortar.build_mortar(mesh)
    assert md.m == 8
    assert np.max(np.abs(md.g0)) <= 1e-12


def test_separation_gap_scales_with_row_weight():
    delta = 0.05
    mesh = fixtures.stacked_patch_mesh(gap=delta)
    md = mortar.build_mortar(mesh)
    assert np.all(md.weights > 0.0)
    assert np.max(np.abs(md.g0 - delta * md.weights)) <= 1e-12


def test_overlap_gap_is_negative():
    delta = 0.02
    mesh = fixtures.stacked_patch_mesh(gap=-delta)
    md = mortar.build_mortar(mesh)
    assert np.max(np.abs(md.g0 + delta * md.weights)) <= 1e-12
    assert np.all(md.g0 < 0.0)


def test_gap_at_zero_displacement_is_reference():
    mesh = fixtures.stacked_patch_mesh(gap=0.01)
    md = mortar.build_mortar(mesh)
    assert np.array_equal(mortar.gap(md, np.zeros(2 * mesh.n_nodes)), md.g0)


def test_rigid_normal_motion_closes_gap():
    delta = 0.03
    t = 0.01
    mesh = fixtures.stacked_patch_mesh(gap=delta)
    md = mortar.build_mortar(mesh)
    u = np.zeros(2 * mesh.n_nodes)
    u[2 * _upper_body_dofs(mesh) + 1] = -t
    g = mortar.gap(md, u)
    assert np.max(np.abs(g - (delta - t) * md.weights)) <= 1e-12


def test_rigid_tangential_motion_keeps_gap():
    mesh = fixtures.stacked_patch_mesh(gap=0.03)
    md = mortar.build_mortar(mesh)
    u = np.zeros(2 * mesh.n_nodes)
    u[2 * _upper_body_dofs(mesh)] = 0.07
    assert np.max(np.abs(mortar.gap(md, u) - md.g0)) <= 1e-12


def test_gap_gradient_matches_fd():
    mesh = fixtures.stacked_patch_mesh(gap=0.01)
    md = mortar.build_mortar(mesh)
    rng = np.random.default_rng(5)
    u = 0.01 * rng.standard_normal(2 * mesh.n_nodes)
    h = 1e-6
    for j in rng.choice(u.size, size=8, replace=False):
        e = np.zeros(u.size)
        e[j] = h
        fd = (mortar.gap(md, u + e) - mortar.gap(md, u - e)) / (2 * h)
        assert np.max(np.abs(fd - md.g[:, j])) <= 1e-10


def test_nodal_pressure_identity_and_zero_rows():
    md = mortar.MortarData(
        g=np.zeros((2, 4)),
        g0=np.zeros(2),
        weights=np.array([1.0, 0.0]),
        nodes=np.array([0, 1]),
        normals=np.array([[0.0, 1.0], [0.0, 1.0]]),
    )
    lam = np.array([3.5, 7.0])
    p = mortar.nodal_pressure(md, lam)
    assert p[0] == 3.5
    assert p[1] == 0.0
    assert np.array_equal(mortar.nodal_pressure(md, np.zeros(2)), np.zeros(2))
    assert np.array_equal(
        mortar.nodal_pressure(md, 2.0 * lam)[:1], 2.0 * p[:1]
    )
    with pytest.raises(DomainError):
        mortar.nodal_pressure(md, np.zeros(3))


def test_patch_pressure_recovery_nonmatching():
    # non-matching 7-vs-5 segment interface must still transmit a uniform
    # pressure exactly: every multiplier equals the applied p
    p = 2.5
    problem, _ = fixtures.patch_problem(n_lower=7, n_upper=5, p=p)
    sol = forward.solve_forward(problem)
    md = problem.mortar
    pressures = mortar.nodal_pressure(md, sol.lam)
    assert np.max(np.abs(pressures - p)) <= 1e-8 * p
    # total transmitted force equals p times the interface length
    assert float(md.weights @ sol.lam) == pytest.approx(p * 1.0, rel=1e-9)


def test_plane_contact_rows():
    coords = np.array([[0.0, 0.3], [0.6, 0.3], [1.0, 0.3]])
    quads = np.zeros((0, 4), dtype=np.int64)
    mesh = geometry.Mesh(
        coords, quads, {"base": np.array([0, 1, 2])}, (np.array([]), np.array([]))
    )
    md = mortar.plane_contact(mesh, "base", plane=0.25)
    assert np.allclose(md.weights, [0.3, 0.5, 0.2])
    assert np.allclose(md.g0, np.array([0.3, 0.5, 0.2]) * 0.05)
    for i, n in enumerate([0, 1, 2]):
        col = np.zeros(6)
        col[2 * n + 1] = md.weights[i]
        assert np.allclose(md.g[i], col)
    with pytest.raises(DomainError):
        mortar.plane_contact(mesh, "missing")


def test_stack_mortar_concatenates():
    mesh = fixtures.stacked_patch_mesh(gap=0.01)
    md = mortar.build_mortar(mesh)
    both = mortar.stack_mortar([md, md])
    assert both.m == 2 * md.m
    assert np.array_equal(both.g0[: md.m], md.g0)
    assert np.array_equal(both.g[md.m :], md.g)
    with pytest.raises(DomainError):
        mortar.stack_mortar([])


def test_design_derivs_translation():
    # moving the upper body up by rho widens every weighted gap by w
    def builder(rho):
        mesh = fixtures.stacked_patch_mesh(gap=float(rho[0]))
        return mortar.build_mortar(mesh)

    rho = np.array([0.02])
    md = mortar.build_mortar(fixtures.stacked_patch_mesh(gap=0.02))
    rng = np.random.default_rng(8)
    u = 0.01 * rng.standard_normal(md.g.shape[1])
    lam = rng.uniform(0.0, 1.0, md.m)
    dg0, dgt_lam, dg_u = mortar.mortar_design_derivs(builder, rho, u, lam)
    assert np.max(np.abs(dg0[:, 0] - md.weights)) <= 1e-8
    # vertical translation leaves the constraint gradient unchanged
    assert np.max(np.abs(dgt_lam)) <= 1e-8
    assert np.max(np.abs(dg_u)) <= 1e-8


def test_design_derivs_halving_is_second_order():
    def builder(rho):
        return mortar.build_mortar(geometry.build_wedge_mesh(rho[0], rho[1]))

    rho = np.array([39.0, 41.0])
    base = builder(rho)
    rng = np.random.default_rng(12)
    u = 0.01 * rng.standard_normal(base.g.shape[1])
    lam = rng.uniform(0.0, 1.0, base.m)
    outs = [
        np.concatenate([np.ravel(a) for a in
                        mortar.mortar_design_derivs(builder, rho, u, lam, h=h)])
        for h in (2e-2, 1e-2, 5e-3)
    ]
    e1 = np.max(np.abs(outs[0] - outs[1]))
    e2 = np.max(np.abs(outs[1] - outs[2]))
    assert e1 > 0.0
    assert 3.0 <= e1 / e2 <= 5.0
