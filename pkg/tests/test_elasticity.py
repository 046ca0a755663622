import numpy as np
import pytest

from contactopt import elasticity, geometry
from contactopt.errors import AssemblyError, DomainError

import fixtures


def _single_element_mesh():
    coords = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    quads = np.array([[0, 1, 2, 3]])
    return geometry.Mesh(coords, quads, {}, (np.array([]), np.array([])))


def test_material_validation():
    with pytest.raises(DomainError):
        elasticity.Material(-1.0, 0.3)
    with pytest.raises(DomainError):
        elasticity.Material(1.0, 0.5)
    m = elasticity.Material(200.0, 0.3)
    d = m.d
    assert d.shape == (3, 3)
    assert np.allclose(d, d.T)


def test_unconstrained_element_has_three_rigid_modes():
    mesh = _single_element_mesh()
    sysm = elasticity.assemble(mesh, elasticity.Material(10.0, 0.25))
    w = np.linalg.eigvalsh(sysm.k)
    assert np.sum(np.abs(w) < 1e-9 * np.max(w)) == 3
    assert np.all(w > -1e-9 * np.max(w))


def test_stiffness_symmetric():
    mesh = fixtures.stacked_patch_mesh()
    sysm = elasticity.assemble(mesh, elasticity.Material(100.0, 0.2))
    assert np.max(np.abs(sysm.k - sysm.k.T)) <= 1e-12 * np.max(np.abs(sysm.k))


def test_uniform_traction_uniform_stress():
    # block fixed normally at the bottom, pressure on top: exact solution
    # has uniform strain e_yy = -p / c11 and nodal displacement linear in y
    nx, ny = 4, 3
    coords, quads, idx = fixtures.block_grid(0.0, 2.0, 0.0, 1.0, nx, ny)
    bottom = np.array([idx(i, 0) for i in range(nx + 1)])
    top = np.array([idx(i, ny) for i in range(nx + 1)])
    mesh = geometry.Mesh(
        coords,
        quads,
        {
            "dirichlet_x": np.arange(coords.shape[0]),
            "dirichlet_y": bottom,
            "top": top[::-1],
        },
        (np.array([]), np.array([])),
    )
    mat = elasticity.Material(100.0, 0.0)
    p = 3.0
    sysm = elasticity.assemble(mesh, mat, loads=[elasticity.Traction("top", "pressure", p)])
    u = np.linalg.solve(sysm.k, sysm.f)
    u_full = sysm.expand(u)
    c11 = mat.d[1, 1]
    for n in range(coords.shape[0]):
        expect = -p / c11 * coords[n, 1]
        assert abs(u_full[2 * n + 1] - expect) <= 1e-10


def test_energy_values():
    mesh = _single_element_mesh()
    sysm = elasticity.assemble(mesh, elasticity.Material(10.0, 0.0))
    n = sysm.f.size
    assert elasticity.energy(sysm, np.zeros(n)) == 0.0
    sysm2 = elasticity.SystemMatrices(
        k=np.array([[2.0]]),
        f=np.array([0.0]),
        free=np.array([0]),
        dof_map=np.array([0]),
        n_full=1,
    )
    assert elasticity.energy(sysm2, np.array([3.0])) == pytest.approx(9.0)


def test_energy_minimizer_identity():
    rng = np.random.default_rng(0)
    m = rng.standard_normal((4, 4))
    k = m @ m.T + 4 * np.eye(4)
    f = rng.standard_normal(4)
    sysm = elasticity.SystemMatrices(
        k=k, f=f, free=np.arange(4), dof_map=np.arange(4), n_full=4
    )
    u = np.linalg.solve(k, f)
    assert elasticity.energy(sysm, u) == pytest.approx(-0.5 * f @ u, rel=1e-12)


def test_energy_gradient_matches_fd():
    mesh = fixtures.stacked_patch_mesh()
    sysm = elasticity.assemble(
        mesh,
        elasticity.Material(50.0, 0.3),
        loads=[elasticity.Traction("load_face", "pressure", 1.0)],
    )
    rng = np.random.default_rng(2)
    u = rng.standard_normal(sysm.f.size)
    grad = sysm.k @ u - sysm.f
    h = 1e-6
    for j in rng.choice(sysm.f.size, size=5, replace=False):
        e = np.zeros(sysm.f.size)
        e[j] = h
        fd = (elasticity.energy(sysm, u + e) - elasticity.energy(sysm, u - e)) / (2 * h)
        assert abs(fd - grad[j]) <= 1e-7 * max(1.0, abs(grad[j]))


def test_compliance_quadratic_scaling():
    sysm = elasticity.SystemMatrices(
        k=np.array([[2.0]]),
        f=np.array([0.0]),
        free=np.array([0]),
        dof_map=np.array([0]),
        n_full=1,
    )
    assert elasticity.compliance(sysm, np.array([0.0])) == 0.0
    c1 = elasticity.compliance(sysm, np.array([1.5]))
    c2 = elasticity.compliance(sysm, np.array([3.0]))
    assert c2 == pytest.approx(4.0 * c1, rel=1e-14)


def test_patch_constant_strain_nodal_forces():
    # a linear displacement field must produce zero interior residual
    nx, ny = 3, 3
    coords, quads, idx = fixtures.block_grid(0.0, 1.0, 0.0, 1.0, nx, ny)
    mesh = geometry.Mesh(coords, quads, {}, (np.array([]), np.array([])))
    mat = elasticity.Material(7.0, 0.2)
    sysm = elasticity.assemble(mesh, mat)
    # u = (a x, b y): constant strain; K u equals boundary-only forces
    u = np.zeros(2 * coords.shape[0])
    u[0::2] = 0.3 * coords[:, 0]
    u[1::2] = -0.2 * coords[:, 1]
    r = sysm.k @ u[sysm.free]
    interior = [idx(i, j) for i in range(1, nx) for j in range(1, ny)]
    f_scale = np.max(np.abs(r))
    for n in interior:
        assert abs(r[sysm.dof_map[2 * n]]) <= 1e-10 * f_scale
        assert abs(r[sysm.dof_map[2 * n + 1]]) <= 1e-10 * f_scale


def test_traction_unknown_chain_raises():
    mesh = _single_element_mesh()
    with pytest.raises(AssemblyError):
        elasticity.load_vector(mesh, [elasticity.Traction("missing", "pressure", 1.0)])


def test_traction_kind_validated():
    with pytest.raises(DomainError):
        elasticity.Traction("top", "sideways", 1.0)
