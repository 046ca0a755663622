"""Hand-built meshes and analytic contact problems shared by the tests."""

import numpy as np

from contactopt import elasticity, forward, geometry, mortar, sensitivity


def block_grid(x0, x1, y0, y1, nx, ny, node_base=0):
    """Structured quad block; returns (coords, quads, index) with
    index(i, j) giving the global node id of grid position (i, j)."""
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    coords = np.array([[x, y] for y in ys for x in xs])
    quads = []
    for j in range(ny):
        for i in range(nx):
            a = node_base + j * (nx + 1) + i
            b = a + 1
            c = a + nx + 2
            d = a + nx + 1
            quads.append([a, b, c, d])

    def index(i, j):
        return node_base + j * (nx + 1) + i

    return coords, np.array(quads, dtype=np.int64), index


def stacked_patch_mesh(n_lower=7, n_upper=5, gap=0.0):
    """Two stacked unit-width blocks with non-matching interface meshes.

    The lower block's top face is the multiplier-carrying side of the
    contact pair; the upper block's top face takes the external load.
    Poisson ratio zero keeps a uniform vertical load an exact uniform
    stress state, which is what the patch test requires.
    """
    lo_c, lo_q, lo_idx = block_grid(0.0, 1.0, 0.0, 0.5, n_lower, 2)
    up_c, up_q, up_idx = block_grid(0.0, 1.0, 0.5 + gap, 1.0 + gap, n_upper, 2, node_base=lo_c.shape[0])
    coords = np.vstack([lo_c, up_c])
    quads = np.vstack([lo_q, up_q])
    bottom = np.array([lo_idx(i, 0) for i in range(n_lower + 1)])
    lower_top = np.array([lo_idx(i, 2) for i in range(n_lower + 1)])
    upper_bottom = np.array([up_idx(i, 0) for i in range(n_upper + 1)])
    upper_top = np.array([up_idx(i, 2) for i in range(n_upper + 1)])
    mesh = geometry.Mesh(
        coords=coords,
        quads=quads,
        node_sets={
            "dirichlet_x": np.arange(coords.shape[0]),
            "dirichlet_y": bottom,
            "load_face": upper_top[::-1],
        },
        contact_sides=(upper_bottom, lower_top),
    )
    return mesh


def patch_problem(n_lower=7, n_upper=5, p=1.0, gap=0.0):
    mesh = stacked_patch_mesh(n_lower=n_lower, n_upper=n_upper, gap=gap)
    mat = elasticity.Material(100.0, 0.0)
    sysm = elasticity.assemble(
        mesh, mat, loads=[elasticity.Traction("load_face", "pressure", p)]
    )
    md = mortar.build_mortar(mesh)
    return forward.ForwardProblem.from_parts(sysm, md), mesh


def spring_problem(k, f, d):
    """One dof pushed by f against a wall a distance d away: the QP
    min 0.5 k u^2 - f u subject to d - u >= 0."""
    return forward.ForwardProblem(
        k=np.array([[float(k)]]),
        f=np.array([float(f)]),
        g=np.array([[-1.0]]),
        g0=np.array([float(d)]),
        weights=np.array([1.0]),
    )


def spring_wall_derivs():
    """DesignDerivs for the spring-wall family with rho = wall gap d."""
    return sensitivity.DesignDerivs(
        dk_u=np.zeros((1, 1)),
        df=np.zeros((1, 1)),
        dg0=np.array([[1.0]]),
        dgt_lam=np.zeros((1, 1)),
        dg_u=np.zeros((1, 1)),
    )
