"""Mortar discretization of the frictionless contact conditions.

For each node j of the side-2 chain the weighted gap

    g_j(u) = integral of Phi_j * [n . (x1 - x2)] over the side-2 surface

is integrated exactly by decomposing each side-2 segment at the
projections of side-1 nodes and applying 2-point Gauss per overlap
piece (the integrand is piecewise quadratic for linear chains, so there
is no quadrature error).  Kinematics are linear: normals and pairings
are frozen in the reference configuration, giving g(u) = g0 + G u with
constant G.

The multipliers dual to these weighted gaps are the nodal values of the
interpolated contact pressure field: for a transmitted uniform pressure
p the solve returns lambda_j = p directly (total force = sum over j of
lambda_j * weight_j).  ``nodal_pressure`` therefore reports lambda
itself, zeroing rows that carry no overlap; the row weights are exposed
for force-weighted reporting.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .geometry import Mesh

__all__ = [
    "MortarData",
    "build_mortar",
    "plane_contact",
    "stack_mortar",
    "gap",
    "nodal_pressure",
    "mortar_design_derivs",
]

#: 2-point Gauss rule on [0, 1]
_GAUSS_T = 0.5 + np.array([-0.5, 0.5]) / np.sqrt(3.0)
_GAUSS_W = np.array([0.5, 0.5])


def _cross2(u, v) -> float:
    return float(u[0] * v[1] - u[1] * v[0])


@dataclass
class MortarData:
    """Linearized contact constraints g(u) = g0 + G u >= 0.

    Attributes:
        g: (m, 2 * n_nodes) constraint gradient in full dof numbering.
        g0: (m,) reference weighted gaps.
        weights: (m,) row integrals of the multiplier shape functions;
            zero for rows without overlap.
        nodes: (m,) owning node index per row (side-2 chain or plane chain).
        normals: (m, 2) reference normal associated with each row.
    """

    g: np.ndarray
    g0: np.ndarray
    weights: np.ndarray
    nodes: np.ndarray
    normals: np.ndarray

    @property
    def m(self) -> int:
        return self.g0.shape[0]


def _chain_normals(mesh: Mesh, chain: np.ndarray) -> np.ndarray:
    """Outward unit normals per segment of a boundary chain.

    Orientation is resolved from the owning element: the normal points
    away from the centroid of the quad containing the segment.
    """
    coords = mesh.coords
    seg_a = chain[:-1]
    seg_b = chain[1:]
    edge_lookup = {}
    for e, quad in enumerate(mesh.quads):
        for k in range(4):
            n1, n2 = int(quad[k]), int(quad[(k + 1) % 4])
            edge_lookup[(min(n1, n2), max(n1, n2))] = e
    normals = np.empty((seg_a.size, 2))
    for s, (a, b) in enumerate(zip(seg_a, seg_b)):
        key = (min(int(a), int(b)), max(int(a), int(b)))
        if key not in edge_lookup:
            raise DomainError(f"contact chain edge {key} is not a mesh boundary edge")
        tang = coords[b] - coords[a]
        length = np.hypot(*tang)
        if length <= 0.0:
            raise DomainError("zero-length segment in contact chain")
        n = np.array([tang[1], -tang[0]]) / length
        quad = mesh.quads[edge_lookup[key]]
        centroid = coords[quad].mean(axis=0)
        if np.dot(centroid - coords[a], n) > 0.0:
            n = -n
        normals[s] = n
    return normals


def _ray_segment(origin, direction, p, q):
    """Solve origin + s * direction = (1 - tau) p + tau q; return (s, tau)."""
    mat = np.array(
        [[direction[0], p[0] - q[0]], [direction[1], p[1] - q[1]]]
    )
    det = mat[0, 0] * mat[1, 1] - mat[0, 1] * mat[1, 0]
    if abs(det) < 1e-14:
        return None
    rhs = p - origin
    s = (rhs[0] * mat[1, 1] - rhs[1] * mat[0, 1]) / det
    tau = (mat[0, 0] * rhs[1] - mat[1, 0] * rhs[0]) / det
    return s, tau


def build_mortar(mesh: Mesh, pair=None) -> MortarData:
    """Assemble g0, G, and row weights for a contact pair of node chains.

    Args:
        mesh: mesh carrying both chains.
        pair: optional (side1, side2) override of ``mesh.contact_sides``.

    Rows belong to side-2 nodes.  Side-2 nodes whose shape function sees
    no side-1 overlap produce zero-weight rows with a unit slack gap, so
    they never activate and their multipliers stay zero.
    """
    side1, side2 = pair if pair is not None else mesh.contact_sides
    side1 = np.asarray(side1, dtype=np.int64)
    side2 = np.asarray(side2, dtype=np.int64)
    if side1.size < 2 or side2.size < 2:
        raise DomainError("contact chains need at least two nodes")
    coords = mesh.coords
    m = side2.size
    n_dof = 2 * mesh.n_nodes
    g_mat = np.zeros((m, n_dof))
    g0 = np.zeros(m)
    weights = np.zeros(m)
    normals = np.zeros((m, 2))
    seg_normals = _chain_normals(mesh, side2)

    p1a = coords[side1[:-1]]
    p1b = coords[side1[1:]]

    for k in range(side2.size - 1):
        a_id, b_id = side2[k], side2[k + 1]
        a, b = coords[a_id], coords[b_id]
        n = seg_normals[k]
        length = np.hypot(*(b - a))
        # breakpoints: side-1 node projections along n falling inside (0,1)
        cuts = [0.0, 1.0]
        denom = _cross2(b - a, n)
        for pnode in coords[side1]:
            if abs(denom) < 1e-14:
                continue
            t = _cross2(pnode - a, n) / denom
            if 1e-12 < t < 1.0 - 1e-12:
                cuts.append(float(t))
        cuts = sorted(cuts)
        for ta, tb in zip(cuts[:-1], cuts[1:]):
            if tb - ta < 1e-14:
                continue
            # identify the facing side-1 segment at the midpoint
            tm = 0.5 * (ta + tb)
            xm = (1.0 - tm) * a + tm * b
            hit = None
            for s1 in range(p1a.shape[0]):
                res = _ray_segment(xm, n, p1a[s1], p1b[s1])
                if res is None:
                    continue
                s_ray, tau = res
                if -1e-10 <= tau <= 1.0 + 1e-10:
                    if hit is None or abs(s_ray) < abs(hit[1]):
                        hit = (s1, s_ray, tau)
            if hit is None:
                continue
            s1 = hit[0]
            for tg, wg in zip(_GAUSS_T, _GAUSS_W):
                t = ta + (tb - ta) * tg
                xg = (1.0 - t) * a + t * b
                res = _ray_segment(xg, n, p1a[s1], p1b[s1])
                if res is None:
                    continue
                s_ray, tau = res
                tau = min(max(tau, 0.0), 1.0)
                dw = wg * (tb - ta) * length
                phi2 = (1.0 - t, t)
                phi1 = (1.0 - tau, tau)
                for loc, node2 in enumerate((a_id, b_id)):
                    row = k + loc
                    coef = phi2[loc] * dw
                    g0[row] += coef * s_ray
                    weights[row] += coef
                    for l1, node1 in enumerate((side1[s1], side1[s1 + 1])):
                        g_mat[row, 2 * node1] += coef * phi1[l1] * n[0]
                        g_mat[row, 2 * node1 + 1] += coef * phi1[l1] * n[1]
                    for l2, node2b in enumerate((a_id, b_id)):
                        g_mat[row, 2 * node2b] -= coef * phi2[l2] * n[0]
                        g_mat[row, 2 * node2b + 1] -= coef * phi2[l2] * n[1]

    node_norm = np.zeros((m, 2))
    node_norm[:-1] += seg_normals
    node_norm[1:] += seg_normals
    lens = np.hypot(node_norm[:, 0], node_norm[:, 1])
    lens[lens == 0.0] = 1.0
    normals = node_norm / lens[:, None]
    # rows with no overlap would read 0 >= 0 with a zero gradient, which
    # is degenerate (unbounded multiplier, singular active-set systems);
    # give them a unit positive slack so they stay strictly inactive
    unsupported = weights <= 0.0
    g0[unsupported] = 1.0
    return MortarData(g=g_mat, g0=g0, weights=weights, nodes=side2.copy(), normals=normals)


def plane_contact(mesh: Mesh, chain_name: str, plane: float = 0.0, axis: int = 1) -> MortarData:
    """Unilateral support of a boundary chain on a rigid coordinate plane.

    Gap rows are tributary-length weighted nodal distances,
    g_i = w_i * (X_i[axis] + u_i[axis] - plane), so the multipliers are
    nodal pressures exactly like mortar pair rows.
    """
    chain = mesh.node_sets.get(chain_name)
    if chain is None:
        raise DomainError(f"unknown chain {chain_name!r}")
    chain = np.asarray(chain, dtype=np.int64)
    if chain.size < 2:
        raise DomainError("plane contact chain needs at least two nodes")
    coords = mesh.coords[chain]
    seg = np.hypot(*(coords[1:] - coords[:-1]).T)
    w = np.zeros(chain.size)
    w[:-1] += 0.5 * seg
    w[1:] += 0.5 * seg
    m = chain.size
    g_mat = np.zeros((m, 2 * mesh.n_nodes))
    g_mat[np.arange(m), 2 * chain + axis] = w
    g0 = w * (mesh.coords[chain, axis] - plane)
    normals = np.zeros((m, 2))
    normals[:, axis] = 1.0
    return MortarData(g=g_mat, g0=g0, weights=w, nodes=chain.copy(), normals=normals)


def stack_mortar(parts) -> MortarData:
    """Concatenate constraint blocks (e.g. a curve pair plus a base plane)."""
    parts = list(parts)
    if not parts:
        raise DomainError("nothing to stack")
    return MortarData(
        g=np.vstack([p.g for p in parts]),
        g0=np.concatenate([p.g0 for p in parts]),
        weights=np.concatenate([p.weights for p in parts]),
        nodes=np.concatenate([p.nodes for p in parts]),
        normals=np.vstack([p.normals for p in parts]),
    )


def gap(md: MortarData, u_full: np.ndarray) -> np.ndarray:
    """Weighted gaps at a full-dof displacement: g0 + G u."""
    return md.g0 + md.g @ np.asarray(u_full, dtype=float)


def nodal_pressure(md: MortarData, lam: np.ndarray) -> np.ndarray:
    """Contact pressure per constraint row.

    The multipliers of the weighted-gap rows are already the nodal
    values of the interpolated pressure field, so this is the identity
    on rows with overlap; zero-weight rows report zero.
    """
    lam = np.asarray(lam, dtype=float)
    if lam.shape != md.g0.shape:
        raise DomainError(f"multiplier shape {lam.shape} does not match m={md.m}")
    out = lam.copy()
    out[md.weights <= 0.0] = 0.0
    return out


def mortar_design_derivs(builder, rho, u_full, lam, h=None):
    """Central differences of the mortar terms holding (u, lambda) fixed.

    Args:
        builder: callable rho -> MortarData with fixed row count.
        rho: (p,) design vector.
        u_full: full-dof displacement held fixed.
        lam: multipliers held fixed.
        h: optional steps, default 1e-6 * (1 + |rho_i|).

    Returns:
        (dg0, dgt_lam, dg_u): arrays of shape (m, p), (2n, p), (m, p)
        holding d g0 / d rho, d (G^T lam) / d rho, and (d G / d rho) u.
    """
    rho = np.asarray(rho, dtype=float)
    u_full = np.asarray(u_full, dtype=float)
    lam = np.asarray(lam, dtype=float)
    p = rho.size
    if h is None:
        h = 1e-6 * (1.0 + np.abs(rho))
    else:
        h = np.broadcast_to(np.asarray(h, dtype=float), (p,))
    base = builder(rho)
    m = base.m
    dg0 = np.zeros((m, p))
    dgt_lam = np.zeros((base.g.shape[1], p))
    dg_u = np.zeros((m, p))
    for i in range(p):
        dr = np.zeros(p)
        dr[i] = h[i]
        plus = builder(rho + dr)
        minus = builder(rho - dr)
        if plus.m != m or minus.m != m:
            raise DomainError("mortar row count changed under design perturbation")
        dg0[:, i] = (plus.g0 - minus.g0) / (2.0 * h[i])
        dgt_lam[:, i] = (plus.g.T @ lam - minus.g.T @ lam) / (2.0 * h[i])
        dg_u[:, i] = (plus.g @ u_full - minus.g @ u_full) / (2.0 * h[i])
    return dg0, dgt_lam, dg_u
