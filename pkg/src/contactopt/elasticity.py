"""Plane-strain finite element kernel on bilinear quads.

Small-strain isotropic elasticity, 2x2 Gauss integration, consistent
edge tractions, and symmetric elimination of homogeneous Dirichlet
conditions.  The assembled stiffness is positive definite when each body
is fully restrained; bodies restrained only through contact yield a
positive semidefinite block, which the contact solver accepts (the
active constraints supply the missing rank).  A factorization of such a
matrix fails lazily, at factor time, not at assembly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AssemblyError, DomainError
from .geometry import Mesh

__all__ = [
    "Material",
    "Traction",
    "SystemMatrices",
    "assemble",
    "body_load",
    "load_vector",
    "energy",
    "compliance",
]


@dataclass(frozen=True)
class Material:
    """Isotropic linear elastic material (plane strain)."""

    e: float
    nu: float

    def __post_init__(self):
        if self.e <= 0.0:
            raise DomainError(f"Young's modulus must be positive, got {self.e}")
        if not (0.0 <= self.nu < 0.5):
            raise DomainError(f"Poisson ratio must lie in [0, 0.5), got {self.nu}")

    @property
    def d(self) -> np.ndarray:
        """3x3 constitutive matrix for (eps_xx, eps_yy, gamma_xy)."""
        c = self.e / ((1.0 + self.nu) * (1.0 - 2.0 * self.nu))
        return c * np.array(
            [
                [1.0 - self.nu, self.nu, 0.0],
                [self.nu, 1.0 - self.nu, 0.0],
                [0.0, 0.0, 0.5 * (1.0 - 2.0 * self.nu)],
            ]
        )


@dataclass(frozen=True)
class Traction:
    """Surface load on a named boundary chain.

    kind "pressure": scalar magnitude, acts against the outward normal
    (compressive for positive values).  kind "vector": constant traction
    vector per unit length.
    """

    chain: str
    kind: str
    value: object

    def __post_init__(self):
        if self.kind not in ("pressure", "vector"):
            raise DomainError(f"unknown traction kind {self.kind!r}")


@dataclass
class SystemMatrices:
    """Reduced stiffness and load vector after Dirichlet elimination.

    Attributes:
        k: (n_free, n_free) symmetric stiffness.
        f: (n_free,) consistent load vector.
        free: indices of free dofs in the full (2 * n_nodes) numbering.
        dof_map: full-length array mapping full dof -> free index (-1 fixed).
        n_full: number of dofs before elimination.
    """

    k: np.ndarray
    f: np.ndarray
    free: np.ndarray
    dof_map: np.ndarray
    n_full: int

    def expand(self, u_free: np.ndarray) -> np.ndarray:
        """Scatter a free-dof vector to full dof numbering (fixed dofs zero)."""
        u = np.zeros(self.n_full)
        u[self.free] = u_free
        return u


_GP = np.array([-1.0, 1.0]) / np.sqrt(3.0)


def _shape_grads():
    """Shape function gradients at the 4 Gauss points, list of (4, 2)."""
    out = []
    for xi in _GP:
        for eta in _GP:
            out.append(
                0.25
                * np.array(
                    [
                        [-(1 - eta), -(1 - xi)],
                        [(1 - eta), -(1 + xi)],
                        [(1 + eta), (1 + xi)],
                        [-(1 + eta), (1 - xi)],
                    ]
                )
            )
    return out


def _stiffness(mesh: Mesh, material: Material) -> np.ndarray:
    """Assemble the full (2n x 2n) stiffness, vectorized over elements."""
    xe = mesh.coords[mesh.quads]                     # (ne, 4, 2)
    ne = xe.shape[0]
    d = material.d
    ke = np.zeros((ne, 8, 8))
    for dn in _shape_grads():
        jac = np.einsum("eai,aj->eji", xe, dn)       # (ne, 2, 2), J[j,i]=dx_i/dxi_j
        det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
        if np.any(det <= 0.0):
            raise AssemblyError("element with non-positive Jacobian")
        inv = np.empty_like(jac)
        inv[:, 0, 0] = jac[:, 1, 1]
        inv[:, 1, 1] = jac[:, 0, 0]
        inv[:, 0, 1] = -jac[:, 0, 1]
        inv[:, 1, 0] = -jac[:, 1, 0]
        inv /= det[:, None, None]
        dndx = np.einsum("aj,eij->eai", dn, inv)     # (ne, 4, 2) grads wrt x
        b = np.zeros((ne, 3, 8))
        b[:, 0, 0::2] = dndx[:, :, 0]
        b[:, 1, 1::2] = dndx[:, :, 1]
        b[:, 2, 0::2] = dndx[:, :, 1]
        b[:, 2, 1::2] = dndx[:, :, 0]
        ke += np.einsum("eji,jk,ekl->eil", b, d, b) * det[:, None, None]
    edofs = np.empty((ne, 8), dtype=np.int64)
    edofs[:, 0::2] = 2 * mesh.quads
    edofs[:, 1::2] = 2 * mesh.quads + 1
    n = 2 * mesh.n_nodes
    k = np.zeros((n, n))
    np.add.at(k, (edofs[:, :, None], edofs[:, None, :]), ke)
    return 0.5 * (k + k.T)


def body_load(mesh: Mesh, b) -> np.ndarray:
    """Consistent nodal forces of a uniform body force density (bx, by)."""
    b = np.asarray(b, dtype=float).reshape(2)
    xe = mesh.coords[mesh.quads]
    ne = xe.shape[0]
    fe = np.zeros((ne, 4))
    for xi in _GP:
        for eta in _GP:
            dn = 0.25 * np.array(
                [
                    [-(1 - eta), -(1 - xi)],
                    [(1 - eta), -(1 + xi)],
                    [(1 + eta), (1 + xi)],
                    [-(1 + eta), (1 - xi)],
                ]
            )
            nv = 0.25 * np.array(
                [
                    (1 - xi) * (1 - eta),
                    (1 + xi) * (1 - eta),
                    (1 + xi) * (1 + eta),
                    (1 - xi) * (1 + eta),
                ]
            )
            jac = np.einsum("eai,aj->eji", xe, dn)
            det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
            fe += nv[None, :] * det[:, None]
    f = np.zeros(2 * mesh.n_nodes)
    np.add.at(f, 2 * mesh.quads, fe * b[0])
    np.add.at(f, 2 * mesh.quads + 1, fe * b[1])
    return f


def load_vector(mesh: Mesh, loads) -> np.ndarray:
    """Consistent nodal forces of edge tractions, full dof numbering.

    Chains must be ordered with the body on the left so that a pressure
    (positive = compressive) resolves to -p * outward_normal.
    """
    f = np.zeros(2 * mesh.n_nodes)
    for tr in loads or ():
        if tr.chain not in mesh.node_sets:
            raise AssemblyError(f"unknown traction chain {tr.chain!r}")
        chain = mesh.node_sets[tr.chain]
        if chain.size < 2:
            raise AssemblyError(f"traction chain {tr.chain!r} has fewer than 2 nodes")
        a = mesh.coords[chain[:-1]]
        b = mesh.coords[chain[1:]]
        edge = b - a
        length = np.hypot(edge[:, 0], edge[:, 1])
        if np.any(length <= 0.0):
            raise AssemblyError(f"degenerate edge in chain {tr.chain!r}")
        if tr.kind == "vector":
            t = np.broadcast_to(np.asarray(tr.value, dtype=float), (2,))
            te = np.broadcast_to(t, (edge.shape[0], 2))
        else:
            # outward normal of a body-on-the-left chain: tangent rotated -90
            normal = np.column_stack([edge[:, 1], -edge[:, 0]]) / length[:, None]
            te = -float(tr.value) * normal
        fe = 0.5 * te * length[:, None]              # per end node
        np.add.at(f, 2 * chain[:-1], fe[:, 0])
        np.add.at(f, 2 * chain[:-1] + 1, fe[:, 1])
        np.add.at(f, 2 * chain[1:], fe[:, 0])
        np.add.at(f, 2 * chain[1:] + 1, fe[:, 1])
    return f


def assemble(mesh: Mesh, material: Material, loads=(), body_force=None) -> SystemMatrices:
    """Assemble reduced stiffness and loads with Dirichlet dofs eliminated.

    Dirichlet conditions are homogeneous; the named sets ``dirichlet_x``
    and ``dirichlet_y`` pin the corresponding component of those nodes.
    body_force is an optional uniform (bx, by) force density.
    """
    k_full = _stiffness(mesh, material)
    f_full = load_vector(mesh, loads)
    if body_force is not None:
        f_full = f_full + body_load(mesh, body_force)
    n_full = 2 * mesh.n_nodes
    fixed = np.zeros(n_full, dtype=bool)
    for name, comp in (("dirichlet_x", 0), ("dirichlet_y", 1)):
        nodes = mesh.node_sets.get(name)
        if nodes is not None and nodes.size:
            fixed[2 * np.asarray(nodes) + comp] = True
    free = np.flatnonzero(~fixed)
    k = k_full[np.ix_(free, free)]
    dof_map = np.full(n_full, -1, dtype=np.int64)
    dof_map[free] = np.arange(free.size)
    return SystemMatrices(
        k=0.5 * (k + k.T),
        f=f_full[free],
        free=free,
        dof_map=dof_map,
        n_full=n_full,
    )


def energy(sysm: SystemMatrices, u: np.ndarray) -> float:
    """Potential energy  1/2 u^T K u - f^T u  at a free-dof displacement."""
    u = np.asarray(u, dtype=float)
    return 0.5 * float(u @ sysm.k @ u) - float(sysm.f @ u)


def compliance(sysm: SystemMatrices, u: np.ndarray) -> float:
    """Compliance u^T K u (twice the stored strain energy).

    Defined through the stiffness rather than the external work so that
    interference-driven assemblies without external tractions still get
    a meaningful stiffness measure.
    """
    u = np.asarray(u, dtype=float)
    return float(u @ sysm.k @ u)
