"""Parametric meshes for the contact scenarios.

Plane-strain assemblies are meshed as structured bilinear quad blocks.
Design parameters move nodal coordinates smoothly while connectivity,
node sets, and contact chains stay byte-identical across the whole
design box; every consumer of design derivatives relies on that.

Conventions:
    * coordinates are (x, y) with y up,
    * quads are numbered counterclockwise,
    * boundary chains used for tractions are ordered so that walking the
      chain keeps the body on the left (outward normal = tangent rotated
      by -90 degrees),
    * contact chains are ordered monotonically along the surface.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DomainError, MeshQualityError, TopologyError

__all__ = [
    "BezierCurve",
    "bezier_eval",
    "bezier_eval_decasteljau",
    "Mesh",
    "WedgeGeometry",
    "ClampLiteGeometry",
    "build_wedge_mesh",
    "build_clamp_lite_mesh",
    "design_velocity",
    "export_mesh_csv",
]


# ---------------------------------------------------------------------------
# cubic Bezier curves
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BezierCurve:
    """Cubic Bezier curve with a mask of design-controlled coordinates.

    Attributes:
        control: (4, 2) control points.
        free: (4, 2) boolean mask; True entries are design variables.
    """

    control: np.ndarray
    free: np.ndarray = None

    def __post_init__(self):
        control = np.asarray(self.control, dtype=float)
        if control.shape != (4, 2):
            raise DomainError(f"control array must be (4, 2), got {control.shape}")
        free = self.free
        if free is None:
            free = np.zeros((4, 2), dtype=bool)
        free = np.asarray(free, dtype=bool)
        if free.shape != (4, 2):
            raise DomainError(f"free mask must be (4, 2), got {free.shape}")
        object.__setattr__(self, "control", control)
        object.__setattr__(self, "free", free)

    def with_free(self, values) -> "BezierCurve":
        """Return a copy with the masked coordinates replaced by ``values``."""
        values = np.asarray(values, dtype=float)
        n_free = int(self.free.sum())
        if values.shape != (n_free,):
            raise DomainError(f"expected {n_free} values, got shape {values.shape}")
        control = self.control.copy()
        control[self.free] = values
        return replace(self, control=control)


def _check_param(t):
    t = np.asarray(t, dtype=float)
    if np.any(t < -1e-12) or np.any(t > 1.0 + 1e-12):
        raise DomainError("curve parameter outside [0, 1]")
    return np.clip(t, 0.0, 1.0)


def bezier_eval(curve: BezierCurve, t):
    """Evaluate the curve at parameter(s) t in [0, 1] (Bernstein form)."""
    t = _check_param(t)
    s = 1.0 - t
    b = np.stack([s**3, 3.0 * s**2 * t, 3.0 * s * t**2, t**3], axis=-1)
    return b @ curve.control


def bezier_eval_decasteljau(curve: BezierCurve, t):
    """Evaluate by repeated linear interpolation (de Casteljau's scheme)."""
    t = _check_param(t)
    tt = np.atleast_1d(t)[..., None]
    p = [np.broadcast_to(c, tt.shape[:-1] + (2,)).copy() for c in curve.control]
    while len(p) > 1:
        p = [(1.0 - tt) * p[i] + tt * p[i + 1] for i in range(len(p) - 1)]
    out = p[0]
    return out[0] if np.ndim(t) == 0 else out


# ---------------------------------------------------------------------------
# mesh container
# ---------------------------------------------------------------------------

@dataclass
class Mesh:
    """Structured bilinear quad mesh of one or more bodies.

    Attributes:
        coords: (n_nodes, 2) reference coordinates.
        quads: (n_elems, 4) counterclockwise connectivity.
        node_sets: named ordered index arrays.  Dirichlet sets are
            ``dirichlet_x`` / ``dirichlet_y``; traction chains keep the
            body on the left when walked in order.
        contact_sides: (side1, side2) ordered contact chains.  Side 2 is
            the surface carrying the contact pressure unknowns.
    """

    coords: np.ndarray
    quads: np.ndarray
    node_sets: dict
    contact_sides: tuple

    @property
    def n_nodes(self) -> int:
        return self.coords.shape[0]

    @property
    def n_elems(self) -> int:
        return self.quads.shape[0]


#: 2x2 Gauss abscissae on [-1, 1]
_GP = np.array([-1.0, 1.0]) / np.sqrt(3.0)


def _check_jacobians(coords, quads):
    """Raise MeshQualityError if any bilinear map has a non-positive Jacobian."""
    xe = coords[quads]  # (ne, 4, 2)
    for xi in _GP:
        for eta in _GP:
            dn = 0.25 * np.array(
                [
                    [-(1 - eta), -(1 - xi)],
                    [(1 - eta), -(1 + xi)],
                    [(1 + eta), (1 + xi)],
                    [-(1 + eta), (1 - xi)],
                ]
            )  # (4, 2) d N / d(xi, eta)
            jac = np.einsum("eai,aj->eij", xe, dn)
            det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
            if np.any(det <= 0.0):
                bad = int(np.argmin(det))
                raise MeshQualityError(
                    f"non-positive Jacobian in element {bad} (det={det[bad]:.3e})"
                )


def _grid_quads(nrow, ncol, offset=0):
    """Connectivity of an (nrow x ncol) node grid, row-major, CCW quads.

    Rows advance in +y (or along the sweep direction); the caller is
    responsible for picking an orientation with positive Jacobians.
    """
    j, i = np.meshgrid(np.arange(nrow - 1), np.arange(ncol - 1), indexing="ij")
    n0 = j * ncol + i + offset
    quads = np.stack(
        [n0, n0 + 1, n0 + ncol + 1, n0 + ncol], axis=-1
    ).reshape(-1, 4)
    return quads.astype(np.int64)


# ---------------------------------------------------------------------------
# wedge assembly
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WedgeGeometry:
    """Fixed dimensions and resolution of the two-wedge preloaded joint.

    The slider (left body) is a trapezoid: vertical left face on rollers,
    inclined right face at ``theta1`` from vertical.  The seat (right
    body) is a parallelogram slab of horizontal width ``seat_width``
    whose left face is inclined at ``theta2``; its foot is clamped.  The
    two inclined faces meet at the top corner (top_width, height) in the
    reference configuration, so the reference gap grows downward when
    theta2 > theta1.  A preload pressure pushes the slider upward on the
    inner part of its bottom face (fixed extent ``load_width``), wedging
    it against the seat; a second pressure acts inward on the seat's
    outer face.
    """

    height: float = 20.0
    top_width: float = 20.0
    load_width: float = 16.0
    seat_width: float = 16.0
    n1_rows: int = 16          # slider rows (vertical subdivision)
    n1_inner: int = 4          # slider columns across [0, load_width]
    n1_outer: int = 4          # slider columns from load_width to the incline
    n2_rows: int = 22          # seat elements along the contact face
    n2_cols: int = 6           # seat elements across the slab
    theta_min: float = 30.0
    theta_max: float = 60.0


def build_wedge_mesh(theta1: float, theta2: float, geom: WedgeGeometry | None = None) -> Mesh:
    """Mesh the two-wedge joint for face angles in degrees from vertical.

    Angles outside the design box raise DomainError; tangled elements
    raise MeshQualityError.  At the default resolution the contact
    pressure chain (seat side) has exactly 23 nodes / 22 elements.
    """
    g = geom or WedgeGeometry()
    # 0.01 degree slack so finite-difference collars around bound-active
    # designs still mesh; optimizers enforce the box itself
    for name, val in (("theta1", theta1), ("theta2", theta2)):
        if not (g.theta_min - 0.01 <= val <= g.theta_max + 0.01):
            raise DomainError(
                f"{name}={val} outside [{g.theta_min}, {g.theta_max}] degrees"
            )
    t1 = np.tan(np.radians(theta1))
    t2 = np.tan(np.radians(theta2))
    h, xc, wl, ws = g.height, g.top_width, g.load_width, g.seat_width
    if wl >= xc:
        raise DomainError("load_width must be smaller than top_width")

    # slider block: rows j = 0..n1_rows bottom-up, two-zone column grading
    # (inner columns are design-independent so the preload face is fixed)
    ncol1 = g.n1_inner + g.n1_outer + 1
    nrow1 = g.n1_rows + 1
    y1 = np.linspace(0.0, h, nrow1)
    xface = xc + (h - y1) * t1                       # incline abscissa per row
    xs = np.empty((nrow1, ncol1))
    xs[:, : g.n1_inner + 1] = np.linspace(0.0, wl, g.n1_inner + 1)[None, :]
    frac = np.linspace(0.0, 1.0, g.n1_outer + 1)[1:]
    xs[:, g.n1_inner + 1 :] = wl + (xface[:, None] - wl) * frac[None, :]
    slider = np.stack([xs, np.broadcast_to(y1[:, None], xs.shape)], axis=-1)
    slider = slider.reshape(-1, 2)
    quads1 = _grid_quads(nrow1, ncol1)

    def s_idx(j, i):
        return j * ncol1 + i

    # seat block: rows k = 0..n2_rows from the TOP corner down the incline,
    # columns swept horizontally by seat_width
    nrow2 = g.n2_rows + 1
    ncol2 = g.n2_cols + 1
    kk = np.arange(nrow2)
    yk = h * (1.0 - kk / g.n2_rows)
    xk = xc + (h - yk) * t2
    cc = np.linspace(0.0, ws, ncol2)
    seat = np.stack(
        [xk[:, None] + cc[None, :], np.broadcast_to(yk[:, None], (nrow2, ncol2))],
        axis=-1,
    ).reshape(-1, 2)
    off = slider.shape[0]
    # rows advance downward here; list nodes so the quads stay CCW
    j, i = np.meshgrid(np.arange(nrow2 - 1), np.arange(ncol2 - 1), indexing="ij")
    n0 = j * ncol2 + i + off
    quads2 = np.stack([n0, n0 + ncol2, n0 + ncol2 + 1, n0 + 1], axis=-1).reshape(-1, 4)

    def q_idx(k, c):
        return off + k * ncol2 + c

    coords = np.vstack([slider, seat])
    quads = np.vstack([quads1, quads2.astype(np.int64)])

    rows1 = np.arange(nrow1)
    node_sets = {
        "dirichlet_x": np.concatenate(
            [s_idx(rows1, 0), q_idx(g.n2_rows, np.arange(ncol2))]
        ),
        "dirichlet_y": q_idx(g.n2_rows, np.arange(ncol2)),
        # preload face: slider bottom, inner zone, walked +x (body above)
        "p1_face": s_idx(0, np.arange(g.n1_inner + 1)),
        # outer face of the seat, walked bottom-up (body on the left)
        "p2_face": q_idx(np.arange(g.n2_rows, -1, -1), g.n2_cols),
    }
    contact_sides = (
        s_idx(np.arange(g.n1_rows, -1, -1), ncol1 - 1),   # slider incline, top-down
        q_idx(np.arange(nrow2), 0),                       # seat incline, top-down
    )
    mesh = Mesh(coords, quads, node_sets, contact_sides)
    _check_jacobians(coords, quads)
    return mesh


# ---------------------------------------------------------------------------
# clamp-lite assembly
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ClampLiteGeometry:
    """Fixed dimensions of the retainer/flange pair with curved interface.

    Both interface faces are cubic Bezier curves with evenly spaced
    abscissae; the four design variables are the ordinates of the middle
    control points (retainer P2, P3, then flange P2, P3).  The flange
    rests unilaterally on the rigid plane y = 0; the retainer is pressed
    down by a band pressure on its flat top face.  The curves are allowed
    to overlap (interference fit) up to ``max_interference``.
    """

    # end ordinates chosen so the two cubics can conform: with uniform
    # abscissae both faces are polynomial graphs y(x), and these ends make
    # the gap exactly -0.01 (uniform interference) at rho =
    # (0.40713, 0.35344, 0.443, 0.38343), so designs near that corner seat
    # the full interface instead of a point contact
    retainer_x: tuple = (0.351, 0.617, 0.883, 1.149)
    retainer_end_y: tuple = (0.4714, 0.3203)
    flange_x: tuple = (0.227, 0.500, 0.773, 1.046)
    flange_end_y: tuple = (0.5121, 0.3441)
    retainer_top: float = 0.75
    # the plane sits well above y=0 so the flange stays thin; pressure then
    # diffuses less than the distance from mid-interface contact down to
    # the seal nodes, keeping the seal reading local
    plane_y: float = 0.25
    n1_cols: int = 34          # retainer elements along its interface curve
    n1_rows: int = 5
    n2_cols: int = 40          # flange elements along its interface curve
    n2_rows: int = 4
    rho_l: tuple = (0.35, 0.35, 0.443, 0.3834)
    rho_u: tuple = (0.408, 0.354, 0.47, 0.44)
    max_interference: float = 0.2
    min_thickness: float = 0.05

    def curves(self, rho):
        """Interface curves for a design vector (retainer first)."""
        rho = np.asarray(rho, dtype=float)
        ret = BezierCurve(
            np.column_stack(
                [
                    self.retainer_x,
                    [self.retainer_end_y[0], rho[0], rho[1], self.retainer_end_y[1]],
                ]
            ),
            free=np.array(
                [[False, False], [False, True], [False, True], [False, False]]
            ),
        )
        fla = BezierCurve(
            np.column_stack(
                [
                    self.flange_x,
                    [self.flange_end_y[0], rho[2], rho[3], self.flange_end_y[1]],
                ]
            ),
            free=np.array(
                [[False, False], [False, True], [False, True], [False, False]]
            ),
        )
        return ret, fla


def build_clamp_lite_mesh(rho, geom: ClampLiteGeometry | None = None) -> Mesh:
    """Mesh the retainer/flange pair for a design vector of 4 ordinates.

    Designs outside the documented bound box raise DomainError; curve
    interference beyond ``max_interference`` or a squeezed-out block
    raises MeshQualityError.
    """
    g = geom or ClampLiteGeometry()
    rho = np.asarray(rho, dtype=float)
    if rho.shape != (4,):
        raise DomainError(f"expected 4 design variables, got shape {rho.shape}")
    # 0.05 slack: the box is enforced by the optimizers, the builder only
    # rejects designs far enough out that the interference/thickness
    # guards below would not be meaningful
    lo = np.asarray(g.rho_l)
    hi = np.asarray(g.rho_u)
    if np.any(rho < lo - 0.05) or np.any(rho > hi + 0.05):
        raise DomainError(
            f"design {rho.tolist()} outside bounds {lo.tolist()} .. {hi.tolist()}"
        )
    ret_curve, fla_curve = g.curves(rho)

    # evenly spaced control abscissae make x(t) affine in t, so uniform t
    # gives uniform column spacing
    t1 = np.linspace(0.0, 1.0, g.n1_cols + 1)
    ret_pts = bezier_eval(ret_curve, t1)
    t2 = np.linspace(0.0, 1.0, g.n2_cols + 1)
    fla_pts = bezier_eval(fla_curve, t2)

    # interference check on a fine common grid
    xs = np.linspace(
        max(g.retainer_x[0], g.flange_x[0]),
        min(g.retainer_x[-1], g.flange_x[-1]),
        201,
    )
    tr = (xs - g.retainer_x[0]) / (g.retainer_x[-1] - g.retainer_x[0])
    tf = (xs - g.flange_x[0]) / (g.flange_x[-1] - g.flange_x[0])
    overlap = bezier_eval(fla_curve, tf)[:, 1] - bezier_eval(ret_curve, tr)[:, 1]
    if overlap.max() > g.max_interference:
        raise MeshQualityError(
            f"curve interference {overlap.max():.4f} exceeds "
            f"limit {g.max_interference}"
        )
    if np.any(ret_pts[:, 1] > g.retainer_top - g.min_thickness):
        raise MeshQualityError("retainer curve runs into its top face")
    if np.any(fla_pts[:, 1] < g.plane_y + g.min_thickness):
        raise MeshQualityError("flange curve runs into the base plane")

    # retainer block: columns at the curve abscissae, rows blend linearly
    # from the curve up to the flat top face
    nrow1, ncol1 = g.n1_rows + 1, g.n1_cols + 1
    frac1 = np.linspace(0.0, 1.0, nrow1)[:, None]
    ret_y = ret_pts[None, :, 1] * (1.0 - frac1) + g.retainer_top * frac1
    ret_nodes = np.stack(
        [np.broadcast_to(ret_pts[None, :, 0], ret_y.shape), ret_y], axis=-1
    ).reshape(-1, 2)
    quads1 = _grid_quads(nrow1, ncol1)

    # flange block: rows blend from the base plane up to the curve
    nrow2, ncol2 = g.n2_rows + 1, g.n2_cols + 1
    frac2 = np.linspace(0.0, 1.0, nrow2)[:, None]
    fla_y = g.plane_y + (fla_pts[None, :, 1] - g.plane_y) * frac2
    fla_nodes = np.stack(
        [np.broadcast_to(fla_pts[None, :, 0], fla_y.shape), fla_y], axis=-1
    ).reshape(-1, 2)
    off = ret_nodes.shape[0]
    quads2 = _grid_quads(nrow2, ncol2, offset=off)

    coords = np.vstack([ret_nodes, fla_nodes])
    quads = np.vstack([quads1, quads2])

    ret_bottom = np.arange(ncol1)                       # row 0 of retainer
    ret_top = (nrow1 - 1) * ncol1 + np.arange(ncol1)
    fla_bottom = off + np.arange(ncol2)
    fla_top = off + (nrow2 - 1) * ncol2 + np.arange(ncol2)
    node_sets = {
        "dirichlet_x": np.concatenate(
            [np.arange(0, nrow1 * ncol1, ncol1), off + np.arange(0, nrow2 * ncol2, ncol2)]
        ),
        "dirichlet_y": np.array([], dtype=np.int64),
        # band face walked -x so the outward normal points +y
        "band_face": ret_top[::-1].copy(),
        "base_chain": fla_bottom,                       # rests on y = plane_y
    }
    contact_sides = (ret_bottom, fla_top)
    mesh = Mesh(coords, quads, node_sets, contact_sides)
    _check_jacobians(coords, quads)
    return mesh


# ---------------------------------------------------------------------------
# design velocities and export
# ---------------------------------------------------------------------------

def _same_topology(a: Mesh, b: Mesh) -> bool:
    if not np.array_equal(a.quads, b.quads):
        return False
    if set(a.node_sets) != set(b.node_sets):
        return False
    for k in a.node_sets:
        if not np.array_equal(a.node_sets[k], b.node_sets[k]):
            return False
    return all(
        np.array_equal(x, y) for x, y in zip(a.contact_sides, b.contact_sides)
    )


def design_velocity(builder, rho, h=None) -> np.ndarray:
    """Central-difference derivative of nodal coordinates wrt the design.

    Args:
        builder: callable rho -> Mesh with fixed topology.
        rho: (p,) design vector.
        h: optional per-component steps; default 1e-6 * (1 + |rho_i|).

    Returns:
        (2 * n_nodes, p) array of coordinate velocities (xy interleaved).

    Raises TopologyError if connectivity or any node set changes between
    the plus and minus builds.
    """
    rho = np.asarray(rho, dtype=float)
    p = rho.size
    if h is None:
        h = 1e-6 * (1.0 + np.abs(rho))
    else:
        h = np.broadcast_to(np.asarray(h, dtype=float), (p,))
    base = builder(rho)
    vel = np.zeros((2 * base.n_nodes, p))
    for i in range(p):
        dr = np.zeros(p)
        dr[i] = h[i]
        plus = builder(rho + dr)
        minus = builder(rho - dr)
        if not (_same_topology(base, plus) and _same_topology(base, minus)):
            raise TopologyError(
                f"mesh topology changed while perturbing design component {i}"
            )
        vel[:, i] = (plus.coords - minus.coords).ravel() / (2.0 * h[i])
    return vel


def export_mesh_csv(mesh: Mesh, directory: str) -> tuple:
    """Write coords.csv (node,x,y) and quads.csv (elem,n0..n3); return paths."""
    os.makedirs(directory, exist_ok=True)
    cpath = os.path.join(directory, "coords.csv")
    qpath = os.path.join(directory, "quads.csv")
    with open(cpath, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node", "x", "y"])
        for i, (x, y) in enumerate(mesh.coords):
            w.writerow([i, f"{x:.12g}", f"{y:.12g}"])
    with open(qpath, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["elem", "n0", "n1", "n2", "n3"])
        for e, q in enumerate(mesh.quads):
            w.writerow([e, *map(int, q)])
    return cpath, qpath
