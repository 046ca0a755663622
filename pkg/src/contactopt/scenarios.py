"""Design problems: wedge press-fit, clamp-lite seal, analytic fixtures.

Each scenario bundles a design box, an initial design, and an
``evaluate(rho)`` that runs the forward contact solves and returns the
objective, the scaled inequality constraints (feasible means c >= 0),
and optionally their design derivatives through the KKT sensitivity
path.  Constraints are expressed on the multipliers directly: the
weighted-gap rows make the multipliers nodal values of the interpolated
contact pressure field, so pressure limits are linear functionals of
lambda.

Wedge: a trapezoidal slider is pushed by a face pressure P1 up against
an inclined seat; a side pressure P2 arrives in a second load snapshot.
Design is (theta1, theta2, P1); the objective is P1 itself, constrained
by a pressure floor on the four uppermost element segments and a
pressure ceiling on all eleven, per snapshot.

Clamp-lite: a retainer block with a Bezier lower face is pressed by a
band pressure onto a flange block with a Bezier upper face; the flange
rests on a rigid plane.  Design is the four middle control-point
ordinates; the objective is compliance, constrained by a seal-pressure
sum at the flange's bottom-left, a floor on the peak interface element
pressure, and a ceiling on every element pressure.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from . import elasticity, forward, geometry, mortar, sensitivity
from .errors import DomainError

__all__ = [
    "EvalResult",
    "ClampLiteScenario",
    "WedgeScenario",
    "ParabolaScenario",
    "CircleScenario",
    "Quad1dScenario",
    "make_scenario",
    "scenario_ids",
    "segment_groups",
    "segment_pressure",
]

log = logging.getLogger(__name__)


@dataclass
class EvalResult:
    """One design evaluation.

    Attributes:
        rho: evaluated design.
        objective: scalar to minimize.
        constraints: (q,) scaled inequalities, feasible iff all >= 0.
        gradient: (p,) objective derivative, None when not requested.
        jacobian: (q, p) constraint derivative, None when not requested.
        aux: reporting payload (pressure profiles, solver stats).
    """

    rho: np.ndarray
    objective: float
    constraints: np.ndarray
    gradient: np.ndarray | None = None
    jacobian: np.ndarray | None = None
    aux: dict = field(default_factory=dict)

    @property
    def violation(self) -> float:
        if self.constraints.size == 0:
            return 0.0
        return float(max(0.0, -np.min(self.constraints)))

    def feasible(self, tol: float = 0.0) -> bool:
        return self.violation <= tol


def segment_groups(n_nodes: int, nodes_per_group: int = 3, stride: int = 2):
    """Index groups of consecutive chain nodes with shared endpoints.

    The default (3 nodes, stride 2) tiles a 23-node chain into 11
    two-element segments whose boundary nodes belong to both neighbors.
    """
    if nodes_per_group < 1:
        raise DomainError("empty segment group")
    groups = []
    start = 0
    while start + nodes_per_group <= n_nodes:
        groups.append(np.arange(start, start + nodes_per_group))
        start += stride
    if not groups or groups[-1][-1] != n_nodes - 1:
        raise DomainError(
            f"chain of {n_nodes} nodes does not tile into groups of "
            f"{nodes_per_group} with stride {stride}"
        )
    return groups


def segment_pressure(lam: np.ndarray, groups) -> np.ndarray:
    """Per-segment pressure: arithmetic mean of the group's nodal values."""
    lam = np.asarray(lam, dtype=float)
    out = np.empty(len(groups))
    for k, g in enumerate(groups):
        if len(g) == 0:
            raise DomainError("empty segment group")
        out[k] = lam[g].mean()
    return out


def _averaging_matrix(groups, m: int) -> np.ndarray:
    b = np.zeros((len(groups), m))
    for k, g in enumerate(groups):
        b[k, g] = 1.0 / len(g)
    return b


# ---------------------------------------------------------------------------
# wedge


class WedgeScenario:
    """Slider-on-seat press: minimize the drive pressure P1.

    Design rho = (theta1 deg, theta2 deg, P1).  Two quasi-static
    snapshots are solved per evaluation: t5 with (P1, P2=0) and t10
    with (P1, P2).  Constraint layout (q = 30, scaled):

        rows  0..3   floor on top-4 segment pressures at t5
        rows  4..7   floor on top-4 segment pressures at t10
        rows  8..18  ceiling on all 11 segment pressures at t5
        rows 19..29  ceiling on all 11 segment pressures at t10

    Floors are (seg - lam_floor)/max(1, lam_floor); ceilings are
    (lam_cap - seg)/lam_cap.
    """

    name = "wedge"
    variable_names = ("theta1", "theta2", "p1")

    def __init__(
        self,
        geom: geometry.WedgeGeometry | None = None,
        material: elasticity.Material | None = None,
        lam_floor: float = 1.0,
        lam_cap: float = 20.0,
        alpha: float = 0.4,
        p2: float = 2.0,
        p1_bounds: tuple[float, float] = (0.5, 1.5),
    ):
        self.geom = geom or geometry.WedgeGeometry()
        self.material = material or elasticity.Material(200.0, 0.3)
        self.lam_floor = float(lam_floor)
        self.lam_cap = float(lam_cap)
        self.alpha = float(alpha)
        self.p2 = float(p2)
        self.lower = np.array([self.geom.theta_min, self.geom.theta_min, p1_bounds[0]])
        self.upper = np.array([self.geom.theta_max, self.geom.theta_max, p1_bounds[1]])
        self.rho0 = np.array([39.0, 41.0, 1.0])
        #: known-feasible design used to seed Bayesian runs; the slider
        #: only presses its upper segments once theta1 sits at the low
        #: bound, so the feasible set hugs theta1 = 30
        self.feasible_seed = np.array([30.0, 43.0, 1.05])
        n_chain = self.geom.n2_rows + 1
        self._groups = segment_groups(n_chain)
        self._avg = None  # (11, m) built lazily once chain length is known
        # the floor applies to the alpha-fraction of segments nearest the
        # top of the incline; with 11 segments that is 4
        self._n_floor = int(self.alpha * len(self._groups))
        self._top = None
        self.q = 2 * self._n_floor + 2 * len(self._groups)

    # -- construction --------------------------------------------------

    def _problems(self, rho) -> list[forward.ForwardProblem]:
        theta1, theta2, p1 = (float(v) for v in rho)
        mesh = geometry.build_wedge_mesh(theta1, theta2, self.geom)
        md = mortar.build_mortar(mesh)
        load_p1 = elasticity.Traction("p1_face", "pressure", p1)
        load_p2 = elasticity.Traction("p2_face", "pressure", self.p2)
        probs = []
        for loads in ([load_p1], [load_p1, load_p2]):
            sysm = elasticity.assemble(mesh, self.material, loads)
            probs.append(forward.ForwardProblem.from_parts(sysm, md))
        if self._top is None:
            chain = mesh.contact_sides[1]
            midy = np.array([mesh.coords[chain[g], 1].mean() for g in self._groups])
            order = np.argsort(-midy, kind="stable")[: self._n_floor]
            self._top = np.sort(order)
            self._avg = _averaging_matrix(self._groups, chain.size)
        return probs

    # -- evaluation ----------------------------------------------------

    def evaluate(self, rho, gradient: bool = True) -> EvalResult:
        rho = np.asarray(rho, dtype=float)
        if rho.shape != (3,):
            raise DomainError(f"wedge design must have 3 components, got {rho.shape}")
        problems = self._problems(rho)
        sols = [forward.solve_forward(p) for p in problems]
        seg = [self._avg @ s.lam for s in sols]
        floor_scale = max(1.0, self.lam_floor)
        c = np.concatenate(
            [(s[self._top] - self.lam_floor) / floor_scale for s in seg]
            + [(self.lam_cap - s) / self.lam_cap for s in seg]
        )
        aux = {
            "snapshots": [
                self._snapshot_aux("t5", problems[0], sols[0], seg[0]),
                self._snapshot_aux("t10", problems[1], sols[1], seg[1]),
            ]
        }
        objective = float(rho[2])
        if not gradient:
            return EvalResult(rho, objective, c, aux=aux)
        states = [(s.u, s.lam) for s in sols]
        bundles = sensitivity.design_derivative_bundle(self._problems, rho, states)
        dseg = []
        for prob, sol, bundle in zip(problems, sols, bundles):
            _, dlam = sensitivity.solve_sensitivity(prob, sol, bundle)
            dseg.append(self._avg @ dlam)
        jac = np.vstack(
            [d[self._top] / floor_scale for d in dseg]
            + [-d / self.lam_cap for d in dseg]
        )
        grad = np.array([0.0, 0.0, 1.0])
        return EvalResult(rho, objective, c, gradient=grad, jacobian=jac, aux=aux)

    def _snapshot_aux(self, label, problem, sol, seg):
        chain = problem.mortar.nodes
        return {
            "label": label,
            "surface": "incline",
            "nodes": chain.copy(),
            "nodal_pressure": mortar.nodal_pressure(problem.mortar, sol.lam),
            "groups": [g.copy() for g in self._groups],
            "segment_pressure": seg.copy(),
            "iterations": sol.iterations,
            "kkt": sol.residuals.worst,
        }


# ---------------------------------------------------------------------------
# clamp-lite


class ClampLiteScenario:
    """Band-seated clamp: minimize compliance under pressure windows.

    Design rho = the four middle Bezier ordinates (retainer pair first).
    One static solve per evaluation.  Constraint layout (q = 42,
    scaled):

        row 0        seal: sum of the 4 bottom-left base pressures >= seal_min
        row 1        floor on the peak interface element pressure
                     (p-norm aggregate on the gradient path, exact max
                     otherwise)
        rows 2..41   ceiling on each of the 40 element pressures
    """

    name = "clamp-lite"
    variable_names = ("r_p2y", "r_p3y", "f_p2y", "f_p3y")

    def __init__(
        self,
        geom: geometry.ClampLiteGeometry | None = None,
        material: elasticity.Material | None = None,
        band_pressure: float = 150.0,
        seal_min: float = 30.0,
        window: tuple[float, float] = (300.0, 650.0),
        pnorm: float = 8.0,
        aggregation: str = "p-norm",
        seal_nodes: int = 4,
        gravity: float = 2.5,
    ):
        if aggregation not in ("p-norm", "exact-max"):
            raise DomainError(f"unknown aggregation {aggregation!r}")
        self.geom = geom or geometry.ClampLiteGeometry()
        self.material = material or elasticity.Material(2.0e6, 0.3)
        self.band_pressure = float(band_pressure)
        # a light dead load keeps the flange seated with strictly positive
        # base pressure everywhere, so the active set is unambiguous and
        # the seal constraint keeps a usable derivative
        self.gravity = float(gravity)
        self.seal_min = float(seal_min)
        self.window = (float(window[0]), float(window[1]))
        self.pnorm = float(pnorm)
        self.aggregation = aggregation
        self.seal_nodes = int(seal_nodes)
        self.lower = np.asarray(self.geom.rho_l, dtype=float)
        self.upper = np.asarray(self.geom.rho_u, dtype=float)
        # the published starting point has its second ordinate below the
        # box; evaluation accepts it, optimizers get the clipped point
        self.rho0_raw = np.array([0.35, 0.32, 0.45, 0.41])
        self.rho0 = np.clip(self.rho0_raw, self.lower, self.upper)
        #: the interface curves conform exactly at this design (uniform
        #: 0.01 interference), so the band load seats the full width and
        #: every pressure constraint holds
        self.feasible_seed = np.array([0.40713, 0.35344, 0.443, 0.38343])
        self._n_pair = self.geom.n2_cols + 1
        self.q = 2 + self.geom.n2_cols

    def _problems(self, rho) -> list[forward.ForwardProblem]:
        mesh = geometry.build_clamp_lite_mesh(np.asarray(rho, dtype=float), self.geom)
        pair = mortar.build_mortar(mesh)
        base = mortar.plane_contact(mesh, "base_chain", plane=self.geom.plane_y, axis=1)
        md = mortar.stack_mortar([pair, base])
        band = elasticity.Traction("band_face", "pressure", self.band_pressure)
        sysm = elasticity.assemble(
            mesh, self.material, [band], body_force=(0.0, -self.gravity)
        )
        return [forward.ForwardProblem.from_parts(sysm, md)]

    def _split(self, lam):
        return lam[: self._n_pair], lam[self._n_pair :]

    def evaluate(self, rho, gradient: bool = True) -> EvalResult:
        rho = np.asarray(rho, dtype=float)
        if rho.shape != (4,):
            raise DomainError(f"clamp design must have 4 components, got {rho.shape}")
        (problem,) = self._problems(rho)
        sol = forward.solve_forward(problem)
        lam_pair, lam_base = self._split(sol.lam)
        elem = 0.5 * (lam_pair[:-1] + lam_pair[1:])
        seal = float(lam_base[: self.seal_nodes].sum())
        lo, hi = self.window
        if self.aggregation == "p-norm":
            agg = float(np.sum(elem**self.pnorm) ** (1.0 / self.pnorm)) if elem.size else 0.0
        else:
            agg = float(np.max(elem))
        c = np.concatenate(
            [
                [(seal - self.seal_min) / self.seal_min, (agg - lo) / lo],
                (hi - elem) / hi,
            ]
        )
        compliance = float(sol.u @ (problem.k @ sol.u))
        aux = {
            "snapshots": [
                {
                    "label": "static",
                    "surface": "interface",
                    "nodes": problem.mortar.nodes[: self._n_pair].copy(),
                    "nodal_pressure": lam_pair.copy(),
                    "groups": [np.array([k, k + 1]) for k in range(elem.size)],
                    "segment_pressure": elem.copy(),
                    "iterations": sol.iterations,
                    "kkt": sol.residuals.worst,
                },
                {
                    "label": "static",
                    "surface": "base",
                    "nodes": problem.mortar.nodes[self._n_pair :].copy(),
                    "nodal_pressure": lam_base.copy(),
                    "groups": [],
                    "segment_pressure": np.zeros(0),
                    "iterations": sol.iterations,
                    "kkt": sol.residuals.worst,
                },
            ],
            "seal": seal,
            "aggregate": agg,
        }
        if not gradient:
            return EvalResult(rho, compliance, c, aux=aux)
        (bundle,) = sensitivity.design_derivative_bundle(
            self._problems, rho, [(sol.u, sol.lam)]
        )
        du, dlam = sensitivity.solve_sensitivity(problem, sol, bundle)
        dlam_pair, dlam_base = dlam[: self._n_pair], dlam[self._n_pair :]
        delem = 0.5 * (dlam_pair[:-1] + dlam_pair[1:])
        dseal = dlam_base[: self.seal_nodes].sum(axis=0)
        if self.aggregation == "p-norm":
            if agg > 0.0:
                w = (np.maximum(elem, 0.0) / agg) ** (self.pnorm - 1.0)
            else:
                w = np.zeros_like(elem)
            dagg = w @ delem
        else:
            dagg = delem[int(np.argmax(elem))]
        # d(u'Ku) = u'(dK)u + 2(Ku)'du, with u'(dK)u = u . d(Ku)|_u fixed
        ku = problem.k @ sol.u
        dcomp = sol.u @ bundle.dk_u + 2.0 * (ku @ du)
        jac = np.vstack([dseal / self.seal_min, dagg / lo, -delem / hi])
        return EvalResult(
            rho, compliance, c, gradient=np.asarray(dcomp), jacobian=jac, aux=aux
        )


# ---------------------------------------------------------------------------
# analytic fixtures


class ParabolaScenario:
    """min (rho-1)^2 s.t. rho >= 2 on [0, 5]; optimum rho* = 2."""

    name = "parabola"
    variable_names = ("rho1",)

    def __init__(self):
        self.lower = np.array([0.0])
        self.upper = np.array([5.0])
        self.rho0 = np.array([0.5])
        self.feasible_seed = np.array([3.0])
        self.q = 1
        self.optimum = np.array([2.0])

    def evaluate(self, rho, gradient: bool = True) -> EvalResult:
        rho = np.asarray(rho, dtype=float)
        a = float((rho[0] - 1.0) ** 2)
        c = np.array([rho[0] - 2.0])
        if not gradient:
            return EvalResult(rho, a, c)
        return EvalResult(
            rho, a, c,
            gradient=np.array([2.0 * (rho[0] - 1.0)]),
            jacobian=np.array([[1.0]]),
        )


class CircleScenario:
    """min rho1+rho2 s.t. |rho| <= 1 on [-2,2]^2; optimum at -sqrt(2)/2."""

    name = "circle"
    variable_names = ("rho1", "rho2")

    def __init__(self):
        self.lower = np.array([-2.0, -2.0])
        self.upper = np.array([2.0, 2.0])
        self.rho0 = np.array([0.5, 0.5])
        self.feasible_seed = np.array([0.0, 0.0])
        self.q = 1
        s = np.sqrt(2.0) / 2.0
        self.optimum = np.array([-s, -s])

    def evaluate(self, rho, gradient: bool = True) -> EvalResult:
        rho = np.asarray(rho, dtype=float)
        a = float(rho.sum())
        c = np.array([1.0 - float(rho @ rho)])
        if not gradient:
            return EvalResult(rho, a, c)
        return EvalResult(
            rho, a, c,
            gradient=np.ones(2),
            jacobian=(-2.0 * rho)[None, :],
        )


class Quad1dScenario:
    """min (rho-0.3)^2 s.t. rho >= 0.5 on [0,1]; optimum 0.5, value 0.04."""

    name = "quad1d"
    variable_names = ("rho1",)

    def __init__(self):
        self.lower = np.array([0.0])
        self.upper = np.array([1.0])
        self.rho0 = np.array([0.9])
        self.feasible_seed = np.array([0.75])
        self.q = 1
        self.optimum = np.array([0.5])

    def evaluate(self, rho, gradient: bool = True) -> EvalResult:
        rho = np.asarray(rho, dtype=float)
        a = float((rho[0] - 0.3) ** 2)
        c = np.array([rho[0] - 0.5])
        if not gradient:
            return EvalResult(rho, a, c)
        return EvalResult(
            rho, a, c,
            gradient=np.array([2.0 * (rho[0] - 0.3)]),
            jacobian=np.array([[1.0]]),
        )


# ---------------------------------------------------------------------------
# registry

_GEOMETRY_FIELDS = {
    "wedge": set(geometry.WedgeGeometry.__dataclass_fields__),
    "clamp-lite": set(geometry.ClampLiteGeometry.__dataclass_fields__),
}


def _make_wedge(**params):
    geo_kw = {k: params.pop(k) for k in list(params) if k in _GEOMETRY_FIELDS["wedge"]}
    geom = replace(geometry.WedgeGeometry(), **geo_kw) if geo_kw else None
    return WedgeScenario(geom=geom, **params)


def _make_clamp(**params):
    geo_kw = {k: params.pop(k) for k in list(params) if k in _GEOMETRY_FIELDS["clamp-lite"]}
    geom = replace(geometry.ClampLiteGeometry(), **geo_kw) if geo_kw else None
    return ClampLiteScenario(geom=geom, **params)


_REGISTRY = {
    "wedge": _make_wedge,
    "clamp-lite": _make_clamp,
    "parabola": lambda **kw: ParabolaScenario(**kw),
    "circle": lambda **kw: CircleScenario(**kw),
    "quad1d": lambda **kw: Quad1dScenario(**kw),
}


def scenario_ids() -> tuple[str, ...]:
    return tuple(sorted(_REGISTRY))


def make_scenario(scenario_id: str, **params):
    """Instantiate a scenario by id with optional parameter overrides."""
    try:
        factory = _REGISTRY[scenario_id]
    except KeyError:
        raise DomainError(
            f"unknown scenario {scenario_id!r}; available: {', '.join(scenario_ids())}"
        ) from None
    try:
        return factory(**params)
    except TypeError as exc:
        raise DomainError(f"bad parameters for scenario {scenario_id!r}: {exc}") from None
