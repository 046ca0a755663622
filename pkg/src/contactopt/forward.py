"""Forward contact solve: a strictly convex QP with inequality rows.

The equilibrium of a linear-elastic assembly subject to frictionless
unilateral contact is

    minimize   0.5 u' K u - f' u
    subject to g0 + G u >= 0,

solved with a Mehrotra predictor-corrector interior-point method on the
slacked KKT system followed by an active-set polish that re-solves the
equality-constrained saddle problem on the converged working set.  The
polish removes the O(mu) interior smearing so complementarity holds to
machine precision and the active set is crisp for sensitivity analysis.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .elasticity import SystemMatrices
from .errors import FactorizationError, ForwardSolveError, RankError
from .linalg import cholesky, saddle_solve, solve, sym
from .mortar import MortarData

__all__ = [
    "ForwardOptions",
    "ForwardProblem",
    "ForwardSolution",
    "KktResiduals",
    "kkt_residuals",
    "solve_forward",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ForwardOptions:
    """Interior-point controls.

    Attributes:
        tol: relative KKT tolerance (scaled by the problem magnitude).
        max_iter: iteration cap before ForwardSolveError.
        ftb: fraction-to-boundary factor keeping (s, lam) positive.
        polish: run the active-set refinement after convergence.
    """

    tol: float = 1e-9
    max_iter: int = 200
    ftb: float = 0.995
    polish: bool = True


@dataclass
class ForwardProblem:
    """Reduced-space contact QP data.

    Attributes:
        k: (n, n) symmetric stiffness on free dofs.
        f: (n,) load vector.
        g: (m, n) constraint gradient, rows g0 + g @ u >= 0.
        g0: (m,) reference gaps.
        weights: (m,) pressure-row weights carried through for reporting.
        sysm: optional assembly bookkeeping for full-dof expansion.
        mortar: optional constraint provenance (row nodes, normals).
    """

    k: np.ndarray
    f: np.ndarray
    g: np.ndarray
    g0: np.ndarray
    weights: np.ndarray | None = None
    sysm: SystemMatrices | None = None
    mortar: MortarData | None = None

    @classmethod
    def from_parts(cls, sysm: SystemMatrices, mortar: MortarData) -> "ForwardProblem":
        g_red = mortar.g[:, sysm.free]
        return cls(
            k=sysm.k,
            f=sysm.f,
            g=g_red,
            g0=mortar.g0.copy(),
            weights=mortar.weights.copy(),
            sysm=sysm,
            mortar=mortar,
        )

    @property
    def n(self) -> int:
        return self.f.shape[0]

    @property
    def m(self) -> int:
        return self.g0.shape[0]

    @property
    def scale(self) -> float:
        return 1.0 + max(
            float(np.max(np.abs(self.f))) if self.f.size else 0.0,
            float(np.max(np.abs(self.g0))) if self.g0.size else 0.0,
        )

    def expand(self, u: np.ndarray) -> np.ndarray:
        if self.sysm is None:
            return np.asarray(u, dtype=float)
        return self.sysm.expand(u)


@dataclass(frozen=True)
class KktResiduals:
    """Unscaled KKT residual norms of a primal-dual point."""

    stationarity: float
    primal: float
    complementarity: float
    scale: float

    @property
    def worst(self) -> float:
        return max(self.stationarity, self.primal, self.complementarity)


@dataclass
class ForwardSolution:
    u: np.ndarray
    lam: np.ndarray
    gaps: np.ndarray
    active: np.ndarray
    iterations: int
    residuals: KktResiduals
    polished: bool
    u_full: np.ndarray = field(repr=False, default=None)


def kkt_residuals(problem: ForwardProblem, u, lam, gaps=None) -> KktResiduals:
    """Residuals of stationarity, primal feasibility, complementarity.

    Primal feasibility counts only violation (negative gap); dual
    feasibility counts only negative multipliers, folded into the
    stationarity figure.
    """
    u = np.asarray(u, dtype=float)
    lam = np.asarray(lam, dtype=float)
    if gaps is None:
        gaps = problem.g0 + problem.g @ u if problem.m else np.zeros(0)
    r_d = problem.k @ u - problem.f
    if problem.m:
        r_d -= problem.g.T @ lam
    stat = float(np.max(np.abs(r_d))) if r_d.size else 0.0
    if lam.size:
        stat = max(stat, float(np.max(-np.minimum(lam, 0.0))))
    prim = float(np.max(-np.minimum(gaps, 0.0))) if gaps.size else 0.0
    comp = float(np.max(np.abs(lam * gaps))) if lam.size else 0.0
    return KktResiduals(stat, prim, comp, problem.scale)


def _max_step(x: np.ndarray, dx: np.ndarray) -> float:
    neg = dx < 0.0
    if not np.any(neg):
        return 1.0
    return min(1.0, float(np.min(-x[neg] / dx[neg])))


def _condensed_factor(k, g, s, lam):
    """Factor K + G' diag(lam/s) G; return a solve closure.

    The condensed matrix is symmetric positive definite whenever the
    active rows pin the assembly's rigid modes; a dense LU fallback
    covers loss of definiteness from roundoff at extreme barrier
    parameters.
    """
    mat = k + g.T @ ((lam / s)[:, None] * g)
    mat = 0.5 * (mat + mat.T)
    try:
        factor = cholesky(sym(mat))
        return lambda rhs: solve(factor, rhs)
    except FactorizationError:
        import scipy.linalg

        lu = scipy.linalg.lu_factor(mat)
        return lambda rhs: scipy.linalg.lu_solve(lu, rhs)


def _interior_point(problem: ForwardProblem, opts: ForwardOptions):
    k, f, g, g0 = problem.k, problem.f, problem.g, problem.g0
    n, m = problem.n, problem.m
    scale = problem.scale
    u = np.zeros(n)
    gap_mag = max(1.0, float(np.max(np.abs(g0))))
    s = np.maximum(g0, 0.1 * gap_mag)
    # bodies supported only through contact make K nearly singular, so the
    # first condensed systems are governed by the lam/s barrier weights;
    # scale the initial multipliers to the applied load so that rigid-mode
    # responses start at the physical displacement scale
    row_mag = float(np.max(np.abs(g))) if m else 1.0
    lam0 = max(1.0, float(np.max(np.abs(f))) / max(1e-12, row_mag))
    lam = np.full(m, lam0)
    for it in range(opts.max_iter):
        r_d = k @ u - f - g.T @ lam
        r_p = g0 + g @ u - s
        comp = lam * s
        err = max(
            float(np.max(np.abs(r_d))),
            float(np.max(np.abs(r_p))),
            float(np.max(comp)),
        )
        if err <= opts.tol * scale:
            return u, lam, s, it, True
        mu = float(comp.sum()) / m
        apply_inv = _condensed_factor(k, g, s, lam)

        def newton(rc):
            rhs = -r_d - g.T @ ((rc + lam * r_p) / s)
            du = apply_inv(rhs)
            ds = g @ du + r_p
            dlam = -(rc + lam * ds) / s
            return du, ds, dlam

        du_a, ds_a, dlam_a = newton(comp)
        a_p = _max_step(s, ds_a)
        a_d = _max_step(lam, dlam_a)
        mu_aff = float((s + a_p * ds_a) @ (lam + a_d * dlam_a)) / m
        # a blocked affine step can push mu_aff past mu; centering must
        # still aim inside the current neighborhood, so cap sigma at one
        sigma = min(1.0, mu_aff / mu) ** 3 if mu > 0.0 else 0.0
        rc = comp + ds_a * dlam_a - sigma * mu
        du, ds, dlam = newton(rc)
        alpha = opts.ftb * min(_max_step(s, ds), _max_step(lam, dlam))
        u += alpha * du
        s += alpha * ds
        lam += alpha * dlam
        log.debug("ip iter %d: mu=%.3e err=%.3e alpha=%.3f", it, mu, err, alpha)
    r_d = k @ u - f - g.T @ lam
    r_p = g0 + g @ u - s
    err = max(
        float(np.max(np.abs(r_d))),
        float(np.max(np.abs(r_p))),
        float(np.max(lam * s)),
    )
    return u, lam, s, opts.max_iter, err <= 1e-6 * scale


def _polish(problem: ForwardProblem, u, lam, s):
    """Exact solve on the working set guessed from the interior point.

    Active rows get their gap pinned to zero; the guess is corrected by
    dropping negative multipliers and adding violated rows, a few
    rounds at most (the interior point already identified the set up to
    ties).  Returns None when no verified set is found.
    """
    k, f, g, g0 = problem.k, problem.f, problem.g, problem.g0
    m = problem.m
    scale = problem.scale
    lam_mag = max(1.0, float(np.max(lam)) if m else 1.0)
    gap_mag = max(1.0, float(np.max(np.abs(g0))) if m else 1.0)
    active = (lam / lam_mag) > (s / gap_mag)
    for _ in range(6):
        idx = np.flatnonzero(active)
        try:
            u_p, lam_a = saddle_solve(k, g[idx], f, -g0[idx])
        except (FactorizationError, RankError):
            return None
        lam_p = np.zeros(m)
        lam_p[idx] = lam_a
        gaps = g0 + g @ u_p
        tol_l = 1e-10 * max(1.0, float(np.max(np.abs(lam_p))) if m else 1.0)
        tol_g = 1e-10 * gap_mag
        bad_neg = idx[lam_a < -tol_l] if idx.size else np.zeros(0, dtype=int)
        inactive = np.flatnonzero(~active)
        bad_gap = inactive[gaps[inactive] < -tol_g] if inactive.size else np.zeros(0, dtype=int)
        if bad_neg.size == 0 and bad_gap.size == 0:
            np.clip(lam_p, 0.0, None, out=lam_p)
            gaps[idx] = 0.0
            return u_p, lam_p, gaps, active
        active[bad_neg] = False
        active[bad_gap] = True
        log.debug(
            "polish adjust: drop %d rows, add %d rows", bad_neg.size, bad_gap.size
        )
    return None


def solve_forward(problem: ForwardProblem, opts: ForwardOptions | None = None) -> ForwardSolution:
    """Solve the contact QP to the requested KKT tolerance.

    Raises:
        ForwardSolveError: the interior point failed to reach even a
            loose tolerance within the iteration cap and the polish
            could not certify a solution.
    """
    opts = opts or ForwardOptions()
    if problem.m == 0:
        factor = cholesky(sym(problem.k))
        u = solve(factor, problem.f)
        res = kkt_residuals(problem, u, np.zeros(0))
        return ForwardSolution(
            u=u,
            lam=np.zeros(0),
            gaps=np.zeros(0),
            active=np.zeros(0, dtype=bool),
            iterations=0,
            residuals=res,
            polished=False,
            u_full=problem.expand(u),
        )
    u, lam, s, iters, converged = _interior_point(problem, opts)
    polished = False
    if opts.polish:
        refined = _polish(problem, u, lam, s)
        if refined is not None:
            u, lam, gaps, active = refined
            res = kkt_residuals(problem, u, lam, gaps)
            if res.worst <= opts.tol * problem.scale:
                return ForwardSolution(
                    u=u,
                    lam=lam,
                    gaps=gaps,
                    active=active,
                    iterations=iters,
                    residuals=res,
                    polished=True,
                    u_full=problem.expand(u),
                )
            log.debug("polish rejected: residual %.3e", res.worst)
    if not converged:
        res = kkt_residuals(problem, u, lam)
        raise ForwardSolveError(
            f"interior point stalled after {iters} iterations "
            f"(worst residual {res.worst:.3e}, scale {problem.scale:.3e})",
            residuals=res,
        )
    gaps = problem.g0 + problem.g @ u
    res = kkt_residuals(problem, u, lam, gaps)
    lam_mag = max(1.0, float(np.max(lam)))
    active = lam > 1e-8 * lam_mag
    return ForwardSolution(
        u=u,
        lam=lam,
        gaps=gaps,
        active=active,
        iterations=iters,
        residuals=res,
        polished=polished,
        u_full=problem.expand(u),
    )
