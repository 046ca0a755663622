"""Gradient-based design optimization under inequality constraints.

Solves  min a(rho)  s.t.  c(rho) >= 0,  l <= rho <= u  with a slack
interior-point method: c - s = 0 with log barriers on s and on both
bound gaps, a damped-BFGS model of the Lagrangian curvature, and a
(violation, barrier-objective) filter line search.  The barrier
parameter decreases monotonically (mu/5) once the barrier KKT system is
solved to 10*mu, and termination additionally requires mu to reach its
floor so the barrier bias on active constraints is below the reported
tolerances.

The evaluation callback may raise DegeneracyError (nonsmooth design
point); the driver retries from tiny random perturbations, then falls
back to a feasibility-restoration phase minimizing the squared
violation alone.  Exhausted restoration raises InfeasibleExit carrying
the best iterate seen.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import DegeneracyError, DomainError, InfeasibleExit

__all__ = [
    "IterateLog",
    "LogRow",
    "NlpOptions",
    "NlpProblem",
    "NlpResult",
    "solve_nlp",
]

log = logging.getLogger(__name__)


@dataclass
class NlpProblem:
    """Design problem handed to the optimizer.

    Attributes:
        p: number of design variables.
        q: number of inequality constraints.
        lower, upper: box bounds, componentwise lower < upper.
        eval_full: rho -> (a, c, da, jac).
        eval_cheap: rho -> (a, c); used inside line searches where
            derivatives are not needed.  Defaults to eval_full[:2].
    """

    p: int
    q: int
    lower: np.ndarray
    upper: np.ndarray
    eval_full: callable
    eval_cheap: callable = None

    def __post_init__(self):
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        if not np.all(self.lower < self.upper):
            raise DomainError("bounds must satisfy lower < upper componentwise")
        if self.eval_cheap is None:
            self.eval_cheap = lambda rho: self.eval_full(rho)[:2]

    @classmethod
    def from_scenario(cls, scenario) -> "NlpProblem":
        def full(rho):
            r = scenario.evaluate(rho, gradient=True)
            return r.objective, r.constraints, r.gradient, r.jacobian

        def cheap(rho):
            r = scenario.evaluate(rho, gradient=False)
            return r.objective, r.constraints

        return cls(
            p=scenario.lower.size,
            q=scenario.q,
            lower=scenario.lower,
            upper=scenario.upper,
            eval_full=full,
            eval_cheap=cheap,
        )


@dataclass(frozen=True)
class NlpOptions:
    tol_dual: float = 1e-4
    tol_viol: float = 1e-6
    mu0: float = 0.1
    #: barrier floor required for termination
    mu_final: float = 1e-9
    max_iter: int = 200
    ftb: float = 0.995
    seed: int = 0
    max_restorations: int = 3
    filter_gamma: float = 1e-5
    armijo: float = 1e-4


@dataclass(frozen=True)
class LogRow:
    iteration: int
    rho: np.ndarray
    objective: float
    violation: float
    dual_opt: float
    step_type: str


@dataclass
class IterateLog:
    rows: list = field(default_factory=list)

    def append(self, row: LogRow):
        self.rows.append(row)

    def __len__(self):
        return len(self.rows)


@dataclass
class NlpResult:
    rho: np.ndarray
    objective: float
    constraints: np.ndarray
    multipliers: np.ndarray
    iterations: int
    converged: bool
    status: str
    log: IterateLog
    violation: float
    dual_opt: float


def _violation(c: np.ndarray) -> float:
    if c.size == 0:
        return 0.0
    return float(max(0.0, -np.min(c)))


def _max_step(x, dx, tau):
    """Largest alpha in (0,1] with x + alpha dx >= (1 - tau) x, x > 0."""
    neg = dx < 0.0
    if not np.any(neg):
        return 1.0
    return min(1.0, float(np.min(-tau * x[neg] / dx[neg])))


class _Evaluator:
    """Degeneracy-retry wrapper around the problem callbacks.

    A degenerate evaluation is retried at up to three uniformly
    perturbed points (span 1e-6) before the error propagates; the point
    actually evaluated is returned so the outer loop stays consistent.
    """

    def __init__(self, prob: NlpProblem, rng: np.random.Generator):
        self.prob = prob
        self.rng = rng
        span = prob.upper - prob.lower
        self._lo = prob.lower + 1e-12 * span
        self._hi = prob.upper - 1e-12 * span

    def full(self, rho):
        last = None
        for attempt in range(4):
            point = rho if attempt == 0 else rho + self.rng.uniform(
                -1e-6, 1e-6, size=rho.shape
            )
            point = np.clip(point, self._lo, self._hi)
            try:
                a, c, da, jac = self.prob.eval_full(point)
            except DegeneracyError as exc:
                last = exc
                log.debug("degenerate evaluation (attempt %d): %s", attempt, exc)
                continue
            return (
                np.asarray(point, dtype=float),
                float(a),
                np.asarray(c, dtype=float),
                np.asarray(da, dtype=float),
                np.asarray(jac, dtype=float).reshape(self.prob.q, self.prob.p),
            )
        raise last

    def cheap(self, rho):
        a, c = self.prob.eval_cheap(rho)
        return float(a), np.asarray(c, dtype=float)


def _bfgs_update(b, step, dgrad):
    """Damped BFGS keeping b positive definite (Powell's correction)."""
    bs = b @ step
    sbs = float(step @ bs)
    sy = float(step @ dgrad)
    if sbs <= 0.0:
        return b
    if sy < 0.2 * sbs:
        theta = 0.8 * sbs / (sbs - sy)
        dgrad = theta * dgrad + (1.0 - theta) * bs
        sy = float(step @ dgrad)
    if sy <= 1e-16 * sbs:
        return b
    b = b - np.outer(bs, bs) / sbs + np.outer(dgrad, dgrad) / sy
    return 0.5 * (b + b.T)


class _Infeasible(Exception):
    """Internal signal: restoration failed or was exhausted."""


class _Loop:
    """State of one solve; methods mutate it in place."""

    def __init__(self, prob, rho0, opts):
        self.prob = prob
        self.opts = opts
        self.rng = np.random.default_rng(opts.seed)
        self.ev = _Evaluator(prob, self.rng)
        span = prob.upper - prob.lower
        start = np.clip(
            np.asarray(rho0, dtype=float),
            prob.lower + 1e-8 * span,
            prob.upper - 1e-8 * span,
        )
        self.mu = opts.mu0
        self.rho, self.a, self.c, self.da, self.jac = self.ev.full(start)
        self.s = np.maximum(self.c, self.mu)
        self.y = self.mu / self.s
        self.b = np.eye(prob.p)
        self.logbook = IterateLog()
        self.filt: list[tuple[float, float]] = []
        self.best = (np.inf, np.inf, self.rho.copy(), self.a)
        self.restorations = 0
        self.prev = None  # (rho, da, jac) of the previous accepted point
        self.it = 0

    # -- helpers --------------------------------------------------------

    def viol(self) -> float:
        return _violation(self.c)

    def dual_opt(self) -> float:
        zl = self.mu / (self.rho - self.prob.lower)
        zu = self.mu / (self.prob.upper - self.rho)
        r1 = self.da - self.jac.T @ self.y - zl + zu
        comp = float(np.max(np.abs(self.s * self.y))) if self.s.size else 0.0
        return max(float(np.max(np.abs(r1))), comp)

    def track_best(self):
        v = self.viol()
        rank = (0.0, self.a) if v <= self.opts.tol_viol else (v, np.inf)
        if rank < (self.best[0], self.best[1]):
            self.best = (rank[0], rank[1], self.rho.copy(), self.a)

    def barrier_phi(self, a_v, rho_v, s_v) -> float:
        return (
            a_v
            - self.mu * float(np.sum(np.log(s_v)))
            - self.mu * float(np.sum(np.log(rho_v - self.prob.lower)))
            - self.mu * float(np.sum(np.log(self.prob.upper - rho_v)))
        )

    def reset_after_restoration(self, rho_new):
        self.rho, self.a, self.c, self.da, self.jac = self.ev.full(rho_new)
        self.s = np.maximum(self.c, self.mu)
        self.y = self.mu / self.s
        self.b = np.eye(self.prob.p)
        self.filt.clear()
        self.prev = None

    def restore(self, rho_from):
        """Feasibility restoration; raises _Infeasible when exhausted.

        Minimizes 0.5 * ||min(c, 0)||^2 with Levenberg-Marquardt steps on
        the violated rows.  The violation valley typically curves through
        the design box, which defeats steepest descent; the Gauss-Newton
        model tracks it.  Marquardt scaling keeps the step sane when the
        design components live on different scales.
        """
        log.debug("iter %d: restoration phase", self.it)
        lo, hi = self.prob.lower, self.prob.upper
        rho = np.clip(rho_from, lo, hi)
        lam = 1e-3
        v_entry = None
        v = np.inf
        for _ in range(40):
            try:
                rho, a, c, _, jac = self.ev.full(rho)
            except DegeneracyError as exc:
                raise _Infeasible from exc
            neg = np.minimum(c, 0.0)
            v = _violation(c)
            self.it += 1
            self.logbook.append(
                LogRow(self.it, rho.copy(), a, v, np.nan, "restoration")
            )
            if v <= self.opts.tol_viol:
                self.reset_after_restoration(rho)
                return
            if v_entry is None:
                # a stalled-but-feasible entry resets state for free; only
                # a genuinely infeasible entry spends a restoration
                v_entry = v
                self.restorations += 1
                if self.restorations > self.opts.max_restorations:
                    raise _Infeasible
            act = neg < 0.0
            aj = jac[act]
            r = c[act]
            grad = aj.T @ r
            if float(np.max(np.abs(grad))) <= 1e-14:
                raise _Infeasible
            # freeze variables pinned at a bound that the gradient keeps
            # pushing outward; a clipped full-space step would otherwise
            # collapse to nothing at a box corner
            tiny = 1e-9 * (hi - lo)
            free = ~(
                ((rho <= lo + tiny) & (grad > 0.0))
                | ((rho >= hi - tiny) & (grad < 0.0))
            )
            if not np.any(free):
                raise _Infeasible
            ajf = aj[:, free]
            gf = grad[free]
            merit = 0.5 * float(r @ r)
            h = ajf.T @ ajf
            scale = np.maximum(np.diag(h), 1e-8)
            for _ in range(12):
                try:
                    df = np.linalg.solve(h + lam * np.diag(scale), -gf)
                except np.linalg.LinAlgError:
                    lam *= 4.0
                    continue
                d = np.zeros_like(rho)
                d[free] = df
                cand = np.clip(rho + d, lo, hi)
                _, c_t = self.ev.cheap(cand)
                neg_t = np.minimum(c_t, 0.0)
                merit_t = 0.5 * float(neg_t @ neg_t)
                if merit_t < merit * (1.0 - 1e-4) or (
                    _violation(c_t) <= self.opts.tol_viol
                ):
                    rho = cand
                    lam = max(lam / 3.0, 1e-10)
                    break
                lam *= 4.0
            else:
                break
        # hand a much-improved point back to the main loop rather than
        # declaring the problem infeasible mid-descent
        if v_entry is not None and v <= 0.1 * v_entry:
            self.reset_after_restoration(rho)
            return
        raise _Infeasible


def solve_nlp(prob: NlpProblem, rho0, opts: NlpOptions | None = None) -> NlpResult:
    """Run the interior-point outer loop from rho0.

    Returns an NlpResult; converged=False carries status "max_iter" or
    "stalled".  Raises InfeasibleExit when restoration attempts are
    exhausted without recovering feasibility.
    """
    opts = opts or NlpOptions()
    st = _Loop(prob, rho0, opts)
    status = "max_iter"
    converged = False
    try:
        while st.it < opts.max_iter:
            st.track_best()
            d_opt = st.dual_opt()
            st.logbook.append(
                LogRow(
                    st.it,
                    st.rho.copy(),
                    st.a,
                    st.viol(),
                    d_opt,
                    "normal" if st.it else "init",
                )
            )
            if (
                st.viol() <= opts.tol_viol
                and d_opt <= opts.tol_dual
                and st.mu <= opts.mu_final
            ):
                status, converged = "converged", True
                break
            took_step = _iterate(st, opts)
            if took_step is False:
                status = "stalled"
                break
            st.it += 1
    except _Infeasible:
        has_feasible = st.best[0] == 0.0 and np.isfinite(st.best[1])
        raise InfeasibleExit(
            "restoration exhausted without recovering feasibility",
            best={
                "rho": st.best[2],
                "objective": st.best[3],
                "feasible": bool(has_feasible),
                "log": st.logbook,
            },
        ) from None
    if not converged and st.viol() <= opts.tol_viol and st.dual_opt() <= opts.tol_dual:
        # tolerances met even though the mu floor was not reached
        status, converged = "converged", True
    return NlpResult(
        rho=st.rho,
        objective=st.a,
        constraints=st.c,
        multipliers=st.y,
        iterations=st.it,
        converged=converged,
        status=status,
        log=st.logbook,
        violation=st.viol(),
        dual_opt=st.dual_opt(),
    )


def _iterate(st: _Loop, opts: NlpOptions) -> bool:
    """One accepted step (or restoration); False signals a hard stall."""
    prob = st.prob
    lo, hi = prob.lower, prob.upper
    # barrier KKT error at the current mu drives the schedule; a mu
    # update takes effect immediately within this same step
    for _ in range(2):
        zl = st.mu / (st.rho - lo)
        zu = st.mu / (hi - st.rho)
        r1 = st.da - st.jac.T @ st.y - zl + zu
        r2 = st.s * st.y - st.mu
        r3 = st.c - st.s
        kkt_mu = max(
            float(np.max(np.abs(r1))),
            float(np.max(np.abs(r2))) if r2.size else 0.0,
            float(np.max(np.abs(r3))) if r3.size else 0.0,
        )
        if kkt_mu <= 10.0 * st.mu and st.mu > opts.mu_final:
            st.mu = max(st.mu / 5.0, opts.mu_final / 100.0)
            st.filt.clear()
            log.debug("iter %d: mu tightened to %.3e", st.it, st.mu)
            continue
        break
    # BFGS curvature from the previous accepted point, same multipliers
    if st.prev is not None:
        rho_p, da_p, jac_p = st.prev
        step_vec = st.rho - rho_p
        if float(step_vec @ step_vec) > 0.0:
            g_now = st.da - st.jac.T @ st.y
            g_prev = da_p - jac_p.T @ st.y
            st.b = _bfgs_update(st.b, step_vec, g_now - g_prev)
    sigma = st.y / st.s
    dbeta = st.mu / (st.rho - lo) ** 2 + st.mu / (hi - st.rho) ** 2
    h = st.b + np.diag(dbeta) + st.jac.T @ (sigma[:, None] * st.jac)
    rhs = -r1 + st.jac.T @ (st.mu / st.s - st.y - sigma * r3)
    try:
        drho = np.linalg.solve(h, rhs)
    except np.linalg.LinAlgError:
        st.b = np.eye(prob.p)
        h = st.b + np.diag(dbeta) + st.jac.T @ (sigma[:, None] * st.jac)
        drho = np.linalg.solve(h, rhs)
    ds = st.jac @ drho + r3
    dy = st.mu / st.s - st.y - sigma * ds
    tau = opts.ftb
    alpha_max = min(
        _max_step(st.rho - lo, drho, tau),
        _max_step(hi - st.rho, -drho, tau),
        _max_step(st.s, ds, tau),
    )
    alpha_y = _max_step(st.y, dy, tau)
    theta0 = float(np.sum(np.abs(r3)))
    phi0 = st.barrier_phi(st.a, st.rho, st.s)
    dphi = float((st.da - zl + zu) @ drho) - st.mu * float(np.sum(ds / st.s))
    armijo_mode = theta0 <= opts.tol_viol and dphi < 0.0
    gamma = opts.filter_gamma
    alpha = alpha_max
    cand = None
    for _ in range(40):
        rho_t = st.rho + alpha * drho
        s_t = st.s + alpha * ds
        a_t, c_t = st.ev.cheap(rho_t)
        theta_t = float(np.sum(np.abs(c_t - s_t)))
        phi_t = st.barrier_phi(a_t, rho_t, s_t)
        ok_filter = all(
            theta_t <= (1.0 - gamma) * th or phi_t <= ph - gamma * th
            for th, ph in st.filt
        )
        if ok_filter:
            if armijo_mode:
                ok = phi_t <= phi0 + opts.armijo * alpha * dphi
            else:
                ok = theta_t <= (1.0 - gamma) * theta0 or phi_t <= phi0 - gamma * theta0
            if ok:
                cand = (rho_t, s_t)
                break
        alpha *= 0.5
        if alpha * float(np.max(np.abs(drho))) < 1e-14 * (1.0 + float(np.max(np.abs(st.rho)))):
            break
    if cand is None:
        if theta0 <= opts.tol_viol:
            if st.mu > opts.mu_final:
                st.mu = max(st.mu / 5.0, opts.mu_final / 100.0)
                st.filt.clear()
                return True
            return False
        st.restore(st.rho)
        return True
    if not armijo_mode:
        st.filt.append((theta0, phi0))
    rho_t, s_t = cand
    st.prev = (st.rho.copy(), st.da.copy(), st.jac.copy())
    st.y = st.y + alpha_y * dy
    try:
        st.rho, st.a, st.c, st.da, st.jac = st.ev.full(rho_t)
    except DegeneracyError:
        st.restore(rho_t)
        return True
    st.s = s_t
    return True
