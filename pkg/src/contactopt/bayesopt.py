"""Constrained Bayesian optimization with Gaussian-process surrogates.

One isotropic squared-exponential GP per output (objective and each
constraint), inputs box-scaled to the unit cube and outputs
standardized before fitting.  The length scale maximizes the log
marginal likelihood over a fixed log grid refined by golden section,
so fits are deterministic.  The acquisition is expected improvement
times the posterior probability that every constraint is nonnegative,
maximized by random search over the design box.

Internally the objective is negated so the classic maximization form
of expected improvement applies verbatim; all reported values are for
the minimization problem.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from .errors import (
    FactorizationError,
    ForwardSolveError,
    GpFitError,
    MeshQualityError,
    RankError,
)
from .linalg import CholeskyFactor, cholesky, sym

__all__ = [
    "BoResult",
    "BoSample",
    "CboOptions",
    "GPModel",
    "constrained_ei",
    "expected_improvement",
    "gp_fit",
    "gp_posterior",
    "latin_hypercube",
    "log_marginal_likelihood",
    "run_cbo",
]

log = logging.getLogger(__name__)

_SQRT_2PI = np.sqrt(2.0 * np.pi)
#: failures the sampling loop tolerates (recorded as infeasible samples)
_SOLVE_FAILURES = (ForwardSolveError, FactorizationError, RankError, MeshQualityError)


@dataclass
class GPModel:
    """Fitted zero-mean GP with squared-exponential kernel.

    x is stored in scaled coordinates, y standardized; posterior
    queries undo both transforms.
    """

    x: np.ndarray
    y: np.ndarray
    theta: float
    jitter: float
    lower: np.ndarray | None
    upper: np.ndarray | None
    y_mean: float
    y_std: float
    chol: CholeskyFactor = field(repr=False, default=None)
    alpha: np.ndarray = field(repr=False, default=None)
    lml: float = np.nan

    @property
    def t(self) -> int:
        return self.x.shape[0]

    def scale(self, rho: np.ndarray) -> np.ndarray:
        rho = np.atleast_2d(np.asarray(rho, dtype=float))
        if self.lower is None:
            return rho
        return (rho - self.lower) / (self.upper - self.lower)


def _sqdist(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aa = np.sum(a * a, axis=1)[:, None]
    bb = np.sum(b * b, axis=1)[None, :]
    return np.maximum(aa + bb - 2.0 * (a @ b.T), 0.0)


def _kernel(a: np.ndarray, b: np.ndarray, theta: float) -> np.ndarray:
    return np.exp(-_sqdist(a, b) / theta**2)


def _lml_at(x, y, theta, jitter):
    """(lml, chol, alpha) for fixed hyperparameters; None when not PD."""
    t = x.shape[0]
    k = _kernel(x, x, theta) + jitter * np.eye(t)
    try:
        factor = cholesky(sym(k))
    except FactorizationError:
        return None
    alpha = factor.solve(y)
    lml = -0.5 * float(y @ alpha) - 0.5 * factor.logdet - 0.5 * t * np.log(2.0 * np.pi)
    return lml, factor, alpha


def log_marginal_likelihood(model: GPModel) -> float:
    """Cached training-data log marginal likelihood of the fitted model."""
    return model.lml


def gp_fit(
    x,
    y,
    *,
    bounds=None,
    theta: float | None = None,
    jitter: float = 1e-8,
    standardize: bool = True,
) -> GPModel:
    """Fit the GP, optimizing theta unless one is given.

    Args:
        x: (T, p) raw sample locations.
        y: (T,) outputs.
        bounds: optional (lower, upper) box for input scaling; without
            it inputs are used as-is.
        theta: fixed length scale; None selects it by maximizing the
            log marginal likelihood over a 61-point log grid on
            [1e-2, 1e1] refined by golden section (deterministic).
        jitter: initial diagonal nugget; escalated by powers of ten up
            to 1e-4 when the covariance fails to factor.

    Raises:
        GpFitError: covariance not positive definite at maximum jitter
            (coincident samples beyond what the nugget absorbs).
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if x.shape[0] != y.shape[0] or x.shape[0] < 1:
        raise GpFitError(f"bad training shapes {x.shape}, {y.shape}")
    lower = upper = None
    if bounds is not None:
        lower = np.asarray(bounds[0], dtype=float)
        upper = np.asarray(bounds[1], dtype=float)
        x = (x - lower) / (upper - lower)
    y_mean, y_std = 0.0, 1.0
    if standardize:
        y_mean = float(np.mean(y))
        y_std = float(np.std(y))
        if y_std < 1e-12:
            y_std = 1.0
        y = (y - y_mean) / y_std

    jit = jitter
    while True:
        fit = _fit_theta(x, y, theta, jit)
        if fit is not None:
            theta_opt, lml, factor, alpha = fit
            return GPModel(
                x=x,
                y=y,
                theta=theta_opt,
                jitter=jit,
                lower=lower,
                upper=upper,
                y_mean=y_mean,
                y_std=y_std,
                chol=factor,
                alpha=alpha,
                lml=lml,
            )
        if jit >= 1e-4:
            raise GpFitError(
                f"covariance not positive definite at jitter {jit:.1e}; "
                "training rows may coincide"
            )
        jit *= 10.0


def _fit_theta(x, y, theta, jitter):
    if theta is not None:
        out = _lml_at(x, y, theta, jitter)
        if out is None:
            return None
        return (float(theta), *out)
    grid = np.logspace(-2.0, 1.0, 61)
    scores = []
    for th in grid:
        out = _lml_at(x, y, th, jitter)
        scores.append(None if out is None else out)
    if all(s is None for s in scores):
        return None
    best = max(
        (i for i, s in enumerate(scores) if s is not None),
        key=lambda i: scores[i][0],
    )
    lo = np.log(grid[max(best - 1, 0)])
    hi = np.log(grid[min(best + 1, grid.size - 1)])
    th = _golden(lambda t: _score(x, y, t, jitter), lo, hi)
    candidates = [np.exp(th), grid[best]]
    outs = [(c, _lml_at(x, y, c, jitter)) for c in candidates]
    outs = [(c, o) for c, o in outs if o is not None]
    if not outs:
        return None
    c, o = max(outs, key=lambda co: co[1][0])
    return (float(c), *o)


def _score(x, y, log_theta, jitter) -> float:
    out = _lml_at(x, y, float(np.exp(log_theta)), jitter)
    return -np.inf if out is None else out[0]


def _golden(f, lo, hi, iters=24):
    """Golden-section maximization on [lo, hi]; deterministic."""
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def gp_posterior(model: GPModel, rho):
    """Posterior mean and variance at one point or a batch.

    Returns (mu, sigma2) in the training outputs' original units;
    scalars for a single point, arrays for a batch.
    """
    rho = np.asarray(rho, dtype=float)
    single = rho.ndim == 1
    xs = model.scale(rho)
    ks = _kernel(xs, model.x, model.theta)
    mu = ks @ model.alpha
    v = model.chol.solve_lower(ks.T)
    sigma2 = np.maximum((1.0 + model.jitter) - np.sum(v * v, axis=0), 0.0)
    mu = model.y_mean + model.y_std * mu
    sigma2 = model.y_std**2 * sigma2
    if single:
        return float(mu[0]), float(sigma2[0])
    return mu, sigma2


def expected_improvement(mu, sigma, a_plus, xi: float = 0.01):
    """EI for maximization: E[max(Y - a_plus - xi, 0)], Y ~ N(mu, sigma^2).

    Exactly zero wherever sigma == 0.  Accepts scalars or arrays.
    """
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    scalar = mu.ndim == 0 and sigma.ndim == 0
    mu, sigma = np.atleast_1d(mu), np.atleast_1d(sigma)
    mu, sigma = np.broadcast_arrays(mu, sigma)
    out = np.zeros(mu.shape)
    pos = sigma > 0.0
    if np.any(pos):
        d = mu[pos] - a_plus - xi
        z = d / sigma[pos]
        out[pos] = d * ndtr(z) + sigma[pos] * np.exp(-0.5 * z * z) / _SQRT_2PI
    out = np.maximum(out, 0.0)
    return float(out[0]) if scalar else out


def _feasibility_probability(con_models, rho):
    """Product over constraints of P(c_i >= 0) under each GP posterior."""
    rho = np.atleast_2d(np.asarray(rho, dtype=float))
    pf = np.ones(rho.shape[0])
    for m in con_models:
        mu, sigma2 = gp_posterior(m, rho)
        mu, sigma2 = np.atleast_1d(mu), np.atleast_1d(sigma2)
        sigma = np.sqrt(sigma2)
        factor = np.where(sigma > 0.0, ndtr(np.divide(
            mu, sigma, out=np.zeros_like(mu), where=sigma > 0.0
        )), (mu >= 0.0).astype(float))
        pf *= factor
    return pf


def constrained_ei(obj_model: GPModel, con_models, rho, a_plus, xi: float = 0.01):
    """EI (maximization of -objective) times feasibility probability.

    a_plus is the incumbent in the objective model's standardized
    maximization units; pass the value returned by the caller's own
    bookkeeping (run_cbo keeps it consistent).
    """
    rho = np.asarray(rho, dtype=float)
    single = rho.ndim == 1
    pts = np.atleast_2d(rho)
    mu, sigma2 = gp_posterior(obj_model, pts)
    mu, sigma2 = np.atleast_1d(mu), np.atleast_1d(sigma2)
    mu_std = (mu - obj_model.y_mean) / obj_model.y_std
    sig_std = np.sqrt(sigma2) / obj_model.y_std
    ei = expected_improvement(mu_std, sig_std, a_plus, xi)
    out = np.atleast_1d(ei) * _feasibility_probability(con_models, pts)
    return float(out[0]) if single else out


def latin_hypercube(n: int, p: int, bounds, rng) -> np.ndarray:
    """n stratified samples in the box: one per axis bin per dimension.

    rng may be a seed or a Generator; the construction is fixed so a
    given seed yields one sample set.
    """
    if n < 1:
        raise ValueError("need n >= 1")
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    lower = np.asarray(bounds[0], dtype=float)
    upper = np.asarray(bounds[1], dtype=float)
    u = rng.uniform(size=(n, p))
    cells = np.empty((n, p))
    for j in range(p):
        cells[:, j] = rng.permutation(n)
    unit = (cells + u) / n
    return lower + unit * (upper - lower)


@dataclass
class BoSample:
    index: int
    rho: np.ndarray
    objective: float
    constraints: np.ndarray
    feasible: bool
    acquisition: float
    failed: bool = False


@dataclass
class BoResult:
    scenario: str
    seed: int
    budget: int
    samples: list
    rho_best: np.ndarray | None
    objective_best: float
    feasible_found: bool


@dataclass(frozen=True)
class CboOptions:
    n_init: int = 8
    n_acq: int = 10000
    xi: float = 0.01
    jitter: float = 1e-8
    allow_infeasible_start: bool = False


def run_cbo(scenario, budget: int, seed: int = 0, opts: CboOptions | None = None) -> BoResult:
    """Algorithm: LHS init + feasible seed, then EI_C-guided sampling.

    budget counts acquisition-driven evaluations; initialization adds
    n_init LHS points plus the scenario's feasible seed.  budget 0
    skips initialization and returns the evaluated seed.  A failed
    forward solve is logged as an infeasible sample (violation +inf)
    and excluded from surrogate training.  Bit-deterministic given
    (scenario, budget, seed, opts).

    Raises:
        ValueError: no feasible seed and infeasible start not allowed.
    """
    opts = opts or CboOptions()
    rng = np.random.default_rng(seed)
    lower, upper = scenario.lower, scenario.upper
    p = lower.size
    seed_point = getattr(scenario, "feasible_seed", None)
    if seed_point is None and not opts.allow_infeasible_start:
        raise ValueError(
            f"scenario {scenario.name!r} provides no feasible seed; "
            "set allow_infeasible_start to proceed on PF-only acquisition"
        )
    samples: list[BoSample] = []

    def record(rho, acquisition):
        idx = len(samples)
        try:
            r = scenario.evaluate(rho, gradient=False)
        except _SOLVE_FAILURES as exc:
            log.debug("sample %d failed: %s", idx, exc)
            s = BoSample(
                index=idx,
                rho=np.asarray(rho, dtype=float),
                objective=np.nan,
                constraints=np.full(scenario.q, -np.inf),
                feasible=False,
                acquisition=acquisition,
                failed=True,
            )
            samples.append(s)
            return s
        s = BoSample(
            index=idx,
            rho=np.asarray(rho, dtype=float),
            objective=r.objective,
            constraints=r.constraints,
            feasible=bool(np.all(r.constraints >= 0.0)),
            acquisition=acquisition,
            failed=False,
        )
        samples.append(s)
        return s

    if budget > 0:
        for rho in latin_hypercube(opts.n_init, p, (lower, upper), rng):
            record(rho, np.nan)
    if seed_point is not None:
        record(np.asarray(seed_point, dtype=float), np.nan)

    for _ in range(budget):
        good = [s for s in samples if not s.failed]
        feas = [s for s in good if s.feasible]
        cand = lower + rng.uniform(size=(opts.n_acq, p)) * (upper - lower)
        if not good:
            choice = cand[0]
            acq_val = np.nan
        else:
            x = np.array([s.rho for s in good])
            con_models = [
                gp_fit(
                    x,
                    np.array([s.constraints[i] for s in good]),
                    bounds=(lower, upper),
                    jitter=opts.jitter,
                )
                for i in range(scenario.q)
            ]
            pf = _feasibility_probability(con_models, cand)
            if feas:
                obj_model = gp_fit(
                    x,
                    np.array([-s.objective for s in good]),
                    bounds=(lower, upper),
                    jitter=opts.jitter,
                )
                best_max = max(-s.objective for s in feas)
                a_plus = (best_max - obj_model.y_mean) / obj_model.y_std
                mu, sigma2 = gp_posterior(obj_model, cand)
                mu_std = (mu - obj_model.y_mean) / obj_model.y_std
                sig_std = np.sqrt(sigma2) / obj_model.y_std
                acq = expected_improvement(mu_std, sig_std, a_plus, opts.xi) * pf
            else:
                # no feasible sample yet: chase feasibility alone
                acq = pf
            pick = int(np.argmax(acq))
            choice = cand[pick]
            acq_val = float(acq[pick])
        record(choice, acq_val)

    feas = [s for s in samples if s.feasible and not s.failed]
    if not feas:
        return BoResult(
            scenario=scenario.name,
            seed=seed,
            budget=budget,
            samples=samples,
            rho_best=None,
            objective_best=np.nan,
            feasible_found=False,
        )
    best = min(feas, key=lambda s: (s.objective, s.index))
    return BoResult(
        scenario=scenario.name,
        seed=seed,
        budget=budget,
        samples=samples,
        rho_best=best.rho.copy(),
        objective_best=best.objective,
        feasible_found=True,
    )
