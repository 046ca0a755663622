"""Design sensitivities of contact equilibria via KKT differentiation.

At a solution with strict complementarity the active set is locally
constant, so differentiating the stationarity and active-gap equations
gives one saddle-point solve per design variable:

    [ K   -G_A' ] [ du    ]   [ df - (dK u) + (dG)' lam ]
    [ G_A   0   ] [ dlam_A] = [ -(dg0 + (dG) u)_A       ]

with dlam = 0 on inactive rows.  Rows where both the multiplier and the
gap vanish (weak activity) make the derivative set-valued; those raise
DegeneracyError instead of returning a one-sided value.

Partial derivatives of the assembled operators are obtained by central
differencing the assembly itself at frozen state (semi-analytic
approach): cheap, exact to O(h^2), and independent of the element
formulation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegeneracyError, DomainError
from .forward import ForwardProblem, ForwardSolution
from .linalg import saddle_solve

__all__ = [
    "DesignDerivs",
    "design_derivative_bundle",
    "solve_sensitivity",
    "strict_active_set",
]

#: relative threshold for the strict-complementarity gate
GATE = 1e-7


@dataclass
class DesignDerivs:
    """Partial design derivatives of the QP data at frozen state.

    All arrays have one column per design variable.

    Attributes:
        dk_u: (n, p) columns d(K u)/d rho at fixed u.
        df: (n, p) load derivative.
        dg0: (m, p) reference-gap derivative.
        dgt_lam: (n, p) columns d(G' lam)/d rho at fixed lam.
        dg_u: (m, p) columns d(G u)/d rho at fixed u.
    """

    dk_u: np.ndarray
    df: np.ndarray
    dg0: np.ndarray
    dgt_lam: np.ndarray
    dg_u: np.ndarray


def strict_active_set(sol: ForwardSolution, scale_lam=None, scale_gap=None):
    """Active rows under the strict-complementarity gate.

    Returns a boolean mask; raises DegeneracyError when any row has
    both multiplier and gap below the gate (relative to the solution's
    own magnitudes), because du/drho does not exist there.  An
    all-inactive (or all-active) solution uses scale 0, so exact zeros
    on both sides still trip the gate.
    """
    lam, gaps = sol.lam, sol.gaps
    if scale_lam is None:
        scale_lam = float(np.max(lam)) if lam.size else 0.0
    if scale_gap is None:
        scale_gap = float(np.max(gaps)) if gaps.size else 0.0
    small_lam = lam <= GATE * scale_lam
    small_gap = gaps <= GATE * scale_gap
    weak = small_lam & small_gap
    if np.any(weak):
        idx = tuple(int(i) for i in np.flatnonzero(weak))
        raise DegeneracyError(
            f"weakly active contact rows {idx}: sensitivity is set-valued",
            indices=idx,
        )
    return ~small_lam


def solve_sensitivity(problem: ForwardProblem, sol: ForwardSolution, derivs: DesignDerivs):
    """Displacement and multiplier derivatives for every design variable.

    Returns:
        (du, dlam): arrays (n, p) and (m, p); dlam rows of inactive
        constraints are identically zero.
    """
    # rows without shape-function support carry an artificial slack gap;
    # keep them out of the gap scale used by the degeneracy gate
    scale_gap = None
    if problem.weights is not None and sol.gaps.size:
        real = np.asarray(problem.weights) > 0.0
        scale_gap = float(np.max(sol.gaps[real])) if np.any(real) else 0.0
    active = strict_active_set(sol, scale_gap=scale_gap)
    idx = np.flatnonzero(active)
    p = derivs.df.shape[1]
    rhs_u = derivs.df - derivs.dk_u + derivs.dgt_lam
    rhs_c = -(derivs.dg0 + derivs.dg_u)[idx]
    du, dlam_a = saddle_solve(problem.k, problem.g[idx], rhs_u, rhs_c)
    dlam = np.zeros((problem.m, p))
    dlam[idx] = dlam_a
    return du, dlam


def design_derivative_bundle(builder, rho, states, h=None):
    """Central-difference partials of the assembled QP data.

    Args:
        builder: callable rho -> list of ForwardProblem snapshots
            sharing one geometry rebuild (load cases differ).
        rho: (p,) design vector.
        states: list of (u, lam) pairs, one per snapshot, frozen while
            differencing.
        h: optional per-variable steps; default 1e-6 * (1 + |rho_i|).

    Returns:
        list of DesignDerivs, one per snapshot.
    """
    rho = np.asarray(rho, dtype=float)
    p = rho.size
    if h is None:
        h = 1e-6 * (1.0 + np.abs(rho))
    else:
        h = np.broadcast_to(np.asarray(h, dtype=float), (p,)).copy()
    n_snap = len(states)

    def snapshot_data(problems):
        if len(problems) != n_snap:
            raise DomainError("snapshot count changed under design perturbation")
        out = []
        for prob, (u, lam) in zip(problems, states):
            if prob.n != u.shape[0] or prob.m != lam.shape[0]:
                raise DomainError("problem dimensions changed under design perturbation")
            out.append(
                (
                    prob.k @ u,
                    prob.f.copy(),
                    prob.g0.copy(),
                    prob.g.T @ lam,
                    prob.g @ u,
                )
            )
        return out

    bundles = [
        DesignDerivs(
            dk_u=np.zeros((u.shape[0], p)),
            df=np.zeros((u.shape[0], p)),
            dg0=np.zeros((lam.shape[0], p)),
            dgt_lam=np.zeros((u.shape[0], p)),
            dg_u=np.zeros((lam.shape[0], p)),
        )
        for (u, lam) in states
    ]
    for i in range(p):
        dr = np.zeros(p)
        dr[i] = h[i]
        plus = snapshot_data(builder(rho + dr))
        minus = snapshot_data(builder(rho - dr))
        for b, dp, dm in zip(bundles, plus, minus):
            inv = 1.0 / (2.0 * h[i])
            b.dk_u[:, i] = (dp[0] - dm[0]) * inv
            b.df[:, i] = (dp[1] - dm[1]) * inv
            b.dg0[:, i] = (dp[2] - dm[2]) * inv
            b.dgt_lam[:, i] = (dp[3] - dm[3]) * inv
            b.dg_u[:, i] = (dp[4] - dm[4]) * inv
    return bundles
