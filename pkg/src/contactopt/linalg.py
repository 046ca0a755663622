"""Dense symmetric factorizations and saddle-point solves.

Thin wrappers around LAPACK via scipy.  The nonstandard piece is
``saddle_solve``, which handles the equality-constrained stationary
systems arising from contact sensitivities.  The elastic block there may
be only positive SEMI-definite (bodies restrained by contact rather than
by Dirichlet conditions), so a Schur-complement path is used when the
block factors and a dense LU of the full saddle matrix otherwise.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import FactorizationError, RankError

__all__ = [
    "SymMatrix",
    "CholeskyFactor",
    "sym",
    "cholesky",
    "solve",
    "saddle_solve",
]

#: relative asymmetry tolerated before ``sym`` refuses the input
_SYM_RTOL = 1e-10


@dataclass(frozen=True)
class SymMatrix:
    """Symmetric matrix stored densely; symmetry enforced at construction."""

    a: np.ndarray

    @property
    def n(self) -> int:
        return self.a.shape[0]


def sym(a) -> SymMatrix:
    """Validate and symmetrize a square array.

    Asymmetry beyond round-off (relative 1e-10) raises ValueError; tiny
    asymmetry is averaged away so downstream factorizations see an exactly
    symmetric operand.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    scale = np.abs(a).max() if a.size else 0.0
    skew = np.abs(a - a.T).max() if a.size else 0.0
    if scale > 0 and skew > _SYM_RTOL * scale:
        raise ValueError(f"matrix is not symmetric: |A - A^T| = {skew:.3e}")
    return SymMatrix(0.5 * (a + a.T))


@dataclass(frozen=True)
class CholeskyFactor:
    """Lower Cholesky factor L with A = L L^T."""

    l: np.ndarray

    @property
    def n(self) -> int:
        return self.l.shape[0]

    @property
    def logdet(self) -> float:
        """log det A, from the factor diagonal."""
        return 2.0 * float(np.sum(np.log(np.diag(self.l))))

    def solve(self, b):
        return solve(self, b)

    def solve_lower(self, b):
        """Solve L v = b (half solve; e.g. whitening against A)."""
        b = np.asarray(b, dtype=float)
        if self.n == 0:
            return np.zeros_like(b)
        return sla.solve_triangular(self.l, b, lower=True)


def cholesky(a) -> CholeskyFactor:
    """Factor a symmetric positive definite matrix.

    Raises FactorizationError carrying the 1-based index of the first
    non-positive pivot when the matrix is not positive definite.
    """
    if isinstance(a, SymMatrix):
        a = a.a
    a = np.ascontiguousarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if a.shape[0] == 0:
        return CholeskyFactor(np.zeros((0, 0)))
    c, info = sla.lapack.dpotrf(a, lower=1, clean=1, overwrite_a=0)
    if info > 0:
        raise FactorizationError(
            f"matrix is not positive definite (pivot {info})", pivot=int(info)
        )
    if info < 0:
        raise ValueError(f"illegal argument {-info} to dpotrf")
    return CholeskyFactor(c)


def solve(factor: CholeskyFactor, b):
    """Solve A x = b given the Cholesky factor of A.  b may be a matrix."""
    b = np.asarray(b, dtype=float)
    if factor.n == 0:
        return np.zeros_like(b)
    x, info = sla.lapack.dpotrs(factor.l, b, lower=1)
    if info != 0:
        raise ValueError(f"dpotrs failed with info={info}")
    return x


def _lu_saddle(k, g, rhs_u, rhs_c):
    """Direct LU solve of [[K, -G^T], [G, 0]]; fallback for semidefinite K."""
    n = k.shape[0]
    m_a = g.shape[0]
    mat = np.zeros((n + m_a, n + m_a))
    mat[:n, :n] = k
    mat[:n, n:] = -g.T
    mat[n:, :n] = g
    rhs = np.concatenate([rhs_u, rhs_c], axis=0)
    try:
        with warnings.catch_warnings():
            # exact singularity is caught by the residual check below
            warnings.simplefilter("ignore", sla.LinAlgWarning)
            lu, piv = sla.lu_factor(mat)
            x = sla.lu_solve((lu, piv), rhs)
            # one step of iterative refinement; cheap and tightens the solve
            x += sla.lu_solve((lu, piv), rhs - mat @ x)
    except (sla.LinAlgError, ValueError) as exc:
        raise RankError(f"saddle system is singular: {exc}") from exc
    if not np.all(np.isfinite(x)):
        raise RankError("saddle system is singular (non-finite solution)")
    resid = np.abs(rhs - mat @ x).max()
    scale = 1.0 + np.abs(rhs).max() + np.abs(mat).max()
    if resid > 1e-6 * scale:
        raise RankError(
            f"saddle solve residual {resid:.3e} exceeds tolerance; "
            "constraint block is likely rank deficient"
        )
    return x[:n], x[n:]


def saddle_solve(k, g_a, rhs_u, rhs_c):
    """Solve the KKT saddle system  [[K, -G_A^T], [G_A, 0]] [x; y] = [rhs_u; rhs_c].

    Args:
        k: (n, n) symmetric elastic block, positive definite on the
            nullspace of ``g_a`` (second-order sufficiency).
        g_a: (m_a, n) active constraint rows, full row rank.
        rhs_u: (n,) or (n, p) right-hand side of the stationarity rows.
        rhs_c: (m_a,) or (m_a, p) right-hand side of the constraint rows.

    Returns:
        (x, y) with the same trailing shape as the inputs.

    When K is safely positive definite the Schur complement G_A K^-1 G_A^T
    is formed and factored.  When K fails to factor, is close enough to
    semidefinite that its inverse cannot be trusted, or the Schur factor
    breaks down, the full saddle matrix is solved by dense LU instead;
    genuinely dependent active rows surface as RankError from the LU
    residual check.
    """
    if isinstance(k, SymMatrix):
        k = k.a
    k = np.asarray(k, dtype=float)
    g_a = np.asarray(g_a, dtype=float)
    rhs_u = np.asarray(rhs_u, dtype=float)
    rhs_c = np.asarray(rhs_c, dtype=float)
    n = k.shape[0]
    if g_a.ndim != 2 or g_a.shape[1] != n:
        raise ValueError(f"constraint block shape {g_a.shape} does not match n={n}")
    squeeze = rhs_u.ndim == 1
    ru = rhs_u.reshape(n, -1)
    rc = rhs_c.reshape(g_a.shape[0], ru.shape[1] if g_a.shape[0] == 0 else -1)
    if ru.shape[1] != rc.shape[1]:
        raise ValueError("rhs_u and rhs_c must have matching column counts")

    if g_a.shape[0] == 0:
        x = solve(cholesky(k), ru)
        y = np.zeros((0, ru.shape[1]))
    else:
        kf = None
        try:
            kf = cholesky(k)
        except FactorizationError:
            pass
        else:
            # bodies held only by contact leave K semidefinite up to
            # roundoff; a successful factor with a collapsed pivot still
            # yields a useless inverse, so route those through the LU path
            d = np.diag(kf.l)
            if d.size and d.min() < 1e-6 * d.max():
                kf = None
        if kf is None:
            x, y = _lu_saddle(k, g_a, ru, rc)
        else:
            w = solve(kf, g_a.T)          # K^-1 G_A^T
            schur = g_a @ w
            try:
                sf = cholesky(0.5 * (schur + schur.T))
            except FactorizationError:
                x, y = _lu_saddle(k, g_a, ru, rc)
            else:
                x0 = solve(kf, ru)
                y = solve(sf, rc - g_a @ x0)
                x = x0 + w @ y
    if squeeze:
        return x[:, 0], y[:, 0]
    return x, y
