"""Conditioned solves and spectral certificates for dense symmetric matrices.

Everything this package certifies reduces to three primitives: solve a
symmetric linear system and decide whether the solution deserves trust, read
off extreme eigenvalues, and bound spectral norms.  The trust policy lives
here and nowhere else:

* a solve is ``ok`` only if the estimated condition number is at most
  ``COND_LIMIT`` and the refined residual satisfies
  ``norm(b - a @ x) <= RESIDUAL_TOL * (1 + norm(b))``;
* condition estimates come from the LAPACK 1-norm estimator, which for
  symmetric matrices upper-bounds the 2-norm condition number, so the gate
  errs toward distrust;
* singular or indefinite input is not an error: the solve falls back to a
  spectral pseudo-solve and reports ``ok=False`` through the condition gate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spsla
from scipy.linalg import lapack

__all__ = [
    "COND_LIMIT",
    "RESIDUAL_TOL",
    "DENSE_CUTOFF",
    "SolveReport",
    "as_sym_matrix",
    "sym_solve",
    "extreme_eigs",
    "operator_norm",
]

COND_LIMIT = 1e12
RESIDUAL_TOL = 1e-9
DENSE_CUTOFF = 4000
_SYM_TOL = 1e-12


@dataclass(frozen=True)
class SolveReport:
    """Outcome of a symmetric solve.

    ``ok`` is False whenever ``condition_estimate`` exceeds ``COND_LIMIT``
    or the residual check fails; callers must treat the solution as
    untrusted in that case (it is still the best available vector, e.g. a
    pseudo-solve for singular systems).
    """

    solution: np.ndarray
    condition_estimate: float
    ok: bool


def as_sym_matrix(a, name: str = "matrix") -> np.ndarray:
    """Validate and return a float64 symmetric matrix.

    Accepts anything array-like that is square, has finite entries, and is
    symmetric to within 1e-12 relative to its largest entry; the result is
    exactly symmetrized so downstream eigensolvers see a clean input.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be square, got shape {a.shape}")
    if a.shape[0] == 0:
        raise ValueError(f"{name} must have positive order")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    scale = max(1.0, float(np.abs(a).max()))
    skew = float(np.abs(a - a.T).max())
    if skew > _SYM_TOL * scale:
        raise ValueError(f"{name} is not symmetric (max asymmetry {skew:.3e})")
    return (a + a.T) / 2.0


def _pseudo_solve(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, float]:
    # Spectral fallback for matrices Cholesky rejects. Rank decisions use
    # the usual n * eps * max|eig| cutoff; dropped directions make the
    # condition estimate infinite, which the ok gate then refuses.
    w, q = np.linalg.eigh(a)
    absw = np.abs(w)
    top = float(absw.max())
    if top == 0.0:
        return np.zeros_like(b), math.inf
    keep = absw > a.shape[0] * np.finfo(float).eps * top
    x = q[:, keep] @ ((q[:, keep].T @ b) / w[keep])
    cond = top / float(absw[keep].min()) if bool(keep.all()) else math.inf
    return x, cond


def sym_solve(a, b) -> SolveReport:
    """Solve ``a @ x = b`` for symmetric ``a`` with a trust verdict.

    The positive definite path is a Cholesky factorization with a LAPACK
    reciprocal-condition estimate and one step of iterative refinement.
    Non-definite or singular input drops to an eigendecomposition
    pseudo-solve instead of raising; only malformed input (wrong shapes,
    asymmetry, non-finite entries) raises ValueError.
    """
    a = as_sym_matrix(a)
    b = np.asarray(b, dtype=float)
    if b.ndim != 1 or b.shape[0] != a.shape[0]:
        raise ValueError(f"rhs must be a vector of length {a.shape[0]}, got shape {b.shape}")
    if not np.all(np.isfinite(b)):
        raise ValueError("rhs has non-finite entries")

    anorm = float(np.abs(a).sum(axis=0).max())
    c, info = lapack.dpotrf(np.asfortranarray(a), lower=1)
    if info == 0:
        rcond, _ = lapack.dpocon(c, anorm, uplo=b"L")
        cond = math.inf if rcond == 0.0 else 1.0 / float(rcond)
        x, _ = lapack.dpotrs(c, b, lower=1)
        # One refinement step recovers the last digits the gate asks for
        # even when the condition number is near the limit.
        dx, _ = lapack.dpotrs(c, b - a @ x, lower=1)
        x = x + dx
    else:
        x, cond = _pseudo_solve(a, b)

    residual = float(np.linalg.norm(b - a @ x))
    ok = cond <= COND_LIMIT and residual <= RESIDUAL_TOL * (1.0 + float(np.linalg.norm(b)))
    return SolveReport(solution=x, condition_estimate=float(cond), ok=bool(ok))


def extreme_eigs(a, dense_cutoff: int = DENSE_CUTOFF) -> tuple[float, float]:
    """Smallest and largest eigenvalue of a symmetric matrix.

    Orders up to ``dense_cutoff`` use the direct symmetric eigensolver;
    larger orders switch to Lanczos iterations on each spectral end
    (tolerance 1e-8, at most 10 * order iterations). The cutoff is a
    parameter so both paths stay testable against each other.
    """
    a = as_sym_matrix(a)
    n = a.shape[0]
    if n <= dense_cutoff:
        w = np.linalg.eigvalsh(a)
        return float(w[0]), float(w[-1])
    lo = spsla.eigsh(a, k=1, which="SA", tol=1e-8, maxiter=10 * n,
                     return_eigenvectors=False)
    hi = spsla.eigsh(a, k=1, which="LA", tol=1e-8, maxiter=10 * n,
                     return_eigenvectors=False)
    return float(lo[0]), float(hi[0])


def operator_norm(a, dense_cutoff: int = DENSE_CUTOFF) -> float:
    """Spectral norm of a symmetric matrix, max(|eig_min|, |eig_max|)."""
    lo, hi = extreme_eigs(a, dense_cutoff=dense_cutoff)
    return max(abs(lo), abs(hi))
