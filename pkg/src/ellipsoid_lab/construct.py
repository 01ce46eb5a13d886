"""Ellipsoid fits: the identity-perturbation construction and a baseline.

Given points x_i = (1 + eps_i)^(-1/2) v_i, the identity-perturbation fit
solves M delta = eps (M the squared Gram of the directions) and sets

    N = I + sum_i delta_i v_i v_i^T = I + K.

Each constraint then satisfies the exact identity

    (1 + eps_j) x_j^T N x_j = 1 + sum_i M_ji delta_i,

so the fit x_j^T N x_j = 1 holds whenever the solve does, and success
reduces to three certified gates: the solve is trusted, the worst residual
is at most RESIDUAL_TOL, and N is positive definite with margin PD_TOL.

The baseline is the minimum-Frobenius-norm interpolant N = sum_i c_i x_i
x_i^T with G c = 1, G_ij = (x_i . x_j)^2; it can be singular, so its
success gate only requires positive semidefiniteness.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spsla

from .gram import build_M
from .numerics import DENSE_CUTOFF, as_sym_matrix, extreme_eigs, operator_norm, sym_solve
from .sampling import SampleSet

__all__ = [
    "RESIDUAL_TOL",
    "PD_TOL",
    "FitResult",
    "identity_perturbation_fit",
    "assemble_N",
    "verify_fit",
    "least_norm_fit",
]

RESIDUAL_TOL = 1e-8
PD_TOL = 1e-9

REASON_OK = "ok"
REASON_SOLVE = "solve_failed"
REASON_RESIDUAL = "residual_too_large"
REASON_PD = "not_positive_definite"


@dataclass(frozen=True)
class FitResult:
    """Certified outcome of one fit.

    delta holds the construction coefficients (the Gram-system solution in
    both methods).  M_min_eig is the smallest eigenvalue of the solved
    Gram matrix.  success is exactly: solve ok, max_residual <=
    RESIDUAL_TOL, and N_min_eig > PD_TOL (identity_perturbation) or
    N_min_eig > -PD_TOL (least_norm, whose minimizer may be singular).
    reason names the first failed gate.
    """

    method: str
    delta: np.ndarray
    K_norm: float
    N_min_eig: float
    M_min_eig: float
    max_residual: float
    success: bool
    solve_ok: bool
    condition_estimate: float
    reason: str


def _gated(method, delta, k_norm, n_min_eig, m_min_eig, max_residual, report,
           residual_tol, pd_tol) -> FitResult:
    pd_floor = pd_tol if method == "identity_perturbation" else -pd_tol
    if not report.ok:
        reason = REASON_SOLVE
    elif not max_residual <= residual_tol:
        reason = REASON_RESIDUAL
    elif not n_min_eig > pd_floor:
        reason = REASON_PD
    else:
        reason = REASON_OK
    return FitResult(
        method=method,
        delta=delta,
        K_norm=float(k_norm),
        N_min_eig=float(n_min_eig),
        M_min_eig=float(m_min_eig),
        max_residual=float(max_residual),
        success=reason == REASON_OK,
        solve_ok=bool(report.ok),
        condition_estimate=float(report.condition_estimate),
        reason=reason,
    )


def _low_rank_extremes(base_shift: float, factors: np.ndarray, weights: np.ndarray,
                       d: int) -> tuple[float, float]:
    # Extreme eigenvalues of base_shift * I + factors^T diag(weights) factors
    # without materializing the d x d matrix.
    def matvec(x):
        return base_shift * x + factors.T @ (weights * (factors @ x))

    op = spsla.LinearOperator((d, d), matvec=matvec, dtype=float)
    lo = spsla.eigsh(op, k=1, which="SA", tol=1e-8, maxiter=10 * d,
                     return_eigenvectors=False)
    hi = spsla.eigsh(op, k=1, which="LA", tol=1e-8, maxiter=10 * d,
                     return_eigenvectors=False)
    return float(lo[0]), float(hi[0])


def identity_perturbation_fit(s: SampleSet, *, residual_tol: float = RESIDUAL_TOL,
                              pd_tol: float = PD_TOL,
                              dense_cutoff: int = DENSE_CUTOFF) -> FitResult:
    """Fit N = I + sum_i delta_i v_i v_i^T with delta solving M delta = eps.

    All certificates are populated even when a gate fails: an untrusted
    solve still yields the pseudo-solution's certificates with
    success=False and reason "solve_failed"; nothing raises on singular M.
    For d <= dense_cutoff the residual is measured directly on the
    assembled N; beyond that the exact fit identity through M is used and
    N is never materialized.
    """
    m_mat = build_M(s)
    report = sym_solve(m_mat, s.eps)
    delta = report.solution
    m_min_eig = extreme_eigs(m_mat, dense_cutoff=dense_cutoff)[0]

    if s.d <= dense_cutoff:
        n_mat = assemble_N(s, delta)
        k_lo, k_hi = extreme_eigs(n_mat - np.eye(s.d), dense_cutoff=dense_cutoff)
        max_residual = verify_fit(n_mat, s)
    else:
        k_lo, k_hi = _low_rank_extremes(0.0, s.directions, delta, s.d)
        max_residual = float(np.abs((1.0 + m_mat @ delta) / (1.0 + s.eps) - 1.0).max())

    return _gated(
        method="identity_perturbation",
        delta=delta,
        k_norm=max(abs(k_lo), abs(k_hi)),
        n_min_eig=1.0 + k_lo,
        m_min_eig=m_min_eig,
        max_residual=max_residual,
        report=report,
        residual_tol=residual_tol,
        pd_tol=pd_tol,
    )


def assemble_N(s: SampleSet, delta) -> np.ndarray:
    """Dense N = I + sum_i delta_i v_i v_i^T; rank(N - I) <= m."""
    delta = np.asarray(delta, dtype=float)
    if delta.shape != (s.m,):
        raise ValueError(f"delta must have length {s.m}, got shape {delta.shape}")
    n = np.eye(s.d) + (s.directions.T * delta) @ s.directions
    return (n + n.T) / 2.0


def verify_fit(n, s: SampleSet) -> float:
    """Max constraint violation max_i |x_i^T n x_i - 1| on the raw points."""
    n = as_sym_matrix(n, name="N")
    if n.shape[0] != s.d:
        raise ValueError(f"N has order {n.shape[0]}, sample set has d={s.d}")
    x = s.points()
    vals = np.einsum("ij,jk,ik->i", x, n, x)
    return float(np.abs(vals - 1.0).max())


def least_norm_fit(s: SampleSet, *, residual_tol: float = RESIDUAL_TOL,
                   pd_tol: float = PD_TOL, dense_cutoff: int = DENSE_CUTOFF,
                   deviation_from_identity: bool = False) -> FitResult:
    """Minimum-Frobenius-norm interpolant through the raw points.

    Default target is |N|_F with N = sum_i c_i x_i x_i^T and G c = 1.
    With deviation_from_identity=True the target is |N - I|_F instead:
    G c = eps_tilde with eps_tilde_i = 1 - |x_i|^2 and N = I + sum_i c_i
    x_i x_i^T.  Success uses the PSD gate N_min_eig > -pd_tol because the
    minimizer legitimately touches the boundary (e.g. m < d).
    """
    x = s.points()
    g = x @ x.T
    g = g * g
    g = (g + g.T) / 2.0
    # eps_tilde = 1 - |x|^2 = eps / (1 + eps), computed without cancellation.
    rhs = s.eps / (1.0 + s.eps) if deviation_from_identity else np.ones(s.m)
    report = sym_solve(g, rhs)
    coeff = report.solution
    m_min_eig = extreme_eigs(g, dense_cutoff=dense_cutoff)[0]
    base = 1.0 if deviation_from_identity else 0.0

    if s.d <= dense_cutoff:
        n_mat = base * np.eye(s.d) + (x.T * coeff) @ x
        n_mat = (n_mat + n_mat.T) / 2.0
        n_lo, n_hi = extreme_eigs(n_mat, dense_cutoff=dense_cutoff)
        k_norm = operator_norm(n_mat - np.eye(s.d), dense_cutoff=dense_cutoff)
        max_residual = verify_fit(n_mat, s)
    else:
        n_lo, n_hi = _low_rank_extremes(base, x, coeff, s.d)
        k_lo, k_hi = _low_rank_extremes(base - 1.0, x, coeff, s.d)
        k_norm = max(abs(k_lo), abs(k_hi))
        norms_sq = 1.0 / (1.0 + s.eps)
        max_residual = float(np.abs(base * norms_sq + g @ coeff - 1.0).max())

    return _gated(
        method="least_norm",
        delta=coeff,
        k_norm=k_norm,
        n_min_eig=n_lo,
        m_min_eig=m_min_eig,
        max_residual=max_residual,
        report=report,
        residual_tol=residual_tol,
        pd_tol=pd_tol,
    )
