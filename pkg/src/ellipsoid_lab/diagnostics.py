"""Statistical probes of the high-probability events behind the construction.

The construction succeeds when three spectral events hold simultaneously:

  e1: the centered noise matrix is small, |A|_2 < 1/2 (forcing M >= I/3);
  e2: every length parameter is small, max |eps_i| < 2 log(d) / sqrt(d);
  e3: every coefficient is small, max |delta_i| < log(d)^2 / sqrt(d).

These are asymptotic events; at desk scale each holds with some empirical
rate, so everything here reports and nothing hard-fails.  The beta probes
examine the quadratic form u^T K u = sum_i delta_i (u . v_i)^2 through
random unit directions u: entries beta_i = (u . v_i)^2 above d^(-1/4) are
"heavy" (few, handled individually in the argument), the rest are "light"
with small total energy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .construct import FitResult, assemble_N
from .gram import build_A, build_M, split_A
from .numerics import operator_norm, sym_solve
from .sampling import SampleSet
from .seeding import mix64

__all__ = [
    "ProbeRecord",
    "DiagReport",
    "e2_threshold",
    "e3_threshold",
    "check_events",
    "m_inv_one_check",
    "beta_split",
    "quad_form_check",
    "norm_certificates",
    "probe_cover",
    "diagnose",
]

# Substream tag separating probe draws from point draws under one seed.
_PROBE_TAG = 0x70726F62


@dataclass(frozen=True)
class ProbeRecord:
    """Heavy/light statistics of one probe direction."""

    index: int
    kind: str  # "random" or "k_eigenvector"
    heavy_count: int
    light_norm_sq: float
    quad_form: float
    gamma_norm_sq: float | None = None


@dataclass(frozen=True)
class DiagReport:
    """Event outcomes for one sample set and fit."""

    d: int
    m: int
    seed: int
    a_norm: float
    e1_pass: bool
    eps_max: float
    e2_pass: bool
    delta_max: float
    e3_pass: bool
    m_inv_one_dev: float
    beta_stats: tuple[ProbeRecord, ...] = ()

    def __post_init__(self):
        if self.e1_pass != (self.a_norm < 0.5):
            raise ValueError("e1_pass inconsistent with a_norm")
        if self.e2_pass != (self.eps_max < e2_threshold(self.d)):
            raise ValueError("e2_pass inconsistent with eps_max")
        if self.e3_pass != (self.delta_max < e3_threshold(self.d)):
            raise ValueError("e3_pass inconsistent with delta_max")


def e2_threshold(d: int) -> float:
    """Length-parameter envelope 2 log(d) / sqrt(d).

    The underlying tail bound is stated for |x|^2 - 1; transferring it to
    eps = 1/|x|^2 - 1 costs a first-order expansion error, absorbed in the
    factor 2.
    """
    return 2.0 * math.log(d) / math.sqrt(d)


def e3_threshold(d: int) -> float:
    """Coefficient envelope log(d)^2 / sqrt(d)."""
    return math.log(d) ** 2 / math.sqrt(d)


def check_events(s: SampleSet, fit: FitResult) -> DiagReport:
    """Evaluate e1, e2, e3 and the M^-1 row-sum deviation; never fails.

    The fit must come from the same sample set.  beta_stats is left empty;
    probe_cover or diagnose fills it.  If M is too ill-conditioned for the
    one-vector solve, m_inv_one_dev is NaN rather than an error.
    """
    a_norm = operator_norm(build_A(s))
    eps_max = float(np.abs(s.eps).max())
    delta_max = float(np.abs(fit.delta).max())
    try:
        m_inv_one_dev = m_inv_one_check(s)
    except ValueError:
        m_inv_one_dev = math.nan
    return DiagReport(
        d=s.d,
        m=s.m,
        seed=s.seed,
        a_norm=a_norm,
        e1_pass=bool(a_norm < 0.5),
        eps_max=eps_max,
        e2_pass=bool(eps_max < e2_threshold(s.d)),
        delta_max=delta_max,
        e3_pass=bool(delta_max < e3_threshold(s.d)),
        m_inv_one_dev=m_inv_one_dev,
    )


def m_inv_one_check(s: SampleSet) -> float:
    """Deviation |M^-1 1 - (d/m) 1|_2, expected O(d / sqrt(m)).

    Raises ValueError when the M solve is untrusted (singular or
    ill-conditioned); callers that must not fail convert that to NaN.
    """
    report = sym_solve(build_M(s), np.ones(s.m))
    if not report.ok:
        raise ValueError("M solve untrusted; deviation undefined")
    return float(np.linalg.norm(report.solution - (s.d / s.m) * np.ones(s.m)))


def beta_split(s: SampleSet, u) -> tuple[np.ndarray, np.ndarray, float]:
    """Heavy/light split of beta_i = (u . v_i)^2 at threshold d^(-1/4).

    Returns (heavy_indices, light_vector, light_norm_sq): indices with
    beta strictly above the threshold, the remaining beta values in index
    order, and their squared 2-norm.
    """
    u = _unit_probe(u, s.d)
    beta = (s.directions @ u) ** 2
    threshold = s.d ** (-0.25)
    heavy = beta > threshold
    heavy_indices = np.flatnonzero(heavy)
    light_vector = beta[~heavy]
    return heavy_indices, light_vector, float(light_vector @ light_vector)


def quad_form_check(s: SampleSet, fit: FitResult, u) -> float:
    """|sum_i delta_i (u . v_i)^2| = |u^T K u| for a unit probe u."""
    u = _unit_probe(u, s.d)
    beta = (s.directions @ u) ** 2
    return float(abs(beta @ fit.delta))


def norm_certificates(s: SampleSet) -> tuple[float, float, float]:
    """Operator norms (|A|, |A'|, |A*|); the triangle inequality is enforced."""
    a_norm = operator_norm(build_A(s))
    a_prime, a_star = split_A(s)
    a_prime_norm = operator_norm(a_prime)
    a_star_norm = operator_norm(a_star)
    if a_norm > a_prime_norm + a_star_norm + 1e-9:
        raise RuntimeError("norm triangle inequality violated; eigensolver is broken")
    return a_norm, a_prime_norm, a_star_norm


def probe_cover(s: SampleSet, fit: FitResult, n_u: int = 100, seed: int = 0,
                include_gamma: bool = False) -> tuple[ProbeRecord, ...]:
    """Beta statistics for n_u random unit probes plus the top eigenvector of K.

    The eigenvector probe witnesses |K|_2 exactly, so it dominates any
    finite cover of the sphere for certification purposes; the random
    probes sample the union-bound event.  Records are ordered by probe
    index with the eigenvector probe last.  With include_gamma, each
    record also carries |gamma|_2^2 where M gamma = beta_light (heavy
    entries zeroed); gamma is skipped (None) when M has no Cholesky
    factorization.
    """
    if n_u < 0:
        raise ValueError("n_u must be nonnegative")
    factor = None
    if include_gamma:
        try:
            factor = scipy.linalg.cho_factor(build_M(s))
        except scipy.linalg.LinAlgError:
            factor = None

    records = []
    for i in range(n_u):
        rng = np.random.Generator(np.random.PCG64(mix64(s.seed, _PROBE_TAG, seed, i)))
        u = rng.standard_normal(s.d)
        u /= np.linalg.norm(u)
        records.append(_probe_record(s, fit, u, i, "random", factor))

    k_mat = assemble_N(s, fit.delta) - np.eye(s.d)
    w, q = np.linalg.eigh(k_mat)
    top = q[:, int(np.argmax(np.abs(w)))]
    records.append(_probe_record(s, fit, top, n_u, "k_eigenvector", factor))
    return tuple(records)


def diagnose(s: SampleSet, fit: FitResult, n_u: int = 100, seed: int = 0,
             include_gamma: bool = False) -> DiagReport:
    """check_events with beta_stats populated by probe_cover."""
    report = check_events(s, fit)
    stats = probe_cover(s, fit, n_u=n_u, seed=seed, include_gamma=include_gamma)
    return DiagReport(
        d=report.d,
        m=report.m,
        seed=report.seed,
        a_norm=report.a_norm,
        e1_pass=report.e1_pass,
        eps_max=report.eps_max,
        e2_pass=report.e2_pass,
        delta_max=report.delta_max,
        e3_pass=report.e3_pass,
        m_inv_one_dev=report.m_inv_one_dev,
        beta_stats=stats,
    )


def _probe_record(s, fit, u, index, kind, factor) -> ProbeRecord:
    heavy_indices, _, light_norm_sq = beta_split(s, u)
    quad = quad_form_check(s, fit, u)
    gamma_norm_sq = None
    if factor is not None:
        beta = (s.directions @ u) ** 2
        beta_light = np.where(beta > s.d ** (-0.25), 0.0, beta)
        gamma = scipy.linalg.cho_solve(factor, beta_light)
        gamma_norm_sq = float(gamma @ gamma)
    return ProbeRecord(
        index=index,
        kind=kind,
        heavy_count=int(heavy_indices.size),
        light_norm_sq=light_norm_sq,
        quad_form=quad,
        gamma_norm_sq=gamma_norm_sq,
    )


def _unit_probe(u, d: int) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.shape != (d,):
        raise ValueError(f"probe must be a vector of length {d}, got shape {u.shape}")
    if abs(float(np.linalg.norm(u)) - 1.0) > 1e-10:
        raise ValueError("probe must be a unit vector")
    return u
