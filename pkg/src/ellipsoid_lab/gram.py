"""Squared-Gram systems and their degree-2 feature structure.

For unit directions v_1 .. v_m the squared Gram matrix is
M_ij = (v_i . v_j)^2.  Its entrywise expectation over uniform directions is
(1 - 1/d) I + (1/d) 11^T, and the centered noise matrix

    A = M - (1 - 1/d) I - (1/d) 11^T

has zero diagonal and off-diagonal entries (v_i . v_j)^2 - 1/d.  Each such
entry is exactly a sum over centered degree-2 monomial features: with cross
features y_a y_b (a < b) and square features (y_a^2 - 1/d) / sqrt(2),

    (v . w)^2 - 1/d = 2 * sum_p p(v) p(w)

over all features p.  Splitting the sum gives A = A' + A* with A' carried
by cross features and A* by square features; A* equals 2 B B^T off the
diagonal, where B stacks the square-feature rows.  These identities are
exact, so the split is checked entrywise, not statistically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .sampling import SampleSet, draw_sample_set
from .seeding import mix64

__all__ = [
    "GramSystem",
    "HermiteFeatures",
    "build_M",
    "build_A",
    "hermite_features",
    "b_matrix",
    "split_A",
    "a_prime_direct",
    "a_star_gram_check",
    "build_gram_system",
    "trace_moment",
    "trace_moment_bound",
]

_SPLIT_TOL = 1e-10


@dataclass(frozen=True)
class HermiteFeatures:
    """Degree-2 feature values of one unit vector.

    cross_features: the d(d-1)/2 products y_a y_b in lexicographic (a, b)
    order with a < b.  square_features: the d values (y_a^2 - 1/d)/sqrt(2)
    in coordinate order; these are the rows of the B matrix.
    """

    cross_features: np.ndarray
    square_features: np.ndarray


@dataclass(frozen=True)
class GramSystem:
    """M together with its centered noise matrix and exact split."""

    M: np.ndarray
    A: np.ndarray
    A_prime: np.ndarray
    A_star: np.ndarray
    d: int

    def __post_init__(self):
        m = self.M.shape[0]
        for name in ("M", "A", "A_prime", "A_star"):
            mat = getattr(self, name)
            if mat.shape != (m, m):
                raise ValueError(f"{name} must be {m}x{m}, got {mat.shape}")
        if np.abs(np.diag(self.M) - 1.0).max() > 1e-12:
            raise ValueError("M diagonal must be 1 to 1e-12")
        if np.abs(np.diag(self.A)).max() > 1e-12:
            raise ValueError("A diagonal must vanish")
        expected_a = self.M - (1.0 - 1.0 / self.d) * np.eye(m) - np.full((m, m), 1.0 / self.d)
        if np.abs(self.A - expected_a).max() > 1e-12:
            raise ValueError("A does not match M minus its expectation")
        if np.abs(self.A - (self.A_prime + self.A_star)).max() > _SPLIT_TOL:
            raise ValueError("split does not reassemble A")

    @property
    def m(self) -> int:
        return self.M.shape[0]


def build_M(s: SampleSet) -> np.ndarray:
    """M_ij = (v_i . v_j)^2 with the diagonal pinned to exactly 1."""
    g = s.directions @ s.directions.T
    m = g * g
    m = (m + m.T) / 2.0
    np.fill_diagonal(m, 1.0)
    return m


def build_A(s: SampleSet) -> np.ndarray:
    """Centered noise matrix: off-diagonal (v_i . v_j)^2 - 1/d, zero diagonal."""
    a = build_M(s) - 1.0 / s.d
    np.fill_diagonal(a, 0.0)
    return a


def hermite_features(v, d: int) -> HermiteFeatures:
    """Feature row of one unit vector, in the fixed documented order."""
    v = np.asarray(v, dtype=float)
    if v.shape != (d,):
        raise ValueError(f"expected a vector of length {d}, got shape {v.shape}")
    if abs(float(np.linalg.norm(v)) - 1.0) > 1e-10:
        raise ValueError("feature map expects a unit vector")
    a_idx, b_idx = np.triu_indices(d, k=1)
    cross = v[a_idx] * v[b_idx]
    squares = (v * v - 1.0 / d) / math.sqrt(2.0)
    return HermiteFeatures(cross_features=cross, square_features=squares)


def b_matrix(s: SampleSet) -> np.ndarray:
    """m x d matrix of square-feature rows, B_ik = (v_ik^2 - 1/d)/sqrt(2)."""
    v = s.directions
    return (v * v - 1.0 / s.d) / math.sqrt(2.0)


def split_A(s: SampleSet) -> tuple[np.ndarray, np.ndarray]:
    """Exact split A = A' + A*, both with zero diagonal.

    A* comes from the square features via the Gram identity 2 B B^T with
    the diagonal zeroed; A' is recovered as A - A*, which costs O(m^2 d)
    instead of the O(m^2 d^2) cross-feature sum.  a_prime_direct provides
    the explicit cross-feature route for small instances so the shortcut
    stays checkable.
    """
    b = b_matrix(s)
    a_star = 2.0 * (b @ b.T)
    a_star = (a_star + a_star.T) / 2.0
    np.fill_diagonal(a_star, 0.0)
    a_prime = build_A(s) - a_star
    np.fill_diagonal(a_prime, 0.0)
    return a_prime, a_star


def a_prime_direct(s: SampleSet) -> np.ndarray:
    """A' by materializing the cross features: 2 C C^T with zero diagonal.

    Quadratic in d, intended for desk-scale verification of split_A.
    """
    cross_rows = np.stack([
        hermite_features(s.directions[i], s.d).cross_features for i in range(s.m)
    ])
    a_prime = 2.0 * (cross_rows @ cross_rows.T)
    a_prime = (a_prime + a_prime.T) / 2.0
    np.fill_diagonal(a_prime, 0.0)
    return a_prime


def a_star_gram_check(s: SampleSet) -> float:
    """Max deviation of A* from its Gram form 2 B B^T.

    Off the diagonal the two must agree; on the diagonal A* is zero by
    convention while 2 B B^T carries sum_k (v_ik^2 - 1/d)^2, so the check
    compares against that closed form.  Returns the worse of the two
    deviations; anything above 1e-10 indicates a broken feature map.
    """
    _, a_star = split_A(s)
    b = b_matrix(s)
    gram = 2.0 * np.einsum("ik,jk->ij", b, b)
    diff = a_star - gram
    diag = np.diag(diff).copy()
    expected_diag = -np.sum((s.directions ** 2 - 1.0 / s.d) ** 2, axis=1)
    diag_dev = float(np.abs(diag - expected_diag).max())
    np.fill_diagonal(diff, 0.0)
    off_dev = float(np.abs(diff).max())
    return max(off_dev, diag_dev)


def build_gram_system(s: SampleSet) -> GramSystem:
    """Assemble M, A and the exact split in one validated bundle."""
    m_mat = build_M(s)
    a = build_A(s)
    a_prime, a_star = split_A(s)
    return GramSystem(M=m_mat, A=a, A_prime=a_prime, A_star=a_star, d=s.d)


def _check_moment_order(t: int) -> None:
    if t % 2 != 0 or not (2 <= t <= 8):
        raise ValueError(f"t must be even with 2 <= t <= 8, got {t}")


def trace_moment_bound(d: int, m: int, t: int) -> float:
    """The trace-moment envelope m * (m (4t)^4 / d^2)^(t/2)."""
    _check_moment_order(t)
    return m * (m * (4.0 * t) ** 4 / d ** 2) ** (t / 2)


def trace_moment(d: int, m: int, t: int, trials: int, seed: int) -> tuple[float, float]:
    """Monte Carlo mean of tr((A')^t) over fresh sample sets, with its bound.

    t must be even with 2 <= t <= 8: odd powers of A' are not controlled by
    the moment method, and even desk-scale dimensions keep the interesting
    t (about log d) at 8 or below.  tr((A')^t) is computed as the squared
    Frobenius norm of (A')^(t/2).  Returns (mean_trace, bound).
    """
    _check_moment_order(t)
    if trials < 1:
        raise ValueError("need at least one trial")
    total = 0.0
    for k in range(trials):
        s = draw_sample_set(d, m, mix64(seed, d, m, k))
        a_prime, _ = split_A(s)
        half = np.linalg.matrix_power(a_prime, t // 2)
        total += float(np.sum(half * half))
    return total / trials, trace_moment_bound(d, m, t)
