"""Gaussian point clouds split into unit directions and length parameters.

A point x drawn from N(0, (1/d) I_d) is stored as a unit direction
v = x / |x| together with eps = 1 / |x|^2 - 1, so that
x = (1 + eps)^(-1/2) v reconstructs it.  Everything downstream works on
(v, eps) pairs: the squared-dot-product Gram matrices use only v, and the
fit right-hand side is exactly the eps vector.

Draws are reproducible per point: point i of a set with seed s comes from
its own substream keyed by mix64(s, i), so the first m points of any two
sets sharing a seed agree regardless of the set sizes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .seeding import mix64, point_stream

__all__ = [
    "SampleSet",
    "sample_gaussian",
    "decompose",
    "draw_sample_set",
    "sphere_moment_estimate",
    "exact_sphere_moment",
    "dot_tail_estimate",
]

_MIN_NORM_SQ = 1e-300


@dataclass(frozen=True)
class SampleSet:
    """m points in R^d in direction/length form.

    directions holds unit rows v_i; eps holds eps_i = 1/|x_i|^2 - 1 with
    eps_i > -1.  seed records how the set was drawn (0 for hand-built sets).
    """

    d: int
    m: int
    directions: np.ndarray
    eps: np.ndarray
    seed: int = 0

    def __post_init__(self):
        directions = np.asarray(self.directions, dtype=float)
        eps = np.asarray(self.eps, dtype=float)
        object.__setattr__(self, "directions", directions)
        object.__setattr__(self, "eps", eps)
        if self.d < 1 or self.m < 1:
            raise ValueError("d and m must be at least 1")
        if directions.shape != (self.m, self.d):
            raise ValueError(
                f"directions must have shape ({self.m}, {self.d}), got {directions.shape}")
        if eps.shape != (self.m,):
            raise ValueError(f"eps must have shape ({self.m},), got {eps.shape}")
        if not (np.all(np.isfinite(directions)) and np.all(np.isfinite(eps))):
            raise ValueError("non-finite entries in sample set")
        norms = np.linalg.norm(directions, axis=1)
        if np.abs(norms - 1.0).max() > 1e-12:
            raise ValueError("directions must be unit vectors to 1e-12")
        if np.any(eps <= -1.0):
            raise ValueError("every eps must exceed -1")

    def points(self) -> np.ndarray:
        """Reconstructed points x_i = (1 + eps_i)^(-1/2) v_i, one per row."""
        return self.directions / np.sqrt(1.0 + self.eps)[:, None]


def sample_gaussian(d: int, rng: np.random.Generator) -> np.ndarray:
    """One draw from N(0, (1/d) I_d): coordinates i.i.d. with variance 1/d."""
    if d < 1:
        raise ValueError("d must be at least 1")
    return rng.standard_normal(d) / math.sqrt(d)


def decompose(x) -> tuple[np.ndarray, float]:
    """Split a nonzero vector into (unit direction, eps = 1/|x|^2 - 1).

    Vectors with squared norm below 1e-300 are rejected rather than
    resampled; a degenerate draw should surface, not silently reshuffle
    the stream.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError(f"expected a vector, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite entries")
    norm_sq = float(x @ x)
    if norm_sq < _MIN_NORM_SQ:
        raise ValueError("degenerate near-zero vector")
    return x / math.sqrt(norm_sq), 1.0 / norm_sq - 1.0


def draw_sample_set(d: int, m: int, seed: int) -> SampleSet:
    """Draw m independent Gaussian points, decomposed, deterministically.

    Point i uses the substream keyed by (seed, i), so the result is a pure
    function of (d, m, seed) and sets sharing a seed agree on their common
    prefix of points.
    """
    if d < 1 or m < 1:
        raise ValueError("d and m must be at least 1")
    directions = np.empty((m, d))
    eps = np.empty(m)
    for i in range(m):
        directions[i], eps[i] = decompose(sample_gaussian(d, point_stream(seed, i)))
    return SampleSet(d=d, m=m, directions=directions, eps=eps, seed=seed)


def exact_sphere_moment(d: int, k: int) -> float:
    """E[(v . w)^k] for independent uniform unit vectors v, w in R^d.

    Odd moments vanish by symmetry.  For even k the dot product has the law
    of a single coordinate of a uniform unit vector, giving
    (k-1)!! / (d (d+2) ... (d+k-2)).
    """
    if d < 1 or k < 0:
        raise ValueError("need d >= 1 and k >= 0")
    if k % 2 == 1:
        return 0.0
    num = 1.0
    den = 1.0
    for j in range(1, k // 2 + 1):
        num *= 2 * j - 1
        den *= d + 2 * j - 2
    return num / den


def sphere_moment_estimate(d: int, k: int, n: int, seed: int) -> tuple[float, float]:
    """Monte Carlo (mean, stderr) of E[(v . e1)^k] for uniform unit v.

    By rotation invariance fixing w = e1 loses nothing.  Supported moment
    orders are k in {1, 2, 4}; n must be at least 100 for the standard
    error to mean anything.
    """
    if k not in (1, 2, 4):
        raise ValueError(f"unsupported moment order k={k}")
    if n < 100:
        raise ValueError("need n >= 100 trials")
    if d < 1:
        raise ValueError("d must be at least 1")
    rng = np.random.Generator(np.random.PCG64(mix64(seed, d, k)))
    x = rng.standard_normal((n, d))
    dots = x[:, 0] / np.linalg.norm(x, axis=1)
    vals = dots ** k
    mean = float(vals.mean())
    stderr = float(vals.std(ddof=1) / math.sqrt(n))
    return mean, stderr


def dot_tail_estimate(d: int, t: float, n: int, seed: int) -> tuple[float, float]:
    """Empirical Pr(|v . e1| > t) for uniform unit v, with exp(-d t^2 / 4).

    The second value is the analytic tail envelope the estimate is meant to
    sit below at moderate d and t.
    """
    if d < 1 or n < 1 or t < 0:
        raise ValueError("need d >= 1, n >= 1, t >= 0")
    rng = np.random.Generator(np.random.PCG64(mix64(seed, d)))
    x = rng.standard_normal((n, d))
    dots = np.abs(x[:, 0]) / np.linalg.norm(x, axis=1)
    return float(np.mean(dots > t)), math.exp(-d * t * t / 4.0)
