"""Gram matrices, the Hermite split, and trace moments against hand values.

The split is cross-checked through two independent routes: the library
computes A' as A minus the square-feature Gram part, while the tests
rebuild it from explicit cross-feature vectors.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ellipsoid_lab.gram import (
    GramSystem,
    a_prime_direct,
    a_star_gram_check,
    b_matrix,
    build_A,
    build_M,
    build_gram_system,
    hermite_features,
    split_A,
    trace_moment,
    trace_moment_bound,
)
from ellipsoid_lab.sampling import draw_sample_set


def _set_from_directions(dirs, d):
    from ellipsoid_lab.sampling import SampleSet
    dirs = np.asarray(dirs, dtype=float)
    return SampleSet(d=d, m=dirs.shape[0], directions=dirs,
                     eps=np.zeros(dirs.shape[0]))


def _orthogonal_pair(d):
    return _set_from_directions(np.eye(d)[:2], d)


def _parallel_pair(d):
    e1 = np.zeros(d)
    e1[0] = 1.0
    return _set_from_directions([e1, e1], d)


def _unit_rows(d, m, seed):
    rng = np.random.Generator(np.random.PCG64(seed))
    x = rng.standard_normal((m, d))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


class TestBuildM:
    def test_single_point(self):
        s = _set_from_directions([[0.6, 0.8]], 2)
        np.testing.assert_array_equal(build_M(s), [[1.0]])

    def test_orthogonal_pair_identity(self):
        np.testing.assert_allclose(build_M(_orthogonal_pair(4)), np.eye(2),
                                   atol=1e-15)

    def test_parallel_pair_ones(self):
        np.testing.assert_allclose(build_M(_parallel_pair(4)), np.ones((2, 2)),
                                   atol=1e-15)

    def test_entries_are_squared_dots(self):
        s = draw_sample_set(6, 5, 11)
        m_mat = build_M(s)
        v = s.directions
        for i in range(5):
            for j in range(5):
                want = 1.0 if i == j else (v[i] @ v[j]) ** 2
                assert m_mat[i, j] == pytest.approx(want, abs=1e-12)

    def test_off_diagonal_mean(self):
        # E[(v . w)^2] = 1/d for independent uniform directions; 1e4
        # independent pairs at d=25.
        d, n = 25, 10_000
        vals = np.array([build_M(draw_sample_set(d, 2, k))[0, 1]
                         for k in range(n)])
        se = vals.std(ddof=1) / math.sqrt(n)
        assert abs(vals.mean() - 1.0 / d) <= 3 * se

    def test_positive_semidefinite(self):
        for seed in range(5):
            s = draw_sample_set(8, 12, seed)
            w = np.linalg.eigvalsh(build_M(s))
            assert w.min() >= -1e-9


class TestBuildA:
    def test_orthogonal_pair(self):
        np.testing.assert_allclose(
            build_A(_orthogonal_pair(4)),
            [[0.0, -0.25], [-0.25, 0.0]], atol=1e-15)

    def test_parallel_pair(self):
        np.testing.assert_allclose(
            build_A(_parallel_pair(4)),
            [[0.0, 0.75], [0.75, 0.0]], atol=1e-15)

    def test_zero_diagonal_and_symmetry(self):
        s = draw_sample_set(7, 9, 2)
        a = build_A(s)
        assert np.abs(np.diag(a)).max() == 0.0
        np.testing.assert_array_equal(a, a.T)

    def test_off_diagonal_shift(self):
        s = draw_sample_set(5, 4, 3)
        a = build_A(s)
        m_mat = build_M(s)
        for i in range(4):
            for j in range(4):
                if i != j:
                    assert a[i, j] == pytest.approx(m_mat[i, j] - 1 / 5,
                                                    abs=1e-12)


class TestHermiteFeatures:
    def test_e1_in_dimension_two(self):
        f = hermite_features(np.array([1.0, 0.0]), 2)
        np.testing.assert_allclose(f.cross_features, [0.0], atol=1e-15)
        r = 1.0 / (2.0 * math.sqrt(2.0))
        np.testing.assert_allclose(f.square_features, [r, -r], atol=1e-15)

    def test_e2_negates_squares(self):
        f1 = hermite_features(np.array([1.0, 0.0]), 2)
        f2 = hermite_features(np.array([0.0, 1.0]), 2)
        np.testing.assert_allclose(f2.square_features, -f1.square_features,
                                   atol=1e-15)

    def test_diagonal_direction(self):
        v = np.array([1.0, 1.0]) / math.sqrt(2.0)
        f = hermite_features(v, 2)
        np.testing.assert_allclose(f.cross_features, [0.5], atol=1e-15)
        np.testing.assert_allclose(f.square_features, [0.0, 0.0], atol=1e-15)

    def test_cross_feature_order_lexicographic(self):
        v = np.array([1.0, 2.0, 3.0])
        v = v / np.linalg.norm(v)
        f = hermite_features(v, 3)
        want = [v[0] * v[1], v[0] * v[2], v[1] * v[2]]
        np.testing.assert_allclose(f.cross_features, want, atol=1e-15)
        assert f.cross_features.shape == (3,)

    def test_feature_counts(self):
        for d in (2, 5, 9):
            v = np.zeros(d)
            v[0] = 1.0
            f = hermite_features(v, d)
            assert f.cross_features.shape == (d * (d - 1) // 2,)
            assert f.square_features.shape == (d,)

    def test_rejects_non_unit(self):
        with pytest.raises(ValueError):
            hermite_features(np.array([1.0, 1.0]), 2)
        with pytest.raises(ValueError):
            hermite_features(np.array([1.0, 0.0, 0.0]), 2)

    @settings(max_examples=40)
    @given(st.integers(2, 20), st.integers(0, 2**32 - 1))
    def test_square_features_sum_to_zero(self, d, seed):
        # sqrt(2) * sum of square features telescopes to |v|^2 - 1 = 0.
        v = _unit_rows(d, 1, seed)[0]
        f = hermite_features(v, d)
        assert abs(f.square_features.sum()) <= 1e-12

    def test_b_matrix_matches_rows(self):
        s = draw_sample_set(6, 4, 8)
        b = b_matrix(s)
        for i in range(4):
            f = hermite_features(s.directions[i], 6)
            np.testing.assert_allclose(b[i], f.square_features, atol=1e-14)


class TestSplitA:
    def test_orthogonal_pair_d2(self):
        s = _orthogonal_pair(2)
        a_prime, a_star = split_A(s)
        np.testing.assert_allclose(a_prime, np.zeros((2, 2)), atol=1e-14)
        np.testing.assert_allclose(a_star, [[0.0, -0.5], [-0.5, 0.0]],
                                   atol=1e-14)

    def test_parallel_pair_reassembles(self):
        s = _parallel_pair(4)
        a_prime, a_star = split_A(s)
        np.testing.assert_allclose(a_prime + a_star, build_A(s), atol=1e-12)
        assert (a_prime + a_star)[0, 1] == pytest.approx(0.75, abs=1e-12)

    def test_zero_diagonals(self):
        s = draw_sample_set(5, 6, 1)
        a_prime, a_star = split_A(s)
        assert np.abs(np.diag(a_prime)).max() == 0.0
        assert np.abs(np.diag(a_star)).max() == 0.0

    @pytest.mark.parametrize("seed", range(5))
    def test_cross_feature_route_agrees(self, seed):
        # Independent route: A' off-diagonals from explicit cross-feature
        # vectors must match A - A* entrywise.
        rng = np.random.Generator(np.random.PCG64(seed))
        d = int(rng.integers(3, 21))
        m = int(rng.integers(2, 11))
        s = draw_sample_set(d, m, seed + 100)
        a_prime, a_star = split_A(s)
        direct = a_prime_direct(s)
        np.testing.assert_allclose(a_prime, direct, atol=1e-10)
        np.testing.assert_allclose(direct + a_star, build_A(s), atol=1e-10)

    def test_star_gram_identity(self):
        for seed in range(3):
            s = draw_sample_set(7, 5, seed)
            assert a_star_gram_check(s) <= 1e-10

    def test_star_diagonal_hand_value(self):
        # For e1 in d=2 the square features are (1/(2 sqrt 2), -1/(2 sqrt 2)),
        # so 2 |b|^2 = 1/2 and the omitted diagonal is -1/2.
        s = _set_from_directions([[1.0, 0.0]], 2)
        b = b_matrix(s)
        assert 2.0 * float(b[0] @ b[0]) == pytest.approx(0.5, abs=1e-15)
        assert a_star_gram_check(s) <= 1e-12


class TestGramSystem:
    def test_build_and_validate(self):
        s = draw_sample_set(6, 4, 5)
        g = build_gram_system(s)
        assert isinstance(g, GramSystem)
        assert g.d == 6
        np.testing.assert_allclose(g.A_prime + g.A_star, g.A, atol=1e-10)

    def test_rejects_tampered_diagonal(self):
        s = draw_sample_set(6, 4, 5)
        g = build_gram_system(s)
        bad = g.M.copy()
        bad[0, 0] = 2.0
        with pytest.raises(ValueError):
            GramSystem(M=bad, A=g.A, A_prime=g.A_prime, A_star=g.A_star, d=g.d)

    def test_rejects_inconsistent_split(self):
        s = draw_sample_set(6, 4, 5)
        g = build_gram_system(s)
        with pytest.raises(ValueError):
            GramSystem(M=g.M, A=g.A, A_prime=g.A_prime + 1e-3,
                       A_star=g.A_star, d=g.d)


class TestTraceMoment:
    def test_bound_formula(self):
        d, m, t = 100, 50, 4
        want = m * (m * (4 * t) ** 4 / d**2) ** (t / 2)
        assert trace_moment_bound(d, m, t) == pytest.approx(want, rel=1e-15)

    def test_single_point_trace_vanishes(self):
        mean, bound = trace_moment(20, 1, 2, trials=5, seed=0)
        assert mean == 0.0
        assert bound > 0.0

    def test_orthogonal_pair_prime_trace_zero(self):
        # A' of two orthogonal axis directions vanishes up to the rounding
        # of the 1/(2 sqrt 2) square features, and so does tr((A')^2).
        a_prime, _ = split_A(_orthogonal_pair(2))
        assert float(np.sum(a_prime * a_prime)) <= 1e-28

    def test_dual_route_power_trace(self):
        s = draw_sample_set(10, 6, 7)
        a_prime, _ = split_A(s)
        half = np.linalg.matrix_power(a_prime, 2)
        via_frob = float(np.sum(half * half))
        via_trace = float(np.trace(np.linalg.matrix_power(a_prime, 4)))
        assert via_frob == pytest.approx(via_trace, rel=1e-10, abs=1e-14)

    def test_deterministic(self):
        assert trace_moment(12, 5, 4, trials=3, seed=9) == \
            trace_moment(12, 5, 4, trials=3, seed=9)

    def test_validation(self):
        with pytest.raises(ValueError):
            trace_moment(10, 4, 3, trials=2, seed=0)
        with pytest.raises(ValueError):
            trace_moment(10, 4, 10, trials=2, seed=0)
        with pytest.raises(ValueError):
            trace_moment(10, 4, 2, trials=0, seed=0)
        with pytest.raises(ValueError):
            trace_moment_bound(10, 4, 5)
