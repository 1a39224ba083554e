import numpy as np
import pytest

from splitopt.operators import (
    Composite,
    DenseMatrix,
    DownsampleAverage,
    GaussianBlur,
    Identity,
    Scaled,
    estimate_norm,
    make_blur_downsample,
    make_difference_1d,
    make_gradient_2d,
)


def explicit_difference_matrix(n):
    # oracle: the (n-1) x n matrix with rows (-1, 1) written out entry by entry
    d = np.zeros((n - 1, n))
    for i in range(n - 1):
        d[i, i] = -1.0
        d[i, i + 1] = 1.0
    return d


def all_operators(rng):
    return [
        Identity(12),
        DenseMatrix(rng.standard_normal((5, 7))),
        make_difference_1d(15),
        make_gradient_2d(6, 5),
        GaussianBlur(8, 8, 1.0),
        DownsampleAverage(8, 8, 2),
        make_blur_downsample(8, 8, 1.0, 2),
        Scaled(-1.7, make_difference_1d(9)),
    ]


class TestApply:
    def test_identity(self):
        assert np.array_equal(Identity(3).apply([1.0, 2.0, 3.0]), [1.0, 2.0, 3.0])

    def test_difference_1d_matches_explicit_matrix(self):
        x = np.array([1.0, 2.0, 4.0])
        oracle = explicit_difference_matrix(3) @ x
        np.testing.assert_array_equal(make_difference_1d(3).apply(x), oracle)
        np.testing.assert_array_equal(oracle, [1.0, 2.0])

    def test_gradient_constant_image(self):
        out = make_gradient_2d(4, 4).apply(np.full(16, 3.7))
        assert out.shape == (32,)
        np.testing.assert_array_equal(out, np.zeros(32))

    def test_dimension_mismatch_message(self):
        with pytest.raises(ValueError, match="15"):
            make_difference_1d(15).apply(np.zeros(14))
        with pytest.raises(ValueError, match="14"):
            make_difference_1d(15).adjoint_apply(np.zeros(15))


class TestAdjoint:
    def test_identity(self):
        assert np.array_equal(Identity(2).adjoint_apply([5.0, 6.0]), [5.0, 6.0])

    def test_difference_1d_matches_transpose(self):
        y = np.array([1.0, 0.0])
        oracle = explicit_difference_matrix(3).T @ y
        np.testing.assert_array_equal(make_difference_1d(3).adjoint_apply(y), oracle)
        np.testing.assert_array_equal(oracle, [-1.0, 1.0, 0.0])

    def test_dense_dot_identity(self):
        rng = np.random.default_rng(0)
        op = DenseMatrix(rng.standard_normal((5, 7)))
        x = rng.standard_normal(7)
        y = rng.standard_normal(5)
        assert abs(op.apply(x) @ y - x @ op.adjoint_apply(y)) < 1e-12

    @pytest.mark.parametrize("idx", range(8))
    def test_adjoint_identity_100_probes(self, idx):
        rng = np.random.default_rng(7)
        op = all_operators(rng)[idx]
        for _ in range(100):
            x = rng.standard_normal(op.in_dim)
            y = rng.standard_normal(op.out_dim)
            bx, bty = op.apply(x), op.adjoint_apply(y)
            scale = max(np.linalg.norm(bx) * np.linalg.norm(y),
                        np.linalg.norm(x) * np.linalg.norm(bty), 1e-30)
            assert abs(bx @ y - x @ bty) <= 1e-10 * scale

    @pytest.mark.parametrize("idx", range(8))
    def test_linearity(self, idx):
        rng = np.random.default_rng(11)
        op = all_operators(rng)[idx]
        for _ in range(20):
            x, y = rng.standard_normal(op.in_dim), rng.standard_normal(op.in_dim)
            a, b = rng.standard_normal(2)
            lhs = op.apply(a * x + b * y)
            rhs = a * op.apply(x) + b * op.apply(y)
            assert np.linalg.norm(lhs - rhs) <= 1e-10 * max(np.linalg.norm(rhs), 1e-30)


class TestDifference1D:
    def test_n2_single_row(self):
        a, b = 2.5, -1.0
        np.testing.assert_allclose(make_difference_1d(2).apply([a, b]), [b - a])

    def test_n200_largest_eigenvalue(self):
        # closed form for the spectrum of D D^T
        est = estimate_norm(make_difference_1d(200)) ** 2
        assert abs(est - (2 - 2 * np.cos(199 * np.pi / 200))) < 1e-4

    def test_n5_full_spectrum_dense_oracle(self):
        d = make_difference_1d(5).to_dense()
        np.testing.assert_array_equal(d, explicit_difference_matrix(5))
        eigs = np.sort(np.linalg.eigvalsh(d @ d.T))
        expected = np.sort(2 - 2 * np.cos(np.arange(1, 5) * np.pi / 5))
        np.testing.assert_allclose(eigs, expected, atol=1e-12)

    @pytest.mark.parametrize("n", [2, 3, 8, 17, 32])
    def test_spectrum_closed_form_upto_32(self, n):
        d = make_difference_1d(n).to_dense()
        eigs = np.sort(np.linalg.eigvalsh(d @ d.T))
        expected = np.sort(2 - 2 * np.cos(np.arange(1, n) * np.pi / n))
        np.testing.assert_allclose(eigs, expected, atol=1e-9)

    def test_rejects_small_n(self):
        with pytest.raises(ValueError):
            make_difference_1d(1)


class TestGradient2D:
    def test_2x2_hand_expansion(self):
        a, b, c, d = 1.0, 4.0, -2.0, 7.0
        out = make_gradient_2d(2, 2).apply([a, b, c, d])
        np.testing.assert_allclose(out[:4], [b - a, 0.0, d - c, 0.0])
        np.testing.assert_allclose(out[4:], [c - a, d - b, 0.0, 0.0])

    def test_64_spectral_constant(self):
        est = estimate_norm(make_gradient_2d(64, 64)) ** 2
        assert 7.9 <= est <= 8.0

    def test_closed_form_small(self):
        # lambda_max(D D^T) = 2 (2 + 2 cos(pi/n)) for an n x n grid
        for n in (4, 8):
            est = estimate_norm(make_gradient_2d(n, n)) ** 2
            assert abs(est - 2 * (2 + 2 * np.cos(np.pi / n))) < 1e-4

    def test_rejects_degenerate(self):
        with pytest.raises(ValueError):
            make_gradient_2d(1, 5)


class TestBlurDownsample:
    def test_preserves_constants(self):
        op = make_blur_downsample(8, 8, 1.0, 2)
        out = op.apply(np.full(64, 2.5))
        np.testing.assert_allclose(out, np.full(16, 2.5), atol=1e-12)

    def test_zero_sigma_is_block_means(self):
        x = np.arange(16.0)
        out = make_blur_downsample(4, 4, 0.0, 2).apply(x)
        img = x.reshape(4, 4)
        oracle = np.array([
            img[0:2, 0:2].mean(), img[0:2, 2:4].mean(),
            img[2:4, 0:2].mean(), img[2:4, 2:4].mean(),
        ])
        np.testing.assert_array_equal(out, oracle)

    def test_adjoint_random_8x8(self):
        rng = np.random.default_rng(3)
        op = make_blur_downsample(8, 8, 1.0, 2)
        for _ in range(20):
            x = rng.standard_normal(op.in_dim)
            y = rng.standard_normal(op.out_dim)
            assert abs(op.apply(x) @ y - x @ op.adjoint_apply(y)) < 1e-10

    def test_composite_adjoint_equals_reversed_chain(self):
        rng = np.random.default_rng(4)
        comp = make_blur_downsample(8, 8, 1.0, 2)
        blur, down = comp.parts
        y = rng.standard_normal(comp.out_dim)
        assert np.array_equal(comp.adjoint_apply(y), blur.adjoint_apply(down.adjoint_apply(y)))

    def test_rejects_non_divisible(self):
        with pytest.raises(ValueError):
            make_blur_downsample(6, 8, 1.0, 4)

    def test_norm_at_most_one(self):
        assert estimate_norm(GaussianBlur(8, 8, 1.0)) <= 1.0 + 1e-9


class TestEstimateNorm:
    def test_identity(self):
        assert abs(estimate_norm(Identity(10)) - 1.0) < 1e-8

    def test_difference_200(self):
        est = estimate_norm(make_difference_1d(200))
        assert abs(est - np.sqrt(2 - 2 * np.cos(199 * np.pi / 200))) < 1e-4

    def test_against_svd(self):
        rng = np.random.default_rng(12)
        m = rng.standard_normal((20, 30))
        true = np.linalg.svd(m, compute_uv=False)[0]
        assert abs(estimate_norm(DenseMatrix(m)) - true) / true < 1e-6

    def test_zero_operator(self):
        assert estimate_norm(DenseMatrix(np.zeros((4, 5)))) == 0.0

    def test_deterministic_given_seed(self):
        op = make_gradient_2d(7, 9)
        assert estimate_norm(op, seed=5) == estimate_norm(op, seed=5)

    @pytest.mark.parametrize("idx", range(8))
    def test_norm_bound_on_probes(self, idx):
        rng = np.random.default_rng(21)
        op = all_operators(rng)[idx]
        est = estimate_norm(op)
        for _ in range(100):
            x = rng.standard_normal(op.in_dim)
            assert np.linalg.norm(op.apply(x)) <= (1 + 1e-6) * est * np.linalg.norm(x)

    def test_rejects_bad_tol(self):
        with pytest.raises(ValueError):
            estimate_norm(Identity(3), tol=0.0)


class TestComposite:
    def test_chain_mismatch_rejected(self):
        with pytest.raises(ValueError):
            Composite([make_difference_1d(5), make_difference_1d(5)])

    def test_scaled(self):
        op = Scaled(-2.0, Identity(3))
        np.testing.assert_array_equal(op.apply([1.0, 2.0, 3.0]), [-2.0, -4.0, -6.0])
        np.testing.assert_array_equal(op.adjoint_apply([1.0, 0.0, 1.0]), [-2.0, 0.0, -2.0])

    def test_to_dense_roundtrip(self):
        rng = np.random.default_rng(9)
        op = make_blur_downsample(6, 6, 0.8, 2)
        dense = op.to_dense()
        x = rng.standard_normal(op.in_dim)
        np.testing.assert_allclose(op.apply(x), dense @ x, atol=1e-12)
