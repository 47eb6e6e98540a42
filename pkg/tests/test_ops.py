import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from cryptocast import ops
from cryptocast.errors import DimensionError
from cryptocast.rng import Rng


finite_matrices = arrays(
    np.float64,
    st.tuples(st.integers(1, 5), st.integers(1, 5)),
    elements=st.floats(-50, 50, allow_nan=False),
)


class TestMatmul:
    def test_identity(self):
        eye = np.eye(2)
        a = np.array([[1.0, 2.0], [3.0, 4.0]])
        assert np.array_equal(ops.matmul(eye, a), a)

    def test_hand_product(self):
        # [[1,2]] @ [[3],[4]] = [[1*3 + 2*4]] = [[11]]
        out = ops.matmul(np.array([[1.0, 2.0]]), np.array([[3.0], [4.0]]))
        assert out.shape == (1, 1)
        assert out[0, 0] == 11.0

    def test_shape_mismatch_names_both_shapes(self):
        with pytest.raises(DimensionError, match=r"\(2, 3\).*\(2, 3\)"):
            ops.matmul(np.zeros((2, 3)), np.zeros((2, 3)))

    def test_rejects_non_2d(self):
        with pytest.raises(DimensionError):
            ops.matmul(np.zeros(3), np.zeros((3, 2)))


class TestActivations:
    def test_sigmoid_at_zero(self):
        assert ops.elementwise_activation("sigmoid", np.array([0.0]))[0] == 0.5

    def test_tanh_at_zero(self):
        assert ops.elementwise_activation("tanh", np.array([0.0]))[0] == 0.0

    def test_relu_definition(self):
        out = ops.elementwise_activation("relu", np.array([-3.0, 3.0]))
        assert out.tolist() == [0.0, 3.0]

    def test_unknown_kind(self):
        with pytest.raises(ValueError, match="softplus"):
            ops.elementwise_activation("softplus", np.zeros(2))

    def test_sigmoid_extreme_inputs_stay_finite(self):
        out = ops.sigmoid(np.array([-1e6, 1e6]))
        assert np.all(np.isfinite(out))
        assert out[0] == 0.0 and out[1] == 1.0

    @given(arrays(np.float64, st.tuples(st.integers(1, 5), st.integers(1, 5)),
                  elements=st.floats(-18, 18, allow_nan=False)))
    @settings(max_examples=50, deadline=None)
    def test_ranges(self, x):
        # strict bounds hold wherever float64 has room; saturation to the
        # closed endpoints (tanh beyond |x|~19, sigmoid beyond |x|~37) is
        # covered by the extreme-input test
        s = ops.sigmoid(x)
        t = ops.tanh(x)
        r = ops.relu(x)
        assert np.all((s > 0.0) & (s < 1.0))
        assert np.all((t > -1.0) & (t < 1.0))
        assert np.all(r >= 0.0)


class TestSoftmax:
    def test_symmetric_row(self):
        assert ops.softmax_rows(np.array([[0.0, 0.0]])).tolist() == [[0.5, 0.5]]

    def test_single_element_row(self):
        assert ops.softmax_rows(np.array([[7.3]])).tolist() == [[1.0]]

    def test_direct_exponentiation_oracle(self):
        row = np.array([1.0, 2.0, 3.0])
        expected = np.exp(row) / np.exp(row).sum()
        out = ops.softmax_rows(row[None, :])[0]
        assert np.allclose(out, expected, atol=1e-15)
        assert np.allclose(out, [0.09003057, 0.24472847, 0.66524096], atol=1e-8)

    def test_large_values_do_not_overflow(self):
        out = ops.softmax_rows(np.array([[1e4, 1e4 + 1.0]]))
        assert np.all(np.isfinite(out))

    @given(finite_matrices)
    @settings(max_examples=60, deadline=None)
    def test_rows_sum_to_one(self, x):
        sums = ops.softmax_rows(x).sum(axis=-1)
        assert np.all(np.abs(sums - 1.0) < 1e-12)


class TestLayerNorm:
    def test_constant_row_maps_to_beta(self):
        out = ops.layer_norm(np.array([4.0, 4.0, 4.0]), np.ones(3), np.zeros(3))
        assert np.allclose(out, 0.0)

    def test_two_point_row(self):
        # mean 2, population variance 1 -> normalized [-1, 1]
        out = ops.layer_norm(np.array([1.0, 3.0]), np.ones(2), np.zeros(2), eps=1e-15)
        assert np.allclose(out, [-1.0, 1.0], atol=1e-7)

    def test_zero_gamma_gives_beta(self):
        beta = np.array([2.0, -1.0, 0.5])
        out = ops.layer_norm(np.array([9.0, -3.0, 14.0]), np.zeros(3), beta)
        assert np.array_equal(out, beta)

    def test_length_mismatch(self):
        with pytest.raises(DimensionError):
            ops.layer_norm(np.zeros(3), np.ones(2), np.zeros(3))

    @given(arrays(np.float64, st.integers(2, 8),
                  elements=st.floats(-100, 100, allow_nan=False)))
    @settings(max_examples=50, deadline=None)
    def test_normalized_statistics(self, row):
        if np.ptp(row) < 1e-3:
            return  # (near-)constant rows are the eps-guarded case
        out = ops.layer_norm(row, np.ones(row.size), np.zeros(row.size), eps=1e-15)
        assert abs(out.mean()) < 1e-10
        assert abs((out**2).mean() - 1.0) < 1e-8

    def test_backward_matches_finite_differences(self):
        rng = Rng(3)
        x = rng.uniform(-2, 2, (4, 5))
        gamma = rng.uniform(0.5, 1.5, (5,))
        beta = rng.uniform(-1, 1, (5,))
        dout = rng.uniform(-1, 1, (4, 5))

        def loss(x_, g_, b_):
            out, _ = ops.layer_norm_with_cache(x_, g_, b_)
            return float((out * dout).sum())

        _, cache = ops.layer_norm_with_cache(x, gamma, beta)
        dx, dgamma, dbeta = ops.layer_norm_backward(dout, cache)
        h = 1e-6
        for arr, grad, which in ((x, dx, 0), (gamma, dgamma, 1), (beta, dbeta, 2)):
            flat = arr.reshape(-1)
            gflat = np.asarray(grad).reshape(-1)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + h
                up = loss(x, gamma, beta)
                flat[i] = orig - h
                down = loss(x, gamma, beta)
                flat[i] = orig
                numeric = (up - down) / (2 * h)
                assert abs(numeric - gflat[i]) < 1e-4 * max(1.0, abs(gflat[i]))


class TestXavier:
    def test_same_seed_identical(self):
        assert np.array_equal(ops.xavier_init(4, 6, 42), ops.xavier_init(4, 6, 42))

    def test_entries_within_limit(self):
        w = ops.xavier_init(5, 7, 1)
        limit = np.sqrt(6.0 / 12.0)
        assert np.all(np.abs(w) <= limit)

    def test_one_by_one_bound(self):
        # limit for 1x1 is sqrt(6/2) = sqrt(3)
        for seed in (0, 1, 2, 99):
            v = ops.xavier_init(1, 1, seed)[0, 0]
            assert -np.sqrt(3.0) < v < np.sqrt(3.0)

    def test_zero_dimension_rejected(self):
        with pytest.raises(DimensionError):
            ops.xavier_init(0, 3, 1)
