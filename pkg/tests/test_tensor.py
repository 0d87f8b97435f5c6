import numpy as np
import pytest

from tempr import numkit as nk
from tempr.numkit import check_gradients


def randn(shape, seed):
    return np.random.default_rng(seed).normal(size=shape)


class TestMatmul:
    def test_identity(self):
        out = nk.matmul(nk.tensor([[1, 0], [0, 1]]), nk.tensor([[3, 4], [5, 6]]))
        np.testing.assert_array_equal(out.data, [[3, 4], [5, 6]])

    def test_hand_arithmetic(self):
        out = nk.matmul(nk.tensor([[1, 2]]), nk.tensor([[3], [4]]))
        np.testing.assert_array_equal(out.data, [[11]])

    def test_shape_mismatch(self):
        with pytest.raises(nk.ShapeError):
            nk.matmul(nk.tensor(np.ones((2, 3))), nk.tensor(np.ones((2, 3))))

    def test_grad_of_sum_is_row_sums(self):
        a = nk.parameter(randn((3, 4), 0))
        b = nk.tensor(randn((4, 2), 1))
        nk.sum_(nk.matmul(a, b)).backward()
        expected = np.broadcast_to(b.data.sum(axis=1), (3, 4))
        np.testing.assert_allclose(a.grad, expected, rtol=1e-6)

    @pytest.mark.parametrize("seed,shape_a,shape_b", [
        (0, (3, 4), (4, 2)), (1, (2, 5), (5, 5)), (2, (6, 1), (1, 3)),
    ])
    def test_gradcheck(self, seed, shape_a, shape_b):
        a = nk.parameter(randn(shape_a, seed))
        b = nk.parameter(randn(shape_b, seed + 100))
        check_gradients(lambda: nk.sum_(nk.matmul(a, b) ** 2.0), [a, b])

    def test_batched_broadcast_gradcheck(self):
        a = nk.parameter(randn((3, 2, 4), 5))
        b = nk.parameter(randn((4, 2), 6))  # broadcast over the batch axis
        check_gradients(lambda: nk.sum_(nk.matmul(a, b) ** 2.0), [a, b])


class TestSoftmax:
    def test_uniform(self):
        np.testing.assert_allclose(nk.softmax(nk.tensor([0.0, 0.0, 0.0])).data, [1 / 3] * 3)

    def test_no_overflow(self):
        np.testing.assert_allclose(nk.softmax(nk.tensor([1000.0, 1000.0])).data, [0.5, 0.5])

    def test_known_values(self):
        out = nk.softmax(nk.tensor([1.0, 2.0, 3.0]))
        np.testing.assert_allclose(out.data, [0.09003057, 0.24472847, 0.66524096], atol=1e-8)

    def test_shift_invariance(self):
        x = randn((4, 5), 3)
        a = nk.softmax(nk.tensor(x), axis=-1).data
        b = nk.softmax(nk.tensor(x + 123.456), axis=-1).data
        np.testing.assert_allclose(a, b, atol=1e-12)

    @pytest.mark.parametrize("seed,shape", [(0, (5,)), (1, (3, 4)), (2, (2, 3, 4))])
    def test_probability_vector(self, seed, shape):
        out = nk.softmax(nk.tensor(randn(shape, seed) * 10), axis=-1).data
        assert np.all(out >= 0)
        np.testing.assert_allclose(out.sum(axis=-1), 1.0, atol=1e-12)

    @pytest.mark.parametrize("seed,shape", [(0, (4,)), (1, (3, 5)), (2, (2, 2, 3))])
    def test_gradcheck(self, seed, shape):
        x = nk.parameter(randn(shape, seed))
        w = nk.tensor(randn(shape, seed + 50))
        check_gradients(lambda: nk.sum_(nk.softmax(x, axis=-1) * w), [x])


class TestLayernorm:
    def test_constant_row(self):
        out = nk.layernorm(nk.tensor([5.0, 5.0, 5.0]), nk.tensor(np.ones(3)), nk.tensor(np.zeros(3)))
        np.testing.assert_allclose(out.data, [0, 0, 0], atol=1e-9)

    def test_two_element_row(self):
        out = nk.layernorm(nk.tensor([1.0, 3.0]), nk.tensor(np.ones(2)), nk.tensor(np.zeros(2)))
        np.testing.assert_allclose(out.data, [-1.0, 1.0], atol=1e-4)

    def test_standardizes(self):
        x = randn((6, 8), 4)
        out = nk.layernorm(nk.tensor(x), nk.tensor(np.ones(8)), nk.tensor(np.zeros(8))).data
        np.testing.assert_allclose(out.mean(axis=-1), 0.0, atol=1e-9)
        np.testing.assert_allclose(out.var(axis=-1), 1.0, atol=1e-4)

    @pytest.mark.parametrize("seed,shape", [(0, (3, 5)), (1, (7,)), (2, (2, 3, 4))])
    def test_gradcheck(self, seed, shape):
        x = nk.parameter(randn(shape, seed))
        g = nk.parameter(randn((shape[-1],), seed + 10))
        b = nk.parameter(randn((shape[-1],), seed + 20))
        w = nk.tensor(randn(shape, seed + 30))
        check_gradients(lambda: nk.sum_(nk.layernorm(x, g, b) * w), [x, g, b])


class TestElementwiseOps:
    @pytest.mark.parametrize("op,seed", [
        (nk.exp, 0), (nk.sigmoid, 1), (nk.gelu, 2),
        (lambda t: nk.log(nk.exp(t)), 3), (lambda t: nk.power(t * t + 1.0, -0.5), 4),
        (lambda t: nk.clip_max(t, 0.3), 5),
    ])
    def test_gradcheck(self, op, seed):
        for shape in [(4,), (2, 3), (2, 2, 2)]:
            x = nk.parameter(randn(shape, seed))
            w = nk.tensor(randn(shape, seed + 7))
            check_gradients(lambda: nk.sum_(op(x) * w), [x])

    def test_broadcast_add_mul(self):
        a = nk.parameter(randn((3, 4), 0))
        b = nk.parameter(randn((4,), 1))
        check_gradients(lambda: nk.sum_((a + b) * b), [a, b])

    def test_max_gradcheck(self):
        x = nk.parameter(randn((3, 5), 9))
        check_gradients(lambda: nk.sum_(nk.max_(x, axis=-1) ** 2.0), [x])

    def test_concat_gradcheck(self):
        a = nk.parameter(randn((2, 3), 0))
        b = nk.parameter(randn((2, 2), 1))
        check_gradients(lambda: nk.sum_(nk.concat([a, b], axis=-1) ** 2.0), [a, b])

    def test_mean_reduction(self):
        x = nk.parameter(randn((4, 6), 2))
        nk.mean(x).backward()
        np.testing.assert_allclose(x.grad, np.full((4, 6), 1 / 24))


class TestConv3d:
    @pytest.mark.parametrize("seed,stride", [(0, (1, 1, 1)), (1, (1, 2, 2)), (2, (2, 2, 1))])
    def test_gradcheck(self, seed, stride):
        x = nk.parameter(randn((2, 2, 3, 4, 4), seed))
        w = nk.parameter(randn((3, 2, 3, 3, 3), seed + 1))
        b = nk.parameter(randn((3,), seed + 2))
        check_gradients(lambda: nk.sum_(nk.conv3d(x, w, b, stride=stride) ** 2.0), [x, w, b])

    def test_channel_mismatch(self):
        with pytest.raises(nk.ShapeError):
            nk.conv3d(nk.tensor(np.ones((1, 2, 4, 4, 4))), nk.tensor(np.ones((3, 5, 3, 3, 3))))

    def test_matches_direct_convolution(self):
        # brute-force triple loop oracle on a tiny instance
        x = randn((1, 1, 3, 3, 3), 7)
        w = randn((1, 1, 3, 3, 3), 8)
        out = nk.conv3d(nk.tensor(x), nk.tensor(w)).data
        xp = np.pad(x[0, 0], 1)
        expected = np.zeros((3, 3, 3))
        for a in range(3):
            for b in range(3):
                for c in range(3):
                    expected[a, b, c] = np.sum(xp[a : a + 3, b : b + 3, c : c + 3] * w[0, 0])
        np.testing.assert_allclose(out[0, 0], expected, atol=1e-12)


class TestGraph:
    def test_fanout_accumulates_like_unrolled_copy(self):
        x_data = randn((3, 3), 11)
        # graph reusing one tensor twice
        x1 = nk.parameter(x_data.copy())
        y1 = nk.sum_(nk.matmul(x1, x1))
        y1.backward()
        # unrolled: two independent copies of the same values
        xa = nk.parameter(x_data.copy())
        xb = nk.parameter(x_data.copy())
        nk.sum_(nk.matmul(xa, xb)).backward()
        np.testing.assert_allclose(x1.grad, xa.grad + xb.grad, atol=1e-12)

    def test_linearity_of_summed_outputs(self):
        x = nk.parameter(randn((4,), 12))
        y1 = nk.sum_(nk.exp(x))
        y2 = nk.sum_(nk.sigmoid(x))
        (y1 + y2).backward()
        combined = x.grad.copy()
        x.zero_grad()
        x2 = nk.parameter(x.data.copy())
        nk.sum_(nk.exp(x2)).backward()
        x3 = nk.parameter(x.data.copy())
        nk.sum_(nk.sigmoid(x3)).backward()
        np.testing.assert_allclose(combined, x2.grad + x3.grad, atol=1e-12)

    def test_no_grad_suppresses_recording(self):
        x = nk.parameter(randn((3,), 13))
        with nk.no_grad():
            y = nk.sum_(x * x)
        assert y._backward is None and not y.requires_grad

    def test_deterministic_forward(self):
        def run():
            rng = np.random.default_rng(42)
            a = nk.tensor(rng.normal(size=(5, 5)))
            return nk.softmax(nk.matmul(a, a), axis=-1).data

        np.testing.assert_array_equal(run(), run())

    def test_nonfinite_detection(self):
        with pytest.raises(nk.NumericError):
            nk.check_finite(nk.tensor([1.0, np.inf]), "probe")
