import numpy as np
import pytest
from numpy.testing import assert_allclose

from bioattn import kernels
from bioattn import tensor as T
from bioattn.errors import ConfigurationError, ShapeError
from bioattn.tensor import Tensor

from oracles import conv2d_direct


class TestTensorBasics:
    def test_shape_data_consistency(self):
        t = Tensor(np.arange(12.0).reshape(3, 4))
        assert t.shape == (3, 4)
        assert t.size == 12

    def test_data_is_immutable(self):
        t = Tensor([1.0, 2.0])
        with pytest.raises(ValueError):
            t.data[0] = 5.0

    def test_zero_extent_rejected(self):
        with pytest.raises(ShapeError):
            Tensor(np.zeros((2, 0)))

    def test_nonfinite_rejected(self):
        with pytest.raises(ValueError):
            Tensor([1.0, np.inf])

    def test_constructor_copies(self):
        src = np.ones(3)
        t = Tensor(src)
        src[0] = 7.0
        assert t.data[0] == 1.0


class TestGlobalAvgPool:
    def test_constant_input(self):
        for shape in [(1, 1, 2, 2), (2, 3, 5, 7), (1, 4, 1, 1)]:
            out = T.global_avg_pool(Tensor(np.full(shape, 3.0)))
            assert np.all(out.data == 3.0)

    def test_single_channel_mean(self):
        x = Tensor(np.array([[1.0, 2.0], [3.0, 4.0]]).reshape(1, 1, 2, 2))
        assert T.global_avg_pool(x).item() == 2.5

    def test_two_channel_means(self):
        x = np.zeros((1, 2, 2, 2))
        x[0, 0] = np.array([[0.0, 0.0], [6.0, 6.0]])
        x[0, 1] = 1.0
        out = T.global_avg_pool(Tensor(x))
        assert_allclose(out.data, [[3.0, 1.0]])

    def test_rank_error(self):
        with pytest.raises(ShapeError):
            T.global_avg_pool(Tensor(np.ones((2, 3))))


class TestSigmoid:
    def test_zero(self):
        assert T.sigmoid(Tensor(0.0)).item() == 0.5

    def test_hand_value(self):
        assert_allclose(T.sigmoid(Tensor(3.0)).item(), 0.9525741268224334, rtol=1e-12)

    def test_symmetry(self):
        rng = np.random.default_rng(0)
        v = rng.normal(scale=5.0, size=50)
        s = T.sigmoid(Tensor(v)).data + T.sigmoid(Tensor(-v)).data
        assert_allclose(s, 1.0, atol=1e-15)

    def test_saturation_is_finite(self):
        out = T.sigmoid(Tensor([-1000.0, 1000.0])).data
        assert np.all(np.isfinite(out))
        assert out[0] == 0.0 and out[1] == 1.0


class TestL2Normalize:
    def test_three_four(self):
        out = T.l2_normalize(Tensor([[3.0, 4.0]]))
        assert_allclose(out.data, [[0.6, 0.8]], atol=1e-12)

    def test_zero_vector(self):
        out = T.l2_normalize(Tensor([[0.0, 0.0]]))
        assert np.all(out.data == 0.0)

    def test_scale_invariance(self):
        rng = np.random.default_rng(1)
        v = rng.normal(size=(4, 6))
        for k in (0.5, 3.0, 250.0):
            assert_allclose(T.l2_normalize(Tensor(k * v)).data,
                            T.l2_normalize(Tensor(v)).data, atol=1e-9)

    def test_output_norm_near_one(self):
        rng = np.random.default_rng(2)
        v = rng.normal(size=(8, 5)) + 0.1
        out = T.l2_normalize(Tensor(v)).data
        norms = np.linalg.norm(out, axis=1)
        assert np.all(norms <= 1.0 + 1e-15)
        assert np.all(norms >= 1.0 - 10 * 1e-12 * 5)

    def test_eps_must_be_positive(self):
        with pytest.raises(ConfigurationError):
            T.l2_normalize(Tensor([[1.0, 2.0]]), eps=0.0)


class TestSpatialMoments:
    def test_constant_channel(self):
        mean, var = T.spatial_moments(Tensor(np.full((1, 2, 3, 3), 4.0)))
        assert_allclose(mean.data, 4.0)
        assert_allclose(var.data, 0.0, atol=1e-15)

    def test_hand_value(self):
        x = np.array([0.0, 0.0, 6.0, 6.0]).reshape(1, 1, 2, 2)
        mean, var = T.spatial_moments(Tensor(x))
        assert mean.item() == 3.0
        assert var.item() == 12.0

    def test_shift_invariance_of_variance(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=(2, 3, 4, 4))
        _, v1 = T.spatial_moments(Tensor(x))
        m2, v2 = T.spatial_moments(Tensor(x + 5.0))
        assert_allclose(v1.data, v2.data, atol=1e-12)
        assert_allclose(m2.data, T.spatial_moments(Tensor(x))[0].data + 5.0, atol=1e-12)

    def test_degenerate_extent(self):
        with pytest.raises(ShapeError):
            T.spatial_moments(Tensor(np.ones((1, 2, 1, 1))))


class TestConv1dChannels:
    def test_delta_kernel_is_identity(self):
        rng = np.random.default_rng(4)
        v = rng.normal(size=(3, 7))
        out = T.conv1d_channels(Tensor(v), Tensor([0.0, 1.0, 0.0]))
        assert_allclose(out.data, v, atol=1e-15)

    def test_sliding_sum(self):
        out = T.conv1d_channels(Tensor([[1.0, 2.0, 3.0]]), Tensor([1.0, 1.0, 1.0]))
        assert_allclose(out.data, [[3.0, 6.0, 5.0]])

    def test_zero_kernel(self):
        out = T.conv1d_channels(Tensor(np.ones((2, 5))), Tensor([0.0, 0.0, 0.0]))
        assert np.all(out.data == 0.0)

    def test_even_kernel_rejected(self):
        with pytest.raises(ConfigurationError):
            T.conv1d_channels(Tensor(np.ones((1, 4))), Tensor([1.0, 1.0]))


class TestDense:
    def test_identity_weight(self):
        rng = np.random.default_rng(5)
        v = rng.normal(size=(3, 4))
        out = T.dense(Tensor(v), Tensor(np.eye(4)))
        assert_allclose(out.data, v, atol=1e-15)

    def test_dot_product(self):
        out = T.dense(Tensor([[1.0, 2.0]]), Tensor([[3.0, 4.0]]))
        assert out.item() == 11.0

    def test_zero_weight_with_bias(self):
        out = T.dense(Tensor(np.ones((3, 2))), Tensor(np.zeros((4, 2))),
                      Tensor([1.0, 2.0, 3.0, 4.0]))
        assert_allclose(out.data, np.tile([1.0, 2.0, 3.0, 4.0], (3, 1)))

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            T.dense(Tensor(np.ones((2, 3))), Tensor(np.ones((4, 5))))


class TestConv2d:
    def test_one_by_one_identity(self):
        rng = np.random.default_rng(6)
        x = rng.normal(size=(2, 3, 4, 4))
        w = np.zeros((3, 3, 1, 1))
        for c in range(3):
            w[c, c, 0, 0] = 1.0
        out = T.conv2d(Tensor(x), Tensor(w))
        assert_allclose(out.data, x, atol=1e-15)

    def test_averaging_kernel_on_constant(self):
        x = Tensor(np.full((1, 1, 5, 5), 2.0))
        w = Tensor(np.full((1, 1, 3, 3), 1.0 / 9.0))
        out = T.conv2d(x, w)
        assert_allclose(out.data, 2.0, atol=1e-12)

    def test_two_by_two_sum(self):
        x = Tensor(np.array([[1.0, 2.0], [3.0, 4.0]]).reshape(1, 1, 2, 2))
        w = Tensor(np.ones((1, 1, 2, 2)))
        assert T.conv2d(x, w).item() == 10.0

    def test_delta_kernel_selects_channel(self):
        rng = np.random.default_rng(7)
        x = rng.normal(size=(1, 3, 4, 4))
        w = np.zeros((1, 3, 3, 3))
        w[0, 1, 1, 1] = 1.0
        out = T.conv2d(Tensor(x), Tensor(w), padding=1)
        assert_allclose(out.data[0, 0], x[0, 1], atol=1e-15)

    def test_non_integral_output_rejected(self):
        with pytest.raises(ShapeError):
            T.conv2d(Tensor(np.ones((1, 1, 8, 8))), Tensor(np.ones((1, 1, 3, 3))), stride=2)

    @pytest.mark.parametrize("stride,padding", [(1, 0), (1, 1), (2, 1), (3, 0)])
    def test_matches_direct_oracle(self, stride, padding):
        rng = np.random.default_rng(8)
        h = stride * 4 + 3 - 2 * padding
        x = rng.normal(size=(2, 3, h, h))
        w = rng.normal(size=(4, 3, 3, 3))
        b = rng.normal(size=4)
        out = T.conv2d(Tensor(x), Tensor(w), Tensor(b), stride=stride, padding=padding)
        assert_allclose(out.data, conv2d_direct(x, w, b, stride, padding), atol=1e-12)


class TestBackward:
    def test_square_gradient(self):
        x = Tensor(3.0, requires_grad=True)
        (x * x).backward()
        assert x.grad == 6.0

    def test_sigmoid_gradient_at_zero(self):
        x = Tensor(0.0, requires_grad=True)
        T.sigmoid(x).backward()
        assert_allclose(x.grad, 0.25, atol=1e-15)

    def test_non_scalar_seed_rejected(self):
        x = Tensor(np.ones(3), requires_grad=True)
        with pytest.raises(ShapeError):
            (x * x).backward()

    def test_unreachable_leaf_gets_zero_gradient(self):
        x = Tensor(2.0, requires_grad=True)
        y = Tensor(5.0, requires_grad=True)
        (x * x).backward()
        assert y.grad == 0.0

    def test_gradient_accumulates_over_reuse(self):
        x = Tensor(2.0, requires_grad=True)
        (x * x + x).backward()
        assert x.grad == 5.0


class TestGradCheck:
    def test_sum_of_squares(self):
        rng = np.random.default_rng(9)
        x = Tensor(rng.normal(size=(3, 4)))
        err = T.grad_check(lambda t: (t * t).sum(), x)
        assert err < 1e-8

    def test_constant_function(self):
        x = Tensor(np.ones((2, 2)))
        err = T.grad_check(lambda t: (t * 0.0).sum(), x)
        assert err == 0.0

    def test_step_must_be_positive(self):
        with pytest.raises(ConfigurationError):
            T.grad_check(lambda t: t.sum(), Tensor([1.0]), h=0.0)

    @pytest.mark.parametrize("name,fn,shape", [
        ("sigmoid", lambda t: T.sigmoid(t).sum(), (2, 3)),
        ("exp", lambda t: T.exp(t).sum(), (4,)),
        ("relu", lambda t: T.relu(t).sum(), (3, 3)),
        ("mean_axis", lambda t: (t.mean(axis=1, keepdims=True) * t).sum(), (3, 4)),
        ("div_broadcast", lambda t: (t / (t.sum(axis=1, keepdims=True) + 3.0)).sum(), (2, 3)),
        ("l2_normalize", lambda t: (T.l2_normalize(t) * T.l2_normalize(t) * Tensor(np.arange(6.0).reshape(2, 3))).sum(), (2, 3)),
        ("power", lambda t: T.power(t * t + 1.0, -2.0).sum(), (5,)),
        ("sqrt", lambda t: T.sqrt(t * t + 1.0).sum(), (4,)),
        ("clamp_min", lambda t: T.clamp_min(t, 0.25).sum(), (6,)),
        ("reshape", lambda t: (t.reshape((6,)) * Tensor(np.arange(6.0))).sum(), (2, 3)),
    ])
    def test_elementwise_ops(self, name, fn, shape):
        rng = np.random.default_rng(abs(hash(name)) % 2 ** 31)
        x = Tensor(rng.normal(size=shape) + 2.0)
        assert T.grad_check(fn, x) < 1e-6

    def test_conv1d_gradients(self):
        rng = np.random.default_rng(10)
        v = Tensor(rng.normal(size=(2, 5)))
        k = Tensor(rng.normal(size=3))
        err = T.grad_check(lambda a, b: (T.conv1d_channels(a, b) ** 2.0).sum(), [v, k])
        assert err < 1e-6

    def test_dense_gradients(self):
        rng = np.random.default_rng(11)
        v = Tensor(rng.normal(size=(3, 4)))
        w = Tensor(rng.normal(size=(2, 4)))
        b = Tensor(rng.normal(size=2))
        err = T.grad_check(lambda a, ww, bb: (T.dense(a, ww, bb) ** 2.0).sum(), [v, w, b])
        assert err < 1e-6

    @pytest.mark.parametrize("stride,padding", [(1, 1), (2, 0)])
    def test_conv2d_gradients(self, stride, padding):
        rng = np.random.default_rng(12)
        h = stride * 2 + 3 - 2 * padding
        x = Tensor(rng.normal(size=(2, 2, h, h)))
        w = Tensor(rng.normal(size=(3, 2, 3, 3)))
        b = Tensor(rng.normal(size=3))
        err = T.grad_check(
            lambda a, ww, bb: (T.conv2d(a, ww, bb, stride=stride, padding=padding) ** 2.0).sum(),
            [x, w, b])
        assert err < 1e-5

    def test_global_avg_pool_gradients(self):
        rng = np.random.default_rng(13)
        x = Tensor(rng.normal(size=(2, 3, 3, 2)))
        err = T.grad_check(lambda t: (T.global_avg_pool(t) ** 2.0).sum(), x)
        assert err < 1e-6


class TestDeterminism:
    def test_pipeline_bit_identical(self):
        def pipeline():
            rng = np.random.default_rng(99)
            x = Tensor(rng.normal(size=(2, 4, 6, 6)))
            w = Tensor(rng.normal(size=(4, 4, 3, 3)))
            y = T.conv2d(x, w, padding=1)
            return T.sigmoid(T.global_avg_pool(y)).data

        a, b = pipeline(), pipeline()
        assert np.array_equal(a, b)


class TestKernelBackends:
    def test_backends_agree(self):
        from bioattn.kernels import _conv_py
        try:
            from bioattn.kernels import _conv_cy
        except ImportError:
            pytest.skip("compiled kernels not built")
        rng = np.random.default_rng(14)
        x = rng.normal(size=(2, 3, 9, 9))
        w = rng.normal(size=(4, 3, 3, 3))
        b = rng.normal(size=4)
        go = rng.normal(size=(2, 4, 9, 9))
        assert_allclose(_conv_py.conv2d_forward(x, w, b, 1, 1),
                        _conv_cy.conv2d_forward(x, w, b, 1, 1), atol=1e-12)
        for gp, gc in zip(_conv_py.conv2d_backward(x, w, go, 1, 1),
                          _conv_cy.conv2d_backward(x, w, go, 1, 1)):
            assert_allclose(gp, gc, atol=1e-11)

    def test_selected_backend_reported(self):
        assert kernels.BACKEND in ("cython", "python")
