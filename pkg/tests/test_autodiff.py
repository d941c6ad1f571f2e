import numpy as np
import pytest
import torch

from memno_lab.errors import EmptyAxisError, NonFiniteError, NonScalarRootError, ShapeError
from memno_lab.modules import autodiff as ad


class TestForwardOps:
    """Forward ops and their shape contract."""

    def test_add(self):
        out = ad.add(ad.tensor([1, 2]), ad.tensor([3, 4]))
        np.testing.assert_array_equal(out.detach().numpy(), [4, 6])

    def test_leading_batch_axis_is_accepted(self):
        out = ad.mul(ad.tensor(np.ones((3, 2))), ad.tensor([2.0, 3.0]))
        assert out.shape == (3, 2)

    def test_mismatched_shapes_name_both(self):
        with pytest.raises(ShapeError) as info:
            ad.add(ad.tensor(np.ones(3)), ad.tensor(np.ones(4)))
        assert "(3,)" in str(info.value) and "(4,)" in str(info.value)

    def test_matmul_inner_dimension(self):
        with pytest.raises(ShapeError):
            ad.matmul(ad.tensor(np.ones((2, 3))), ad.tensor(np.ones((2, 3))))

    def test_reshape_count(self):
        with pytest.raises(ShapeError):
            ad.reshape(ad.tensor(np.ones(6)), (4, 2))
        assert ad.reshape(ad.tensor(np.ones(6)), (-1, 2)).shape == (3, 2)

    def test_concat(self):
        out = ad.concat([ad.tensor(np.ones((2, 3))), ad.tensor(np.zeros((1, 3)))], axis=0)
        assert out.shape == (3, 3)
        with pytest.raises(ShapeError):
            ad.concat([ad.tensor(np.ones((2, 3))), ad.tensor(np.zeros((2, 2)))], axis=0)

    def test_slice_axis(self):
        x = ad.tensor(np.arange(12.0).reshape(3, 4))
        np.testing.assert_array_equal(ad.slice_axis(x, -1, 1, 3).numpy(), [[1, 2], [5, 6], [9, 10]])
        assert ad.slice_axis(x, 0, 2, 2).shape == (0, 4)
        with pytest.raises(ShapeError):
            ad.slice_axis(x, 1, 2, 5)

    def test_fft_of_impulse(self):
        out = ad.fft(ad.tensor([1.0, 0.0, 0.0, 0.0]))
        np.testing.assert_allclose(out.numpy(), np.ones(4), atol=1e-15)

    def test_ifft_inverts_fft(self):
        x = ad.tensor([0.3, -1.2, 0.7, 2.0])
        np.testing.assert_allclose(ad.ifft(ad.fft(x)).real.numpy(), x.numpy(), atol=1e-12)

    def test_rfft_irfft(self):
        x = ad.tensor(np.random.default_rng(0).standard_normal(10))
        np.testing.assert_allclose(ad.irfft(ad.rfft(x), n=10).numpy(), x.numpy(), atol=1e-12)

    def test_empty_axis(self):
        with pytest.raises(EmptyAxisError):
            ad.fft(ad.tensor(np.zeros(0)))

    def test_gather_modes(self):
        x = ad.tensor(np.arange(8.0))
        np.testing.assert_array_equal(ad.gather_modes(x, 0, 2, 3).numpy(), [0, 1, 5, 6, 7])
        with pytest.raises(ShapeError):
            ad.gather_modes(x, 0, 5, 4)

    def test_complex_storage(self):
        w = ad.complex_parameter(3, 2, scale=0.5)
        assert w.shape == (3, 2, 2)
        assert ad.as_complex(w).shape == (3, 2)
        with pytest.raises(ShapeError):
            ad.as_complex(torch.zeros(3, 3, dtype=ad.DTYPE))

    def test_parseval(self, rng):
        x = ad.tensor(rng.standard_normal(32))
        lhs = float(ad.sum(ad.mul(x, x)))
        rhs = float((ad.fft(x).abs() ** 2).sum()) / 32
        assert lhs == pytest.approx(rhs, abs=1e-10)


class TestBackward:
    """Reverse-mode gradients."""

    def test_sum_of_squares(self):
        x = ad.tensor([1.0, 2.0], requires_grad=True)
        ad.backward(ad.sum(ad.mul(x, x)))
        np.testing.assert_allclose(x.grad.numpy(), [2.0, 4.0])

    def test_fft_roundtrip_gradient_is_ones(self):
        x = ad.tensor(np.random.default_rng(1).standard_normal(8), requires_grad=True)
        ad.backward(ad.sum(ad.ifft(ad.fft(x)).real))
        np.testing.assert_allclose(x.grad.numpy(), np.ones(8), atol=1e-12)

    def test_gradients_accumulate(self):
        x = ad.tensor([1.0, -3.0], requires_grad=True)
        y = ad.sum(ad.scale(x, 2.0))
        ad.backward(y)
        ad.backward(y)
        np.testing.assert_allclose(x.grad.numpy(), [4.0, 4.0])

    def test_non_scalar_root(self):
        x = ad.tensor([1.0, 2.0], requires_grad=True)
        with pytest.raises(NonScalarRootError):
            ad.backward(ad.mul(x, x))

    def test_linearity(self, rng):
        x = ad.tensor(rng.standard_normal(5), requires_grad=True)
        f = lambda v: ad.sum(ad.gelu(v))
        g = lambda v: ad.sum(ad.mul(v, v))
        ad.backward(f(x))
        gf = x.grad.clone()
        x.grad = None
        ad.backward(g(x))
        gg = x.grad.clone()
        x.grad = None
        ad.backward(ad.add(ad.scale(f(x), 2.0), ad.scale(g(x), -0.5)))
        np.testing.assert_allclose(x.grad.numpy(), (2 * gf - 0.5 * gg).numpy(), atol=1e-10)


class TestGradCheck:
    """Central-difference agreement."""

    def test_sum(self, rng):
        assert ad.grad_check(ad.sum, ad.tensor(rng.standard_normal(6))) <= 1e-10

    def test_gelu(self, rng):
        assert ad.grad_check(lambda x: ad.sum(ad.gelu(x)), ad.tensor(rng.standard_normal(6))) <= 1e-4

    def test_nrmse_against_fixed_target(self, rng):
        target = ad.tensor(rng.standard_normal(8))

        def nrmse(x):
            return torch.linalg.vector_norm(ad.sub(x, target)) / torch.linalg.vector_norm(target)

        assert ad.grad_check(nrmse, ad.tensor(rng.standard_normal(8))) <= 1e-4

    def test_three_layer_composition(self, rng):
        W1 = ad.tensor(rng.standard_normal((6, 4)))
        W2 = ad.tensor(rng.standard_normal((4, 4)))
        W3 = ad.tensor(rng.standard_normal((4, 1)))

        def f(x):
            h = ad.gelu(ad.matmul(ad.reshape(x, (2, 6)), W1))
            h = ad.irfft(ad.rfft(ad.gelu(ad.matmul(h, W2)), axis=-1), n=4, axis=-1)
            return ad.mean(ad.matmul(h, W3))

        assert ad.grad_check(f, ad.tensor(rng.standard_normal(12))) <= 1e-4

    def test_non_finite_reports_coordinate(self):
        def f(x):
            return ad.sum(torch.log(x))

        with pytest.raises(NonFiniteError) as info:
            ad.grad_check(f, ad.tensor([1.0, 1e-7, 2.0]), h=1e-5)
        assert info.value.index == (1,)

    def test_module_parameters(self, rng):
        layer = torch.nn.Linear(3, 2, dtype=ad.DTYPE)
        x = ad.tensor(rng.standard_normal((4, 3)))
        assert ad.grad_check_module(layer, lambda model: ad.sum(ad.gelu(model(x)))) <= 1e-4
