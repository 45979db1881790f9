import numpy as np
import pytest

from fieldvae.errors import NumericError
from fieldvae.gradcheck import gradient_check, max_rel_error
from fieldvae.layers import BatchNorm, Dense, LeakyReLU
from fieldvae.optim import Adam


class TestAdam:
    def test_zero_gradient_is_noop(self):
        rng = np.random.default_rng(0)
        p = rng.standard_normal((3, 4))
        before = p.copy()
        adam = Adam([p], lr=0.1)
        for _ in range(25):
            adam.step([np.zeros_like(p)])
        np.testing.assert_array_equal(p, before)

    def test_first_step_closed_form(self):
        # with bias correction the first update is lr * g / (|g| + eps)
        lr, eps = 1e-3, 1e-8
        for g in (0.7, -2.5, 1e-4):
            p = np.array([1.0])
            adam = Adam([p], lr=lr, eps=eps)
            adam.step([np.array([g])])
            expected = 1.0 - lr * g / (abs(g) + eps)
            np.testing.assert_allclose(p, [expected], rtol=1e-12)
            assert abs(1.0 - p[0]) == pytest.approx(lr, rel=1e-4)

    def test_reduces_convex_quadratic(self):
        p = np.array([5.0, -3.0])
        adam = Adam([p], lr=0.05)
        loss0 = float(np.sum(p ** 2))
        for _ in range(2):
            adam.step([2.0 * p])
        assert float(np.sum(p ** 2)) < loss0

    def test_nonfinite_gradient_aborts(self):
        p = np.zeros(2)
        adam = Adam([p], lr=0.1)
        with pytest.raises(NumericError):
            adam.step([np.array([1.0, np.nan])])

    def test_step_count_increments(self):
        p = np.zeros(1)
        adam = Adam([p])
        for expected in (1, 2, 3):
            adam.step([np.ones(1)])
            assert adam.t == expected


class TestGradientCheckHarness:
    def test_linear_layer_squared_loss_exact(self):
        rng = np.random.default_rng(1)
        layer = Dense(3, 2, rng)
        x = rng.standard_normal((4, 3))
        t = rng.standard_normal((4, 2))

        def loss():
            return float(np.mean((layer.forward(x) - t) ** 2))

        def analytic():
            out = layer.forward(x)
            layer.backward(2.0 * (out - t) / out.size)
            return [layer.dW, layer.db]

        err = gradient_check(loss, [layer.W, layer.b], analytic)
        assert err < 1e-8

    def _stack_loss(self, seed=2):
        rng = np.random.default_rng(seed)
        d1 = Dense(4, 6, rng)
        bn = BatchNorm(6)
        act = LeakyReLU(0.2)
        d2 = Dense(6, 3, rng)
        x = rng.standard_normal((8, 4))
        t = rng.standard_normal((8, 3))

        def forward():
            h = act.forward(bn.forward(d1.forward(x), training=True))
            return d2.forward(h)

        def loss():
            return float(np.mean((forward() - t) ** 2))

        def analytic():
            out = forward()
            g = d2.backward(2.0 * (out - t) / out.size)
            d1.backward(bn.backward(act.backward(g)))
            return [d1.dW, d1.db, bn.dgamma, bn.dbeta, d2.dW, d2.db]

        params = [d1.W, d1.b, bn.gamma, bn.beta, d2.W, d2.b]
        return loss, params, analytic

    def test_stack_with_batchnorm_and_leaky(self):
        loss, params, analytic = self._stack_loss()
        assert gradient_check(loss, params, analytic) < 1e-4

    def test_detects_corrupted_gradient(self):
        loss, params, analytic = self._stack_loss(seed=3)

        def corrupted():
            grads = analytic()
            return [g * 1.01 for g in grads]

        assert gradient_check(loss, params, corrupted) > 1e-3


class TestMaxRelError:
    def test_zero_for_equal(self):
        a = np.random.default_rng(4).standard_normal((3, 3))
        assert max_rel_error(a, a.copy()) == 0.0

    def test_scales(self):
        a = np.array([1.0])
        assert max_rel_error(a, np.array([1.01])) == pytest.approx(0.01 / 1.01)
