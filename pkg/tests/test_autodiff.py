"""Gradient correctness for the reverse-mode core.

Hand-derived cases first, then seeded random expressions checked against
central finite differences.
"""

import numpy as np
import pytest

import dragonbench.autodiff as ad
from dragonbench.errors import NumericError, ShapeError


def fd_gradients(loss_fn, params, h=1e-6):
    """Central-difference gradients of loss_fn evaluated on plain arrays.

    Relies on every op in autodiff returning a plain ndarray when no Var
    is involved, so the same loss_fn serves both paths.
    """
    grads = []
    work = [np.array(p, dtype=np.float64) for p in params]
    for k in range(len(work)):
        flat = work[k].ravel()
        g = np.zeros_like(flat)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = float(ad._value(loss_fn(work)))
            flat[i] = orig - h
            down = float(ad._value(loss_fn(work)))
            flat[i] = orig
            g[i] = (up - down) / (2.0 * h)
        grads.append(g.reshape(work[k].shape))
    return grads


def test_square_loss_hand_derivative():
    # d/dw (w*x - y)^2 = 2*(w*x - y)*x = 8 at w=1, x=2, y=0
    x, y = 2.0, 0.0

    def loss(ps):
        (w,) = ps
        return ad.square(ad.sub(ad.mul(w, x), y))

    value, grads = ad.gradients([np.array(1.0)], loss)
    assert value == 4.0
    assert grads[0] == pytest.approx(8.0, abs=1e-12)


def test_unused_parameter_gets_zero_gradient():
    def loss(ps):
        used, unused = ps
        return ad.mean(ad.square(used))

    _, grads = ad.gradients([np.ones(3), np.ones((2, 2))], loss)
    assert grads[1].shape == (2, 2)
    assert np.all(grads[1] == 0.0)


def test_loss_without_vars_gives_zero_gradients():
    # A loss that never touches its parameters is structurally constant.
    _, grads = ad.gradients([np.ones(4)], lambda ps: np.float64(3.0))
    assert np.all(grads[0] == 0.0)


def test_non_scalar_loss_rejected():
    with pytest.raises(ShapeError):
        ad.gradients([np.ones(3)], lambda ps: ad.square(ps[0]))


def test_non_finite_loss_rejected():
    with np.errstate(divide="ignore"), pytest.raises(NumericError):
        ad.gradients([np.zeros(1)], lambda ps: ad.mean(ad.log(ps[0])))


def test_numpy_left_operand_still_builds_graph():
    # ndarray.__mul__ must defer to Var's reflected hook, not broadcast
    # over it as an object array.
    x = np.array([1.0, 2.0, 3.0])

    def loss(ps):
        out = x * ps[0] + x
        assert isinstance(out, ad.Var)
        return ad.mean(out)

    _, grads = ad.gradients([np.ones(3)], loss)
    np.testing.assert_allclose(grads[0], x / 3.0)


def test_operator_sugar_matches_function_forms():
    a = np.array([0.3, -0.7])
    b = np.array([1.1, 0.4])

    def via_ops(ps):
        p, q = ps
        return ad.vsum((p * q - q / 2.0) + (-p) + 1.0)

    def via_fns(ps):
        p, q = ps
        return ad.vsum(ad.add(ad.add(ad.sub(ad.mul(p, q), ad.div(q, 2.0)), ad.neg(p)), 1.0))

    v1, g1 = ad.gradients([a, b], via_ops)
    v2, g2 = ad.gradients([a, b], via_fns)
    assert v1 == v2
    for x, y in zip(g1, g2):
        np.testing.assert_array_equal(x, y)


def test_linear_gradients_match_fd():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(5, 3))
    w = rng.normal(size=(2, 3))
    b = rng.normal(size=2)

    def loss(ps):
        weights, bias = ps
        return ad.mean(ad.square(ad.linear(x, weights, bias)))

    _, grads = ad.gradients([w, b], loss)
    expected = fd_gradients(loss, [w, b])
    np.testing.assert_allclose(grads[0], expected[0], rtol=1e-6, atol=1e-9)
    np.testing.assert_allclose(grads[1], expected[1], rtol=1e-6, atol=1e-9)


def test_elu_value_and_gradient():
    x = np.array([-2.0, -0.5, 0.0, 0.5, 2.0])
    out = ad.elu(x)
    expected = np.where(x > 0, x, np.expm1(x))
    np.testing.assert_allclose(out, expected, rtol=1e-15)

    def loss(ps):
        return ad.vsum(ad.elu(ps[0]))

    _, grads = ad.gradients([x], loss)
    np.testing.assert_allclose(grads[0], np.where(x > 0, 1.0, np.exp(x)), rtol=1e-12)


def test_sigmoid_extreme_inputs_stay_in_open_interval():
    z = np.array([-800.0, -40.0, 0.0, 40.0, 800.0])
    s = ad.stable_sigmoid(z)
    assert np.all(s > 0.0) and np.all(s < 1.0)
    assert s[2] == 0.5

    def loss(ps):
        return ad.vsum(ad.sigmoid(ps[0]))

    _, grads = ad.gradients([z], loss)
    assert np.all(np.isfinite(grads[0]))


def test_clip_gradient_masks_out_of_range_entries():
    x = np.array([-1.0, 0.2, 0.8, 2.0])

    def loss(ps):
        return ad.vsum(ad.clip(ps[0], 0.0, 1.0))

    _, grads = ad.gradients([x], loss)
    np.testing.assert_array_equal(grads[0], [0.0, 1.0, 1.0, 0.0])


def test_reshape_and_mean_roundtrip():
    x = np.arange(6.0).reshape(2, 3)

    def loss(ps):
        return ad.mean(ad.reshape(ps[0], (6,)))

    value, grads = ad.gradients([x], loss)
    assert value == pytest.approx(2.5)
    np.testing.assert_allclose(grads[0], np.full((2, 3), 1.0 / 6.0))


def test_broadcast_gradients_unbroadcast_correctly():
    # (n, k) + (k,) must sum the bias gradient over rows.
    x = np.ones((4, 2))
    b = np.array([0.5, -0.5])

    def loss(ps):
        return ad.vsum(ad.mul(x, ad.add(np.zeros((4, 2)), ps[0])))

    _, grads = ad.gradients([b], loss)
    np.testing.assert_array_equal(grads[0], [4.0, 4.0])


def _random_expression_loss(x, target):
    def loss(ps):
        w1, b1, w2, b2 = ps
        h = ad.elu(ad.linear(x, w1, b1))
        out = ad.linear(h, w2, b2)
        p = ad.sigmoid(ad.reshape(out, (-1,)))
        return ad.add(
            ad.mean(ad.square(ad.sub(p, target))),
            ad.mul(0.1, ad.mean(ad.neg(ad.log(p)))),
        )

    return loss


def test_random_compositions_match_finite_differences():
    rng = np.random.default_rng(11)
    for trial in range(30):
        n = int(rng.integers(2, 6))
        d = int(rng.integers(1, 4))
        k = int(rng.integers(1, 4))
        x = rng.normal(size=(n, d))
        target = rng.uniform(0.2, 0.8, size=n)
        params = [
            rng.normal(size=(k, d)) * 0.5,
            rng.normal(size=k) * 0.1,
            rng.normal(size=(1, k)) * 0.5,
            rng.normal(size=1) * 0.1,
        ]
        loss = _random_expression_loss(x, target)
        value, grads = ad.gradients(params, loss)
        assert np.isfinite(value)
        expected = fd_gradients(loss, params)
        for got, want in zip(grads, expected):
            np.testing.assert_allclose(got, want, rtol=1e-5, atol=1e-8)


def test_repeated_use_of_same_var_accumulates():
    # f(w) = w*w + 3w has derivative 2w + 3.
    def loss(ps):
        (w,) = ps
        return ad.add(ad.mul(w, w), ad.mul(3.0, w))

    _, grads = ad.gradients([np.array(2.0)], loss)
    assert grads[0] == pytest.approx(7.0, abs=1e-12)
