"""Layers: conv/transposed-conv geometry and adjointness, batchnorm,
dropout, SGD, and finite-difference gradient checks for each layer kind."""

import numpy as np
import pytest

from coala.engine import (
    BatchNorm, Sgd, ShapeError, Tensor,
    batchnorm, conv2d, conv_transpose2d, dropout, linear,
)
from gradcheck import check_gradients, leaf

SEEDS = range(20)


def _t(arr, grad=False):
    return Tensor(np.asarray(arr, dtype=np.float64), requires_grad=grad)


# ----------------------------------------------------------------- conv2d

def test_conv_output_shape_96_to_48():
    x = _t(np.zeros((1, 1, 96, 96)))
    w = _t(np.zeros((128, 1, 4, 4)))
    b = _t(np.zeros(128))
    assert conv2d(x, w, b, stride=(2, 2), padding=(1, 1)).shape == (1, 128, 48, 48)


def test_conv_identity_channel_map():
    rng = np.random.default_rng(0)
    x = _t(rng.standard_normal((2, 3, 5, 5)))
    w = np.zeros((3, 3, 1, 1))
    for c in range(3):
        w[c, c, 0, 0] = 1.0
    y = conv2d(x, _t(w), None, stride=(1, 1), padding=(0, 0))
    np.testing.assert_allclose(y.data, x.data)


def test_conv_ones_summation_oracle():
    x = _t(np.ones((1, 1, 3, 3)))
    w = _t(np.ones((1, 1, 2, 2)))
    y = conv2d(x, w, None, stride=(1, 1), padding=(0, 0))
    np.testing.assert_allclose(y.data, np.full((1, 1, 2, 2), 4.0))


def test_conv_shape_mismatch_message_has_both_shapes():
    x = _t(np.zeros((1, 2, 8, 8)))
    w = _t(np.zeros((4, 3, 3, 3)))
    with pytest.raises(ShapeError, match=r"\(1, 2, 8, 8\).*\(4, 3, 3, 3\)"):
        conv2d(x, w, None, stride=(1, 1), padding=(0, 0))


def test_conv_kernel_larger_than_input_rejected():
    x = _t(np.zeros((1, 1, 2, 2)))
    w = _t(np.zeros((1, 1, 4, 4)))
    with pytest.raises(ShapeError):
        conv2d(x, w, None, stride=(1, 1), padding=(0, 0))


@pytest.mark.parametrize("seed", SEEDS)
def test_conv_grads(seed):
    rng = np.random.default_rng(seed)
    x = leaf(rng, (2, 2, 5, 5))
    w = leaf(rng, (3, 2, 3, 3))
    b = leaf(rng, (3,))
    check_gradients(
        lambda: (conv2d(x, w, b, stride=(2, 2), padding=(1, 1)) ** 2).sum(), [x, w, b])


# ------------------------------------------------------- conv_transpose2d

def test_conv_transpose_shape_3_to_6():
    x = _t(np.zeros((1, 128, 3, 3)))
    w = _t(np.zeros((128, 128, 4, 4)))
    y = conv_transpose2d(x, w, None, stride=(2, 2), padding=(1, 1))
    assert y.shape == (1, 128, 6, 6)


def test_conv_transpose_chain_3_to_96():
    x = _t(np.zeros((1, 4, 3, 3)))
    w = _t(np.zeros((4, 4, 4, 4)))
    for _ in range(5):
        x = conv_transpose2d(x, w, None, stride=(2, 2), padding=(1, 1))
    assert x.shape == (1, 4, 96, 96)


@pytest.mark.parametrize("seed", SEEDS)
def test_conv_transpose_is_adjoint_of_conv(seed):
    rng = np.random.default_rng(seed)
    x = _t(rng.standard_normal((1, 2, 4, 4)))
    w = _t(rng.standard_normal((3, 2, 3, 3)))    # conv weights [Cout,Cin,kh,kw]
    y = _t(rng.standard_normal((1, 3, 2, 2)))
    lhs = float((conv2d(x, w, None, (1, 1), (0, 0)).data * y.data).sum())
    rhs = float((conv_transpose2d(y, w, None, (1, 1), (0, 0)).data * x.data).sum())
    assert abs(lhs - rhs) < 1e-5


@pytest.mark.parametrize("seed", SEEDS)
def test_conv_transpose_grads(seed):
    rng = np.random.default_rng(seed)
    x = leaf(rng, (2, 3, 3, 3))
    w = leaf(rng, (3, 2, 4, 4))
    b = leaf(rng, (2,))
    check_gradients(
        lambda: (conv_transpose2d(x, w, b, stride=(2, 2), padding=(1, 1)) ** 2).sum(),
        [x, w, b])


# ------------------------------------------------------------------ linear

def test_linear_shape_check():
    with pytest.raises(ShapeError):
        linear(_t(np.zeros((2, 5))), _t(np.zeros((3, 4))), None)


@pytest.mark.parametrize("seed", SEEDS)
def test_linear_grads(seed):
    rng = np.random.default_rng(seed)
    x = leaf(rng, (3, 4))
    w = leaf(rng, (2, 4))
    b = leaf(rng, (2,))
    check_gradients(lambda: (linear(x, w, b) ** 2).sum(), [x, w, b])


# --------------------------------------------------------------- batchnorm

def _bn_buffers(c):
    return np.zeros(c, dtype=np.float64), np.ones(c, dtype=np.float64)


def test_batchnorm_constant_channel_outputs_beta():
    x = _t(np.full((4, 3), 7.0))
    gamma, beta = _t(np.ones(3), True), _t(np.array([1.0, 2.0, 3.0]), True)
    rm, rv = _bn_buffers(3)
    y = batchnorm(x, gamma, beta, rm, rv, training=True)
    np.testing.assert_allclose(y.data, np.tile([1.0, 2.0, 3.0], (4, 1)), atol=1e-4)


def test_batchnorm_plus_minus_one():
    x = _t(np.array([[-1.0], [1.0]]))
    gamma, beta = _t(np.ones(1), True), _t(np.zeros(1), True)
    rm, rv = _bn_buffers(1)
    y = batchnorm(x, gamma, beta, rm, rv, training=True)
    np.testing.assert_allclose(y.data, [[-1.0], [1.0]], atol=1e-4)


def test_batchnorm_eval_affine_identity():
    x = _t(np.array([[1.0]]))
    gamma, beta = _t(np.array([2.0]), True), _t(np.array([3.0]), True)
    rm = np.zeros(1)
    rv = np.ones(1) - 1e-5                # cancel epsilon for an exact check
    y = batchnorm(x, gamma, beta, rm, rv, training=False)
    np.testing.assert_allclose(y.data, [[5.0]], atol=1e-6)


def test_batchnorm_batch_of_one_rejected_in_training():
    gamma, beta = _t(np.ones(2), True), _t(np.zeros(2), True)
    rm, rv = _bn_buffers(2)
    with pytest.raises(ValueError, match="batch"):
        batchnorm(_t(np.ones((1, 2))), gamma, beta, rm, rv, training=True)


def test_batchnorm_updates_running_stats():
    x = _t(np.array([[0.0], [2.0]]))       # batch mean 1, var 1
    gamma, beta = _t(np.ones(1), True), _t(np.zeros(1), True)
    rm, rv = _bn_buffers(1)
    batchnorm(x, gamma, beta, rm, rv, training=True)
    np.testing.assert_allclose(rm, [0.1])          # 0.9*0 + 0.1*1
    np.testing.assert_allclose(rv, [0.9 + 0.1])    # 0.9*1 + 0.1*1


@pytest.mark.parametrize("seed", SEEDS)
def test_batchnorm_train_grads(seed):
    rng = np.random.default_rng(seed)
    x = leaf(rng, (4, 3))
    gamma = leaf(rng, (3,), low=0.5, high=1.5)
    beta = leaf(rng, (3,))
    rm, rv = _bn_buffers(3)
    check_gradients(
        lambda: (batchnorm(x, gamma, beta, rm, rv, training=True) ** 2).sum(),
        [x, gamma, beta], tol=2e-4)


@pytest.mark.parametrize("seed", SEEDS)
def test_batchnorm_eval_grads(seed):
    rng = np.random.default_rng(seed)
    x = leaf(rng, (3, 2))
    gamma = leaf(rng, (2,), low=0.5, high=1.5)
    beta = leaf(rng, (2,))
    rm = rng.standard_normal(2)
    rv = rng.uniform(0.5, 1.5, 2)
    check_gradients(
        lambda: (batchnorm(x, gamma, beta, rm, rv, training=False) ** 2).sum(),
        [x, gamma, beta])


# ----------------------------------------------------------------- dropout

def test_dropout_rate_zero_is_identity():
    x = _t(np.ones((4, 4)))
    y = dropout(x, 0.0, np.random.default_rng(0), training=True)
    np.testing.assert_array_equal(y.data, x.data)


def test_dropout_eval_is_identity():
    x = _t(np.ones((4, 4)))
    y = dropout(x, 0.5, np.random.default_rng(0), training=False)
    assert y is x


def test_dropout_scales_survivors():
    x = _t(np.ones((100, 100)))
    y = dropout(x, 0.25, np.random.default_rng(0), training=True)
    nonzero = y.data[y.data != 0]
    np.testing.assert_allclose(nonzero, 1.0 / 0.75, rtol=1e-6)
    # survivor fraction near 75%
    assert abs((y.data > 0).mean() - 0.75) < 0.02


def test_dropout_deterministic_under_seed():
    x = _t(np.ones((8, 8)))
    y1 = dropout(x, 0.5, np.random.default_rng(3), training=True)
    y2 = dropout(x, 0.5, np.random.default_rng(3), training=True)
    np.testing.assert_array_equal(y1.data, y2.data)


def test_dropout_invalid_rate():
    with pytest.raises(ValueError):
        dropout(_t(np.ones(3)), 1.0, np.random.default_rng(0), training=True)


@pytest.mark.parametrize("seed", SEEDS)
def test_dropout_grads_fixed_mask(seed):
    rng = np.random.default_rng(seed)
    x = leaf(rng, (4, 4))
    check_gradients(
        lambda: (dropout(x, 0.5, np.random.default_rng(seed), training=True) ** 2).sum(),
        [x])


# --------------------------------------------------------------------- sgd

def test_sgd_single_step():
    p = Tensor(np.array([1.0], dtype=np.float32), requires_grad=True)
    p.grad = np.array([2.0], dtype=np.float32)
    Sgd([p], lr=0.005).step()
    np.testing.assert_allclose(p.data, [0.99])
    assert p.grad is None


def test_sgd_zero_grad_leaves_param():
    p = Tensor(np.array([1.0]), requires_grad=True)
    p.grad = np.zeros(1, dtype=np.float32)
    Sgd([p], lr=0.1).step()
    np.testing.assert_allclose(p.data, [1.0])


def test_sgd_quadratic_bowl_converges():
    p = Tensor(np.array([1.0], dtype=np.float64), requires_grad=True)
    opt = Sgd([p], lr=0.1)
    for _ in range(50):
        (p ** 2).sum().backward()
        opt.step()
    assert abs(float(p.data[0])) < 1e-4    # (1 - 2*lr)^50 = 0.8^50


def test_sgd_rejects_nonfinite_grads():
    p = Tensor(np.array([1.0]), requires_grad=True)
    p.grad = np.array([np.nan], dtype=np.float32)
    with pytest.raises(FloatingPointError):
        Sgd([p], lr=0.1).step()


def test_sgd_rejects_bad_lr():
    with pytest.raises(ValueError):
        Sgd([Tensor(np.ones(1), requires_grad=True)], lr=0.0)


def test_sgd_momentum_accelerates():
    p = Tensor(np.array([1.0]), requires_grad=True)
    p.grad = np.array([1.0], dtype=np.float32)
    opt = Sgd([p], lr=0.1, momentum=0.9)
    opt.step()
    p.grad = np.array([1.0], dtype=np.float32)
    opt.step()                              # velocity = 0.9*1 + 1 = 1.9
    np.testing.assert_allclose(p.data, [1.0 - 0.1 - 0.19], atol=1e-6)


def test_batchnorm_module_running_buffers_in_state():
    bn = BatchNorm(4)
    names = dict(bn.named_buffers())
    assert set(names) == {"running_mean", "running_var"}
