"""Autodiff engine: elementwise ops, reductions, matmul, broadcasting."""

import numpy as np
import pytest

from coala.engine import Tensor, ShapeError
from gradcheck import check_gradients, leaf

SEEDS = range(20)


@pytest.mark.parametrize("seed", SEEDS)
def test_elementwise_grads(seed):
    rng = np.random.default_rng(seed)
    a = leaf(rng, (3, 4))
    b = leaf(rng, (3, 4), low=0.5, high=2.0)   # away from zero for div
    check_gradients(lambda: ((a + b) * (a - b) / b).sum(), [a, b])


@pytest.mark.parametrize("seed", SEEDS)
def test_unary_grads(seed):
    rng = np.random.default_rng(seed)
    a = leaf(rng, (2, 5), low=0.3, high=2.0)
    check_gradients(lambda: (a.log() + a.sqrt() + a.exp() + a.sigmoid()).sum(), [a])


@pytest.mark.parametrize("seed", SEEDS)
def test_relu_pow_grads(seed):
    rng = np.random.default_rng(seed)
    a = leaf(rng, (4, 3))
    a.data[np.abs(a.data) < 0.05] = 0.1        # keep clear of the kink
    check_gradients(lambda: (a.relu() + a ** 2).sum(), [a])


@pytest.mark.parametrize("seed", SEEDS)
def test_matmul_grads(seed):
    rng = np.random.default_rng(seed)
    a = leaf(rng, (3, 4))
    b = leaf(rng, (4, 2))
    check_gradients(lambda: (a @ b).sum(), [a, b])


@pytest.mark.parametrize("seed", SEEDS)
def test_batched_matmul_grads(seed):
    rng = np.random.default_rng(seed)
    a = leaf(rng, (2, 3, 4))
    b = leaf(rng, (2, 4, 2))
    check_gradients(lambda: ((a @ b) ** 2).sum(), [a, b])


@pytest.mark.parametrize("seed", SEEDS)
def test_reduction_grads(seed):
    rng = np.random.default_rng(seed)
    a = leaf(rng, (3, 5))
    check_gradients(lambda: (a.sum(axis=1) * a.mean(axis=1)).sum(), [a])


@pytest.mark.parametrize("seed", SEEDS)
def test_max_grads_no_ties(seed):
    rng = np.random.default_rng(seed)
    a = Tensor(np.argsort(rng.uniform(size=(3, 5)), axis=None).reshape(3, 5)
               .astype(np.float64) * 0.1, requires_grad=True)
    check_gradients(lambda: (a.max(axis=1) ** 2).sum(), [a])


@pytest.mark.parametrize("seed", SEEDS)
def test_broadcast_grads(seed):
    rng = np.random.default_rng(seed)
    a = leaf(rng, (3, 4))
    row = leaf(rng, (1, 4))
    col = leaf(rng, (3, 1))
    check_gradients(lambda: ((a + row) * col).sum(), [a, row, col])


@pytest.mark.parametrize("seed", SEEDS)
def test_clip_reshape_transpose_grads(seed):
    rng = np.random.default_rng(seed)
    a = leaf(rng, (2, 6), low=-2.0, high=2.0)
    # keep entries clear of the clip boundaries so FD stays smooth
    a.data[np.abs(np.abs(a.data) - 1.5) < 0.05] = 0.0
    check_gradients(
        lambda: (a.clip(-1.5, 1.5).reshape(3, 4).T @ Tensor(np.ones((3, 2)))).sum(), [a])


def test_linear_case_grad_is_input():
    x = np.array([1.0, 2.0, 3.0])
    w = Tensor(np.array([4.0, 5.0, 6.0]), requires_grad=True)
    (w * Tensor(x)).sum().backward()
    np.testing.assert_allclose(w.grad, x)


def test_unused_graph_gets_no_grad():
    used = Tensor(np.ones(3), requires_grad=True)
    unused = Tensor(np.ones(3), requires_grad=True)
    _ = unused * 2.0                      # separate graph, never reduced
    (used * 3.0).sum().backward()
    np.testing.assert_allclose(used.grad, 3.0 * np.ones(3))
    assert unused.grad is None


def test_backward_requires_scalar():
    a = Tensor(np.ones((2, 2)), requires_grad=True)
    with pytest.raises(ShapeError):
        (a * 2.0).backward()


def test_grad_accumulates_across_uses():
    a = Tensor(np.array([2.0]), requires_grad=True)
    (a * a + a).sum().backward()           # d/da (a^2 + a) = 2a + 1
    np.testing.assert_allclose(a.grad, [5.0])


def test_max_tie_splitting_subgradient():
    a = Tensor(np.array([[1.0, 1.0, 0.0]]), requires_grad=True)
    a.max(axis=1).sum().backward()
    np.testing.assert_allclose(a.grad, [[0.5, 0.5, 0.0]])


def test_float32_default_dtype():
    assert Tensor([1, 2, 3]).dtype == np.float32
    assert Tensor(np.zeros(2, dtype=np.float64)).dtype == np.float64


def test_same_ops_same_results():
    def run():
        rng = np.random.default_rng(7)
        a = Tensor(rng.standard_normal((8, 8)).astype(np.float32), requires_grad=True)
        loss = ((a @ a).sigmoid() * a.relu()).sum()
        loss.backward()
        return loss.item(), a.grad.copy()
    l1, g1 = run()
    l2, g2 = run()
    assert l1 == l2
    np.testing.assert_array_equal(g1, g2)
