import numpy as np
import pytest

from qdecomp.ptrnet import autodiff as ad
from qdecomp.ptrnet.autodiff import Tensor


def numeric_grad(f, x, eps=1e-6):
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        old = x[idx]
        x[idx] = old + eps
        up = f()
        x[idx] = old - eps
        down = f()
        x[idx] = old
        g[idx] = (up - down) / (2 * eps)
    return g


def check(build, *shapes, seed=0):
    rng = np.random.default_rng(seed)
    xs = [Tensor(rng.normal(size=s), requires_grad=True) for s in shapes]
    out = ad.tsum(build(*xs))
    ad.backward(out)
    for x in xs:
        num = numeric_grad(lambda: float(ad.tsum(build(*xs)).value), x.value)
        assert np.allclose(x.grad, num, atol=1e-6, rtol=1e-5)


def test_elementwise_ops():
    check(lambda a, b: a * b + a - b, (3, 4), (3, 4))
    check(lambda a, b: a * b, (3, 4), (4,))  # broadcasting
    check(lambda a: ad.sigmoid(a) * ad.tanh(a), (5,))
    check(lambda a: ad.exp(a) + ad.log(a * a + 1.0), (2, 3))
    check(lambda a: -a, (2,))


def test_matmul_and_reductions():
    check(lambda a, b: ad.matmul(a, b), (3, 4), (4, 2))
    check(lambda a: ad.tsum(a, axis=1) * ad.tsum(a, axis=1), (3, 4))
    check(lambda a: ad.mean(a * a), (3, 4))
    check(lambda a: ad.reshape(a, (4, 3)) * np.arange(12.0).reshape(4, 3), (3, 4))


def test_indexing_ops():
    ids = np.array([[0, 2], [1, 1]])
    check(lambda t: ad.take_rows(t, ids) * ad.take_rows(t, ids), (3, 4))
    check(lambda a: ad.pick(a, np.array([2, 0])) * 3.0, (2, 4))
    check(lambda a: ad.pick_rows(a, np.array([1, 0])), (2, 3, 4))
    check(lambda a: a[:, 1, :] * a[:, 0, :], (2, 3, 4))
    check(lambda a, b: ad.concat([a, b], axis=0) * np.arange(15.0).reshape(5, 3), (2, 3), (3, 3))
    check(lambda a, b: ad.stack([a, b], axis=1) * np.arange(12.0).reshape(2, 2, 3), (2, 3), (2, 3))


def test_log_softmax_matches_definition_and_gradient():
    x = np.array([[1.0, 2.0, 3.0], [1000.0, 0.0, -1000.0]])
    out = ad.log_softmax(Tensor(x)).value
    assert np.allclose(np.exp(out).sum(axis=1), 1.0)
    assert np.allclose(out[0], x[0] - np.log(np.exp(x[0]).sum()))
    check(lambda a: ad.log_softmax(a) * np.arange(6.0).reshape(2, 3), (2, 3))


def test_sigmoid_is_stable():
    out = ad.sigmoid(Tensor(np.array([-1000.0, 0.0, 1000.0]))).value
    assert np.all(np.isfinite(out)) and out[1] == 0.5


def test_shared_subexpressions_accumulate():
    a = Tensor(np.array([2.0]), requires_grad=True)
    b = a * a
    ad.backward(ad.tsum(b * b + b))  # d/da (a^4 + a^2) = 4a^3 + 2a
    assert a.grad[0] == pytest.approx(36.0)


def test_backward_on_deep_graph_does_not_recurse():
    a = Tensor(np.array([1.0]), requires_grad=True)
    x = a
    for _ in range(5000):
        x = x + 0.0
    ad.backward(ad.tsum(x))
    assert a.grad[0] == 1.0
