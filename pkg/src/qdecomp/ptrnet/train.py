"""Adagrad training and finite-difference gradient checking."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from qdecomp.align import EmbeddingStore, SupervisionExample
from qdecomp.errors import Divergence, EmptyQuestion
from qdecomp.ptrnet import autodiff as ad
from qdecomp.ptrnet.model import (
    ModelConfig,
    PointerNet,
    Vocab,
    loss,
    make_batch,
    predict_batch,
    sequence_nll,
)

log = logging.getLogger(__name__)

ADAGRAD_EPS = 1e-8
GRAD_FLOOR = 1e-6


class Adagrad:
    """Per-coordinate step ``lr * g / sqrt(acc + eps)`` with ``acc`` the running sum of g^2."""

    def __init__(self, params: dict[str, ad.Tensor], lr: float, eps: float = ADAGRAD_EPS):
        self.params = params
        self.lr = lr
        self.eps = eps
        self.acc = {k: np.zeros_like(p.value) for k, p in params.items()}

    def step(self) -> None:
        for name, p in self.params.items():
            if p.grad is None:
                continue
            self.acc[name] += p.grad * p.grad
            p.value -= self.lr * p.grad / np.sqrt(self.acc[name] + self.eps)


@dataclass
class TrainResult:
    net: PointerNet
    loss_log: list[float] = field(default_factory=list)
    train_loss_log: list[float] = field(default_factory=list)


def _batches(n: int, size: int, rng: np.random.Generator) -> list[np.ndarray]:
    order = rng.permutation(n)
    return [order[k : k + size] for k in range(0, n, size)]


def dataset_loss(net: PointerNet, data: Sequence[SupervisionExample], batch_size: int = 64) -> float:
    """Mean loss over ``data`` without dropout (the l2 term counted once)."""
    total = 0.0
    for k in range(0, len(data), batch_size):
        chunk = data[k : k + batch_size]
        batch = make_batch(net, [ex.nl for ex in chunk], [ex.label for ex in chunk])
        total += float(sequence_nll(net, batch).value.sum())
    data_term = total / len(data)
    if net.config.l2 == 0.0:
        return data_term
    return data_term + net.config.l2 * float(net.l2_norm_sq().value)


def build_model(
    data: Sequence[SupervisionExample], config: ModelConfig, store: EmbeddingStore | None = None
) -> PointerNet:
    vocab = Vocab.build([ex.nl.tokens for ex in data], store)
    return PointerNet.initialize(config, vocab, store)


def train(
    data: Sequence[SupervisionExample],
    config: ModelConfig,
    store: EmbeddingStore | None = None,
    net: PointerNet | None = None,
    on_epoch: Callable[[int, float], None] | None = None,
) -> TrainResult:
    """Minibatch Adagrad on the pointer-sequence loss.

    ``loss_log`` records the dropout-free loss over all of ``data`` after each
    epoch; ``train_loss_log`` the mean minibatch loss seen during the epoch.
    """
    if not data:
        raise EmptyQuestion("no training data")
    if net is None:
        net = build_model(data, config, store)
    rng = np.random.default_rng([config.seed, 2])
    opt = Adagrad(net.params, config.learning_rate)
    result = TrainResult(net)
    for epoch in range(config.epochs):
        seen = 0.0
        for idx in _batches(len(data), config.batch_size, rng):
            chunk = [data[i] for i in idx]
            batch = make_batch(net, [ex.nl for ex in chunk], [ex.label for ex in chunk])
            net.zero_grad()
            value = loss(net, batch, rng if config.dropout > 0 else None)
            if not math.isfinite(float(value.value)):
                raise Divergence(epoch, float(value.value))
            ad.backward(value)
            opt.step()
            seen += float(value.value) * len(idx)
        result.train_loss_log.append(seen / len(data))
        epoch_loss = dataset_loss(net, data)
        if not math.isfinite(epoch_loss):
            raise Divergence(epoch, epoch_loss)
        result.loss_log.append(epoch_loss)
        log.info("epoch %d loss %.6f", epoch, epoch_loss)
        if on_epoch is not None:
            on_epoch(epoch, epoch_loss)
    return result


def exact_accuracy(net: PointerNet, data: Sequence[SupervisionExample]) -> float:
    preds = predict_batch(net, [ex.nl for ex in data])
    return sum(p == ex.label for p, ex in zip(preds, data)) / len(data)


def loss_and_grads(
    net: PointerNet, data: Sequence[SupervisionExample]
) -> tuple[float, dict[str, np.ndarray]]:
    batch = make_batch(net, [ex.nl for ex in data], [ex.label for ex in data])
    net.zero_grad()
    value = loss(net, batch)
    ad.backward(value)
    grads = {
        k: (p.grad.copy() if p.grad is not None else np.zeros_like(p.value))
        for k, p in net.params.items()
    }
    return float(value.value), grads


def grad_check(
    net: PointerNet,
    data: Sequence[SupervisionExample],
    epsilon: float = 1e-4,
    n_coords: int = 100,
    seed: int = 0,
    names: Sequence[str] | None = None,
    coords: Sequence[tuple[str, int]] | None = None,
    floor: float = GRAD_FLOOR,
) -> float:
    """Max relative error between reverse-mode and central-difference gradients.

    Coordinates are drawn uniformly from the flattened parameters (restricted
    to ``names`` when given) unless ``coords`` lists them explicitly. The
    error per coordinate is |g_ad - g_fd| / max(floor, |g_ad| + |g_fd|); the
    floor keeps coordinates whose gradient is within float64 roundoff of
    zero (about 1e-12 / epsilon) from dominating the maximum.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    _, grads = loss_and_grads(net, data)
    batch = make_batch(net, [ex.nl for ex in data], [ex.label for ex in data])

    def f() -> float:
        return float(loss(net, batch).value)

    if coords is None:
        coords = sample_coordinates(net, n_coords, seed, names)
    worst = 0.0
    for name, flat in coords:
        p = net.params[name].value.reshape(-1)
        orig = p[flat]
        p[flat] = orig + epsilon
        up = f()
        p[flat] = orig - epsilon
        down = f()
        p[flat] = orig
        g_fd = (up - down) / (2.0 * epsilon)
        g_ad = float(grads[name].reshape(-1)[flat])
        err = abs(g_ad - g_fd) / max(floor, abs(g_ad) + abs(g_fd))
        worst = max(worst, err)
    return worst


def sample_coordinates(
    net: PointerNet, n_coords: int, seed: int = 0, names: Sequence[str] | None = None
) -> list[tuple[str, int]]:
    names = list(names) if names is not None else list(net.params)
    sizes = [net.params[k].value.size for k in names]
    offsets = np.cumsum([0] + sizes)
    rng = np.random.default_rng([seed, 3])
    picks = rng.choice(offsets[-1], size=min(n_coords, int(offsets[-1])), replace=False)
    out = []
    for flat in picks:
        k = int(np.searchsorted(offsets, flat, side="right") - 1)
        out.append((names[k], int(flat - offsets[k])))
    return out
