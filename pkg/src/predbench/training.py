"""Minibatch SGD training of micro-networks and single-batch gradient
snapshots for the zero-cost scores."""

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .dataset import SyntheticDataset
from .errors import DivergedTraining, InvalidArgument
from .network import Network, TrainConfig


@dataclass(frozen=True)
class LearningCurve:
    """Per-epoch training statistics of one fully trained architecture."""

    train_loss: tuple[float, ...]
    val_acc: tuple[float, ...]
    val_loss: tuple[float, ...]

    def __post_init__(self):
        n = len(self.train_loss)
        if n == 0 or len(self.val_acc) != n or len(self.val_loss) != n:
            raise InvalidArgument("curve arrays must be non-empty and equal length")
        if any(not np.isfinite(v) or v < 0 for v in self.train_loss):
            raise InvalidArgument("train losses must be finite and >= 0")
        if any(not 0.0 <= v <= 1.0 for v in self.val_acc):
            raise InvalidArgument("validation accuracies must lie in [0, 1]")

    @property
    def epochs(self) -> int:
        return len(self.train_loss)

    @property
    def final_val_acc(self) -> float:
        return self.val_acc[-1]

    def prefix(self, k: int) -> "LearningCurve":
        if not 1 <= k <= self.epochs:
            raise InvalidArgument(f"prefix length must be in [1, {self.epochs}]")
        return LearningCurve(self.train_loss[:k], self.val_acc[:k], self.val_loss[:k])


def one_hot(labels: np.ndarray, num_classes: int) -> np.ndarray:
    return np.eye(num_classes)[np.asarray(labels, dtype=int)]


def _eval_network(net: Network, x: np.ndarray, y: np.ndarray):
    with ad.no_grad():
        logits, _, _ = net.forward(x)
        loss = ad.softmax_cross_entropy(logits, one_hot(y, net.num_classes)).item()
    acc = float((logits.data.argmax(axis=1) == y).mean())
    return loss, acc


def train(net: Network, data: SyntheticDataset, config: TrainConfig) -> LearningCurve:
    """SGD with momentum for config.epochs epochs; shuffling is derived from
    config.seed so identical inputs reproduce the curve bit-exactly."""
    rng = np.random.default_rng(np.random.SeedSequence(config.seed, spawn_key=(3, 0)))
    n = data.train_x.shape[0]
    y_hot = one_hot(data.train_y, net.num_classes)
    velocity = {k: np.zeros_like(v) for k, v in net.params.items()}
    train_losses, val_accs, val_losses = [], [], []
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        loss_sum = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            ptensors = net.param_tensors()
            logits, _, _ = net.forward(data.train_x[idx], ptensors)
            loss = ad.softmax_cross_entropy(logits, y_hot[idx])
            if not np.isfinite(loss.data):
                raise DivergedTraining(epoch)
            loss_sum += loss.item() * idx.size
            grads = ad.backprop(loss, [ptensors[k] for k in net.param_names])
            for name, grad in zip(net.param_names, grads):
                v = velocity[name]
                v *= config.momentum
                v -= config.learning_rate * grad.data
                net.params[name] += v
        train_losses.append(loss_sum / n)
        vloss, vacc = _eval_network(net, data.val_x, data.val_y)
        if not np.isfinite(vloss):
            raise DivergedTraining(epoch)
        val_losses.append(vloss)
        val_accs.append(vacc)
    return LearningCurve(tuple(train_losses), tuple(val_accs), tuple(val_losses))


@dataclass
class GradientSnapshot:
    """Loss, gradients and Jacobians from one minibatch on an untrained net."""

    loss: float
    param_grads: dict[str, np.ndarray]
    activations: list[tuple[np.ndarray, np.ndarray]]  # (value, grad) per tap
    jacobian: np.ndarray  # one row per input: d(logits)/d(input), flattened
    batch_x: np.ndarray
    batch_y: np.ndarray


def grad_snapshot(net: Network, data: SyntheticDataset, batch_size: int,
                  seed: int) -> GradientSnapshot:
    """One forward/backward pass on a seed-fixed minibatch."""
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(4, 0)))
    n = data.train_x.shape[0]
    idx = rng.choice(n, size=min(batch_size, n), replace=False)
    x, y = data.train_x[idx], data.train_y[idx]
    y_hot = one_hot(y, net.num_classes)

    ptensors = net.param_tensors()
    logits, xt, taps = net.forward(x, ptensors)
    loss = ad.softmax_cross_entropy(logits, y_hot)
    wrt = [ptensors[k] for k in net.param_names] + [t for _, t in taps]
    grads = ad.backprop(loss, wrt)
    param_grads = {k: g.data for k, g in zip(net.param_names, grads[: len(net.param_names)])}
    act_pairs = [
        (t.data, g.data) for (_, t), g in zip(taps, grads[len(net.param_names) :])
    ]

    # full prediction Jacobian w.r.t. the inputs, one backward pass per class
    rows = []
    for c in range(net.num_classes):
        seed_grad = np.zeros_like(logits.data)
        seed_grad[:, c] = 1.0
        (gx,) = ad.backprop(logits, [xt], seed=ad.const(seed_grad))
        rows.append(gx.data)
    jacobian = np.concatenate(rows, axis=1)

    return GradientSnapshot(loss.item(), param_grads, act_pairs, jacobian, x, y)
