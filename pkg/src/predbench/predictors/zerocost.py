"""Zero-cost proxies computed from one minibatch on an untrained network,
plus the flops and params baselines."""

import math
from dataclasses import replace

import numpy as np

from .. import autodiff as ad
from ..dataset import SyntheticDataset
from ..errors import InvalidArgument
from ..network import TrainConfig, instantiate
from ..space import Architecture, SearchSpace
from ..store import BenchmarkStore
from ..training import grad_snapshot, one_hot
from .base import DEGENERATE_SCORE, Predictor

PROXY_KINDS = (
    "snip", "grad_norm", "fisher", "grasp", "synflow", "jacob_cov",
    "flops", "params",
)

JACOB_COV_EPS = 1e-5


class ZeroCostComputer:
    """Computes proxy scores; results are memoized per (arch, proxy).

    The evaluation seed fixes both the untrained weights and the minibatch,
    so a given computer scores each architecture deterministically.
    """

    def __init__(self, space: SearchSpace, dataset: SyntheticDataset,
                 train_config: TrainConfig, seed: int = 0, batch_size: int = 32):
        self.space = space
        self.dataset = dataset
        self.config = replace(train_config, seed=seed)
        self.seed = seed
        self.batch_size = batch_size
        self._cache: dict[tuple[str, str], float] = {}

    @classmethod
    def for_store(cls, store: BenchmarkStore, seed: int = 0,
                  batch_size: int = 32) -> "ZeroCostComputer":
        return cls(store.space, store.dataset(), store.train_config, seed, batch_size)

    def compute(self, arch: Architecture, proxy: str) -> float:
        if proxy not in PROXY_KINDS:
            raise InvalidArgument(f"unknown proxy: {proxy!r} (expected one of {PROXY_KINDS})")
        key = (arch.key(), proxy)
        if key not in self._cache:
            self._cache[key] = self._compute(arch, proxy)
        return self._cache[key]

    def _network(self, arch: Architecture):
        return instantiate(self.space, arch, self.config,
                           input_dim=self.dataset.input_dim,
                           num_classes=self.dataset.num_classes)

    def _compute(self, arch: Architecture, proxy: str) -> float:
        net = self._network(arch)
        if proxy == "flops":
            return float(net.flop_count)
        if proxy == "params":
            return float(net.param_count)
        if proxy == "synflow":
            return _finite_or_sentinel(_synflow(net))
        if proxy == "grasp":
            return _finite_or_sentinel(_grasp(net, self.dataset, self.batch_size, self.seed))
        snap = grad_snapshot(net, self.dataset, self.batch_size, self.seed)
        if proxy == "snip":
            val = sum(float(np.abs(net.params[k] * g).sum())
                      for k, g in snap.param_grads.items())
        elif proxy == "grad_norm":
            val = math.sqrt(sum(float((g * g).sum()) for g in snap.param_grads.values()))
        elif proxy == "fisher":
            # per-channel squared activation saliency, summed over taps
            val = sum(float((((z * g).sum(axis=0)) ** 2).sum())
                      for z, g in snap.activations)
        else:  # jacob_cov
            return _jacob_cov_score(snap.jacobian)
        return _finite_or_sentinel(val)


def _finite_or_sentinel(val: float) -> float:
    return float(val) if np.isfinite(val) else DEGENERATE_SCORE


def _synflow(net) -> float:
    """All-ones forward pass on the absolute-valued network; the score sums
    parameterABS times its gradient, which is non-negative throughout."""
    ptensors = net.param_tensors(absolute=True)
    ones = np.ones((1, net.input_dim))
    logits, _, _ = net.forward(ones, ptensors)
    total = ad.tsum(logits)
    grads = ad.backprop(total, [ptensors[k] for k in net.param_names])
    return sum(float((pt.data * g.data).sum())
               for pt, g in zip((ptensors[k] for k in net.param_names), grads))


def _grasp(net, dataset, batch_size, seed) -> float:
    """Negative inner product of weights with the Hessian-gradient product,
    computed exactly by differentiating through the first backward pass."""
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(4, 0)))
    n = dataset.train_x.shape[0]
    idx = rng.choice(n, size=min(batch_size, n), replace=False)
    x = dataset.train_x[idx]
    y_hot = one_hot(dataset.train_y[idx], net.num_classes)

    ptensors = net.param_tensors()
    params = [ptensors[k] for k in net.param_names]
    logits, _, _ = net.forward(x, ptensors)
    loss = ad.softmax_cross_entropy(logits, y_hot)
    grads = ad.backprop(loss, params, create_graph=True)
    frozen = [ad.const(g.data.copy()) for g in grads]
    z = None
    for g0, g in zip(frozen, grads):
        term = ad.tsum(ad.mul(g0, g))
        z = term if z is None else ad.add(z, term)
    hvs = ad.backprop(z, params)
    return sum(float(-(hv.data * p.data).sum()) for hv, p in zip(hvs, params))


def _jacob_cov_score(jacobian: np.ndarray) -> float:
    """Score of the per-input Jacobian correlation matrix; architectures
    whose inputs produce decorrelated Jacobian rows score higher."""
    if not np.isfinite(jacobian).all():
        return DEGENERATE_SCORE
    if np.any(jacobian.std(axis=1) == 0.0):
        return DEGENERATE_SCORE
    corr = np.corrcoef(jacobian)
    if not np.isfinite(corr).all():
        return DEGENERATE_SCORE
    return _finite_or_sentinel(-np.sum(np.log(np.abs(corr) + JACOB_COV_EPS)))


class ZeroCostPredictor(Predictor):
    """Predictor wrapper around one proxy; no initialization stage."""

    def __init__(self, proxy: str, computer: ZeroCostComputer, cost: float):
        super().__init__()
        if proxy not in PROXY_KINDS:
            raise InvalidArgument(f"unknown proxy: {proxy!r} (expected one of {PROXY_KINDS})")
        self.name = proxy
        self.proxy = proxy
        self.computer = computer
        self.cost = cost

    @classmethod
    def for_store(cls, proxy: str, store: BenchmarkStore, seed: int = 0,
                  computer: ZeroCostComputer | None = None) -> "ZeroCostPredictor":
        computer = computer or ZeroCostComputer.for_store(store, seed)
        return cls(proxy, computer, store.cost_model.zero_cost_query)

    def _query(self, arch, ledger):
        ledger.charge_query(self.cost)
        return self.computer.compute(arch, self.proxy), False
