"""Compiles a cell architecture into a small trainable network.

Node values are fixed-width feature vectors; each DAG edge applies its
operation to the source node and the target node sums all incoming edge
outputs. A linear stem maps the 2-d input up to the feature width and a
linear head maps the last node down to class logits. With no nonlinear
edges the whole network collapses to an affine map, so cell capacity is
visible in the trained accuracy.
"""

from dataclasses import dataclass, asdict

import numpy as np

from . import autodiff as ad
from .errors import InvalidArgument
from .space import Architecture, SearchSpace, PARAMETRIC_OPS, validate_arch

INIT_SCHEMES = ("scaled", "uniform")


@dataclass(frozen=True)
class TrainConfig:
    """Training and instantiation settings for one micro-network."""

    epochs: int = 50
    batch_size: int = 32
    learning_rate: float = 0.12
    momentum: float = 0.9
    width: int = 16
    cells: int = 1
    init_scheme: str = "scaled"
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 4:
            raise InvalidArgument("epochs must be >= 4 (curve methods need a prefix)")
        if self.batch_size < 1 or self.width < 1 or self.cells < 1:
            raise InvalidArgument("batch_size, width and cells must be >= 1")
        if self.init_scheme not in INIT_SCHEMES:
            raise InvalidArgument(f"unknown init scheme: {self.init_scheme!r}")

    def to_dict(self) -> dict:
        return asdict(self)


def _init_weight(shape, scheme, gain, rng):
    fan_in = shape[0]
    if scheme == "scaled":
        return rng.normal(0.0, gain / np.sqrt(fan_in), shape)
    bound = gain / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, shape)


class Network:
    """A cell network with explicit parameter arrays and autodiff forward."""

    def __init__(self, space: SearchSpace, arch: Architecture, config: TrainConfig,
                 input_dim: int, num_classes: int):
        validate_arch(space, arch)
        if num_classes < 2:
            raise InvalidArgument("need at least 2 output classes")
        self.space = space
        self.arch = arch
        self.config = config
        self.input_dim = input_dim
        self.num_classes = num_classes
        self.param_names: list[str] = []
        self.params: dict[str, np.ndarray] = {}
        self._build()
        self.param_count = sum(p.size for p in self.params.values())
        self.flop_count = self._count_flops()

    def _rng(self, *key: int) -> np.random.Generator:
        # per-tensor streams so a weight draw does not depend on other edges
        return np.random.default_rng(np.random.SeedSequence(self.config.seed, spawn_key=key))

    def _add_param(self, name, value):
        self.param_names.append(name)
        self.params[name] = value

    def _build(self):
        w = self.config.width
        cfg = self.config
        self._add_param("stem.w", _init_weight((self.input_dim, w), cfg.init_scheme, 1.0, self._rng(0, 0)))
        self._add_param("stem.b", np.zeros((1, w)))
        for c in range(cfg.cells):
            for e, op_idx in enumerate(self.arch.op_indices):
                op = self.space.ops[op_idx]
                if op in PARAMETRIC_OPS:
                    gain = np.sqrt(2.0) if op == "lin_relu" else 1.0
                    self._add_param(
                        f"cell{c}.edge{e}.w",
                        _init_weight((w, w), cfg.init_scheme, gain, self._rng(1, c, e)),
                    )
                    self._add_param(f"cell{c}.edge{e}.b", np.zeros((1, w)))
        self._add_param("head.w", _init_weight((w, self.num_classes), cfg.init_scheme, 1.0, self._rng(2, 0)))
        self._add_param("head.b", np.zeros((1, self.num_classes)))

    def _count_flops(self) -> int:
        """Multiply-add count of one forward pass on a single input."""
        w = self.config.width
        per_cell = sum(
            w * w for i in self.arch.op_indices if self.space.ops[i] in PARAMETRIC_OPS
        )
        return self.input_dim * w + self.config.cells * per_cell + w * self.num_classes

    def param_tensors(self, absolute: bool = False) -> dict[str, ad.Tensor]:
        if absolute:
            return {k: ad.Tensor(np.abs(v)) for k, v in self.params.items()}
        return {k: ad.Tensor(v) for k, v in self.params.items()}

    def forward(self, x: np.ndarray, ptensors: dict[str, ad.Tensor] | None = None):
        """Run the network on a batch.

        Returns (logits, input tensor, activation taps); taps collect the
        post-op outputs of stem and parametric edges together with their
        tensors, for saliency scores that need activation gradients.
        """
        if ptensors is None:
            ptensors = self.param_tensors()
        xt = ad.Tensor(np.asarray(x, dtype=float))
        taps: list[tuple[str, ad.Tensor]] = []
        value = ad.add(ad.matmul(xt, ptensors["stem.w"]), ptensors["stem.b"])
        taps.append(("stem", value))
        edges = self.space.edge_list()
        batch = xt.data.shape[0]
        width = self.config.width
        for c in range(self.config.cells):
            nodes: list[ad.Tensor | None] = [value] + [None] * (self.space.num_nodes - 1)
            for e, (src, dst) in enumerate(edges):
                op = self.space.ops[self.arch.op_indices[e]]
                if op == "zero":
                    continue
                src_val = nodes[src]
                if src_val is None:
                    # node with no incoming signal carries the zero vector
                    src_val = ad.const(np.zeros((batch, width)))
                if op == "skip":
                    out = src_val
                else:
                    out = ad.add(
                        ad.matmul(src_val, ptensors[f"cell{c}.edge{e}.w"]),
                        ptensors[f"cell{c}.edge{e}.b"],
                    )
                    if op == "lin_relu":
                        out = ad.relu(out)
                    elif op == "lin_tanh":
                        out = ad.tanh(out)
                    taps.append((f"cell{c}.edge{e}", out))
                nodes[dst] = out if nodes[dst] is None else ad.add(nodes[dst], out)
            last = nodes[-1]
            value = last if last is not None else ad.const(np.zeros((batch, width)))
        logits = ad.add(ad.matmul(value, ptensors["head.w"]), ptensors["head.b"])
        return logits, xt, taps


def instantiate(space: SearchSpace, arch: Architecture, config: TrainConfig,
                input_dim: int = 2, num_classes: int = 3) -> Network:
    """Build a freshly initialized network; deterministic given config.seed."""
    return Network(space, arch, config, input_dim, num_classes)
