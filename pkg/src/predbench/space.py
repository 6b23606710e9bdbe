"""Cell-based architecture search space: a complete DAG with one labeled
operation per edge, plus sampling, encodings, mutation, and edit distance.
"""

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import InvalidArgument

DEFAULT_OPS = ("zero", "skip", "lin", "lin_relu", "lin_tanh")

# Ops with trainable weights; everything else is a fixed transform.
PARAMETRIC_OPS = frozenset({"lin", "lin_relu", "lin_tanh"})


@dataclass(frozen=True)
class SearchSpace:
    """Complete-DAG cell space over `num_nodes` nodes and a fixed op set."""

    num_nodes: int = 4
    ops: tuple[str, ...] = DEFAULT_OPS

    def __post_init__(self):
        if self.num_nodes < 2:
            raise InvalidArgument("need at least 2 nodes")
        if len(self.ops) < 1:
            raise InvalidArgument("need at least one operation")
        object.__setattr__(self, "ops", tuple(self.ops))

    @property
    def topology(self) -> str:
        # the one supported wiring; free-topology spaces are a non-goal
        return "complete_dag"

    @property
    def num_edges(self) -> int:
        return self.num_nodes * (self.num_nodes - 1) // 2

    @property
    def num_ops(self) -> int:
        return len(self.ops)

    @property
    def size(self) -> int:
        """Number of distinct architectures (raw encodings, no isomorphism
        collapsing)."""
        return self.num_ops**self.num_edges

    def edge_list(self) -> list[tuple[int, int]]:
        """Edges (i, j) with i < j, in lexicographic order."""
        return list(combinations(range(self.num_nodes), 2))

    def paths(self) -> list[tuple[tuple[int, int], ...]]:
        """All input->output paths as edge tuples, ordered by length then
        lexicographically; the complete DAG has one per increasing node
        sequence from 0 to num_nodes-1."""
        last = self.num_nodes - 1
        inner = [n for n in range(1, last)]
        out = []
        for k in range(len(inner) + 1):
            for mids in combinations(inner, k):
                nodes = (0,) + mids + (last,)
                out.append(tuple((nodes[i], nodes[i + 1]) for i in range(len(nodes) - 1)))
        out.sort(key=lambda p: (len(p), p))
        return out


@dataclass(frozen=True)
class Architecture:
    """One point of the search space: an op index per DAG edge."""

    op_indices: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "op_indices", tuple(int(i) for i in self.op_indices))

    def key(self) -> str:
        """Compact serialization used in files and CLI output."""
        return "|".join(str(i) for i in self.op_indices)

    @staticmethod
    def from_key(key: str) -> "Architecture":
        try:
            return Architecture(tuple(int(tok) for tok in key.split("|")))
        except ValueError as exc:
            raise InvalidArgument(f"malformed architecture key: {key!r}") from exc


def validate_arch(space: SearchSpace, arch: Architecture) -> None:
    if len(arch.op_indices) != space.num_edges:
        raise InvalidArgument(
            f"architecture has {len(arch.op_indices)} edges, space has {space.num_edges}"
        )
    for idx in arch.op_indices:
        if not 0 <= idx < space.num_ops:
            raise InvalidArgument(f"op index {idx} out of range [0, {space.num_ops})")


def sample_uniform(space: SearchSpace, rng: np.random.Generator) -> Architecture:
    """Draw each edge op independently and uniformly."""
    return Architecture(tuple(int(v) for v in rng.integers(0, space.num_ops, space.num_edges)))


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    encoding_kind: str

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))


ENCODING_KINDS = ("adjacency_one_hot", "path")


def encode(space: SearchSpace, arch: Architecture, kind: str = "adjacency_one_hot") -> FeatureVector:
    """Encode an architecture as a flat 0/1 feature vector.

    adjacency_one_hot: one |ops|-wide one-hot block per edge.
    path: one |ops|^len block per input->output path; the bit for the exact
    op sequence the architecture places on that path is set.
    """
    validate_arch(space, arch)
    if kind == "adjacency_one_hot":
        vec = np.zeros(space.num_edges * space.num_ops)
        for e, op in enumerate(arch.op_indices):
            vec[e * space.num_ops + op] = 1.0
        return FeatureVector(vec, kind)
    if kind == "path":
        edge_index = {edge: i for i, edge in enumerate(space.edge_list())}
        blocks = []
        for path in space.paths():
            block = np.zeros(space.num_ops ** len(path))
            slot = 0
            for edge in path:
                slot = slot * space.num_ops + arch.op_indices[edge_index[edge]]
            block[slot] = 1.0
            blocks.append(block)
        return FeatureVector(np.concatenate(blocks), kind)
    raise InvalidArgument(f"unknown encoding kind: {kind!r} (expected one of {ENCODING_KINDS})")


def encoding_length(space: SearchSpace, kind: str) -> int:
    if kind == "adjacency_one_hot":
        return space.num_edges * space.num_ops
    if kind == "path":
        return sum(space.num_ops ** len(p) for p in space.paths())
    raise InvalidArgument(f"unknown encoding kind: {kind!r} (expected one of {ENCODING_KINDS})")


def mutate(
    space: SearchSpace,
    arch: Architecture,
    max_attrs: int,
    rng: np.random.Generator,
) -> Architecture:
    """Change k edges, k drawn uniformly from {1..max_attrs}; every changed
    edge receives a different op than it had."""
    validate_arch(space, arch)
    if not 1 <= max_attrs <= space.num_edges:
        raise InvalidArgument(f"max_attrs must be in [1, {space.num_edges}], got {max_attrs}")
    if space.num_ops < 2:
        raise InvalidArgument("cannot mutate in a single-op space")
    k = int(rng.integers(1, max_attrs + 1))
    edges = rng.choice(space.num_edges, size=k, replace=False)
    ops = list(arch.op_indices)
    for e in edges:
        shift = int(rng.integers(1, space.num_ops))
        ops[e] = (ops[e] + shift) % space.num_ops
    return Architecture(tuple(ops))


def edit_distance(space: SearchSpace, a: Architecture, b: Architecture) -> int:
    """Number of edges whose operations differ."""
    validate_arch(space, a)
    validate_arch(space, b)
    return int(sum(x != y for x, y in zip(a.op_indices, b.op_indices)))


def parametric_edge_count(space: SearchSpace, arch: Architecture) -> int:
    validate_arch(space, arch)
    return sum(1 for i in arch.op_indices if space.ops[i] in PARAMETRIC_OPS)
