import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.stats import chi2

from predbench.errors import InvalidArgument
from predbench.space import (
    Architecture,
    FeatureVector,
    SearchSpace,
    edit_distance,
    encode,
    encoding_length,
    mutate,
    parametric_edge_count,
    sample_uniform,
)

DEFAULT = SearchSpace()


def rand_arch(rng, space=DEFAULT):
    return sample_uniform(space, rng)


def test_default_space_shape():
    assert DEFAULT.num_edges == 6
    assert DEFAULT.num_ops == 5
    assert DEFAULT.size == 5**6 == 15625


def test_edge_list_order():
    assert DEFAULT.edge_list() == [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]


def test_paths_of_complete_dag():
    paths = DEFAULT.paths()
    assert len(paths) == 4
    assert [len(p) for p in paths] == [1, 2, 2, 3]


def test_single_op_space_samples_all_zeros():
    space = SearchSpace(num_nodes=3, ops=("skip",))
    arch = sample_uniform(space, np.random.default_rng(0))
    assert arch.op_indices == (0, 0, 0)


def test_sampling_is_deterministic():
    a = sample_uniform(DEFAULT, np.random.default_rng(42))
    b = sample_uniform(DEFAULT, np.random.default_rng(42))
    assert a == b
    assert len(a.op_indices) == 6
    assert all(0 <= i < 5 for i in a.op_indices)


def test_sampling_uniformity_chi_square():
    rng = np.random.default_rng(7)
    counts = np.zeros((6, 5))
    draws = 60_000
    for _ in range(draws):
        for e, op in enumerate(sample_uniform(DEFAULT, rng).op_indices):
            counts[e, op] += 1
    expected = draws / 5
    threshold = chi2.ppf(0.99, df=4)
    for e in range(6):
        stat = ((counts[e] - expected) ** 2 / expected).sum()
        assert stat < threshold, f"edge {e} failed uniformity: {stat:.2f}"


def test_arch_key_round_trip():
    arch = Architecture((3, 1, 0, 4, 2, 0))
    assert arch.key() == "3|1|0|4|2|0"
    assert Architecture.from_key(arch.key()) == arch
    with pytest.raises(InvalidArgument):
        Architecture.from_key("3|x|0")


def test_adjacency_encoding_shape_and_ones():
    rng = np.random.default_rng(1)
    for _ in range(20):
        vec = encode(DEFAULT, rand_arch(rng), "adjacency_one_hot")
        assert vec.values.shape == (30,)
        assert vec.values.sum() == 6
        assert set(np.unique(vec.values)) <= {0.0, 1.0}


def test_all_op_zero_adjacency_positions():
    vec = encode(DEFAULT, Architecture((0,) * 6), "adjacency_one_hot")
    assert list(np.nonzero(vec.values)[0]) == [0, 5, 10, 15, 20, 25]


def test_path_encoding_length_and_bits():
    assert encoding_length(DEFAULT, "path") == 5 + 25 + 25 + 125 == 180
    rng = np.random.default_rng(2)
    for _ in range(10):
        vec = encode(DEFAULT, rand_arch(rng), "path")
        assert vec.values.shape == (180,)
        assert vec.values.sum() == 4  # one active op sequence per path topology
        assert set(np.unique(vec.values)) <= {0.0, 1.0}


def test_unknown_encoding_rejected():
    with pytest.raises(InvalidArgument):
        encode(DEFAULT, Architecture((0,) * 6), "graph_spectral")


@given(st.lists(st.integers(0, 4), min_size=6, max_size=6),
       st.lists(st.integers(0, 4), min_size=6, max_size=6))
def test_adjacency_encoding_injective(ops_a, ops_b):
    a, b = Architecture(tuple(ops_a)), Architecture(tuple(ops_b))
    ea = encode(DEFAULT, a, "adjacency_one_hot").values
    eb = encode(DEFAULT, b, "adjacency_one_hot").values
    assert (a == b) == bool((ea == eb).all())


def test_mutate_single_attribute():
    rng = np.random.default_rng(3)
    arch = rand_arch(rng)
    for _ in range(200):
        out = mutate(DEFAULT, arch, 1, rng)
        assert edit_distance(DEFAULT, arch, out) == 1


def test_mutate_up_to_three():
    rng = np.random.default_rng(4)
    arch = rand_arch(rng)
    seen = set()
    for _ in range(500):
        d = edit_distance(DEFAULT, arch, mutate(DEFAULT, arch, 3, rng))
        assert 1 <= d <= 3
        seen.add(d)
    assert seen == {1, 2, 3}


def test_mutate_always_differs():
    rng = np.random.default_rng(5)
    arch = rand_arch(rng)
    for _ in range(10_000):
        assert mutate(DEFAULT, arch, 1, rng) != arch


def test_mutate_validates_max_attrs():
    arch = Architecture((0,) * 6)
    with pytest.raises(InvalidArgument):
        mutate(DEFAULT, arch, 0, np.random.default_rng(0))
    with pytest.raises(InvalidArgument):
        mutate(DEFAULT, arch, 7, np.random.default_rng(0))


def test_edit_distance_examples():
    rng = np.random.default_rng(6)
    a = rand_arch(rng)
    assert edit_distance(DEFAULT, a, a) == 0
    assert edit_distance(DEFAULT, Architecture((0,) * 6), Architecture((1,) * 6)) == 6


def test_edit_distance_validates_space():
    small = SearchSpace(num_nodes=3)
    with pytest.raises(InvalidArgument):
        edit_distance(DEFAULT, Architecture((0,) * 6), Architecture((0,) * 3))
    with pytest.raises(InvalidArgument):
        edit_distance(small, Architecture((0,) * 6), Architecture((0,) * 6))


@given(st.data())
def test_edit_distance_metric_axioms(data):
    ops = st.lists(st.integers(0, 4), min_size=6, max_size=6)
    a = Architecture(tuple(data.draw(ops)))
    b = Architecture(tuple(data.draw(ops)))
    c = Architecture(tuple(data.draw(ops)))
    dab = edit_distance(DEFAULT, a, b)
    assert dab == edit_distance(DEFAULT, b, a)
    assert (dab == 0) == (a == b)
    assert dab <= edit_distance(DEFAULT, a, c) + edit_distance(DEFAULT, c, b)


def test_parametric_edge_count():
    assert parametric_edge_count(DEFAULT, Architecture((0, 1, 0, 1, 0, 1))) == 0
    assert parametric_edge_count(DEFAULT, Architecture((2, 3, 4, 0, 1, 2))) == 4


def test_feature_vector_dtype():
    fv = FeatureVector([1, 0, 1], "adjacency_one_hot")
    assert fv.values.dtype == float
