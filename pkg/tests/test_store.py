import numpy as np
import pytest

from predbench.budget import BudgetLedger, CostModel
from predbench.dataset import DatasetConfig
from predbench.errors import DuplicateExhaustion, InvalidArgument, NotFound
from predbench.network import TrainConfig
from predbench.space import Architecture, SearchSpace, mutate
from predbench.store import BenchmarkStore, EvaluationService, build

FAST_TRAIN = TrainConfig(epochs=6, width=6)
FAST_DATA = DatasetConfig(train_size=96, val_size=96)


@pytest.fixture(scope="module")
def mini_store(tmp_path_factory):
    return build(SearchSpace(), 8, FAST_TRAIN, FAST_DATA, seed=11)


def test_round_trip_is_byte_exact(mini_store, tmp_path):
    p1, p2 = tmp_path / "a.nbstore", tmp_path / "b.nbstore"
    mini_store.save(p1)
    BenchmarkStore.load(p1).save(p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_equal_seeds_build_identical_files(tmp_path):
    a = build(SearchSpace(), 5, FAST_TRAIN, FAST_DATA, seed=3)
    b = build(SearchSpace(), 5, FAST_TRAIN, FAST_DATA, seed=3)
    pa, pb = tmp_path / "a", tmp_path / "b"
    a.save(pa)
    b.save(pb)
    assert pa.read_bytes() == pb.read_bytes()


def test_parallel_build_matches_serial(tmp_path):
    a = build(SearchSpace(), 6, FAST_TRAIN, FAST_DATA, seed=4, workers=1)
    b = build(SearchSpace(), 6, FAST_TRAIN, FAST_DATA, seed=4, workers=2)
    pa, pb = tmp_path / "a", tmp_path / "b"
    a.save(pa)
    b.save(pb)
    assert pa.read_bytes() == pb.read_bytes()


def test_header_hash_detects_corruption(mini_store, tmp_path):
    path = tmp_path / "s.nbstore"
    mini_store.save(path)
    lines = path.read_text().splitlines()
    lines[0] = lines[0].replace('"build_seed": 11', '"build_seed": 12')
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(InvalidArgument, match="hash"):
        BenchmarkStore.load(path)


def test_single_record_round_trip(tmp_path):
    store = build(SearchSpace(), 1, FAST_TRAIN, FAST_DATA, seed=5)
    path = tmp_path / "one.nbstore"
    store.save(path)
    loaded = BenchmarkStore.load(path)
    assert len(loaded) == 1
    key = loaded.arch_keys()[0]
    a, b = store.records[key], loaded.records[key]
    assert a.curve == b.curve
    assert (a.param_count, a.flop_count, a.epoch_cost) == \
        (b.param_count, b.flop_count, b.epoch_cost)


def test_requesting_more_than_space_size_fails():
    tiny_space = SearchSpace(num_nodes=2, ops=("zero", "skip"))  # |A| = 2
    with pytest.raises(DuplicateExhaustion):
        build(tiny_space, 3, FAST_TRAIN, FAST_DATA, seed=0)


def test_query_full_charges_ledger(mini_store):
    arch = Architecture.from_key(mini_store.arch_keys()[0])
    ledger = BudgetLedger(init_budget=100.0)
    mini_store.query_full(arch, ledger, phase="init")
    assert ledger.init_spent == mini_store.epochs * 1.0


def test_query_partial_prefix_and_charging(mini_store):
    arch = Architecture.from_key(mini_store.arch_keys()[0])
    full = mini_store.records[arch.key()].curve
    ledger = BudgetLedger(query_budget=100.0)
    for _ in range(2):
        ledger.begin_query()
        prefix = mini_store.query_partial(arch, 3, ledger)
        ledger.end_query()
    assert sum(ledger.query_log) == 6.0
    assert prefix.train_loss == full.train_loss[:3]
    # prefix consistency
    p2 = mini_store.query_partial(arch, 2)
    p5 = mini_store.query_partial(arch, 5)
    assert p5.val_acc[:2] == p2.val_acc


def test_query_partial_range_checks(mini_store):
    arch = Architecture.from_key(mini_store.arch_keys()[0])
    assert mini_store.query_partial(arch, mini_store.epochs).val_acc == \
        mini_store.records[arch.key()].curve.val_acc
    with pytest.raises(InvalidArgument):
        mini_store.query_partial(arch, 0)
    with pytest.raises(InvalidArgument):
        mini_store.query_partial(arch, mini_store.epochs + 1)


def test_unknown_architecture_not_found(mini_store):
    missing = Architecture((4, 4, 4, 4, 4, 3))
    if missing.key() in mini_store.records:
        pytest.skip("improbable collision")
    with pytest.raises(NotFound):
        mini_store.query_full(missing)


def test_sample_archs_distinct_and_excluding(mini_store):
    rng = np.random.default_rng(0)
    got = mini_store.sample_archs(rng, 5)
    assert len({a.key() for a in got}) == 5
    excl = {got[0].key()}
    rest = mini_store.sample_archs(rng, 7, exclude=excl)
    assert got[0].key() not in {a.key() for a in rest}
    with pytest.raises(InvalidArgument):
        mini_store.sample_archs(rng, 100)


def test_evaluation_service_trains_on_demand(mini_store):
    service = EvaluationService(mini_store)
    rng = np.random.default_rng(1)
    outside = mutate(mini_store.space, Architecture.from_key(mini_store.arch_keys()[0]),
                     3, rng)
    while outside.key() in mini_store.records:
        outside = mutate(mini_store.space, outside, 3, rng)
    rec = service.get_record(outside)
    assert service.trained_on_demand == 1
    assert rec.curve.epochs == mini_store.epochs
    assert service.get_record(outside) is rec  # memoized


def test_cost_model_validation():
    with pytest.raises(InvalidArgument):
        CostModel(epoch_cost=0.0)
    with pytest.raises(InvalidArgument):
        CostModel(zero_cost_query=-1.0)


def test_ledger_overspend_guards():
    ledger = BudgetLedger(init_budget=10.0, query_budget=2.0)
    ledger.charge_init(10.0)
    with pytest.raises(InvalidArgument):
        ledger.charge_init(0.5)
    ledger.begin_query()
    ledger.charge_query(2.0)
    with pytest.raises(InvalidArgument):
        ledger.charge_query(0.1)
    assert ledger.end_query() == 2.0
    assert ledger.total_spent == 12.0
