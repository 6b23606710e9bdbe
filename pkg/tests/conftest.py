import hashlib
from pathlib import Path

import hypothesis
import pytest

from predbench.dataset import DatasetConfig
from predbench.network import TrainConfig
from predbench.space import SearchSpace
from predbench.store import BenchmarkStore, build

hypothesis.settings.register_profile("fast", max_examples=30, deadline=None)
hypothesis.settings.load_profile("fast")

CACHE_DIR = Path(__file__).parent / ".cache"


def ensure_store(tag: str, space: SearchSpace, n_archs: int, seed: int,
                 train=None, dataset=None, workers: int = 2) -> BenchmarkStore:
    """Build once and reuse across test sessions; stores are deterministic
    so the cache is just a time saver."""
    train = train or TrainConfig()
    dataset = dataset or DatasetConfig()
    key = hashlib.sha256(repr((space.num_nodes, space.ops, n_archs, seed,
                               train.to_dict(), dataset.to_dict())).encode()).hexdigest()[:16]
    CACHE_DIR.mkdir(exist_ok=True)
    path = CACHE_DIR / f"{tag}_{key}.nbstore"
    if path.exists():
        return BenchmarkStore.load(path)
    store = build(space, n_archs, train, dataset, seed=seed, workers=workers)
    store.save(path)
    return store


@pytest.fixture(scope="session")
def tiny_store() -> BenchmarkStore:
    """60 architectures of the default space; fast unit-test store."""
    return ensure_store("tiny", SearchSpace(), 60, seed=101)


@pytest.fixture(scope="session")
def small_store() -> BenchmarkStore:
    """400 architectures; enough for rank-correlation checks."""
    return ensure_store("small", SearchSpace(), 400, seed=102)
