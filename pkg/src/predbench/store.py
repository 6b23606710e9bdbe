"""Builds, persists and serves the tabular benchmark.

The file format is versioned, line-delimited JSON with a fixed field order
and full-precision decimal floats, so saved stores diff cleanly and round
trip bit-exactly. The header carries the generating configuration and a
hash that is verified on load.
"""

import hashlib
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .budget import BudgetLedger, CostModel
from .dataset import DatasetConfig, SyntheticDataset, make_dataset
from .errors import (
    BuildQualityError,
    DivergedTraining,
    DuplicateExhaustion,
    InvalidArgument,
    NotFound,
)
from .network import TrainConfig, instantiate
from .space import Architecture, SearchSpace, sample_uniform, validate_arch
from .training import LearningCurve, train

log = logging.getLogger(__name__)

FORMAT_VERSION = 1
MIN_ACCURACY_SPREAD = 0.15


@dataclass(frozen=True)
class BenchmarkRecord:
    arch: Architecture
    curve: LearningCurve
    param_count: int
    flop_count: int
    epoch_cost: float

    def __post_init__(self):
        if self.epoch_cost <= 0:
            raise InvalidArgument("epoch_cost must be > 0")


def arch_train_seed(build_seed: int, arch: Architecture) -> int:
    """Stable per-architecture training seed, independent of build order."""
    digest = hashlib.sha256(f"{build_seed}|{arch.key()}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def train_record(space: SearchSpace, arch: Architecture, train_config: TrainConfig,
                 data: SyntheticDataset, cost_model: CostModel,
                 build_seed: int) -> BenchmarkRecord:
    """Fully train one architecture into a benchmark record."""
    cfg_d = train_config.to_dict()
    cfg_d["seed"] = arch_train_seed(build_seed, arch)
    cfg = TrainConfig(**cfg_d)
    net = instantiate(space, arch, cfg, input_dim=data.input_dim,
                      num_classes=data.num_classes)
    curve = train(net, data, cfg)
    return BenchmarkRecord(arch, curve, net.param_count, net.flop_count,
                           cost_model.epoch_cost)


def _train_job(args) -> tuple[str, tuple, int, int] | tuple[str, None, int, int]:
    space_d, arch_key, train_d, dataset_d, cost_d, build_seed = args
    space = SearchSpace(**space_d)
    arch = Architecture.from_key(arch_key)
    data = make_dataset(DatasetConfig(**dataset_d))
    try:
        rec = train_record(space, arch, TrainConfig(**train_d), data,
                           CostModel(**cost_d), build_seed)
    except DivergedTraining:
        return arch_key, None, 0, 0
    curve = (rec.curve.train_loss, rec.curve.val_acc, rec.curve.val_loss)
    return arch_key, curve, rec.param_count, rec.flop_count


class BenchmarkStore:
    """Immutable table of fully trained architectures plus the cost model."""

    def __init__(self, space: SearchSpace, train_config: TrainConfig,
                 dataset_config: DatasetConfig, cost_model: CostModel,
                 build_seed: int, records: list[BenchmarkRecord]):
        self.space = space
        self.train_config = train_config
        self.dataset_config = dataset_config
        self.cost_model = cost_model
        self.build_seed = build_seed
        self.records: dict[str, BenchmarkRecord] = {}
        for rec in records:
            key = rec.arch.key()
            if key in self.records:
                raise InvalidArgument(f"duplicate record for {key}")
            self.records[key] = rec
        self._dataset: SyntheticDataset | None = None

    @property
    def epochs(self) -> int:
        return self.train_config.epochs

    def __len__(self) -> int:
        return len(self.records)

    def __contains__(self, arch: Architecture) -> bool:
        return arch.key() in self.records

    def arch_keys(self) -> list[str]:
        return list(self.records)

    def dataset(self) -> SyntheticDataset:
        if self._dataset is None:
            self._dataset = make_dataset(self.dataset_config)
        return self._dataset

    def _get(self, arch: Architecture) -> BenchmarkRecord:
        rec = self.records.get(arch.key())
        if rec is None:
            raise NotFound(f"architecture not in store: {arch.key()}")
        return rec

    def final_val_acc(self, arch: Architecture) -> float:
        return self._get(arch).curve.final_val_acc

    def query_full(self, arch: Architecture, ledger: BudgetLedger | None = None,
                   phase: str = "init") -> BenchmarkRecord:
        rec = self._get(arch)
        self._charge(ledger, phase, self.epochs * rec.epoch_cost)
        return rec

    def query_partial(self, arch: Architecture, k_epochs: int,
                      ledger: BudgetLedger | None = None,
                      phase: str = "query") -> LearningCurve:
        rec = self._get(arch)
        if not 1 <= k_epochs <= self.epochs:
            raise InvalidArgument(f"k_epochs must be in [1, {self.epochs}]")
        self._charge(ledger, phase, k_epochs * rec.epoch_cost)
        return rec.curve.prefix(k_epochs)

    @staticmethod
    def _charge(ledger, phase, amount):
        if ledger is None:
            return
        if phase == "init":
            ledger.charge_init(amount)
        elif phase == "query":
            ledger.charge_query(amount)
        else:
            raise InvalidArgument(f"unknown charge phase: {phase!r}")

    def sample_archs(self, rng: np.random.Generator, n: int,
                     exclude: set[str] = frozenset()) -> list[Architecture]:
        """Draw n distinct stored architectures uniformly, skipping `exclude`."""
        keys = [k for k in self.records if k not in exclude]
        if n > len(keys):
            raise InvalidArgument(f"cannot draw {n} from {len(keys)} available records")
        picks = rng.choice(len(keys), size=n, replace=False)
        return [Architecture.from_key(keys[i]) for i in picks]

    # persistence ---------------------------------------------------------

    def _header_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "kind": "nbstore",
            "space": {"num_nodes": self.space.num_nodes, "ops": list(self.space.ops)},
            "train_config": self.train_config.to_dict(),
            "dataset_config": self.dataset_config.to_dict(),
            "cost_model": self.cost_model.to_dict(),
            "build_seed": self.build_seed,
            "n_records": len(self.records),
        }

    def save(self, path: str | Path) -> None:
        header = self._header_dict()
        header["header_sha256"] = _hash_obj(header)
        lines = [json.dumps(header, sort_keys=False)]
        for key, rec in self.records.items():
            lines.append(json.dumps({
                "arch": key,
                "param_count": rec.param_count,
                "flop_count": rec.flop_count,
                "epoch_cost": rec.epoch_cost,
                "train_loss": list(rec.curve.train_loss),
                "val_acc": list(rec.curve.val_acc),
                "val_loss": list(rec.curve.val_loss),
            }, sort_keys=False))
        Path(path).write_text("\n".join(lines) + "\n")

    @staticmethod
    def load(path: str | Path) -> "BenchmarkStore":
        text = Path(path).read_text()
        lines = text.splitlines()
        if not lines:
            raise InvalidArgument(f"empty store file: {path}")
        header = json.loads(lines[0])
        if header.get("kind") != "nbstore":
            raise InvalidArgument(f"not a benchmark store file: {path}")
        if header.get("format_version") != FORMAT_VERSION:
            raise InvalidArgument(
                f"unsupported format version {header.get('format_version')}")
        stored_hash = header.pop("header_sha256", None)
        if stored_hash != _hash_obj(header):
            raise InvalidArgument("store header hash mismatch; file corrupted")
        records = []
        for line in lines[1:]:
            d = json.loads(line)
            records.append(BenchmarkRecord(
                Architecture.from_key(d["arch"]),
                LearningCurve(tuple(d["train_loss"]), tuple(d["val_acc"]),
                              tuple(d["val_loss"])),
                int(d["param_count"]), int(d["flop_count"]),
                float(d["epoch_cost"]),
            ))
        if len(records) != header["n_records"]:
            raise InvalidArgument("record count does not match header")
        return BenchmarkStore(
            SearchSpace(header["space"]["num_nodes"], tuple(header["space"]["ops"])),
            TrainConfig(**header["train_config"]),
            DatasetConfig(**header["dataset_config"]),
            CostModel(**header["cost_model"]),
            header["build_seed"],
            records,
        )


def _hash_obj(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True).encode()).hexdigest()


def build(space: SearchSpace, n_archs: int, train_config: TrainConfig,
          dataset_config: DatasetConfig, seed: int,
          cost_model: CostModel = CostModel(), workers: int = 1,
          check_spread: bool = True) -> BenchmarkStore:
    """Sample n_archs distinct architectures, train each, assemble the store.

    Deterministic given seed, including under parallel workers. Diverged
    trainings are skipped with a logged replacement draw.
    """
    if n_archs < 1:
        raise InvalidArgument("n_archs must be >= 1")
    if n_archs > space.size:
        raise DuplicateExhaustion(
            f"requested {n_archs} distinct architectures from a space of {space.size}")
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(10,)))
    data = make_dataset(dataset_config)

    def draw_new(seen: set[str]) -> Architecture:
        attempts = 0
        while True:
            arch = sample_uniform(space, rng)
            if arch.key() not in seen:
                return arch
            attempts += 1
            if attempts > 100 * space.size:
                raise DuplicateExhaustion("rejection sampling stalled")

    seen: set[str] = set()
    pending: list[Architecture] = []
    for _ in range(n_archs):
        arch = draw_new(seen)
        seen.add(arch.key())
        pending.append(arch)

    records: list[BenchmarkRecord] = []
    while pending:
        results = _run_jobs(space, pending, train_config, dataset_config,
                            cost_model, seed, workers, data)
        pending = []
        for arch, rec in results:
            if rec is None:
                log.warning("training diverged for %s; drawing replacement", arch.key())
                replacement = draw_new(seen)
                seen.add(replacement.key())
                pending.append(replacement)
            else:
                records.append(rec)

    if check_spread and len(records) >= 50:
        accs = [r.curve.final_val_acc for r in records]
        spread = max(accs) - min(accs)
        if spread < MIN_ACCURACY_SPREAD:
            raise BuildQualityError(
                f"final accuracy spread {spread:.3f} < {MIN_ACCURACY_SPREAD}; "
                "rank metrics would be meaningless")
    return BenchmarkStore(space, train_config, dataset_config, cost_model, seed, records)


def _run_jobs(space, archs, train_config, dataset_config, cost_model, seed,
              workers, data):
    if workers <= 1:
        out = []
        for arch in archs:
            try:
                rec = train_record(space, arch, train_config, data, cost_model, seed)
            except DivergedTraining:
                rec = None
            out.append((arch, rec))
        return out
    space_d = {"num_nodes": space.num_nodes, "ops": tuple(space.ops)}
    jobs = [(space_d, a.key(), train_config.to_dict(), dataset_config.to_dict(),
             cost_model.to_dict(), seed) for a in archs]
    out = []
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for arch, result in zip(archs, pool.map(_train_job, jobs, chunksize=8)):
            if result[1] is None:
                out.append((arch, None))
            else:
                _, (tl, va, vl), pc, fc = result
                rec = BenchmarkRecord(arch, LearningCurve(tl, va, vl), pc, fc,
                                      cost_model.epoch_cost)
                out.append((arch, rec))
    return out


class EvaluationService:
    """Serves records for any architecture, training on demand when the
    architecture is outside the prebuilt table (mutation can leave it)."""

    def __init__(self, store: BenchmarkStore):
        self.store = store
        self._extra: dict[str, BenchmarkRecord] = {}
        self.trained_on_demand = 0

    def get_record(self, arch: Architecture) -> BenchmarkRecord:
        validate_arch(self.store.space, arch)
        key = arch.key()
        rec = self.store.records.get(key) or self._extra.get(key)
        if rec is None:
            rec = train_record(self.store.space, arch, self.store.train_config,
                               self.store.dataset(), self.store.cost_model,
                               self.store.build_seed)
            self._extra[key] = rec
            self.trained_on_demand += 1
        return rec

    def final_val_acc(self, arch: Architecture) -> float:
        return self.get_record(arch).curve.final_val_acc

    def full_cost(self, arch: Architecture) -> float:
        return self.store.epochs * self.get_record(arch).epoch_cost
