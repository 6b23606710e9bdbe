"""Hybrid predictor feeding a supervised model with up to three feature
families per architecture: its encoding, its most recent training loss at
the query-affordable epoch, and its Jacobian-correlation proxy score.

Training rows use the same curve depth that the query budget will afford,
so train-time and query-time features are distributionally matched."""

from dataclasses import dataclass

import numpy as np

from ..errors import InsufficientData, InvalidArgument
from ..space import encode
from ..store import BenchmarkStore
from .base import DEGENERATE_SCORE, Predictor
from .lcurve import sotl_e
from .models import HpoSpec, TrainingSet, fit
from .zerocost import ZeroCostComputer

FEATURE_NAMES = ("encoding", "sotl_e", "jacob_cov")

OMNI_VARIANTS = {
    "omni": ("encoding", "sotl_e", "jacob_cov"),
    "omni_enc_jc": ("encoding", "jacob_cov"),
    "omni_enc_sotle": ("encoding", "sotl_e"),
    "omni_jc_sotle": ("sotl_e", "jacob_cov"),
}

MIN_INIT_TRAININGS = 10


@dataclass(frozen=True)
class OmniConfig:
    base_kind: str = "gradient_boosted_trees"
    features: tuple[str, ...] = FEATURE_NAMES
    encoding: str = "adjacency_one_hot"
    query_budget: float | None = None  # None: read from the ledger at init

    def __post_init__(self):
        feats = tuple(self.features)
        if not feats:
            raise InvalidArgument("feature set must be non-empty")
        for f in feats:
            if f not in FEATURE_NAMES:
                raise InvalidArgument(f"unknown feature: {f!r} (expected from {FEATURE_NAMES})")
        object.__setattr__(self, "features", feats)


class OmniPredictor(Predictor):
    def __init__(self, store: BenchmarkStore, config: OmniConfig = OmniConfig(),
                 hpo: HpoSpec | None = None, seed: int = 0,
                 computer: ZeroCostComputer | None = None, name: str | None = None):
        super().__init__()
        self.store = store
        self.config = config
        self.hpo = hpo or HpoSpec()
        self.seed = seed
        self.computer = computer or ZeroCostComputer.for_store(store)
        self.name = name or "omni"
        self.model = None
        self.active: tuple[str, ...] = ()
        self.k_query = 0
        self._jc_floor = 0.0
        self.degraded = False

    # --- feature plumbing -------------------------------------------------

    def _plan_features(self, query_budget: float) -> None:
        """Decide which configured features the per-query budget affords."""
        zc_cost = self.store.cost_model.zero_cost_query
        epoch_cost = self.store.cost_model.epoch_cost
        remaining = query_budget
        active = []
        if "encoding" in self.config.features:
            active.append("encoding")
        if "jacob_cov" in self.config.features:
            if remaining + 1e-9 >= zc_cost:
                active.append("jacob_cov")
                remaining -= zc_cost
        if "sotl_e" in self.config.features:
            k = int(np.floor((remaining + 1e-9) / epoch_cost))
            self.k_query = min(max(k, 0), self.store.epochs)
            if self.k_query >= 1:
                active.append("sotl_e")
        self.active = tuple(f for f in FEATURE_NAMES if f in active)
        self.degraded = set(self.active) != set(self.config.features)

    def _jc_raw(self, arch) -> float:
        return self.computer.compute(arch, "jacob_cov")

    def _row(self, arch, curve_prefix) -> np.ndarray:
        parts = []
        if "encoding" in self.active:
            parts.append(encode(self.store.space, arch, self.config.encoding).values)
        if "sotl_e" in self.active:
            parts.append(np.array([sotl_e(curve_prefix)]))
        if "jacob_cov" in self.active:
            val = self._jc_raw(arch)
            parts.append(np.array([val if np.isfinite(val) else self._jc_floor]))
        return np.concatenate(parts)

    def _fit_rows(self, records) -> None:
        if "jacob_cov" in self.active:
            vals = [self._jc_raw(r.arch) for r in records]
            finite = [v for v in vals if np.isfinite(v)]
            self._jc_floor = min(finite) - 1.0 if finite else 0.0
        rows, targets = [], []
        for rec in records:
            prefix = rec.curve.prefix(self.k_query) if "sotl_e" in self.active else None
            rows.append(self._row(rec.arch, prefix))
            targets.append(rec.curve.final_val_acc)
        training = TrainingSet(np.stack(rows), np.asarray(targets), self.config.encoding)
        self.model = fit(self.config.base_kind, training, self.hpo, self.seed)

    # --- lifecycle ---------------------------------------------------------

    def _initialize(self, store, ledger, rng):
        self._plan_features(self.config.query_budget
                            if self.config.query_budget is not None
                            else ledger.query_budget)
        if not self.active:
            raise InsufficientData(f"{self.name}: no feature is affordable")
        full_cost = store.epochs * store.cost_model.epoch_cost
        n_train = int(np.floor((ledger.init_remaining() + 1e-9) / full_cost))
        if n_train < MIN_INIT_TRAININGS:
            raise InsufficientData(
                f"{self.name}: budget affords {n_train} trainings, needs {MIN_INIT_TRAININGS}")
        n_train = min(n_train, len(store))
        archs = store.sample_archs(rng, n_train)
        records = [store.query_full(a, ledger, phase="init") for a in archs]
        self._fit_rows(records)

    def update(self, records):
        if not self.active:
            self._plan_features(self.config.query_budget
                                if self.config.query_budget is not None else 0.0)
        self._fit_rows(records)
        self._initialized = True

    def _query(self, arch, ledger):
        if self.model is None:
            return DEGENERATE_SCORE, True
        prefix = None
        if "sotl_e" in self.active:
            prefix = self.store.query_partial(arch, self.k_query, ledger, phase="query")
        if "jacob_cov" in self.active:
            ledger.charge_query(self.store.cost_model.zero_cost_query)
        x = self._row(arch, prefix)[None, :]
        ledger.charge_query(self.store.cost_model.model_query)
        return float(self.model.predict(x)[0]), self.degraded


def make_omni(store: BenchmarkStore, variant: str = "omni",
              base_kind: str = "gradient_boosted_trees",
              hpo: HpoSpec | None = None, seed: int = 0,
              computer: ZeroCostComputer | None = None,
              query_budget: float | None = None) -> OmniPredictor:
    if variant not in OMNI_VARIANTS:
        raise InvalidArgument(f"unknown variant: {variant!r} (expected one of {tuple(OMNI_VARIANTS)})")
    cfg = OmniConfig(base_kind=base_kind, features=OMNI_VARIANTS[variant],
                     query_budget=query_budget)
    return OmniPredictor(store, cfg, hpo, seed, computer, name=variant)
