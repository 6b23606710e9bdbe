"""Common predictor contract: an initialize/query/update lifecycle with all
spending routed through a BudgetLedger. Scores are always higher-is-better;
loss-like quantities are negated at the predictor boundary.
"""

from dataclasses import dataclass

import numpy as np

from ..budget import BudgetLedger
from ..errors import NotFound
from ..space import Architecture
from ..store import BenchmarkStore

# Sentinel for degenerate statistics: ranks at the bottom, never crashes.
DEGENERATE_SCORE = float("-inf")


@dataclass(frozen=True)
class Prediction:
    score: float
    cost_charged: float
    fallback: bool = False


class Predictor:
    """Base lifecycle. Subclasses override _initialize and _query."""

    name = "predictor"

    def __init__(self):
        self._initialized = False

    def initialize(self, store: BenchmarkStore, ledger: BudgetLedger,
                   rng: np.random.Generator) -> None:
        """One-time pre-computation, charged against the init budget.

        The store handed in here (possibly a protocol-specific view that
        trains on demand) becomes the one served by later queries."""
        self.store = store
        self._initialize(store, ledger, rng)
        self._initialized = True

    def query(self, arch: Architecture, ledger: BudgetLedger) -> Prediction:
        """Score one architecture within the per-query budget."""
        if not self._initialized:
            raise RuntimeError(f"{self.name}: query before initialize")
        ledger.begin_query()
        try:
            score, fallback = self._query(arch, ledger)
        finally:
            spent = ledger.end_query()
        return Prediction(score, spent, fallback)

    def update(self, records) -> None:
        """Refit from explicitly provided evaluated records (used by search
        loops); cost is accounted by the caller as initialization spend."""

    def _initialize(self, store, ledger, rng):
        pass

    def _query(self, arch, ledger) -> tuple[float, bool]:
        raise NotImplementedError


class OraclePredictor(Predictor):
    """Returns the true final validation accuracy; harness sanity bound."""

    name = "oracle"

    def __init__(self, store: BenchmarkStore, negate: bool = False):
        super().__init__()
        self.store = store
        self.negate = negate

    def _query(self, arch, ledger):
        if arch not in self.store:
            raise NotFound(f"architecture not in store: {arch.key()}")
        acc = self.store.final_val_acc(arch)
        return (-acc if self.negate else acc), False


class RandomPredictor(Predictor):
    """I.i.d. uniform scores; the noise floor for every metric."""

    name = "random"

    def __init__(self, seed: int = 0):
        super().__init__()
        self.rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(20,)))

    def _query(self, arch, ledger):
        return float(self.rng.uniform()), False
