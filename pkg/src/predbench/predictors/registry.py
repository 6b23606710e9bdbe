"""Name -> predictor-factory registry shared by the CLI and the harness.

A PredictorContext owns the per-store caches (zero-cost scores, curve
fits) so repeated trials never recompute pure per-architecture values."""

from ..errors import InvalidArgument
from ..store import BenchmarkStore
from .base import OraclePredictor, Predictor, RandomPredictor
from .lcurve import LCE, EarlyStopAcc, EarlyStopLoss, SoTL, SoTLE
from .models import MODEL_KINDS, HpoSpec, ModelPredictor
from .omni import OMNI_VARIANTS, make_omni
from .zerocost import PROXY_KINDS, ZeroCostComputer, ZeroCostPredictor

LC_NAMES = ("early_stop_acc", "early_stop_loss", "sotl", "sotl_e", "lce", "lce_m")

PREDICTOR_NAMES = (
    ("oracle", "random")
    + PROXY_KINDS
    + LC_NAMES
    + MODEL_KINDS
    + ("bananas",)
    + tuple(OMNI_VARIANTS)
)

# modest search budget for experiment loops; the full default of HpoSpec is
# meant for one-off fits, not hundreds of trials
EXPERIMENT_HPO = HpoSpec(iterations=8, time_cap_s=60.0)


class PredictorContext:
    def __init__(self, store: BenchmarkStore, hpo: HpoSpec = EXPERIMENT_HPO,
                 zc_seed: int = 0):
        self.store = store
        self.hpo = hpo
        self.computer = ZeroCostComputer.for_store(store, zc_seed)
        self.lce_cache: dict = {}

    def factory(self, name: str, query_budget: float | None = None):
        """Return callable(seed) -> Predictor for a registry name.

        query_budget pins the hybrid predictors' per-query allowance for
        search loops, which refit via update() and never show a ledger at
        initialization time; grid runs leave it None (read from the ledger)."""
        if name not in PREDICTOR_NAMES:
            raise InvalidArgument(
                f"unknown predictor: {name!r}; valid names: {', '.join(PREDICTOR_NAMES)}")
        store = self.store

        def make(seed: int = 0) -> Predictor:
            if name == "oracle":
                return OraclePredictor(store)
            if name == "random":
                return RandomPredictor(seed)
            if name in PROXY_KINDS:
                return ZeroCostPredictor.for_store(name, store, computer=self.computer)
            if name == "early_stop_acc":
                return EarlyStopAcc(store)
            if name == "early_stop_loss":
                return EarlyStopLoss(store)
            if name == "sotl":
                return SoTL(store)
            if name == "sotl_e":
                return SoTLE(store)
            if name in ("lce", "lce_m"):
                return LCE(store, variant=name, cache=self.lce_cache)
            if name in MODEL_KINDS:
                return ModelPredictor(name, store, hpo=self.hpo, seed=seed)
            if name == "bananas":
                return ModelPredictor("feedforward_ensemble", store, encoding="path",
                                      hpo=self.hpo, seed=seed, name="bananas")
            return make_omni(store, variant=name, hpo=self.hpo, seed=seed,
                             computer=self.computer, query_budget=query_budget)

        return make

    def factories(self, names) -> dict:
        return {name: self.factory(name) for name in names}
