"""Experiment harness: the (initialization x query) budget grid, Pareto
extraction, uniform and mutation-based train/test protocols, and the
seed-variance decomposition.

Per-trial randomness is keyed on the trial index alone, never on the grid
cell, so predictors that ignore one budget axis produce identical rows or
columns and budget levels stay directly comparable."""

import logging
from dataclasses import dataclass

import numpy as np

from .budget import BudgetLedger
from .errors import InvalidArgument, PredbenchError, ProtocolFailure
from .metrics import METRIC_NAMES, compute_all, kendall_tau, sanitize_scores
from .space import Architecture, mutate
from .store import BenchmarkStore, EvaluationService

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class BudgetGrid:
    init_levels: tuple[float, ...]
    query_levels: tuple[float, ...]

    def __post_init__(self):
        for levels in (self.init_levels, self.query_levels):
            if not levels:
                raise InvalidArgument("grid needs at least one level per axis")
            if any(b <= a for a, b in zip(levels, levels[1:])):
                raise InvalidArgument("budget levels must be strictly increasing")
            if levels[0] < 0:
                raise InvalidArgument("budgets must be >= 0")

    @property
    def cells(self) -> int:
        return len(self.init_levels) * len(self.query_levels)

    @staticmethod
    def default(epochs: int, max_init_trainings: float = 300.0,
                init_count: int = 11, query_count: int = 14,
                query_lo: float = 0.05) -> "BudgetGrid":
        """11 x 14 grid: init spans zero to max_init_trainings full
        trainings, query spans query_lo to one full training."""
        init = [0.0] + list(np.geomspace(1.0, max_init_trainings, init_count - 1) * epochs)
        query = list(np.geomspace(query_lo, float(epochs), query_count))
        return BudgetGrid(tuple(round(v, 6) for v in init),
                          tuple(round(v, 6) for v in query))


@dataclass(frozen=True)
class CellStats:
    mean: float
    std: float
    trials: int


class ResultGrid:
    """Aggregated metric values for each (cell, predictor, metric)."""

    def __init__(self, predictor_names, grid: BudgetGrid, metrics=METRIC_NAMES):
        self.predictor_names = list(predictor_names)
        self.grid = grid
        self.metrics = tuple(metrics)
        self.stats: dict[tuple, CellStats] = {}

    def set_cell(self, name, i, q, metric, values: list[float]):
        vals = np.asarray([v for v in values if np.isfinite(v)])
        if vals.size:
            cell = CellStats(float(vals.mean()), float(vals.std()), int(vals.size))
        else:
            cell = CellStats(float("nan"), float("nan"), 0)
        self.stats[(name, i, q, metric)] = cell

    def cell(self, name, i, q, metric) -> CellStats:
        return self.stats[(name, i, q, metric)]

    def mean(self, name, i, q, metric="kendall_tau") -> float:
        return self.stats[(name, i, q, metric)].mean

    def to_rows(self) -> list[tuple]:
        rows = []
        for name in self.predictor_names:
            for i, ib in enumerate(self.grid.init_levels):
                for q, qb in enumerate(self.grid.query_levels):
                    for metric in self.metrics:
                        c = self.stats[(name, i, q, metric)]
                        rows.append((name, ib, qb, metric, c.mean, c.std, c.trials))
        return rows

    @staticmethod
    def from_rows(rows) -> "ResultGrid":
        names, inits, queries, metrics = [], set(), set(), []
        for name, ib, qb, metric, *_ in rows:
            if name not in names:
                names.append(name)
            inits.add(float(ib))
            queries.add(float(qb))
            if metric not in metrics:
                metrics.append(metric)
        grid = BudgetGrid(tuple(sorted(inits)), tuple(sorted(queries)))
        rg = ResultGrid(names, grid, tuple(metrics))
        for name, ib, qb, metric, mean, std, trials in rows:
            i = grid.init_levels.index(float(ib))
            q = grid.query_levels.index(float(qb))
            rg.stats[(name, i, q, metric)] = CellStats(float(mean), float(std), int(trials))
        return rg


class StoreView:
    """Store facade used by the harness: can exclude the test set from
    training draws, redirect sampling to a protocol-specific builder, and
    serve architectures outside the table by training them on demand."""

    def __init__(self, store: BenchmarkStore, exclude=frozenset(), sampler=None,
                 service: EvaluationService | None = None):
        self._store = store
        self._exclude = set(exclude)
        self._sampler = sampler
        self._service = service

    def __getattr__(self, name):
        return getattr(self._store, name)

    def __len__(self):
        # size of the sampling pool, not of the queryable table
        return len(self._store.records.keys() - self._exclude)

    def __contains__(self, arch):
        if self._service is not None:
            return True  # anything in the space can be trained on demand
        return arch.key() in self._store.records

    def sample_archs(self, rng, n, exclude=frozenset()):
        if self._sampler is not None:
            return self._sampler(n, rng)
        return self._store.sample_archs(rng, n, self._exclude | set(exclude))

    def _record(self, arch):
        if self._service is not None:
            return self._service.get_record(arch)
        return self._store.query_full(arch)  # uncharged peek, raises NotFound

    def query_full(self, arch, ledger=None, phase="init"):
        rec = self._record(arch)
        BenchmarkStore._charge(ledger, phase, self._store.epochs * rec.epoch_cost)
        return rec

    def query_partial(self, arch, k_epochs, ledger=None, phase="query"):
        rec = self._record(arch)
        if not 1 <= k_epochs <= self._store.epochs:
            raise InvalidArgument(f"k_epochs must be in [1, {self._store.epochs}]")
        BenchmarkStore._charge(ledger, phase, k_epochs * rec.epoch_cost)
        return rec.curve.prefix(k_epochs)

    def final_val_acc(self, arch):
        return self._record(arch).curve.final_val_acc


def _trial_rngs(master_seed: int, trial: int):
    """Per-trial streams, deliberately independent of the grid cell."""
    test_rng = np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(50, trial)))
    init_key = (master_seed, 51, trial)
    pred_seed = int(np.random.SeedSequence(master_seed, spawn_key=(52, trial)).generate_state(1)[0])
    return test_rng, init_key, pred_seed


def _init_rng(init_key) -> np.random.Generator:
    master_seed, tag, trial = init_key
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(tag, trial)))


def run_grid(factories: dict, store: BenchmarkStore, grid: BudgetGrid,
             test_size: int = 200, trials: int = 100, seed: int = 0,
             protocol: str = "uniform", mutation_max_attrs: int = 3) -> ResultGrid:
    """Evaluate every predictor factory over every budget cell.

    factories maps name -> callable(seed) -> Predictor. Per trial a fresh
    test set is drawn (uniformly, or by the mutation protocol), the
    predictor initializes against the init budget on draws disjoint from
    the test set, and each test architecture is queried under the query
    budget. Failures are recorded per trial, never aborts."""
    if protocol not in ("uniform", "mutation"):
        raise InvalidArgument(f"unknown protocol: {protocol!r}")
    result = ResultGrid(list(factories), grid)
    service = EvaluationService(store) if protocol == "mutation" else None

    trial_data = []
    for t in range(trials):
        test_rng, init_key, pred_seed = _trial_rngs(seed, t)
        if protocol == "uniform":
            test_archs = store.sample_archs(test_rng, test_size)
            view = StoreView(store, exclude={a.key() for a in test_archs})
            truth_fn = store.final_val_acc
        else:
            _, test_archs, builder = mutation_protocol(
                store, test_rng, test_size=test_size, max_attrs=mutation_max_attrs,
                service=service)
            view = StoreView(store, sampler=builder, service=service)
            truth_fn = service.final_val_acc
        truth = np.array([truth_fn(a) for a in test_archs])
        trial_data.append((test_archs, view, truth, init_key, pred_seed))

    for name, factory in factories.items():
        for i, init_budget in enumerate(grid.init_levels):
            for q, query_budget in enumerate(grid.query_levels):
                per_metric = {m: [] for m in result.metrics}
                for test_archs, view, truth, init_key, pred_seed in trial_data:
                    # fresh rng per cell so every cell replays the same draws
                    vals = _one_trial(factory, pred_seed, view, test_archs, truth,
                                      init_budget, query_budget, _init_rng(init_key))
                    if vals is None:
                        continue
                    for m in result.metrics:
                        per_metric[m].append(vals[m])
                for m in result.metrics:
                    result.set_cell(name, i, q, m, per_metric[m])
    return result


def _one_trial(factory, pred_seed, view, test_archs, truth, init_budget,
               query_budget, init_rng):
    ledger = BudgetLedger(init_budget, query_budget)
    try:
        predictor = factory(pred_seed)
        predictor.initialize(view, ledger, init_rng)
        scores = [predictor.query(a, ledger).score for a in test_archs]
    except PredbenchError as exc:
        log.debug("trial failed: %s", exc)
        return None
    return compute_all(scores, truth)


# --- pareto ------------------------------------------------------------


def pareto_best(result: ResultGrid, metric: str = "kendall_tau"):
    """Per-cell argmax of the mean metric (ties to the lexicographically
    first name) and the set of predictors winning at least one cell."""
    if metric not in result.metrics:
        raise InvalidArgument(f"metric {metric!r} not in result grid")
    winners = {}
    for i in range(len(result.grid.init_levels)):
        for q in range(len(result.grid.query_levels)):
            best_name, best_val = None, float("-inf")
            for name in sorted(result.predictor_names):
                val = result.stats[(name, i, q, metric)].mean
                if np.isfinite(val) and val > best_val:
                    best_name, best_val = name, val
            winners[(i, q)] = best_name
    pareto = sorted({n for n in winners.values() if n is not None})
    return winners, pareto


# --- mutation protocol --------------------------------------------------


def mutation_protocol(store: BenchmarkStore, rng: np.random.Generator,
                      pool_size: int = 50, num_seeds: int = 5,
                      test_size: int = 200, max_attrs: int = 3,
                      service: EvaluationService | None = None,
                      max_retries_factor: int = 200):
    """Mutation-based train/test distribution.

    Draws pool_size random architectures, keeps the num_seeds with the
    highest final accuracy as seeds, builds a test set of mutations of the
    seeds (edit distance <= max_attrs), and returns a training-set builder
    producing single mutations of test architectures, disjoint from the
    test set."""
    service = service or EvaluationService(store)
    pool = store.sample_archs(rng, pool_size)
    ranked = sorted(pool, key=lambda a: (-store.final_val_acc(a), a.key()))
    seeds = ranked[:num_seeds]

    test_set: list[Architecture] = []
    seen: set[str] = set()
    retries = max_retries_factor * test_size
    while len(test_set) < test_size:
        base = seeds[int(rng.integers(0, len(seeds)))]
        cand = mutate(store.space, base, max_attrs, rng)
        if cand.key() not in seen:
            seen.add(cand.key())
            test_set.append(cand)
            continue
        retries -= 1
        if retries <= 0:
            raise ProtocolFailure("could not assemble a distinct mutation test set")

    test_keys = frozenset(seen)

    def train_builder(n: int, brng: np.random.Generator) -> list[Architecture]:
        out, chosen = [], set()
        budget = max_retries_factor * max(n, 1)
        while len(out) < n:
            base = test_set[int(brng.integers(0, len(test_set)))]
            cand = mutate(store.space, base, 1, brng)
            key = cand.key()
            if key not in test_keys and key not in chosen:
                chosen.add(key)
                out.append(cand)
                continue
            budget -= 1
            if budget <= 0:
                raise ProtocolFailure("could not draw a training set disjoint from test")
        return out

    return seeds, test_set, train_builder


# --- seed variance -------------------------------------------------------


def seed_variance(factory, store: BenchmarkStore, query_budget: float,
                  train_size: int = 100, test_size: int = 200,
                  fixed_trials: int = 10, redraws: int = 50, seed: int = 0):
    """Decompose Kendall-Tau variability into dataset-draw and predictor
    stochasticity: the second value holds train/test fixed and varies only
    the predictor seed."""
    all_vals, fixed_stds = [], []
    for j in range(redraws):
        draw_rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(60, j)))
        test_archs = store.sample_archs(draw_rng, test_size)
        exclude = {a.key() for a in test_archs}
        train_archs = store.sample_archs(draw_rng, min(train_size, len(store) - test_size),
                                         exclude)
        truth = np.array([store.final_val_acc(a) for a in test_archs])
        view = StoreView(store, sampler=lambda n, r, _t=train_archs: list(_t[:n]))
        inner = []
        for t in range(fixed_trials):
            pred_seed = int(np.random.SeedSequence(seed, spawn_key=(61, j, t))
                            .generate_state(1)[0])
            ledger = BudgetLedger(len(train_archs) * store.epochs * store.cost_model.epoch_cost,
                                  query_budget)
            predictor = factory(pred_seed)
            predictor.initialize(view, ledger, np.random.default_rng(0))
            scores = [predictor.query(a, ledger).score for a in test_archs]
            kt = kendall_tau(sanitize_scores(scores), truth)
            if np.isfinite(kt):
                inner.append(kt)
        if inner:
            fixed_stds.append(float(np.std(inner)))
            all_vals.extend(inner)
    overall = float(np.std(all_vals)) if all_vals else float("nan")
    fixed = float(np.mean(fixed_stds)) if fixed_stds else float("nan")
    return overall, fixed
