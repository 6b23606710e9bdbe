"""Predictor-guided architecture search: an evolutionary loop where a
predictor ranks mutation candidates, and a Bayesian-optimization loop using
independent Thompson sampling over an ensemble's predictive distribution.

All costs are simulated epoch-equivalents; evaluations (full trainings)
come from the benchmark store, training on demand when a mutation leaves
the prebuilt table."""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .budget import BudgetLedger
from .errors import InvalidArgument, PredbenchError
from .harness import StoreView
from .predictors.models import HpoSpec, TrainingSet, fit
from .space import Architecture, encode, mutate, sample_uniform
from .store import BenchmarkStore, EvaluationService

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class NasRunConfig:
    framework: str = "evolution"
    iterations: int = 25
    init_population: int = 10
    # evolution
    elite: int = 5
    mutations_per_elite: int = 40
    select_k: int = 20
    mutation_max_attrs: int = 1
    query_budget: float = 10.0  # per-candidate scoring allowance
    # bayesian optimization
    pool: int = 200
    select: int = 20
    members: int = 3
    hpo_every: int = 5

    def __post_init__(self):
        if self.framework not in ("evolution", "bo_its"):
            raise InvalidArgument(f"unknown framework: {self.framework!r}")
        for name in ("iterations", "init_population", "elite", "mutations_per_elite",
                     "select_k", "pool", "select", "members", "hpo_every"):
            if getattr(self, name) < 1:
                raise InvalidArgument(f"{name} must be >= 1")
        if self.select > self.pool:
            raise InvalidArgument("select must be <= pool")


@dataclass
class NasTrace:
    """Cumulative simulated cost and best-so-far validation error, one step
    per fully evaluated architecture."""

    steps: list[tuple[float, float]] = field(default_factory=list)

    def append(self, cost: float, best_err: float) -> None:
        if self.steps:
            last_cost, last_best = self.steps[-1]
            if cost <= last_cost:
                raise InvalidArgument("cost must strictly increase")
            if best_err > last_best + 1e-12:
                raise InvalidArgument("best-so-far error cannot increase")
        self.steps.append((cost, best_err))

    @property
    def final_cost(self) -> float:
        return self.steps[-1][0]

    @property
    def final_error(self) -> float:
        return self.steps[-1][1]

    def error_at_cost(self, cost: float) -> float:
        best = float("inf")
        for c, e in self.steps:
            if c <= cost:
                best = e
            else:
                break
        return best


def _initial_population(store, service, rng, n) -> list[Architecture]:
    seen, pop = set(), []
    while len(pop) < n:
        arch = sample_uniform(store.space, rng)
        if arch.key() not in seen:
            seen.add(arch.key())
            pop.append(arch)
    return pop


def run_evolution(store: BenchmarkStore, predictor_factory, config: NasRunConfig,
                  seed: int = 0, service: EvaluationService | None = None) -> NasTrace:
    """Iteratively mutate the elite, rank candidates with the predictor
    (refitted each iteration on the whole evaluated population), and fully
    evaluate the top select_k."""
    service = service or EvaluationService(store)
    view = StoreView(store, service=service)
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(70,)))
    predictor = predictor_factory(seed)
    if hasattr(predictor, "store"):
        predictor.store = view  # candidates can fall outside the table

    trace = NasTrace()
    cost = 0.0
    best_err = float("inf")
    population: list[Architecture] = []
    evaluated: set[str] = set()

    def evaluate(arch: Architecture):
        nonlocal cost, best_err
        rec = service.get_record(arch)
        cost += store.epochs * rec.epoch_cost
        best_err = min(best_err, 1.0 - rec.curve.final_val_acc)
        trace.append(cost, best_err)
        population.append(arch)
        evaluated.add(arch.key())

    for arch in _initial_population(store, service, rng, config.init_population):
        evaluate(arch)

    for _ in range(config.iterations):
        records = [service.get_record(a) for a in population]
        fit_ok = True
        try:
            predictor.update(records)
            if not predictor._initialized:
                predictor.initialize(view, BudgetLedger(), rng)
        except PredbenchError as exc:
            fit_ok = False
            log.warning("predictor refit failed (%s); random selection this round", exc)

        elites = sorted(population,
                        key=lambda a: (-service.final_val_acc(a), a.key()))[: config.elite]
        candidates: list[Architecture] = []
        cand_seen: set[str] = set()
        for elite in elites:
            for _ in range(config.mutations_per_elite):
                cand = mutate(store.space, elite, config.mutation_max_attrs, rng)
                if cand.key() not in evaluated and cand.key() not in cand_seen:
                    cand_seen.add(cand.key())
                    candidates.append(cand)
        attempts = 50 * config.select_k
        while len(candidates) < config.select_k and attempts > 0:
            cand = sample_uniform(store.space, rng)
            if cand.key() not in evaluated and cand.key() not in cand_seen:
                cand_seen.add(cand.key())
                candidates.append(cand)
            attempts -= 1

        if fit_ok:
            ledger = BudgetLedger(query_budget=config.query_budget)
            try:
                scored = [(predictor.query(c, ledger).score, c) for c in candidates]
                cost += ledger.query_spent
                scored.sort(key=lambda sc: (-sc[0], sc[1].key()))
                chosen = [c for _, c in scored[: config.select_k]]
            except PredbenchError as exc:
                fit_ok = False
                log.warning("candidate scoring failed (%s); random selection", exc)
        if not fit_ok:
            picks = rng.choice(len(candidates),
                               size=min(config.select_k, len(candidates)), replace=False)
            chosen = [candidates[i] for i in picks]

        for arch in chosen:
            evaluate(arch)
    return trace


def run_bo_its(store: BenchmarkStore, model_kind: str, config: NasRunConfig,
               seed: int = 0, encoding: str = "adjacency_one_hot",
               hpo: HpoSpec | None = None,
               service: EvaluationService | None = None) -> NasTrace:
    """Bayesian optimization: fit an ensemble on the population, draw one
    sample per pool candidate from Normal(mean, std) (independent Thompson
    sampling), and evaluate the top `select` draws."""
    service = service or EvaluationService(store)
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(71,)))
    hpo = hpo or HpoSpec(iterations=10)

    trace = NasTrace()
    cost = 0.0
    best_err = float("inf")
    population: list[Architecture] = []
    evaluated: set[str] = set()

    def evaluate(arch: Architecture):
        nonlocal cost, best_err
        rec = service.get_record(arch)
        cost += store.epochs * rec.epoch_cost
        best_err = min(best_err, 1.0 - rec.curve.final_val_acc)
        trace.append(cost, best_err)
        population.append(arch)
        evaluated.add(arch.key())

    for arch in _initial_population(store, service, rng, config.init_population):
        evaluate(arch)

    current_hypers = None
    for it in range(config.iterations):
        X = np.stack([encode(store.space, a, encoding).values for a in population])
        y = np.array([service.final_val_acc(a) for a in population])
        training = TrainingSet(X, y, encoding)
        retune = it % config.hpo_every == 0
        try:
            model = fit(model_kind, training, hpo, seed=seed + it,
                        members=config.members,
                        hypers=None if retune else current_hypers)
            current_hypers = model.hypers
        except PredbenchError as exc:
            log.warning("ensemble fit failed (%s); random selection this round", exc)
            model = None

        pool: list[Architecture] = []
        pool_seen: set[str] = set()
        attempts = 100 * config.pool
        while len(pool) < config.pool and attempts > 0:
            cand = sample_uniform(store.space, rng)
            if cand.key() not in evaluated and cand.key() not in pool_seen:
                pool_seen.add(cand.key())
                pool.append(cand)
            attempts -= 1

        if model is not None:
            Xp = np.stack([encode(store.space, a, encoding).values for a in pool])
            mean, std = model.predict_mean_std(Xp)
            chosen = its_select(pool, mean, std, config.select, rng)
        else:
            picks = rng.choice(len(pool), size=config.select, replace=False)
            chosen = [pool[i] for i in picks]

        for arch in chosen:
            evaluate(arch)
    return trace


def its_select(pool, mean, std, k, rng) -> list:
    """Independent Thompson sampling: one draw per candidate from its
    predictive Normal, then take the top k draws. Zero std degenerates to
    plain mean ranking."""
    if np.all(std == 0.0):
        log.info("zero predictive std everywhere; acquisition is mean ranking")
    draws = rng.normal(mean, std)
    order = sorted(range(len(pool)), key=lambda i: (-draws[i], pool[i].key()))
    return [pool[i] for i in order[:k]]


def run_nas(store: BenchmarkStore, config: NasRunConfig, seed: int = 0,
            predictor_factory=None, model_kind: str = "gradient_boosted_trees",
            hpo: HpoSpec | None = None,
            service: EvaluationService | None = None) -> NasTrace:
    if config.framework == "evolution":
        if predictor_factory is None:
            raise InvalidArgument("evolution needs a predictor factory")
        return run_evolution(store, predictor_factory, config, seed, service)
    return run_bo_its(store, model_kind, config, seed, hpo=hpo, service=service)


def paired_sign_test(xs, ys) -> tuple[int, int, float]:
    """One-sided sign test that xs tend to be smaller than ys.

    Returns (wins, decided_pairs, p_value) where p is the exact binomial
    tail probability of at least `wins` successes at rate one half."""
    xs, ys = np.asarray(xs, dtype=float), np.asarray(ys, dtype=float)
    if xs.shape != ys.shape:
        raise InvalidArgument("paired samples must have equal length")
    wins = int(np.sum(xs < ys))
    losses = int(np.sum(xs > ys))
    n = wins + losses
    if n == 0:
        return 0, 0, 1.0
    p = sum(math.comb(n, k) for k in range(wins, n + 1)) / 2.0**n
    return wins, n, float(p)
