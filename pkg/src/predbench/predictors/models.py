"""Model-based predictors: supervised regressors fitted on fully evaluated
architectures, tuned by random-search cross-validation on Kendall Tau.

Hyperparameter defaults are always evaluated as the first HPO candidate and
ties keep the earlier candidate, so tuning can never select something worse
than the defaults on the CV folds."""

import time
from dataclasses import dataclass, field

import numpy as np

from ..errors import InsufficientData, InvalidArgument
from ..metrics import kendall_tau, sanitize_scores
from ..space import encode
from ..store import BenchmarkStore
from .base import Predictor
from .regressors import (
    BayesianLinearRegression,
    GaussianProcess,
    GradientBoostedTrees,
    MLPRegressor,
    RandomForest,
)

MODEL_KINDS = (
    "bayes_linear",
    "gaussian_process",
    "random_forest",
    "gradient_boosted_trees",
    "feedforward_ensemble",
)

# rows needed before a fit is meaningful
MIN_ROWS = {
    "bayes_linear": 2,
    "gaussian_process": 2,
    "random_forest": 10,
    "gradient_boosted_trees": 10,
    "feedforward_ensemble": 10,
}

# (low, high, log-scale, integer)
HPO_RANGES: dict[str, dict[str, tuple]] = {
    "bayes_linear": {
        "alpha": (1e-3, 1e3, True, False),
        "beta": (1e-2, 1e4, True, False),
    },
    "gaussian_process": {
        "length_scale": (0.3, 30.0, True, False),
        "noise": (1e-6, 1e-1, True, False),
        "signal_var": (0.1, 10.0, True, False),
    },
    "random_forest": {
        "n_estimators": (8, 64, True, True),
        "max_features": (0.1, 0.9, True, False),
        "min_samples_leaf": (1, 20, False, True),
        "min_samples_split": (2, 20, True, True),
    },
    "gradient_boosted_trees": {
        "n_estimators": (16, 256, True, True),
        "learning_rate": (0.01, 0.5, True, False),
        "max_depth": (1, 15, False, True),
        "feature_fraction": (0.1, 1.0, False, False),
    },
    "feedforward_ensemble": {
        "num_layers": (5, 25, False, True),
        "width": (5, 25, False, True),
        "learning_rate": (1e-4, 0.1, True, False),
    },
}

HPO_DEFAULTS: dict[str, dict] = {
    "bayes_linear": {"alpha": 1.0, "beta": 100.0},
    "gaussian_process": {"length_scale": 2.0, "noise": 1e-3, "signal_var": 1.0},
    "random_forest": {
        "n_estimators": 24, "max_features": 0.5,
        "min_samples_leaf": 1, "min_samples_split": 2,
    },
    "gradient_boosted_trees": {
        "n_estimators": 100, "learning_rate": 0.08,
        "max_depth": 3, "feature_fraction": 0.8,
    },
    "feedforward_ensemble": {"num_layers": 5, "width": 20, "learning_rate": 0.01},
}


@dataclass(frozen=True)
class HpoSpec:
    """Random-search budget and ranges; iterations=1 means defaults only."""

    iterations: int = 200
    time_cap_s: float | None = None
    cv_folds: int = 3
    ranges: dict = field(default_factory=lambda: HPO_RANGES)

    def __post_init__(self):
        if self.iterations < 1:
            raise InvalidArgument("iterations must be >= 1")
        for kind, params in self.ranges.items():
            for name, (lo, hi, _, _) in params.items():
                if lo > hi:
                    raise InvalidArgument(f"empty range for {kind}.{name}")
                default = HPO_DEFAULTS.get(kind, {}).get(name)
                if default is not None and not lo <= default <= hi:
                    raise InvalidArgument(f"default for {kind}.{name} outside range")

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "time_cap_s": self.time_cap_s,
            "cv_folds": self.cv_folds,
            "ranges": {k: {p: list(v) for p, v in d.items()} for k, d in self.ranges.items()},
        }

    @staticmethod
    def from_dict(d: dict) -> "HpoSpec":
        ranges = d.get("ranges")
        if ranges is not None:
            ranges = {k: {p: tuple(v) for p, v in params.items()}
                      for k, params in ranges.items()}
        return HpoSpec(
            iterations=d.get("iterations", 200),
            time_cap_s=d.get("time_cap_s"),
            cv_folds=d.get("cv_folds", 3),
            ranges=ranges if ranges is not None else HPO_RANGES,
        )


@dataclass(frozen=True)
class TrainingSet:
    features: np.ndarray
    targets: np.ndarray
    encoding: str = "adjacency_one_hot"

    def __post_init__(self):
        if self.features.shape[0] != self.targets.shape[0]:
            raise InvalidArgument("features and targets disagree on row count")

    def __len__(self) -> int:
        return self.targets.shape[0]


def _make_learner(kind: str, hypers: dict, rng: np.random.Generator):
    if kind == "bayes_linear":
        return BayesianLinearRegression(**hypers)
    if kind == "gaussian_process":
        return GaussianProcess(**hypers)
    if kind == "random_forest":
        return RandomForest(rng=rng, **hypers)
    if kind == "gradient_boosted_trees":
        return GradientBoostedTrees(rng=rng, **hypers)
    if kind == "feedforward_ensemble":
        return MLPRegressor(rng=rng, **hypers)
    raise InvalidArgument(f"unknown model kind: {kind!r} (expected one of {MODEL_KINDS})")


def _sample_hypers(kind: str, ranges: dict, rng: np.random.Generator) -> dict:
    out = {}
    for name, (lo, hi, logscale, integer) in ranges[kind].items():
        if logscale:
            val = float(np.exp(rng.uniform(np.log(lo), np.log(hi))))
        else:
            val = float(rng.uniform(lo, hi))
        if integer:
            val = int(np.clip(round(val), lo, hi))
        out[name] = val
    return out


def _cv_score(kind, hypers, X, y, folds, seed, cand_idx) -> float:
    """Mean validation Kendall Tau across folds; leave-one-out folds pool
    the held-out predictions into a single Tau."""
    pooled = len(folds) == len(y)
    preds, scores = np.empty_like(y), []
    for f, val_idx in enumerate(folds):
        train_mask = np.ones(len(y), dtype=bool)
        train_mask[val_idx] = False
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(42, cand_idx, f)))
        learner = _make_learner(kind, hypers, rng)
        learner.fit(X[train_mask], y[train_mask])
        p = sanitize_scores(learner.predict(X[val_idx]))
        if pooled:
            preds[val_idx] = p
        else:
            kt = kendall_tau(p, y[val_idx])
            scores.append(kt if np.isfinite(kt) else -1.0)
    if pooled:
        kt = kendall_tau(preds, y)
        return float(kt) if np.isfinite(kt) else -1.0
    return float(np.mean(scores))


class FittedModel:
    """A fitted regressor (possibly an ensemble of members over shuffled
    orderings and member seeds) plus the hyperparameters that won CV."""

    def __init__(self, kind, hypers, members, encoding, cv_score=None,
                 default_cv_score=None):
        self.kind = kind
        self.hypers = hypers
        self.members = members
        self.encoding = encoding
        self.cv_score = cv_score
        self.default_cv_score = default_cv_score

    def predict(self, X) -> np.ndarray:
        return self.predict_mean_std(X)[0]

    def predict_mean_std(self, X) -> tuple[np.ndarray, np.ndarray]:
        preds = np.stack([m.predict(X) for m in self.members])
        return preds.mean(axis=0), preds.std(axis=0)


def fit(kind: str, training: TrainingSet, hpo: HpoSpec | None = None,
        seed: int = 0, members: int | None = None,
        hypers: dict | None = None) -> FittedModel:
    """Random-search HPO with K-fold CV, then refit on all rows.

    Deterministic given seed. Below 10 rows the folds become leave-one-out;
    below the per-kind minimum an InsufficientData error is raised. Passing
    `hypers` skips the search and refits with exactly those values."""
    if kind not in MODEL_KINDS:
        raise InvalidArgument(f"unknown model kind: {kind!r} (expected one of {MODEL_KINDS})")
    hpo = hpo or HpoSpec()
    n = len(training)
    if n < MIN_ROWS[kind]:
        raise InsufficientData(f"{kind} needs >= {MIN_ROWS[kind]} rows, got {n}")
    if members is None:
        members = 3 if kind == "feedforward_ensemble" else 1
    X = np.asarray(training.features, dtype=float)
    y = np.asarray(training.targets, dtype=float)

    search_rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(41, 0)))
    if hypers is not None:
        candidates = [dict(hypers)]
    else:
        candidates = [dict(HPO_DEFAULTS[kind])]
        for _ in range(hpo.iterations - 1):
            candidates.append(_sample_hypers(kind, hpo.ranges, search_rng))

    default_score = best_score = None
    best_hypers = candidates[0]
    if len(candidates) > 1:
        k = hpo.cv_folds if n >= 10 else n
        fold_rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(41, 1)))
        perm = fold_rng.permutation(n)
        folds = [np.sort(perm[i::k]) for i in range(k)]
        started = time.monotonic()
        for i, hypers in enumerate(candidates):
            score = _cv_score(kind, hypers, X, y, folds, seed, i)
            if i == 0:
                default_score = best_score = score
            elif score > best_score:
                best_score, best_hypers = score, hypers
            if hpo.time_cap_s is not None and time.monotonic() - started > hpo.time_cap_s:
                break

    fitted = []
    for m in range(members):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(43, m)))
        order = rng.permutation(n)
        learner = _make_learner(kind, best_hypers, rng)
        learner.fit(X[order], y[order])
        fitted.append(learner)
    return FittedModel(kind, best_hypers, fitted, training.encoding,
                       best_score, default_score)


def ensemble_fit(kind: str, training: TrainingSet, members: int = 3,
                 hpo: HpoSpec | None = None, seed: int = 0) -> FittedModel:
    """Ensemble of `members` fits differing in training-set order and seed."""
    if members < 1:
        raise InvalidArgument("members must be >= 1")
    return fit(kind, training, hpo, seed, members=members)


def predict(model: FittedModel, features: np.ndarray, encoding: str) -> np.ndarray:
    if encoding != model.encoding:
        raise InvalidArgument(
            f"encoding mismatch: model fitted on {model.encoding!r}, got {encoding!r}")
    return model.predict(np.asarray(features, dtype=float))


class ModelPredictor(Predictor):
    """Predictor whose initialization trains architectures from the store
    to build its supervised training set."""

    def __init__(self, kind: str, store: BenchmarkStore,
                 encoding: str = "adjacency_one_hot", hpo: HpoSpec | None = None,
                 seed: int = 0, members: int | None = None, name: str | None = None):
        super().__init__()
        if kind not in MODEL_KINDS:
            raise InvalidArgument(f"unknown model kind: {kind!r} (expected one of {MODEL_KINDS})")
        self.kind = kind
        self.store = store
        self.encoding = encoding
        self.hpo = hpo or HpoSpec()
        self.seed = seed
        self.members = members
        self.name = name or kind
        self.model: FittedModel | None = None

    def _encode_batch(self, archs) -> np.ndarray:
        return np.stack([encode(self.store.space, a, self.encoding).values for a in archs])

    def _initialize(self, store, ledger, rng):
        full_cost = store.epochs * store.cost_model.epoch_cost
        n_train = int(np.floor((ledger.init_remaining() + 1e-9) / full_cost))
        if n_train < MIN_ROWS[self.kind]:
            raise InsufficientData(
                f"{self.name}: budget affords {n_train} trainings, "
                f"needs {MIN_ROWS[self.kind]}")
        n_train = min(n_train, len(store))
        archs = store.sample_archs(rng, n_train)
        records = [store.query_full(a, ledger, phase="init") for a in archs]
        self._fit_from(archs, [r.curve.final_val_acc for r in records])

    def _fit_from(self, archs, targets):
        training = TrainingSet(self._encode_batch(archs),
                               np.asarray(targets, dtype=float), self.encoding)
        self.model = fit(self.kind, training, self.hpo, self.seed, self.members)

    def update(self, records):
        self._fit_from([r.arch for r in records],
                       [r.curve.final_val_acc for r in records])
        self._initialized = True

    def _query(self, arch, ledger):
        ledger.charge_query(self.store.cost_model.model_query)
        x = encode(self.store.space, arch, self.encoding).values[None, :]
        return float(self.model.predict(x)[0]), False

    def predict_mean_std(self, archs) -> tuple[np.ndarray, np.ndarray]:
        return self.model.predict_mean_std(self._encode_batch(archs))
