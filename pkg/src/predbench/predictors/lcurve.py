"""Learning-curve predictors: early stopping on accuracy or loss, summed
training losses, and parametric curve extrapolation.

Extrapolation fits each member of a small family of saturating curve models
to the observed accuracy prefix with damped Gauss-Newton from several
starts, then combines the model predictions at the target epoch (inverse
fit-MSE weights for the weighted variant, a plain mean for the unweighted
one)."""

import numpy as np

from ..errors import InvalidArgument
from ..space import Architecture
from ..store import BenchmarkStore
from ..training import LearningCurve
from .base import DEGENERATE_SCORE, Predictor

SCORE_CLAMP = (0.0, 1.25)
MIN_FIT_POINTS = 4


def early_stop_acc(prefix: LearningCurve) -> float:
    return prefix.val_acc[-1]


def early_stop_loss(prefix: LearningCurve) -> float:
    return -prefix.val_loss[-1]


def sotl(prefix: LearningCurve) -> float:
    return -float(sum(prefix.train_loss))


def sotl_e(prefix: LearningCurve) -> float:
    return -prefix.train_loss[-1]


# --- parametric curve models ------------------------------------------------
# Each model maps epoch t >= 1 to a saturating accuracy; params[0] is the
# asymptote-ish level c, clamped to SCORE_CLAMP during fitting.


def _pow3(t, p):
    c, a, alpha = p
    return c - a * t ** (-alpha)


def _pow3_jac(t, p):
    c, a, alpha = p
    ta = t ** (-alpha)
    return np.stack([np.ones_like(t), -ta, a * ta * np.log(t)], axis=1)


def _exp3(t, p):
    c, a, b = p
    return c - a * np.exp(-b * t)


def _exp3_jac(t, p):
    c, a, b = p
    e = np.exp(-b * t)
    return np.stack([np.ones_like(t), -e, a * t * e], axis=1)


def _log_power(t, p):
    c, a, b = p
    u = np.exp(-a * (np.log(t) - b))
    return c / (1.0 + u)


def _log_power_jac(t, p):
    c, a, b = p
    u = np.exp(-a * (np.log(t) - b))
    denom = (1.0 + u) ** 2
    return np.stack([
        1.0 / (1.0 + u),
        c * u * (np.log(t) - b) / denom,
        -c * u * a / denom,
    ], axis=1)


CURVE_MODELS = {
    "pow3": (_pow3, _pow3_jac, np.array([SCORE_CLAMP, (-3.0, 3.0), (0.01, 8.0)])),
    "exp3": (_exp3, _exp3_jac, np.array([SCORE_CLAMP, (-3.0, 3.0), (1e-3, 8.0)])),
    "log_power": (_log_power, _log_power_jac, np.array([SCORE_CLAMP, (0.0, 50.0), (-10.0, 10.0)])),
}


def _initial_params(name: str, y: np.ndarray) -> np.ndarray:
    c0 = float(np.clip(y[-1] + 0.05, *SCORE_CLAMP))
    gap = max(c0 - float(y[0]), 0.01)
    k = len(y)
    if name == "pow3":
        return np.array([c0, gap, 1.0])
    if name == "exp3":
        return np.array([c0, gap, 0.5])
    return np.array([c0, 2.0, np.log(max(k / 2.0, 1.0))])


def fit_curve_model(name: str, y: np.ndarray, rng: np.random.Generator,
                    restarts: int = 5, iters: int = 80):
    """Least-squares fit of one curve model to y over t = 1..len(y).

    Returns (params, mse); raises InvalidArgument for unknown models and
    returns mse=inf when no start converges to a finite fit."""
    if name not in CURVE_MODELS:
        raise InvalidArgument(f"unknown curve model: {name!r}")
    fn, jac, bounds = CURVE_MODELS[name]
    t = np.arange(1, len(y) + 1, dtype=float)
    base = _initial_params(name, y)
    best_p, best_mse = base, float("inf")
    for r in range(restarts):
        p = base.copy()
        if r > 0:
            p = p * rng.uniform(0.5, 1.5, 3) + rng.normal(0, 0.05, 3)
        p = np.clip(p, bounds[:, 0], bounds[:, 1])
        p, mse = _damped_gauss_newton(fn, jac, t, y, p, bounds, iters)
        if mse < best_mse:
            best_p, best_mse = p, mse
    return best_p, best_mse


def _damped_gauss_newton(fn, jac, t, y, p, bounds, iters):
    lam = 1e-3
    resid = fn(t, p) - y
    mse = float(np.mean(resid**2))
    if not np.isfinite(mse):
        return p, float("inf")
    for _ in range(iters):
        J = jac(t, p)
        g = J.T @ resid
        H = J.T @ J
        stepped = False
        for _ in range(8):
            try:
                step = np.linalg.solve(H + lam * np.eye(3), g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            cand = np.clip(p - step, bounds[:, 0], bounds[:, 1])
            r2 = fn(t, cand) - y
            m2 = float(np.mean(r2**2))
            if np.isfinite(m2) and m2 < mse:
                p, resid, mse = cand, r2, m2
                lam = max(lam * 0.3, 1e-12)
                stepped = True
                break
            lam *= 10.0
        if not stepped or float(np.abs(step).max()) < 1e-12:
            break
    return p, mse


def lce_extrapolate(prefix: LearningCurve, target_epoch: int,
                    variant: str = "lce", seed: int = 0,
                    model_names=tuple(CURVE_MODELS)) -> tuple[float, bool]:
    """Extrapolate the accuracy curve to target_epoch.

    Returns (score, fallback). Falls back to the last observed accuracy when
    every model fails to produce a finite fit."""
    if variant not in ("lce", "lce_m"):
        raise InvalidArgument(f"unknown variant: {variant!r}")
    if prefix.epochs < MIN_FIT_POINTS:
        raise InvalidArgument(f"need >= {MIN_FIT_POINTS} epochs to fit, got {prefix.epochs}")
    y = np.asarray(prefix.val_acc, dtype=float)
    preds, weights = [], []
    for name in sorted(model_names):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(30, _model_id(name))))
        params, mse = fit_curve_model(name, y, rng)
        if not np.isfinite(mse):
            continue
        fn = CURVE_MODELS[name][0]
        pred = float(fn(np.array([float(target_epoch)]), params)[0])
        if not np.isfinite(pred):
            continue
        preds.append(pred)
        weights.append(1.0 / (mse + 1e-10))
    if not preds:
        return early_stop_acc(prefix), True
    if variant == "lce":
        score = float(np.average(preds, weights=weights))
    else:
        score = float(np.mean(preds))
    return float(np.clip(score, *SCORE_CLAMP)), False


def _model_id(name: str) -> int:
    return sorted(CURVE_MODELS).index(name)


# --- predictor wrappers -------------------------------------------------


class CurvePredictor(Predictor):
    """Shared plumbing: fetch the largest affordable curve prefix, then
    delegate scoring to the concrete rule."""

    def __init__(self, store: BenchmarkStore, max_epochs: int | None = None):
        super().__init__()
        self.store = store
        self.max_epochs = max_epochs or store.epochs

    def _affordable_epochs(self, arch: Architecture, ledger) -> int:
        rec = self.store.records.get(arch.key())
        epoch_cost = rec.epoch_cost if rec else self.store.cost_model.epoch_cost
        k = int(np.floor((ledger.query_remaining() + 1e-9) / epoch_cost))
        return min(k, self.max_epochs, self.store.epochs)

    def _query(self, arch, ledger):
        k = self._affordable_epochs(arch, ledger)
        if k < 1:
            return DEGENERATE_SCORE, True
        prefix = self.store.query_partial(arch, k, ledger, phase="query")
        return self._score(arch, prefix)

    def _score(self, arch, prefix) -> tuple[float, bool]:
        raise NotImplementedError


class EarlyStopAcc(CurvePredictor):
    name = "early_stop_acc"

    def _score(self, arch, prefix):
        return early_stop_acc(prefix), False


class EarlyStopLoss(CurvePredictor):
    name = "early_stop_loss"

    def _score(self, arch, prefix):
        return early_stop_loss(prefix), False


class SoTL(CurvePredictor):
    name = "sotl"

    def _score(self, arch, prefix):
        return sotl(prefix), False


class SoTLE(CurvePredictor):
    name = "sotl_e"

    def _score(self, arch, prefix):
        return sotl_e(prefix), False


class LCE(CurvePredictor):
    """Curve-extrapolation predictor; fits are memoized because they are
    pure in (architecture, prefix length, variant)."""

    def __init__(self, store: BenchmarkStore, variant: str = "lce",
                 seed: int = 0, cache: dict | None = None,
                 max_epochs: int | None = None):
        super().__init__(store, max_epochs)
        if variant not in ("lce", "lce_m"):
            raise InvalidArgument(f"unknown variant: {variant!r}")
        self.name = variant
        self.variant = variant
        self.seed = seed
        self.cache = cache if cache is not None else {}

    def _score(self, arch, prefix):
        if prefix.epochs < MIN_FIT_POINTS:
            return early_stop_acc(prefix), True
        key = (arch.key(), prefix.epochs, self.variant, self.seed)
        if key not in self.cache:
            self.cache[key] = lce_extrapolate(prefix, self.store.epochs,
                                              self.variant, self.seed)
        return self.cache[key]
