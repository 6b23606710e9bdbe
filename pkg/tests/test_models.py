import numpy as np
import pytest

from predbench.budget import BudgetLedger
from predbench.errors import InsufficientData, InvalidArgument
from predbench.harness import StoreView
from predbench.predictors.models import (
    HPO_DEFAULTS,
    MODEL_KINDS,
    FittedModel,
    HpoSpec,
    ModelPredictor,
    TrainingSet,
    ensemble_fit,
    fit,
    predict,
)
from predbench.predictors.regressors import (
    GradientBoostedTrees,
    RandomForest,
    RegressionTree,
)
from predbench.space import encode


def toy_data(n=40, d=12, seed=0, noise=0.02):
    rng = np.random.default_rng(seed)
    X = (rng.random((n, d)) < 0.3).astype(float)
    w = rng.normal(size=d)
    y = X @ w + noise * rng.normal(size=n)
    return TrainingSet(X, y)


def test_min_row_requirements():
    tiny = toy_data(n=5)
    fit("bayes_linear", tiny, HpoSpec(iterations=1))
    fit("gaussian_process", tiny, HpoSpec(iterations=1))
    for kind in ("random_forest", "gradient_boosted_trees", "feedforward_ensemble"):
        with pytest.raises(InsufficientData):
            fit(kind, tiny, HpoSpec(iterations=1))


def test_unknown_kind_rejected():
    with pytest.raises(InvalidArgument):
        fit("deep_gp", toy_data(), HpoSpec(iterations=1))


def test_depth_zero_boosting_predicts_the_mean():
    ts = toy_data()
    model = GradientBoostedTrees(max_depth=0, rng=np.random.default_rng(0))
    model.fit(ts.features, ts.targets)
    assert np.allclose(model.predict(ts.features), ts.targets.mean())


def test_gp_interpolates_with_zero_noise():
    raw = toy_data(n=40)
    uniq, idx = np.unique(raw.features, axis=0, return_index=True)
    ts = TrainingSet(uniq, raw.targets[idx])  # interpolation needs distinct inputs
    model = fit("gaussian_process", ts, hypers={"length_scale": 2.0, "noise": 0.0,
                                                "signal_var": 1.0})
    assert np.abs(model.predict(ts.features) - ts.targets).max() < 1e-6


def test_single_unrestricted_tree_memorizes():
    ts = toy_data(n=30)
    uniq, idx = np.unique(ts.features, axis=0, return_index=True)
    tree = RegressionTree(rng=np.random.default_rng(0))
    tree.fit(uniq, ts.targets[idx])
    assert np.abs(tree.predict(uniq) - ts.targets[idx]).max() == 0.0
    forest = RandomForest(n_estimators=1, max_features=1.0, bootstrap=False,
                          rng=np.random.default_rng(0))
    forest.fit(uniq, ts.targets[idx])
    assert np.abs(forest.predict(uniq) - ts.targets[idx]).max() == 0.0


def test_hpo_selection_never_degrades():
    ts = toy_data(n=60)
    for kind in ("gradient_boosted_trees", "random_forest", "bayes_linear"):
        model = fit(kind, ts, HpoSpec(iterations=6), seed=3)
        assert model.cv_score >= model.default_cv_score


def test_hpo_iteration_one_uses_defaults():
    ts = toy_data(n=30)
    model = fit("gradient_boosted_trees", ts, HpoSpec(iterations=1), seed=0)
    assert model.hypers == HPO_DEFAULTS["gradient_boosted_trees"]
    assert model.cv_score is None


def test_hpo_spec_validation():
    with pytest.raises(InvalidArgument):
        HpoSpec(iterations=0)
    with pytest.raises(InvalidArgument):
        HpoSpec(ranges={"gradient_boosted_trees": {"max_depth": (10, 1, False, True)}})
    spec = HpoSpec(iterations=4)
    assert HpoSpec.from_dict(spec.to_dict()) == spec


def test_tree_and_blr_fits_bit_reproducible():
    ts = toy_data(n=50)
    for kind in ("random_forest", "gradient_boosted_trees", "bayes_linear"):
        a = fit(kind, ts, HpoSpec(iterations=3), seed=9)
        b = fit(kind, ts, HpoSpec(iterations=3), seed=9)
        xs = toy_data(n=20, seed=1).features
        assert (a.predict(xs) == b.predict(xs)).all()


def test_iterative_fits_reproduce_within_tolerance():
    ts = toy_data(n=30)
    a = fit("feedforward_ensemble", ts, HpoSpec(iterations=1), seed=4, members=1)
    b = fit("feedforward_ensemble", ts, HpoSpec(iterations=1), seed=4, members=1)
    xs = toy_data(n=20, seed=2).features
    assert np.abs(a.predict(xs) - b.predict(xs)).max() < 1e-6


def test_degenerate_ensemble_has_zero_std():
    ts = toy_data(n=30)
    single = fit("gradient_boosted_trees", ts, HpoSpec(iterations=1), seed=0)
    cloned = FittedModel(single.kind, single.hypers, single.members * 3,
                         single.encoding)
    _, std = cloned.predict_mean_std(ts.features)
    assert std.max() < 1e-12
    one = ensemble_fit("gradient_boosted_trees", ts, members=1, hpo=HpoSpec(iterations=1))
    _, std1 = one.predict_mean_std(ts.features)
    assert (std1 == 0.0).all()


def test_distinct_members_disagree_somewhere():
    ts = toy_data(n=40)
    model = ensemble_fit("gradient_boosted_trees", ts, members=3,
                         hpo=HpoSpec(iterations=1), seed=5)
    _, std = model.predict_mean_std(toy_data(n=30, seed=7).features)
    assert std.max() > 0.0


def test_encoding_mismatch_rejected():
    ts = toy_data()
    model = fit("bayes_linear", ts, HpoSpec(iterations=1))
    with pytest.raises(InvalidArgument):
        predict(model, ts.features, "path")
    out = predict(model, ts.features, "adjacency_one_hot")
    assert out.shape == (len(ts),)


def test_feature_order_invariance_for_full_feature_trees():
    # continuous features keep split gains tie-free, where column order
    # provably cannot matter (tied gains on duplicated partitions can
    # legitimately route unseen rows differently)
    rng = np.random.default_rng(0)
    X = rng.normal(size=(80, 6))
    y = X @ rng.normal(size=6) + 0.1 * rng.normal(size=80)
    perm = rng.permutation(6)
    kw = dict(max_depth=1, feature_fraction=1.0)
    base = GradientBoostedTrees(rng=np.random.default_rng(1), **kw).fit(X, y)
    permuted = GradientBoostedTrees(rng=np.random.default_rng(1), **kw).fit(X[:, perm], y)
    xs = rng.normal(size=(40, 6))
    assert np.allclose(base.predict(xs), permuted.predict(xs[:, perm]))


def test_adjacency_and_path_encodings_differ(small_store):
    rng = np.random.default_rng(0)
    train = small_store.sample_archs(rng, 60)
    test = small_store.sample_archs(rng, 50, exclude={a.key() for a in train})
    y = np.array([small_store.final_val_acc(a) for a in train])
    preds = {}
    for enc in ("adjacency_one_hot", "path"):
        X = np.stack([encode(small_store.space, a, enc).values for a in train])
        Xt = np.stack([encode(small_store.space, a, enc).values for a in test])
        model = fit("gradient_boosted_trees", TrainingSet(X, y, enc),
                    HpoSpec(iterations=1), seed=0)
        preds[enc] = model.predict(Xt)
    assert not np.allclose(preds["adjacency_one_hot"], preds["path"])


def test_model_predictor_initialize_and_query(small_store):
    rng = np.random.default_rng(1)
    test = small_store.sample_archs(rng, 30)
    view = StoreView(small_store, exclude={a.key() for a in test})
    p = ModelPredictor("gradient_boosted_trees", small_store, hpo=HpoSpec(iterations=1))
    epochs = small_store.epochs
    ledger = BudgetLedger(init_budget=20 * epochs, query_budget=1.0)
    p.initialize(view, ledger, rng)
    assert ledger.init_spent == 20 * epochs
    out = p.query(test[0], ledger)
    assert np.isfinite(out.score)
    assert out.cost_charged == small_store.cost_model.model_query


def test_model_predictor_insufficient_budget(small_store):
    p = ModelPredictor("random_forest", small_store, hpo=HpoSpec(iterations=1))
    ledger = BudgetLedger(init_budget=5 * small_store.epochs)
    with pytest.raises(InsufficientData):
        p.initialize(small_store, ledger, np.random.default_rng(0))


def test_all_kinds_fit_and_predict(small_store):
    rng = np.random.default_rng(2)
    train = small_store.sample_archs(rng, 30)
    y = np.array([small_store.final_val_acc(a) for a in train])
    X = np.stack([encode(small_store.space, a, "adjacency_one_hot").values for a in train])
    for kind in MODEL_KINDS:
        model = fit(kind, TrainingSet(X, y), HpoSpec(iterations=1), seed=0)
        out = model.predict(X)
        assert out.shape == (30,)
        assert np.isfinite(out).all()
