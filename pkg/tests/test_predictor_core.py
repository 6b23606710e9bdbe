import numpy as np
import pytest

from predbench.budget import BudgetLedger
from predbench.metrics import kendall_tau, pearson
from predbench.predictors import OraclePredictor, RandomPredictor
from predbench.space import Architecture


def ready(p, store):
    p.initialize(store, BudgetLedger(), np.random.default_rng(0))
    return p


def query_all(p, archs, query_budget=1.0):
    scores = []
    for a in archs:
        ledger = BudgetLedger(query_budget=query_budget)
        scores.append(p.query(a, ledger))
    return scores


def test_oracle_reproduces_truth(tiny_store):
    archs = tiny_store.sample_archs(np.random.default_rng(0), 30)
    truth = np.array([tiny_store.final_val_acc(a) for a in archs])
    preds = query_all(ready(OraclePredictor(tiny_store), tiny_store), archs)
    scores = np.array([p.score for p in preds])
    assert kendall_tau(scores, truth) == 1.0
    assert pearson(scores, truth) == 1.0
    assert all(p.cost_charged == 0.0 for p in preds)


def test_reversed_oracle_inverts_ranking(tiny_store):
    archs = tiny_store.sample_archs(np.random.default_rng(1), 30)
    truth = np.array([tiny_store.final_val_acc(a) for a in archs])
    preds = query_all(ready(OraclePredictor(tiny_store, negate=True), tiny_store), archs)
    assert kendall_tau(np.array([p.score for p in preds]), truth) == -1.0


def test_random_predictor_deterministic_and_free(tiny_store):
    archs = tiny_store.sample_archs(np.random.default_rng(2), 10)
    s1 = [p.score for p in query_all(ready(RandomPredictor(7), tiny_store), archs)]
    s2 = [p.score for p in query_all(ready(RandomPredictor(7), tiny_store), archs)]
    s3 = [p.score for p in query_all(ready(RandomPredictor(8), tiny_store), archs)]
    assert s1 == s2
    assert s1 != s3
    assert all(p.cost_charged == 0.0 for p in query_all(ready(RandomPredictor(7), tiny_store), archs))


def test_random_predictor_sits_at_the_null(tiny_store):
    n, trials = 40, 60
    archs = tiny_store.sample_archs(np.random.default_rng(3), n)
    truth = np.array([tiny_store.final_val_acc(a) for a in archs])
    taus = []
    for seed in range(trials):
        scores = [p.score for p in query_all(ready(RandomPredictor(seed), tiny_store), archs)]
        taus.append(kendall_tau(np.array(scores), truth))
    # 3 sigma of the permutation null of the mean tau
    null_sigma = np.sqrt(2 * (2 * n + 5) / (9 * n * (n - 1)))
    assert abs(np.mean(taus)) < 3 * null_sigma / np.sqrt(trials)


def test_query_before_initialize_rejected(tiny_store):
    p = OraclePredictor(tiny_store)
    with pytest.raises(RuntimeError):
        p.query(Architecture((0,) * 6), BudgetLedger())


def test_query_spend_is_logged(tiny_store):
    p = ready(OraclePredictor(tiny_store), tiny_store)
    archs = tiny_store.sample_archs(np.random.default_rng(4), 5)
    ledger = BudgetLedger(query_budget=3.0)
    for a in archs:
        p.query(a, ledger)
    assert len(ledger.query_log) == 5
