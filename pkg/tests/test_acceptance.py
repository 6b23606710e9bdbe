"""Acceptance criteria, one test per criterion, each printing a PASS/FAIL
line (run with -s to watch them stream).

The heavyweight criteria run against two prebuilt stores: 2000 uniformly
sampled architectures of the default space, and the complete 729-point
space over three operations for the search-loop experiments (mutation can
never leave that table, so search costs stay simulated)."""

import math
import time

import numpy as np
import pytest

from predbench import autodiff as ad
from predbench.cli import main as cli_main
from predbench.dataset import DatasetConfig, make_dataset
from predbench.harness import (
    BudgetGrid,
    CellStats,
    ResultGrid,
    mutation_protocol,
    pareto_best,
    run_grid,
)
from predbench.metrics import kendall_tau, spearman
from predbench.network import TrainConfig, instantiate
from predbench.predictors.models import HpoSpec
from predbench.predictors.registry import PredictorContext
from predbench.predictors.zerocost import ZeroCostComputer
from predbench.search import NasRunConfig, paired_sign_test, run_evolution
from predbench.space import SearchSpace, edit_distance, sample_uniform
from predbench.store import EvaluationService
from predbench.training import one_hot

from conftest import ensure_store

from test_metrics import brute_force_tau_b, rank_then_pearson

EPOCHS = 50.0


def report(criterion: str, passed: bool, detail: str, started: float):
    line = (f"ACCEPTANCE {criterion}: {'PASS' if passed else 'FAIL'} "
            f"({detail}; {time.time() - started:.1f}s)")
    print(line, flush=True)
    assert passed, line


@pytest.fixture(scope="module")
def bench_store():
    return ensure_store("bench2000", SearchSpace(), 2000, seed=7)


@pytest.fixture(scope="module")
def nas_store():
    space = SearchSpace(ops=("zero", "skip", "lin_relu"))
    return ensure_store("nasfull", space, space.size, seed=8)


def test_criterion_01_metric_oracle_equivalence():
    t0 = time.time()
    rng = np.random.default_rng(0)
    worst_tau = worst_rho = 0.0
    for i in range(1000):
        n = int(rng.integers(2, 51))
        if i % 3 == 0:
            x = rng.integers(0, 6, n).astype(float)  # heavy ties
            y = rng.integers(0, 6, n).astype(float)
        else:
            x, y = rng.normal(size=n), rng.normal(size=n)
        got = kendall_tau(x, y)
        want = brute_force_tau_b(list(x), list(y))
        if math.isnan(want):
            assert math.isnan(got)
        else:
            worst_tau = max(worst_tau, abs(got - want))
        rho, rho_want = spearman(x, y), rank_then_pearson(list(x), list(y))
        if math.isnan(rho_want):
            assert math.isnan(rho)
        else:
            worst_rho = max(worst_rho, abs(rho - rho_want))
    from predbench.metrics import sparse_kendall_tau
    sparse_ok = True
    for _ in range(100):
        x, y = rng.normal(size=30), rng.normal(size=30)
        sparse_ok &= sparse_kendall_tau(x, y, resolution=0.0) == kendall_tau(x, y)
    passed = worst_tau == 0.0 and worst_rho < 1e-12 and sparse_ok
    report("1 metric-oracle-equivalence",
           passed, f"tau err {worst_tau:.2e}, rho err {worst_rho:.2e}", t0)


def _manual_loss(net, flat, x, y_hot):
    """Independent forward pass and loss written in plain numpy, also used
    to measure how far every relu preactivation is from its kink (central
    differences are invalid across a kink)."""
    params = {}
    off = 0
    for name in net.param_names:
        size = net.params[name].size
        params[name] = flat[off:off + size].reshape(net.params[name].shape)
        off += size
    min_kink_gap = np.inf
    value = x @ params["stem.w"] + params["stem.b"]
    edges = net.space.edge_list()
    for c in range(net.config.cells):
        nodes = [value] + [None] * (net.space.num_nodes - 1)
        for e, (src, dst) in enumerate(edges):
            op = net.space.ops[net.arch.op_indices[e]]
            if op == "zero":
                continue
            sv = nodes[src] if nodes[src] is not None else np.zeros_like(value)
            if op == "skip":
                out = sv
            else:
                pre = sv @ params[f"cell{c}.edge{e}.w"] + params[f"cell{c}.edge{e}.b"]
                if op == "lin_relu":
                    min_kink_gap = min(min_kink_gap, float(np.abs(pre).min()))
                    out = np.maximum(pre, 0.0)
                elif op == "lin_tanh":
                    out = np.tanh(pre)
                else:
                    out = pre
            nodes[dst] = out if nodes[dst] is None else nodes[dst] + out
        value = nodes[-1] if nodes[-1] is not None else np.zeros_like(value)
    logits = value @ params["head.w"] + params["head.b"]
    z = logits - logits.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    return -float((y_hot * logp).sum()) / x.shape[0], min_kink_gap


def test_criterion_02_gradient_correctness():
    t0 = time.time()
    data = make_dataset(DatasetConfig(train_size=24, val_size=24))
    space = SearchSpace()
    rng = np.random.default_rng(1)
    worst = 0.0
    eps = 1e-4
    checked = 0
    trial = 0
    while checked < 100:
        trial += 1
        # cycle a forced op through every edge position for full coverage
        arch = sample_uniform(space, rng)
        ops = list(arch.op_indices)
        ops[trial % space.num_edges] = trial % space.num_ops
        arch = type(arch)(tuple(ops))
        cfg = TrainConfig(width=3, seed=trial)
        net = instantiate(space, arch, cfg, num_classes=3)
        # test-owned init: continuous values keep relu preactivations off
        # their kinks, where the finite-difference oracle is undefined
        prng = np.random.default_rng((2, trial))
        for name in net.param_names:
            net.params[name][:] = prng.normal(0.0, 0.6, net.params[name].shape)
        x = data.train_x[:6]
        y_hot = one_hot(data.train_y[:6], 3)
        flat = np.concatenate([net.params[k].ravel() for k in net.param_names])
        _, kink_gap = _manual_loss(net, flat, x, y_hot)
        if kink_gap < 50 * eps:
            continue  # redraw: oracle invalid this close to a kink
        checked += 1

        ptensors = net.param_tensors()
        logits, _, _ = net.forward(x, ptensors)
        loss = ad.softmax_cross_entropy(logits, y_hot)
        assert abs(loss.item() - _manual_loss(net, flat, x, y_hot)[0]) < 1e-10
        grads = ad.backprop(loss, [ptensors[k] for k in net.param_names])
        analytic = np.concatenate([g.data.ravel() for g in grads])

        numeric = np.zeros_like(flat)
        for j in range(flat.size):
            hi, lo = flat.copy(), flat.copy()
            hi[j] += eps
            lo[j] -= eps
            numeric[j] = (_manual_loss(net, hi, x, y_hot)[0]
                          - _manual_loss(net, lo, x, y_hot)[0]) / (2 * eps)
        scale = np.abs(numeric).max() + 1e-12
        worst = max(worst, float(np.abs(analytic - numeric).max() / scale))
    report("2 gradient-correctness", worst < 1e-3,
           f"max rel err {worst:.2e} over {checked} nets", t0)


def test_criterion_03_flops_params_rank_identity():
    t0 = time.time()
    space = SearchSpace()
    data = make_dataset(DatasetConfig(train_size=96, val_size=96))
    computer = ZeroCostComputer(space, data, TrainConfig())
    rng = np.random.default_rng(2)
    archs = [sample_uniform(space, rng) for _ in range(500)]
    flops = [computer.compute(a, "flops") for a in archs]
    params = [computer.compute(a, "params") for a in archs]
    rho = spearman(flops, params)
    report("3 flops-params-rank-identity", rho == 1.0, f"spearman {rho}", t0)


def test_criterion_04_oracle_random_sanity(bench_store):
    t0 = time.time()
    ctx = PredictorContext(bench_store)
    grid = BudgetGrid((0.0, 50 * EPOCHS, 300 * EPOCHS), (0.05, 1.0, 10.0, EPOCHS))
    result = run_grid(ctx.factories(["oracle", "random"]), bench_store, grid,
                      test_size=200, trials=100, seed=11)
    oracle_ok = all(
        result.mean("oracle", i, q, "kendall_tau") == 1.0
        and result.cell("oracle", i, q, "kendall_tau").trials == 100
        for i in range(3) for q in range(4))
    worst_random = max(abs(result.mean("random", i, q, "kendall_tau"))
                       for i in range(3) for q in range(4))
    passed = oracle_ok and worst_random < 0.05
    report("4 oracle-random-sanity", passed,
           f"oracle all 1.0: {oracle_ok}, random worst |mean| {worst_random:.4f}", t0)


def test_criterion_05_budget_monotonicity(bench_store):
    t0 = time.time()
    ctx = PredictorContext(bench_store, hpo=HpoSpec(iterations=1))
    failures = []

    lc_levels = [5.0, 12.0, 25.0, 50.0]
    lc_names = ["early_stop_acc", "early_stop_loss", "sotl", "sotl_e", "lce", "lce_m"]
    grid = BudgetGrid((0.0,), tuple(lc_levels))
    result = run_grid(ctx.factories(lc_names), bench_store, grid,
                      test_size=75, trials=100, seed=12)
    for name in lc_names:
        means = [result.mean(name, 0, q, "kendall_tau") for q in range(len(lc_levels))]
        for a, b in zip(means, means[1:]):
            if b < a - 0.03:
                failures.append(f"{name} query {means}")
                break

    sizes = [10, 30, 100, 300]
    model_names = ["bayes_linear", "gaussian_process", "random_forest",
                   "gradient_boosted_trees", "feedforward_ensemble"]
    grid = BudgetGrid(tuple(s * EPOCHS for s in sizes), (0.05,))
    result = run_grid(ctx.factories(model_names), bench_store, grid,
                      test_size=75, trials=100, seed=13)
    for name in model_names:
        means = [result.mean(name, i, 0, "kendall_tau") for i in range(len(sizes))]
        for a, b in zip(means, means[1:]):
            if b < a - 0.05:
                failures.append(f"{name} init {means}")
                break

    report("5 budget-monotonicity", not failures, "; ".join(failures) or "all monotone", t0)


def test_criterion_06_omni_complementarity(bench_store):
    t0 = time.time()
    ctx = PredictorContext(bench_store, hpo=HpoSpec(iterations=1))
    names = ["gradient_boosted_trees", "sotl_e", "jacob_cov",
             "omni", "omni_enc_jc", "omni_enc_sotle", "omni_jc_sotle"]
    grid = BudgetGrid((50 * EPOCHS, 120 * EPOCHS, 300 * EPOCHS), (0.05, 1.05, 4.05))
    result = run_grid(ctx.factories(names), bench_store, grid,
                      test_size=100, trials=100, seed=14)
    single_wins = two_wins = 0
    cells = 0
    for i in range(3):
        for q in range(3):
            cells += 1
            omni = result.mean("omni", i, q, "kendall_tau")
            singles = [result.mean(n, i, q, "kendall_tau")
                       for n in ("gradient_boosted_trees", "sotl_e", "jacob_cov")]
            singles = [v for v in singles if np.isfinite(v)]
            twos = [result.mean(n, i, q, "kendall_tau")
                    for n in ("omni_enc_jc", "omni_enc_sotle", "omni_jc_sotle")]
            twos = [v for v in twos if np.isfinite(v)]
            if omni >= max(singles):
                single_wins += 1
            if all(omni >= v for v in twos):
                two_wins += 1
    passed = single_wins >= 0.6 * cells and two_wins >= 0.5 * cells
    report("6 omni-complementarity", passed,
           f"vs singles {single_wins}/{cells}, vs two-feature {two_wins}/{cells}", t0)


def test_criterion_07_mutation_protocol_structure(bench_store):
    t0 = time.time()
    space = bench_store.space
    ok = True
    for trial in range(100):
        rng = np.random.default_rng((15, trial))
        seeds, test_set, builder = mutation_protocol(bench_store, rng, test_size=200)
        test_keys = {a.key() for a in test_set}
        ok &= all(min(edit_distance(space, a, s) for s in seeds) <= 3 for a in test_set)
        train = builder(50, np.random.default_rng((16, trial)))
        ok &= all(min(edit_distance(space, t, a) for a in test_set) == 1 for t in train)
        ok &= not ({t.key() for t in train} & test_keys)
        if not ok:
            break
    report("7 mutation-protocol-structure", ok, f"100 instantiations checked", t0)


def test_criterion_08_nas_transfer(nas_store):
    t0 = time.time()
    ctx = PredictorContext(nas_store, hpo=HpoSpec(iterations=1))
    service = EvaluationService(nas_store)

    # pick the grid-best benchmark predictor on this store
    candidates = ["sotl_e", "jacob_cov", "gradient_boosted_trees", "early_stop_acc"]
    grid = BudgetGrid((0.0, 100 * EPOCHS), (1.05, 10.05))
    gres = run_grid(ctx.factories(candidates), nas_store, grid,
                    test_size=100, trials=20, seed=17)
    mean_kt = {
        name: np.nanmean([gres.mean(name, i, q, "kendall_tau")
                          for i in range(2) for q in range(2)])
        for name in candidates
    }
    best_name = max(sorted(mean_kt), key=lambda n: mean_kt[n])

    evo = NasRunConfig(iterations=25, query_budget=10.05)
    best_err, rand_err = [], []
    for seed in range(100):
        tb = run_evolution(nas_store, ctx.factory(best_name), evo, seed=seed,
                           service=service)
        tr = run_evolution(nas_store, ctx.factory("random"), evo, seed=seed,
                           service=service)
        cost = min(tb.final_cost, tr.final_cost)
        best_err.append(tb.error_at_cost(cost))
        rand_err.append(tr.error_at_cost(cost))
    wins, n, p = paired_sign_test(best_err, rand_err)
    beats = float(np.mean(best_err)) < float(np.mean(rand_err)) and p < 0.05

    short = NasRunConfig(iterations=10, query_budget=0.05)
    # refits go through update() without a ledger, so pin the allowance
    omni_factory = ctx.factory("omni_enc_jc", query_budget=short.query_budget)
    omni_err, gbt_err = [], []
    for seed in range(100):
        to = run_evolution(nas_store, omni_factory, short, seed=seed,
                           service=service)
        tg = run_evolution(nas_store, ctx.factory("gradient_boosted_trees"), short,
                           seed=seed, service=service)
        cost = min(to.final_cost, tg.final_cost)
        omni_err.append(to.error_at_cost(cost))
        gbt_err.append(tg.error_at_cost(cost))
    omni_ok = float(np.mean(omni_err)) <= float(np.mean(gbt_err)) + 0.005

    passed = beats and omni_ok
    report("8 nas-transfer", passed,
           f"best={best_name} wins {wins}/{n} p={p:.2e}; "
           f"omni {np.mean(omni_err):.4f} vs gbt {np.mean(gbt_err):.4f}", t0)


def test_criterion_09_cli_determinism(tmp_path):
    t0 = time.time()
    fast = ["--set", "build.n_archs=30", "--set", "train.epochs=6",
            "--set", "train.width=6", "--set", "dataset.train_size=96",
            "--set", "dataset.val_size=96"]

    def run_twice(label, *args):
        outs = []
        for rep in ("a", "b"):
            out = tmp_path / f"{label}_{rep}"
            assert cli_main([str(v) for v in (*args, "--out", out)]) == 0
            outs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
        return outs[0] == outs[1]

    results = {}
    results["build"] = run_twice("build", "build", "--seed", 21, *fast)
    store = tmp_path / "build_a" / "benchmark.nbstore"
    results["score"] = run_twice(
        "score", "score", "--store", store, "--seed", 22,
        "--set", "score.count=6", "--set", "score.init_budget_trainings=12",
        "--predictors", "flops,synflow,sotl_e,gradient_boosted_trees")
    results["grid"] = run_twice(
        "grid", "grid", "--store", store, "--seed", 23,
        "--predictors", "oracle,random,synflow",
        "--set", "grid.trials=3", "--set", "grid.test_size=6",
        "--set", "grid.init_levels=[0.0,30.0]", "--set", "grid.query_levels=[1.0,5.0]")
    results["nas"] = run_twice(
        "nas", "nas", "--store", store, "--seed", 24,
        "--set", "nas.runs=2", "--set", "nas.iterations=2",
        "--set", "nas.init_population=4", "--set", "nas.elite=2",
        "--set", "nas.mutations_per_elite=4", "--set", "nas.select_k=2",
        "--set", "nas.predictor=flops")
    grid_csv = tmp_path / "grid_a" / "grid.csv"
    results["report"] = run_twice("report", "report", grid_csv, "--seed", 25)

    passed = all(results.values())
    report("9 cli-determinism", passed,
           ", ".join(f"{k}={'ok' if v else 'DIFF'}" for k, v in results.items()), t0)


def test_criterion_10_pareto_correctness():
    t0 = time.time()
    rng = np.random.default_rng(26)
    mismatches = 0
    for _ in range(1000):
        n_pred = int(rng.integers(1, 7))
        ni, nq = int(rng.integers(1, 5)), int(rng.integers(1, 5))
        names = [f"p{k}" for k in range(n_pred)]
        grid = BudgetGrid(tuple(np.arange(ni, dtype=float)),
                          tuple(np.arange(nq, dtype=float)))
        rg = ResultGrid(names, grid, metrics=("kendall_tau",))
        vals = rng.choice(np.round(rng.normal(size=3), 2), size=(n_pred, ni, nq))
        for p, name in enumerate(names):
            for i in range(ni):
                for q in range(nq):
                    rg.stats[(name, i, q, "kendall_tau")] = CellStats(vals[p, i, q], 0.0, 1)
        winners, pareto = pareto_best(rg, "kendall_tau")
        brute_w = {}
        for i in range(ni):
            for q in range(nq):
                best, best_v = None, -np.inf
                for p, name in sorted(enumerate(names), key=lambda t: t[1]):
                    if vals[p, i, q] > best_v:
                        best, best_v = name, vals[p, i, q]
                brute_w[(i, q)] = best
        if winners != brute_w or pareto != sorted(set(brute_w.values())):
            mismatches += 1
    report("10 pareto-correctness", mismatches == 0, f"{mismatches} mismatches", t0)
