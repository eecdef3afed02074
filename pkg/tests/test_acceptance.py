"""Acceptance gate: one test per criterion, each recorded for the summary table."""

import json
import math
import time

import numpy as np
import pytest

from ridgearb import persist
from ridgearb.backtest import buy_and_hold, regression_metrics, run_backtest, sharpe, sortino
from ridgearb.cli import run
from ridgearb.costs import CostParams, borrowing_cost, liquidity_cost, total_cost, transaction_cost
from ridgearb.data import SyntheticConfig, synthetic_paths, synthetic_scenarios
from ridgearb.market import AmbiguitySet, MarketSpec, ScenarioSet
from ridgearb.objective import (
    PenaltyConfig,
    Verdict,
    detect_arbitrage,
    penalized_gradient,
    penalized_value,
)
from ridgearb.oracle import TinyMarket, enumerate_min_cost
from ridgearb.partition import assign_cells, conditional_expectation, generate_partition
from ridgearb.strategy import RidgeletStrategy, eval_with_gradients
from ridgearb.trainer import AdamState, TrainConfig, strategy_adam_step, train

pytestmark = pytest.mark.acceptance

KINDS = ["relu", "silu", "gelu", "mish", "tanh", "hybrid"]


def random_market(a=2, n=3, count=8, measures=2, seed=0):
    rng = np.random.default_rng(seed)
    spec = MarketSpec(a, n, np.full(a, 5.0), np.full(a, 15.0), np.full(a, 10.0))
    sets = []
    for _ in range(measures):
        paths = rng.uniform(5, 15, (count,) + spec.path_shape)
        paths[:, 0] = 10.0
        w = rng.random(count)
        sets.append(ScenarioSet(paths, w / w.sum()))
    return spec, AmbiguitySet(sets)


def random_strategy(spec, rng, kind="relu", widths=(6,), budget=1.0, scale=0.5, capital_bound=None):
    s = RidgeletStrategy.initialize(spec, budget, hidden_widths=list(widths), activation=kind,
                                    seed=int(rng.integers(2**31)), capital_bound=capital_bound)
    s.set_flat(rng.normal(0, scale, s.num_params))
    for net in s.nets:
        x = rng.uniform(5, 15, (32, net.input_dim))
        net.input_norm.fit(x)
    s.project()
    return s


def test_1_oracle_equivalence_arbitrage(fixture_path, record_criterion):
    market = TinyMarket.load(fixture_path("deterministic_rise.json"))
    oracle = enumerate_min_cost(market)
    started = time.perf_counter()
    strategy = RidgeletStrategy.initialize(market.spec, market.budget, capital_bound=market.capital_bound)
    result = train(market.spec, market.ambiguity, market.partition, None, market.costs,
                   TrainConfig(k_schedule=(10, 100, 1000)), strategy=strategy)
    elapsed = time.perf_counter() - started
    verdict = detect_arbitrage(result.final_report)
    passed = (
        abs(oracle.c_min + 2.0) <= 1e-12
        and abs(result.value + 2.0) <= 0.05
        and elapsed < 60
        and verdict is Verdict.ARBITRAGE_FOUND
    )
    record_criterion(
        "1 oracle equivalence (arbitrage present)", passed,
        f"c_min={oracle.c_min!r} trained={result.value:.6f} time={elapsed:.1f}s verdict={verdict.value}",
    )


def test_2_no_arbitrage_null(fixture_path, record_criterion):
    market = TinyMarket.load(fixture_path("symmetric_zero_drift.json"))
    oracle = enumerate_min_cost(market)
    values = {}
    for name, costs in (("zero", CostParams.zero()), ("pstc", CostParams("per_share", 0.01))):
        s = RidgeletStrategy.initialize(market.spec, market.budget, hidden_widths=[8], seed=0)
        r = train(market.spec, market.ambiguity, market.partition, None, costs,
                  TrainConfig(seed=0, deterministic_reduce=True), strategy=s)
        values[name] = r
    zero = values["zero"]
    verdict = detect_arbitrage(zero.final_report)
    passed = (
        abs(oracle.c_min) <= 1e-12
        and zero.value >= -0.05
        and verdict is Verdict.NONE_FOUND
        and values["pstc"].value >= zero.value
    )
    record_criterion(
        "2 no-arbitrage null", passed,
        f"c_min={oracle.c_min:.3g} trained={zero.value:.6g} pstc={values['pstc'].value:.6g} verdict={verdict.value}",
    )


def test_3_k_monotonicity(record_criterion):
    spec, amb = random_market(seed=3)
    part = generate_partition(spec, 8, 3)
    rng = np.random.default_rng(30)
    costs = CostParams("proportional", 0.001, 0.0002, 0.1 / 252)
    bad = 0
    for _ in range(20):
        s = random_strategy(spec, rng, capital_bound=5.0)
        s.c = float(rng.uniform(-2, 2))
        v = [penalized_value(s, amb, part, PenaltyConfig(k), costs=costs).value for k in (10, 100, 1000)]
        bad += not (v[0] <= v[1] <= v[2])
    record_criterion("3 k-monotonicity", bad == 0, f"violations={bad}/20")


def test_4_refinement_monotonicity(record_criterion):
    spec, amb = random_market(count=40, seed=4)
    part = generate_partition(spec, 10, 4)
    rng = np.random.default_rng(40)
    worst = -math.inf
    for _ in range(20):
        s = random_strategy(spec, rng, capital_bound=5.0)
        s.c = float(rng.uniform(-2, 0.5))
        prev = None
        for i in range(11):
            rep = penalized_value(s, amb, part.restrict(i), PenaltyConfig(10), deterministic_reduce=True)
            if prev is not None:
                worst = max(worst, max(p - q for p, q in zip(prev, rep.per_measure)))
            prev = rep.per_measure
    record_criterion("4 refinement monotonicity", worst <= 1e-12, f"max decrease={worst:.3g}")


def _relerr(g, fd):
    return float(np.linalg.norm(g - fd) / max(np.linalg.norm(fd), np.linalg.norm(g), 1e-12))


def _fd(f, theta, h=1e-6):
    out = np.empty_like(theta)
    for i in range(theta.size):
        e = np.zeros_like(theta)
        e[i] = h
        out[i] = (f(theta + e) - f(theta - e)) / (2 * h)
    return out


def test_5_gradient_correctness(record_criterion):
    started = time.perf_counter()
    spec, amb = random_market(a=2, n=3, count=6, measures=2, seed=5)
    part = generate_partition(spec, 4, 5)
    costs = CostParams("proportional", 0.001, 0.0002, 0.1 / 252)
    worst = {}
    for kind in KINDS:
        rng = np.random.default_rng(50 + KINDS.index(kind))
        errs = []
        for _ in range(100):
            s = random_strategy(spec, rng, kind=kind, widths=(4,), budget=2.0, capital_bound=3.0)
            s.c = float(rng.uniform(-1, 0))
            path = amb.measures[0].paths[int(rng.integers(6))]
            up = rng.standard_normal((3, 2))
            theta = s.flat_params()

            def pos(vec):
                t = s.copy()
                t.set_flat(vec)
                return float(np.sum(up * t.positions_batch(path)))

            def val(vec):
                t = s.copy()
                t.set_flat(vec)
                return penalized_value(t, amb, part, PenaltyConfig(10), costs=costs).value

            errs.append(_relerr(eval_with_gradients(s, path, up).values, _fd(pos, theta)))
            errs.append(_relerr(penalized_gradient(s, amb, part, PenaltyConfig(10), costs=costs).values,
                                _fd(val, theta)))
        worst[kind] = max(errs)
    elapsed = time.perf_counter() - started
    passed = max(worst.values()) <= 1e-4 and elapsed < 300
    detail = " ".join(f"{k}={v:.1e}" for k, v in worst.items())
    record_criterion("5 gradient correctness", passed, f"{detail} time={elapsed:.0f}s")


def test_6_partition_laws(record_criterion):
    rng = np.random.default_rng(6)
    spec = MarketSpec(3, 1, [0, 0, 0], [10, 10, 10], [5, 5, 5])
    part = generate_partition(spec, 32, 6)
    terminal = rng.uniform(0, 10, (1000, 3))
    values = rng.standard_normal(1000) * 10
    w = rng.random(1000)
    w /= w.sum()
    prefix_ok, worst = True, 0.0
    prev_sig, prev_ce = None, None
    for i in range(33):
        cells = assign_cells(part.restrict(i), terminal, w)
        ce = conditional_expectation(values, cells, w)
        worst = max(worst, abs(float(np.dot(w, ce) - np.dot(w, values))))
        if prev_sig is not None:
            prefix_ok &= all(f[: i - 1] == c for f, c in zip(cells.path_signatures, prev_sig))
            coarse = assign_cells(part.restrict(i - 1), terminal, w)
            worst = max(worst, float(np.abs(conditional_expectation(ce, coarse, w) - prev_ce).max()))
        prev_sig, prev_ce = cells.path_signatures, ce
    record_criterion("6 partition laws", prefix_ok and worst <= 1e-12, f"prefix={prefix_ok} tower err={worst:.2g}")


def test_7_cost_formulas(record_criterion):
    lb = 0.1 / 252
    got = [
        transaction_cost("per_share", 0.01, 100.0, -3.0),
        transaction_cost("proportional", 0.001, 100.0, 2.0),
        liquidity_cost(0.0002, 10.0),
        borrowing_cost(lb, 50.0, -2.0),
        total_cost(CostParams("per_share", 0.01, 0.0002, 0.0), [[2.0]], [[10.0], [12.0]]).total,
    ]
    want = [0.03, 0.2, 0.001, 0.1 * 2 * 50 / 252, 0.0404]
    err = max(abs(g - x) for g, x in zip(got, want))
    passed = err <= 1e-12 and abs(got[3] - 0.03968254) < 5e-9
    record_criterion("7 cost formulas", passed, f"max err={err:.2g}")


def test_8_metric_laws(record_criterion):
    rng = np.random.default_rng(8)
    ok = abs(sharpe([1, 2, 3]) - 2.0) <= 1e-9 and abs(sortino([3, -1]) - math.sqrt(2)) <= 1e-9
    scale_err = 0.0
    for _ in range(200):
        p = rng.standard_normal(50) + 0.1
        a = float(rng.uniform(1e-3, 1e3))
        scale_err = max(scale_err, abs(sharpe(a * p) / sharpe(p) - 1), abs(sortino(a * p) / sortino(p) - 1))
    rmse_ok = True
    for _ in range(10_000):
        x, y = rng.standard_normal((2, int(rng.integers(2, 20))))
        r = regression_metrics(x, y) if np.ptp(y) > 0 else {"rmse": 1, "mae": 0}
        rmse_ok &= r["rmse"] >= r["mae"]
    passed = ok and scale_err <= 1e-12 and rmse_ok
    record_criterion("8 metric laws", passed, f"examples={ok} scale err={scale_err:.2g} rmse>=mae={rmse_ok}")


def test_9_constraint_enforcement(record_criterion):
    rng = np.random.default_rng(9)
    spec = MarketSpec(2, 3, [1.0, 1.0], [100.0, 100.0], [50.0, 50.0])
    base = RidgeletStrategy.initialize(spec, 1.0, hidden_widths=[4])
    violations = 0
    for _ in range(10_000):
        s = base.copy()
        s.budget = s.capital_bound = float(rng.choice([1e-3, 0.5, 1.0, 7.0, 1e4]))
        s.set_flat(rng.normal(0, float(rng.choice([0.1, 10.0, 1e4])), s.num_params) * s.budget)
        lr = float(rng.choice([1e-3, 1.0, 1e6]))
        g = rng.standard_normal(s.num_params) * float(rng.choice([1.0, 1e8]))
        strategy_adam_step(s, g, AdamState.fresh(s.num_params), lr, 0.9, 0.999, 1e-8)
        path = rng.uniform(1, 100, spec.path_shape)
        path[0] = spec.spot
        pos = s.positions_batch(path)
        violations += int(np.any(np.abs(pos) >= s.budget)) + int(abs(s.c) > s.budget)
    record_criterion("9 constraint enforcement", violations == 0, f"violations={violations}/10000")


ACCEPT10_COSTS = {
    "ZTC": CostParams.zero(),
    "PTC": CostParams("proportional", 0.001),
    "PSTC": CostParams("per_share", 0.01),
}


def test_10_synthetic_profitability(record_criterion):
    started = time.perf_counter()
    part_results = {}
    for name, costs in ACCEPT10_COSTS.items():
        wins = []
        for seed in range(5):
            spec, amb = synthetic_scenarios(SyntheticConfig(), seed=seed)
            part = generate_partition(spec, 32, seed)
            s = RidgeletStrategy.initialize(spec, 1.0, hidden_widths=[32, 32], seed=seed, capital_bound=100.0)
            cfg = TrainConfig(learning_rate=0.01, steps_per_k=300, seed=seed, deterministic_reduce=True)
            result = train(spec, amb, part, None, costs, cfg, strategy=s)
            _, test = synthetic_paths(10, 2, 1000, drift=1.0, seed=10_000 + seed)
            ours = np.mean([r.net_profit for r in run_backtest(result.strategy, test, costs)])
            bh = np.mean([r.net_profit for r in buy_and_hold(test, costs)])
            wins.append(ours > 0 and ours > bh)
        part_results[name] = sum(wins)
    elapsed = time.perf_counter() - started
    passed = all(v >= 4 for v in part_results.values()) and elapsed < 600
    detail = " ".join(f"{k}={v}/5" for k, v in part_results.items())
    record_criterion("10 synthetic profitability", passed, f"{detail} time={elapsed:.0f}s")


def test_11_determinism(tmp_path, record_criterion):
    body = {
        "seed": 4,
        "data": {"synthetic": {"num_assets": 4, "num_times": 3, "paths_per_measure": 50}},
        "partition": {"num_partitions": 8},
        "costs": {"transaction_kind": "proportional", "lambda_t": 0.001},
        "strategy": {"hidden_widths": [8, 8], "activation": "hybrid", "capital_bound": 20.0},
        "train": {"steps_per_k": 100, "batch": 25, "learning_rate": 0.01},
    }
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(body))
    codes = [run(["train", "--config", str(cfg), "--deterministic-reduce", "--out", str(tmp_path / n)]) for n in "ab"]
    files = ["trace.csv", "checkpoint.json"] + [f"checkpoint_k{i}.json" for i in range(3)]
    same = all((tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes() for f in files)
    ma, mb = (persist.read_json(tmp_path / n / "manifest.json") for n in "ab")
    passed = codes == [0, 0] and same and ma["manifest_hash"] == mb["manifest_hash"]
    record_criterion("11 determinism", passed, f"identical outputs={same} manifest hash equal={ma['manifest_hash'] == mb['manifest_hash']}")
