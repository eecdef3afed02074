import itertools

import numpy as np
import pytest

from ridgearb.costs import CostParams, total_cost_batch
from ridgearb.errors import EnumerationBudgetExceeded
from ridgearb.market import AmbiguitySet, MarketSpec, ScenarioSet, gross_profit_batch
from ridgearb.oracle import TinyMarket, enumerate_min_cost, grid_values, oracle_gap


def rise(budget=1.0, capital_bound=None, step=0.5):
    spec = MarketSpec(1, 1, [5.0], [15.0], [10.0])
    amb = AmbiguitySet([ScenarioSet(np.array([[[10.0], [12.0]]]))])
    return TinyMarket(spec, amb, budget=budget, capital_bound=capital_bound, grid_step=step)


def test_zero_increment_market():
    spec = MarketSpec(1, 2, [5.0], [15.0], [10.0])
    m = TinyMarket(spec, AmbiguitySet([ScenarioSet(np.full((2, 3, 1), 10.0))]), grid_step=0.5)
    assert enumerate_min_cost(m).c_min == 0.0


def test_rise_examples():
    r = enumerate_min_cost(rise())
    assert r.c_min == -1.0 and r.positions["t0"] == [1.0]
    assert enumerate_min_cost(rise(budget=3.0)).c_min == -3.0
    assert enumerate_min_cost(rise(budget=3.0, capital_bound=10.0)).c_min == -6.0


def test_symmetric_market(fixture_path):
    r = enumerate_min_cost(TinyMarket.load(fixture_path("symmetric_zero_drift.json")))
    assert abs(r.c_min) <= 1e-12


def test_matches_naive_enumeration():
    rng = np.random.default_rng(2)
    spec = MarketSpec(1, 2, [5.0], [15.0], [10.0])
    paths = np.full((3, 3, 1), 10.0)
    paths[:, 1, 0] = [11.0, 11.0, 9.5]
    paths[:, 2, 0] = rng.uniform(6, 14, 3)
    costs = CostParams("per_share", 0.01, 0.0002, 0.1 / 252)
    m = TinyMarket(spec, AmbiguitySet([ScenarioSet(paths)]), costs=costs, capital_bound=10.0, grid_step=0.25)
    fast = enumerate_min_cost(m)
    values = grid_values(1.0, 0.25)
    best = np.inf
    for d0, d_up, d_dn in itertools.product(values, repeat=3):
        pos = np.array([[[d0], [d_up]], [[d0], [d_up]], [[d0], [d_dn]]])
        profit = gross_profit_batch(pos, paths) - total_cost_batch(costs, pos, paths)
        best = min(best, float(np.mean(-profit)))
    assert fast.c_min == pytest.approx(best, abs=1e-12)
    assert fast.enumeration_count == 9**3


def test_workers_agree():
    m = rise(step=0.01)
    assert enumerate_min_cost(m, workers=3).c_min == enumerate_min_cost(m).c_min


def test_budget_exceeded():
    with pytest.raises(EnumerationBudgetExceeded):
        enumerate_min_cost(rise(step=0.5), max_strategies=2)


def test_tiny_market_limits():
    spec = MarketSpec(3, 1, [1, 1, 1], [2, 2, 2], [1.5, 1.5, 1.5])
    with pytest.raises(ValueError):
        TinyMarket(spec, AmbiguitySet([ScenarioSet(np.full((1, 2, 3), 1.5))]))


def test_round_trip(fixture_path):
    m = TinyMarket.load(fixture_path("deterministic_rise.json"))
    back = TinyMarket.from_dict(m.to_dict())
    assert back.capital_bound == 4.0 and back.spec == m.spec


def test_gap_examples():
    r = enumerate_min_cost(rise())
    assert oracle_gap(-0.98, r, 0.05).passed
    g = oracle_gap(-0.5, r, 0.05)
    assert not g.passed and g.gap == 0.5
    assert oracle_gap(-1.0, r).gap == 0.0
