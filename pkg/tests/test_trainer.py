import numpy as np
import pytest

from ridgearb.errors import DivergenceError
from ridgearb.market import AmbiguitySet, MarketSpec, ScenarioSet
from ridgearb.oracle import TinyMarket
from ridgearb.partition import Partition
from ridgearb.strategy import RidgeletStrategy
from ridgearb.trainer import AdamState, TrainConfig, adam_step, strategy_adam_step, train


def test_zero_gradient_leaves_params():
    p = np.array([1.0, -2.0, 3.0])
    out, state = adam_step(p, np.zeros(3), AdamState.fresh(3), 0.1, 0.9, 0.999, 1e-8)
    assert np.array_equal(out, p) and state.t == 1


def test_first_step_is_minus_lr():
    out, _ = adam_step(np.zeros(1), np.ones(1), AdamState.fresh(1), 0.01, 0.9, 0.999, 1e-8)
    assert out[0] == pytest.approx(-0.01 / (1 + 1e-8), rel=1e-12)


def test_adam_matches_reference_recursion():
    rng = np.random.default_rng(0)
    p = rng.standard_normal(4)
    state = AdamState.fresh(4)
    m = v = np.zeros(4)
    ref = p.copy()
    for t in range(1, 6):
        g = rng.standard_normal(4)
        p, state = adam_step(p, g, state, 0.05, 0.9, 0.999, 1e-8)
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        ref = ref - 0.05 * (m / (1 - 0.9**t)) / (np.sqrt(v / (1 - 0.999**t)) + 1e-8)
    assert np.allclose(p, ref, rtol=1e-12, atol=1e-14)


def test_projection_after_step():
    spec = MarketSpec(1, 1, [5.0], [15.0], [10.0])
    s = RidgeletStrategy.initialize(spec, 1.0)
    s.c = 1.0
    strategy_adam_step(s, -np.ones(s.num_params), AdamState.fresh(s.num_params), 0.5, 0.9, 0.999, 1e-8)
    assert s.c == 1.0 and abs(s.delta0[0]) < 1.0


def test_flat_market_optimum_near_zero():
    spec = MarketSpec(1, 2, [5.0], [15.0], [10.0])
    amb = AmbiguitySet([ScenarioSet(np.full((3, 3, 1), 10.0))])
    s = RidgeletStrategy.initialize(spec, 1.0, hidden_widths=[4])
    r = train(spec, amb, Partition.trivial(spec), None, None, TrainConfig(steps_per_k=1500), strategy=s)
    assert abs(r.strategy.c) < 1e-3


def test_rise_fixture_reaches_oracle(fixture_path):
    m = TinyMarket.load(fixture_path("deterministic_rise.json"))
    s = RidgeletStrategy.initialize(m.spec, m.budget, capital_bound=m.capital_bound)
    r = train(m.spec, m.ambiguity, m.partition, None, m.costs, TrainConfig(), strategy=s)
    assert abs(r.value + 2.0) < 0.05
    assert len(r.trace) == 6000 and len(r.stage_reports) == 3
    assert np.array_equal(s.flat_params(), RidgeletStrategy.initialize(m.spec, 1.0, capital_bound=4.0).flat_params())


def test_identical_seeds_identical_traces(fixture_path):
    m = TinyMarket.load(fixture_path("symmetric_zero_drift.json"))
    cfg = TrainConfig(steps_per_k=200, batch=2, seed=5, deterministic_reduce=True)
    runs = [
        train(m.spec, m.ambiguity, m.partition, None, None, cfg,
              strategy=RidgeletStrategy.initialize(m.spec, 1.0, hidden_widths=[6], seed=1))
        for _ in range(2)
    ]
    assert runs[0].trace == runs[1].trace
    assert np.array_equal(runs[0].strategy.flat_params(), runs[1].strategy.flat_params())


def test_divergence_raises_with_trace():
    spec = MarketSpec(1, 2, [5.0], [15.0], [10.0])
    paths = np.full((2, 3, 1), 10.0)
    paths[:, 1:, 0] = [[12.0, 14.0], [8.0, 7.0]]
    amb = AmbiguitySet([ScenarioSet(paths)])
    s = RidgeletStrategy.initialize(spec, 1.0, hidden_widths=[3])
    s.nets[0].layers[0].weights[:] = np.nan
    with pytest.raises(DivergenceError) as info:
        train(spec, amb, Partition.trivial(spec), None, None, TrainConfig(steps_per_k=5), strategy=s)
    assert info.value.trace == []


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(k_schedule=(100, 10))
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=0)
    assert TrainConfig().resolved_learning_rate(10) == 1e-4
    assert TrainConfig().resolved_learning_rate(2) == 1e-3
