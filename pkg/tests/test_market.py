import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ridgearb.errors import BoundViolation, ShapeError
from ridgearb.market import (
    AmbiguitySet,
    MarketSpec,
    PositionSchedule,
    PricePath,
    ScenarioSet,
    gross_profit,
    require_valid,
    validate_path,
)


def spec_1(n=2, lo=0.0, hi=100.0, spot=50.0):
    return MarketSpec(1, n, [lo], [hi], [spot])


def test_interior_path_is_valid():
    assert validate_path(spec_1(), PricePath([[50.0], [50.0], [50.0]]))


def test_bound_violation_names_index():
    spec = MarketSpec(2, 2, [0, 0], [100, 100], [50, 50])
    prices = np.full((3, 2), 50.0)
    prices[2, 0] = 101.0
    result = validate_path(spec, prices)
    assert not result
    assert result.index == (2, 0)
    with pytest.raises(BoundViolation):
        require_valid(spec, prices)


def test_spot_mismatch_is_invalid():
    result = validate_path(spec_1(), [[49.0], [50.0], [50.0]])
    assert not result and result.index == (0, 0)


def test_wrong_shape_raises():
    with pytest.raises(ShapeError):
        validate_path(spec_1(), np.full((4, 1), 50.0))


def test_spec_rejects_inverted_bounds():
    with pytest.raises(ValueError):
        MarketSpec(1, 1, [10], [10], [10])


def test_spec_round_trip():
    spec = MarketSpec(2, 3, [1, 2], [10, 20], [5, 6])
    assert MarketSpec.from_dict(spec.to_dict()) == spec


def test_gross_profit_hand_example():
    value = gross_profit(PositionSchedule([[1.0], [2.0]]), PricePath([[10.0], [11.0], [13.0]]))
    assert value == 5.0


@settings(max_examples=50, deadline=None)
@given(st.floats(1, 100), st.lists(st.floats(-5, 5), min_size=3, max_size=3))
def test_constant_path_has_zero_profit(price, positions):
    pos = np.array(positions).reshape(3, 1)
    assert gross_profit(pos, np.full((4, 1), price)) == 0.0


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=4, max_size=4), st.lists(st.floats(-5, 5), min_size=4, max_size=4),
       st.floats(-3, 3))
def test_gross_profit_is_linear_in_positions(a, b, s):
    rng = np.random.default_rng(0)
    prices = 50 + rng.standard_normal((3, 2))
    a, b = np.array(a).reshape(2, 2), np.array(b).reshape(2, 2)
    lhs = gross_profit(a + s * b, prices)
    rhs = gross_profit(a, prices) + s * gross_profit(b, prices)
    assert lhs == pytest.approx(rhs, abs=1e-9)


def test_scenario_set_weights():
    with pytest.raises(ValueError):
        ScenarioSet(np.zeros((2, 2, 1)) + 1, [0.5, 0.6])
    s = ScenarioSet(np.ones((4, 2, 1)))
    assert np.allclose(s.weights, 0.25)


def test_ambiguity_requires_measures_of_equal_shape():
    with pytest.raises(ValueError):
        AmbiguitySet([])
    with pytest.raises(ShapeError):
        AmbiguitySet([ScenarioSet(np.ones((1, 2, 1))), ScenarioSet(np.ones((1, 3, 1)))])
