import numpy as np
import pytest

from ridgearb.costs import (
    CostParams,
    TransactionKind,
    borrowing_cost,
    liquidity_cost,
    total_cost,
    total_cost_batch,
    total_cost_grad,
    transaction_cost,
)

LAMBDA_B = 0.1 / 252


def test_per_share():
    assert transaction_cost(TransactionKind.PER_SHARE, 0.01, 100.0, -3.0) == pytest.approx(0.03, abs=1e-12)


def test_proportional():
    assert transaction_cost("proportional", 0.001, 100.0, 2.0) == pytest.approx(0.2, abs=1e-12)


@pytest.mark.parametrize("kind", list(TransactionKind))
def test_no_trade_no_cost(kind):
    assert transaction_cost(kind, 0.01, 100.0, 0.0) == 0.0


def test_liquidity():
    assert liquidity_cost(0.0002, 10.0) == pytest.approx(0.001, abs=1e-12)
    assert liquidity_cost(0.0002, 0.0) == 0.0


def test_borrowing():
    assert borrowing_cost(LAMBDA_B, 50.0, 5.0) == 0.0
    assert borrowing_cost(LAMBDA_B, 50.0, 0.0) == 0.0
    assert borrowing_cost(LAMBDA_B, 50.0, -2.0) == pytest.approx(0.03968254, abs=1e-8)
    assert borrowing_cost(LAMBDA_B, 50.0, -2.0) == pytest.approx(0.1 * 100 / 252, abs=1e-15)


def test_total_cost_hand_example():
    params = CostParams("per_share", 0.01, 0.0002, 0.0)
    out = total_cost(params, [[2.0]], [[10.0], [12.0]])
    assert out.transaction == pytest.approx(0.04, abs=1e-12)
    assert out.liquidity == pytest.approx(0.0004, abs=1e-12)
    assert out.borrowing == 0.0
    assert out.total == pytest.approx(0.0404, abs=1e-12)


def test_zero_schedule_costs_nothing():
    params = CostParams("proportional", 0.001, 0.0002, LAMBDA_B)
    out = total_cost(params, np.zeros((3, 2)), np.full((4, 2), 10.0))
    assert out.total == 0.0


def test_aliases_and_validation():
    assert TransactionKind.parse("pstc") is TransactionKind.PER_SHARE
    assert TransactionKind.parse("PTC") is TransactionKind.PROPORTIONAL
    assert TransactionKind.parse("ztc") is TransactionKind.NONE
    with pytest.raises(ValueError):
        CostParams("per_share", -0.1)


def test_cost_params_round_trip():
    p = CostParams("proportional", 0.001, 0.0002, LAMBDA_B)
    assert CostParams.from_dict(p.to_dict()) == p


def test_cost_gradient_matches_finite_differences():
    rng = np.random.default_rng(3)
    params = CostParams("proportional", 0.001, 0.0002, LAMBDA_B)
    prices = 50 + rng.standard_normal((4, 3, 2))
    positions = rng.uniform(-1, 1, (4, 2, 2))
    grad = total_cost_grad(params, positions, prices)
    h = 1e-6
    for idx in np.ndindex(positions.shape):
        up, dn = positions.copy(), positions.copy()
        up[idx] += h
        dn[idx] -= h
        fd = (total_cost_batch(params, up, prices) - total_cost_batch(params, dn, prices))[idx[0]] / (2 * h)
        assert grad[idx] == pytest.approx(fd, rel=1e-5, abs=1e-9)


def test_costs_are_non_negative():
    rng = np.random.default_rng(4)
    params = CostParams("per_share", 0.01, 0.0002, LAMBDA_B)
    costs = total_cost_batch(params, rng.uniform(-3, 3, (200, 2, 3)), 10 + rng.random((200, 3, 3)))
    assert np.all(costs >= 0)
