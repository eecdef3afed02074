"""Transaction, liquidity and borrowing costs and the total execution cost.

Transaction and liquidity costs act on trades ``x_i = Delta_i - Delta_{i-1}``
for ``i = 0..n`` with ``Delta_{-1} = Delta_n = 0`` (entry at ``t_0`` and the
closing liquidation at ``t_n`` are both charged). Borrowing acts on the held
position ``Delta_i`` at price ``S_{t_i}`` for ``i = 0..n-1``.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from ridgearb.errors import ShapeError
from ridgearb.market import PositionSchedule, PricePath, _as_positions, _as_prices


class TransactionKind(str, Enum):
    NONE = "none"
    PER_SHARE = "per_share"
    PROPORTIONAL = "proportional"

    @classmethod
    def parse(cls, value) -> "TransactionKind":
        if isinstance(value, cls):
            return value
        aliases = {"ztc": "none", "pstc": "per_share", "ptc": "proportional", "pershare": "per_share"}
        key = str(value).strip().lower()
        return cls(aliases.get(key, key))


@dataclass(frozen=True)
class CostParams:
    """Cost rates; each may be a scalar or an ``(n + 1, a)`` matrix of per-date rates."""

    transaction_kind: TransactionKind = TransactionKind.NONE
    lambda_t: float | np.ndarray = 0.0
    lambda_l: float | np.ndarray = 0.0
    lambda_b: float | np.ndarray = 0.0

    def __post_init__(self):
        object.__setattr__(self, "transaction_kind", TransactionKind.parse(self.transaction_kind))
        for name in ("lambda_t", "lambda_l", "lambda_b"):
            value = getattr(self, name)
            arr = np.asarray(value, dtype=float)
            if np.any(arr < 0) or not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} must be finite and non-negative")
            if arr.ndim == 0:
                object.__setattr__(self, name, float(arr))
            else:
                arr = arr.copy()
                arr.setflags(write=False)
                object.__setattr__(self, name, arr)

    @classmethod
    def zero(cls) -> "CostParams":
        return cls()

    def to_dict(self) -> dict:
        def enc(v):
            return v.tolist() if isinstance(v, np.ndarray) else v

        return {
            "transaction_kind": self.transaction_kind.value,
            "lambda_t": enc(self.lambda_t),
            "lambda_l": enc(self.lambda_l),
            "lambda_b": enc(self.lambda_b),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CostParams":
        return cls(
            transaction_kind=d.get("transaction_kind", "none"),
            lambda_t=d.get("lambda_t", 0.0),
            lambda_l=d.get("lambda_l", 0.0),
            lambda_b=d.get("lambda_b", 0.0),
        )


@dataclass(frozen=True)
class CostBreakdown:
    transaction: float
    liquidity: float
    borrowing: float
    total: float


def transaction_cost(kind, lambda_t: float, price: float, trade: float) -> float:
    kind = TransactionKind.parse(kind)
    if lambda_t < 0:
        raise ValueError("lambda_t must be non-negative")
    if kind is TransactionKind.NONE:
        return 0.0
    if kind is TransactionKind.PER_SHARE:
        return lambda_t * abs(trade)
    if price <= 0:
        raise ValueError("proportional costs need a positive price")
    return lambda_t * price * abs(trade)


def liquidity_cost(lambda_l: float, trade: float) -> float:
    return 0.5 * lambda_l * abs(trade)


def borrowing_cost(lambda_b: float, price: float, position: float) -> float:
    return lambda_b * max(-position, 0.0) * price


def trades_from_positions(positions: np.ndarray) -> np.ndarray:
    """``(..., n, a)`` positions to ``(..., n + 1, a)`` trades including entry and exit."""
    pad = [(0, 0)] * (positions.ndim - 2) + [(1, 1), (0, 0)]
    padded = np.pad(positions, pad)
    return np.diff(padded, axis=-2)


def _rates(value, shape) -> np.ndarray:
    return np.broadcast_to(np.asarray(value, dtype=float), shape)


def _trade_rates(params: CostParams, prices: np.ndarray) -> np.ndarray:
    """Per-unit cost of trading at each ``(i, j)``, transaction plus half-spread."""
    grid = prices.shape[-2:]
    half_spread = 0.5 * _rates(params.lambda_l, grid)
    kind = params.transaction_kind
    if kind is TransactionKind.NONE:
        return np.broadcast_to(half_spread, prices.shape)
    lam = _rates(params.lambda_t, grid)
    if kind is TransactionKind.PER_SHARE:
        return np.broadcast_to(lam + half_spread, prices.shape)
    return lam * prices + half_spread


def cost_components(params: CostParams, positions: np.ndarray, prices: np.ndarray):
    """Batched cost components, each of shape ``positions.shape[:-2]``."""
    trades = np.abs(trades_from_positions(positions))
    grid = prices.shape[-2:]
    kind = params.transaction_kind
    if kind is TransactionKind.NONE:
        transaction = np.zeros(positions.shape[:-2])
    elif kind is TransactionKind.PER_SHARE:
        transaction = np.sum(_rates(params.lambda_t, grid) * trades, axis=(-2, -1))
    else:
        transaction = np.sum(_rates(params.lambda_t, grid) * prices * trades, axis=(-2, -1))
    liquidity = np.sum(0.5 * _rates(params.lambda_l, grid) * trades, axis=(-2, -1))
    lam_b = _rates(params.lambda_b, grid)[:-1]
    borrowing = np.sum(lam_b * np.maximum(-positions, 0.0) * prices[..., :-1, :], axis=(-2, -1))
    return transaction, liquidity, borrowing


def total_cost_batch(params: CostParams, positions: np.ndarray, prices: np.ndarray) -> np.ndarray:
    t, l, b = cost_components(params, positions, prices)
    return t + l + b


def total_cost_grad(params: CostParams, positions: np.ndarray, prices: np.ndarray) -> np.ndarray:
    """Gradient of the total cost with respect to ``positions`` (subgradient 0 at kinks)."""
    signs = np.sign(trades_from_positions(positions))
    rates = _trade_rates(params, prices)
    flow = rates * signs
    grad = flow[..., :-1, :] - flow[..., 1:, :]
    lam_b = _rates(params.lambda_b, prices.shape[-2:])[:-1]
    grad = grad - lam_b * prices[..., :-1, :] * (positions < 0)
    return grad


def trade_rate_bound(params: CostParams, prices: np.ndarray) -> np.ndarray:
    """Per-position Lipschitz bound of the total cost, shape ``(..., n, a)``."""
    rates = _trade_rates(params, prices)
    lam_b = _rates(params.lambda_b, prices.shape[-2:])[:-1]
    return rates[..., :-1, :] + rates[..., 1:, :] + lam_b * np.abs(prices[..., :-1, :])


def total_cost(
    params: CostParams, schedule: PositionSchedule | np.ndarray, path: PricePath | np.ndarray
) -> CostBreakdown:
    positions = _as_positions(schedule)
    prices = _as_prices(path)
    if positions.ndim != 2 or prices.ndim != 2:
        raise ShapeError("schedule and path must be 2-d")
    if positions.shape[0] + 1 != prices.shape[0] or positions.shape[1] != prices.shape[1]:
        raise ShapeError(
            f"schedule shape {positions.shape} incompatible with path shape {prices.shape}"
        )
    t, l, b = (float(x) for x in cost_components(params, positions, prices))
    return CostBreakdown(transaction=t, liquidity=l, borrowing=b, total=t + l + b)
