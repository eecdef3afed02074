"""Out-of-sample rollout, profit statistics and risk-adjusted ratios.

One "trade" is one held-out path. Ratios use per-path net profits with a
zero risk-free rate and no annualisation.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from ridgearb.costs import CostParams, total_cost_batch
from ridgearb.errors import DegenerateVariance
from ridgearb.market import ScenarioSet, gross_profit_batch, require_valid

ROW_LABELS = (
    ("overall_profit", "Overall Profit"),
    ("average_profit", "Average Profit"),
    ("pct_profitable", "% of Profitable Trades"),
    ("max_profit", "Maximum Profit"),
    ("min_profit", "Minimum Profit"),
    ("sharpe", "Sharpe Ratio"),
    ("sortino", "Sortino Ratio"),
)


@dataclass
class TradeRecord:
    path_id: int
    net_profit: float
    gross_profit: float
    cost: float
    positions: np.ndarray


@dataclass
class BacktestReport:
    overall_profit: float
    average_profit: float
    pct_profitable: float
    max_profit: float
    min_profit: float
    sharpe: float
    sortino: float
    regression: dict | None = None
    num_trades: int = 0
    model_price: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def _stack(test_paths) -> np.ndarray:
    if isinstance(test_paths, ScenarioSet):
        return test_paths.paths
    if isinstance(test_paths, np.ndarray):
        return test_paths if test_paths.ndim == 3 else test_paths[None]
    return np.stack([getattr(p, "prices", p) for p in test_paths]).astype(float)


def _records(positions, prices, costs) -> list[TradeRecord]:
    gross = gross_profit_batch(positions, prices)
    cost = total_cost_batch(costs, positions, prices)
    net = gross - cost
    return [
        TradeRecord(idx, float(net[idx]), float(gross[idx]), float(cost[idx]), positions[idx])
        for idx in range(prices.shape[0])
    ]


def run_backtest(strategy, test_paths, costs: CostParams | None = None) -> list[TradeRecord]:
    """Net profit (gross minus costs, ``c`` excluded) of ``strategy`` on every path."""
    costs = costs or CostParams.zero()
    prices = _stack(test_paths)
    for p in prices:
        require_valid(strategy.spec, p)
    return _records(strategy.positions_batch(prices), prices, costs)


def buy_and_hold(test_paths, costs: CostParams | None = None, *, equal_dollar: bool = False) -> list[TradeRecord]:
    """Buy one unit of every asset at ``t_0`` (or one currency unit each) and hold to ``t_n``."""
    costs = costs or CostParams.zero()
    prices = _stack(test_paths)
    n = prices.shape[1] - 1
    units = 1.0 / prices[:, 0, :] if equal_dollar else np.ones(prices[:, 0, :].shape)
    positions = np.repeat(units[:, None, :], n, axis=1)
    return _records(positions, prices, costs)


def sharpe(profits: Sequence[float]) -> float:
    p = np.asarray(profits, dtype=float)
    if p.size < 2:
        raise DegenerateVariance("Sharpe ratio needs at least two observations")
    std = p.std(ddof=1)
    if std == 0:
        raise DegenerateVariance("profits have zero standard deviation")
    return float(p.mean() / std)


def sortino(profits: Sequence[float]) -> float:
    """Mean over the downside deviation ``sqrt(mean(min(p, 0)**2))``."""
    p = np.asarray(profits, dtype=float)
    if p.size == 0:
        raise DegenerateVariance("no profits")
    downside = math.sqrt(float(np.mean(np.minimum(p, 0.0) ** 2)))
    if downside == 0:
        raise DegenerateVariance("no negative profits, downside deviation is zero")
    return float(p.mean() / downside)


def regression_metrics(predicted: Sequence[float], target: Sequence[float]) -> dict:
    pred = np.asarray(predicted, dtype=float)
    tgt = np.asarray(target, dtype=float)
    if pred.shape != tgt.shape or pred.size < 2:
        raise ValueError("predicted and target need equal length >= 2")
    err = pred - tgt
    ss_tot = float(np.sum((tgt - tgt.mean()) ** 2))
    if ss_tot == 0:
        raise DegenerateVariance("target is constant, R^2 undefined")
    return {
        "rmse": math.sqrt(float(np.mean(err**2))),
        "mae": float(np.mean(np.abs(err))),
        "r2": 1.0 - float(np.sum(err**2)) / ss_tot,
    }


def _safe(fn, values) -> float:
    try:
        return fn(values)
    except DegenerateVariance:
        return float("nan")


def summarize(
    records: Sequence[TradeRecord], *, target: Sequence[float] | None = None, model_price: float | None = None
) -> BacktestReport:
    profits = np.array([r.net_profit for r in records])
    if profits.size == 0:
        raise ValueError("no trades to summarise")
    regression = None
    if target is not None:
        try:
            regression = regression_metrics(profits, target)
        except DegenerateVariance:
            regression = None
    return BacktestReport(
        overall_profit=float(profits.sum()),
        average_profit=float(profits.mean()),
        pct_profitable=100.0 * float(np.mean(profits > 0)),
        max_profit=float(profits.max()),
        min_profit=float(profits.min()),
        sharpe=_safe(sharpe, profits),
        sortino=_safe(sortino, profits),
        regression=regression,
        num_trades=int(profits.size),
        model_price=model_price,
    )


def write_table(path: str | Path, columns: dict[str, BacktestReport], title: str = "Metric") -> None:
    """CSV with one row per profit statistic and one column per strategy."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([title] + list(columns))
        for key, label in ROW_LABELS:
            writer.writerow([label] + [repr(float(getattr(r, key))) for r in columns.values()])


def write_profits(path: str | Path, series: dict[str, Sequence[TradeRecord]]) -> None:
    """Per-path profits and running cumulative sums, one column pair per series."""
    names = list(series)
    length = len(next(iter(series.values())))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["path_id"] + [f"{n}_profit" for n in names] + [f"{n}_cumulative" for n in names])
        cums = {n: np.cumsum([r.net_profit for r in series[n]]) for n in names}
        for idx in range(length):
            writer.writerow(
                [idx]
                + [repr(series[n][idx].net_profit) for n in names]
                + [repr(float(cums[n][idx])) for n in names]
            )
