"""Penalized conditional super-replication objective and arbitrage checks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from ridgearb.costs import CostParams, total_cost_batch, total_cost_grad
from ridgearb.errors import NonFiniteError
from ridgearb.market import AmbiguitySet, PricePath, gross_profit_batch
from ridgearb.partition import Partition, assign_cells, cell_means
from ridgearb.strategy import GradientBundle, RidgeletStrategy

DEFAULT_TOLERANCE = 0.05


class BetaKind(str, Enum):
    SQUARED_HINGE = "squared_hinge"


@dataclass(frozen=True)
class PenaltyConfig:
    k: float
    beta_kind: BetaKind = BetaKind.SQUARED_HINGE

    def __post_init__(self):
        if not self.k > 0:
            raise ValueError("penalization constant k must be positive")
        object.__setattr__(self, "beta_kind", BetaKind(self.beta_kind))


def penalty_beta(config: PenaltyConfig | None, x):
    """Squared hinge ``max(x, 0)**2``: continuous, convex, zero on ``x <= 0``."""
    pos = np.maximum(np.asarray(x, dtype=float), 0.0)
    out = pos * pos
    return float(out) if out.ndim == 0 else out


def penalty_beta_grad(config: PenaltyConfig | None, x):
    return 2.0 * np.maximum(np.asarray(x, dtype=float), 0.0)


@dataclass
class Payoff:
    """Target claim: identically zero, a per-measure table, or a path function."""

    kind: str = "zero"
    table: Sequence[np.ndarray] | None = None
    function: Callable[[PricePath], float] | None = None

    @classmethod
    def zero(cls) -> "Payoff":
        return cls("zero")

    @classmethod
    def from_table(cls, table: Sequence) -> "Payoff":
        return cls("custom", table=[np.asarray(t, dtype=float) for t in table])

    @classmethod
    def from_function(cls, fn: Callable[[PricePath], float]) -> "Payoff":
        return cls("custom", function=fn)

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero"

    def values(self, measure_index: int, paths: np.ndarray) -> np.ndarray:
        if self.is_zero:
            return np.zeros(paths.shape[0])
        if self.table is not None:
            vals = np.asarray(self.table[measure_index], dtype=float)
            if vals.shape != (paths.shape[0],):
                raise ValueError(f"payoff table for measure {measure_index} has wrong length")
            return vals
        return np.array([float(self.function(PricePath(p))) for p in paths])


@dataclass
class MeasureData:
    """One measure prepared for repeated evaluation under a fixed partition."""

    prices: np.ndarray
    weights: np.ndarray
    codes: np.ndarray
    signatures: list[str]
    phi: np.ndarray

    @property
    def num_cells(self) -> int:
        return len(self.signatures)


def prepare(
    ambiguity: AmbiguitySet, partition: Partition, phi: Payoff, bound: float | None = None
) -> list[MeasureData]:
    data = []
    for m, measure in enumerate(ambiguity.measures):
        values = phi.values(m, measure.paths)
        if bound is not None and values.size and np.abs(values).max() > bound:
            raise ValueError(f"payoff sup-norm {np.abs(values).max()} exceeds bound {bound}")
        assignment = assign_cells(partition, measure.terminal, measure.weights)
        data.append(
            MeasureData(measure.paths, measure.weights, assignment.codes, assignment.signatures, values)
        )
    return data


@dataclass
class ObjectiveReport:
    value: float
    c: float
    k: float
    penalty_term: float
    per_measure: list[float]
    cell_means: list[dict[str, float]]
    phi_is_zero: bool = True

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "c": self.c,
            "k": self.k,
            "penalty_term": self.penalty_term,
            "per_measure": list(self.per_measure),
            "cell_means": [dict(d) for d in self.cell_means],
            "phi_is_zero": self.phi_is_zero,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ObjectiveReport":
        return cls(**d)


def net_profit_batch(strategy: RidgeletStrategy, prices: np.ndarray, costs: CostParams) -> np.ndarray:
    """Gross profit minus total cost per path, ``c`` excluded."""
    positions = strategy.positions_batch(prices)
    return gross_profit_batch(positions, prices) - total_cost_batch(costs, positions, prices)


def payoff_batch(strategy: RidgeletStrategy, prices: np.ndarray, costs: CostParams) -> np.ndarray:
    return strategy.c + net_profit_batch(strategy, prices, costs)


def payoff_w(strategy: RidgeletStrategy, path, costs: CostParams) -> float:
    """``c + gross profit - total cost`` on one path."""
    prices = path.prices if isinstance(path, PricePath) else np.asarray(path, dtype=float)
    return float(payoff_batch(strategy, prices[None], costs)[0])


def _reduce(values, deterministic: bool) -> float:
    return math.fsum(values) if deterministic else float(np.sum(values))


def evaluate(
    strategy: RidgeletStrategy,
    data: list[MeasureData],
    config: PenaltyConfig,
    costs: CostParams,
    *,
    want_grad: bool = False,
    deterministic_reduce: bool = False,
    phi_is_zero: bool = True,
):
    """Objective report and, optionally, its flat parameter gradient."""
    if not data:
        raise ValueError("ambiguity set is empty")
    integrals, all_means = [], []
    grad = np.zeros(strategy.num_params) if want_grad else None
    d_c_total = 1.0
    for md in data:
        if want_grad:
            positions, caches = strategy.positions_batch(md.prices, keep_cache=True)
        else:
            positions = strategy.positions_batch(md.prices)
        gross = gross_profit_batch(positions, md.prices)
        cost = total_cost_batch(costs, positions, md.prices)
        residual = md.phi - (strategy.c + gross - cost)
        means, totals = cell_means(residual, md.codes, md.weights, md.num_cells)
        integrals.append(_reduce(totals * penalty_beta(config, means), deterministic_reduce))
        all_means.append({s: float(v) for s, v in zip(md.signatures, means)})
        if want_grad:
            # d value / d w_p = -k * weight_p * beta'(cell mean of p)
            d_w = -config.k * md.weights * penalty_beta_grad(config, means)[md.codes]
            d_c_total += _reduce(d_w, deterministic_reduce)
            sensitivity = np.diff(md.prices, axis=1) - total_cost_grad(costs, positions, md.prices)
            upstream = d_w[:, None, None] * sensitivity
            grad += strategy.backward_batch(caches, upstream)
    penalty = _reduce(integrals, deterministic_reduce)
    value = strategy.c + config.k * penalty
    report = ObjectiveReport(value, strategy.c, config.k, penalty, integrals, all_means, phi_is_zero)
    if not math.isfinite(value):
        raise NonFiniteError("objective value is not finite")
    if want_grad:
        grad[0] = d_c_total
        if not np.all(np.isfinite(grad)):
            raise NonFiniteError("objective gradient is not finite")
        return report, GradientBundle(grad, strategy.spec.num_assets)
    return report


def penalized_value(
    strategy: RidgeletStrategy,
    ambiguity: AmbiguitySet,
    partition: Partition,
    config: PenaltyConfig,
    phi: Payoff | None = None,
    costs: CostParams | None = None,
    *,
    deterministic_reduce: bool = False,
) -> ObjectiveReport:
    """``c + k * sum_P integral beta(E_P[phi - w | cells]) dP``."""
    phi = phi or Payoff.zero()
    costs = costs or CostParams.zero()
    bound = max(strategy.budget, strategy.capital_bound)
    data = prepare(ambiguity, partition, phi, bound)
    return evaluate(
        strategy, data, config, costs, deterministic_reduce=deterministic_reduce, phi_is_zero=phi.is_zero
    )


def penalized_gradient(
    strategy: RidgeletStrategy,
    ambiguity: AmbiguitySet,
    partition: Partition,
    config: PenaltyConfig,
    phi: Payoff | None = None,
    costs: CostParams | None = None,
    *,
    deterministic_reduce: bool = False,
) -> GradientBundle:
    phi = phi or Payoff.zero()
    costs = costs or CostParams.zero()
    bound = max(strategy.budget, strategy.capital_bound)
    data = prepare(ambiguity, partition, phi, bound)
    _, grad = evaluate(
        strategy, data, config, costs, want_grad=True, deterministic_reduce=deterministic_reduce
    )
    return grad


class Verdict(str, Enum):
    ARBITRAGE_FOUND = "ArbitrageFound"
    NONE_FOUND = "NoneFound"


def detect_arbitrage(report: ObjectiveReport | float, tolerance: float = DEFAULT_TOLERANCE) -> Verdict:
    """Arbitrage iff the trained objective value is strictly below ``-tolerance``."""
    if isinstance(report, ObjectiveReport):
        if not report.phi_is_zero:
            raise ValueError("arbitrage detection needs a report computed with the zero payoff")
        value = report.value
    else:
        value = float(report)
    return Verdict.ARBITRAGE_FOUND if value < -tolerance else Verdict.NONE_FOUND


@dataclass
class VerificationReport:
    conditional_ok: bool
    profitable_somewhere: bool
    worst_cell: tuple[int, str, float]
    measure_means: list[float]
    cell_means: list[dict[str, float]] = field(default_factory=list)

    @property
    def is_arbitrage(self) -> bool:
        return self.conditional_ok and self.profitable_somewhere

    def to_dict(self) -> dict:
        return {
            "conditional_ok": self.conditional_ok,
            "profitable_somewhere": self.profitable_somewhere,
            "is_arbitrage": self.is_arbitrage,
            "worst_cell": {"measure": self.worst_cell[0], "signature": self.worst_cell[1], "mean": self.worst_cell[2]},
            "measure_means": self.measure_means,
        }


def verify_from_profits(
    profits: Sequence[np.ndarray], data: Sequence[MeasureData], tolerance: float
) -> VerificationReport:
    worst = (0, "", math.inf)
    measure_means, all_cells = [], []
    for m, (profit, md) in enumerate(zip(profits, data)):
        means, totals = cell_means(profit, md.codes, md.weights, md.num_cells)
        cells = {}
        for sig, mean, total in zip(md.signatures, means, totals):
            if total <= 0:
                continue
            cells[sig] = float(mean)
            if mean < worst[2]:
                worst = (m, sig, float(mean))
        all_cells.append(cells)
        measure_means.append(float(np.dot(md.weights, profit)))
    return VerificationReport(
        conditional_ok=worst[2] >= -tolerance,
        profitable_somewhere=any(v > tolerance for v in measure_means),
        worst_cell=worst,
        measure_means=measure_means,
        cell_means=all_cells,
    )


def verify_arbitrage(
    strategy: RidgeletStrategy,
    ambiguity: AmbiguitySet,
    partition: Partition,
    costs: CostParams | None = None,
    tolerance: float = DEFAULT_TOLERANCE,
) -> VerificationReport:
    """Check both robust-arbitrage conditions on net profit (``c`` excluded)."""
    costs = costs or CostParams.zero()
    data = prepare(ambiguity, partition, Payoff.zero())
    profits = [net_profit_batch(strategy, md.prices, costs) for md in data]
    return verify_from_profits(profits, data, tolerance)
