"""Exhaustive grid oracle for the minimal super-replication capital on tiny markets.

Positions are enumerated on ``{-B, -B + step, ..., B}`` independently for
every information set (distinct observed price prefix) and asset. Given the
positions, the smallest feasible capital is explicit::

    c(positions) = max over measures and occupied cells of E[phi - profit | cell]

floored at ``-capital_bound``; so only positions are enumerated.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ridgearb.costs import CostParams, total_cost_batch, trade_rate_bound
from ridgearb.errors import EnumerationBudgetExceeded
from ridgearb.market import AmbiguitySet, MarketSpec, ScenarioSet, gross_profit_batch
from ridgearb.partition import Partition, assign_cells, generate_partition

MAX_ASSETS = 2
MAX_TIMES = 3
MAX_PATHS = 32
DEFAULT_MAX_STRATEGIES = 2_000_000
CHUNK = 4096


@dataclass
class TinyMarket:
    spec: MarketSpec
    ambiguity: AmbiguitySet
    costs: CostParams = field(default_factory=CostParams)
    payoff: list[np.ndarray] | None = None
    budget: float = 1.0
    capital_bound: float | None = None
    grid_step: float = 0.1
    partition: Partition | None = None

    def __post_init__(self):
        if self.spec.num_assets > MAX_ASSETS or self.spec.num_times > MAX_TIMES:
            raise ValueError(f"tiny markets are limited to a <= {MAX_ASSETS}, n <= {MAX_TIMES}")
        total = sum(len(m) for m in self.ambiguity.measures)
        if total > MAX_PATHS:
            raise ValueError(f"tiny markets hold at most {MAX_PATHS} paths, got {total}")
        self.ambiguity.validate(self.spec)
        if self.partition is None:
            self.partition = Partition.trivial(self.spec)

    def payoff_values(self, m: int) -> np.ndarray:
        if self.payoff is None:
            return np.zeros(len(self.ambiguity.measures[m]))
        return np.asarray(self.payoff[m], dtype=float)

    @classmethod
    def from_dict(cls, d: dict) -> "TinyMarket":
        spec = MarketSpec.from_dict(d["spec"])
        measures = [ScenarioSet(np.asarray(m["paths"], dtype=float), m.get("weights")) for m in d["measures"]]
        part = d.get("partition")
        if part is None:
            partition = None
        elif "corners" in part:
            partition = Partition(part["corners"], spec.upper_bounds, part.get("seed"))
        else:
            partition = generate_partition(spec, int(part.get("num_partitions", 0)), int(part.get("seed", 0)))
        return cls(
            spec=spec,
            ambiguity=AmbiguitySet(measures),
            costs=CostParams.from_dict(d.get("costs", {})),
            payoff=d.get("payoff"),
            budget=float(d.get("budget", 1.0)),
            capital_bound=d.get("capital_bound"),
            grid_step=float(d.get("grid_step", 0.1)),
            partition=partition,
        )

    @classmethod
    def load(cls, path: str | Path) -> "TinyMarket":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return {
            "version": 1,
            "spec": self.spec.to_dict(),
            "measures": [{"paths": m.paths.tolist(), "weights": m.weights.tolist()} for m in self.ambiguity],
            "costs": self.costs.to_dict(),
            "payoff": None if self.payoff is None else [np.asarray(p).tolist() for p in self.payoff],
            "budget": self.budget,
            "capital_bound": self.capital_bound,
            "grid_step": self.grid_step,
            "partition": self.partition.to_dict(),
        }


@dataclass
class OracleResult:
    c_min: float
    positions: dict[str, list[float]]
    enumeration_count: int
    grid_step: float
    lipschitz_bound: float
    feasible: bool = True

    @property
    def gap_bound(self) -> float:
        """Bound on how far the gridded optimum can sit above the continuous one."""
        return self.grid_step * self.lipschitz_bound

    def to_dict(self) -> dict:
        return {
            "c_min": self.c_min,
            "positions": self.positions,
            "enumeration_count": self.enumeration_count,
            "grid_step": self.grid_step,
            "lipschitz_bound": self.lipschitz_bound,
            "gap_bound": self.gap_bound,
            "feasible": self.feasible,
        }


def grid_values(budget: float, step: float) -> np.ndarray:
    if step <= 0:
        raise ValueError("grid_step must be positive")
    count = int(math.floor(2 * budget / step + 1e-9))
    return -budget + step * np.arange(count + 1)


def information_sets(ambiguity: AmbiguitySet, num_times: int):
    """Map each (measure, path, date) to an information-set id.

    Date 0 has a single set; date ``i >= 1`` has one set per distinct prefix
    ``(S_{t_1}, ..., S_{t_i})`` pooled over all measures.
    """
    labels = ["t0"]
    ids = [np.zeros((len(m), num_times), dtype=np.intp) for m in ambiguity.measures]
    for i in range(1, num_times):
        seen: dict[bytes, int] = {}
        for m, measure in enumerate(ambiguity.measures):
            for p, path in enumerate(measure.paths):
                key = np.ascontiguousarray(path[1 : i + 1]).tobytes()
                if key not in seen:
                    seen[key] = len(labels)
                    labels.append(f"t{i}:" + ",".join(f"{x:g}" for x in path[1 : i + 1].ravel()))
                ids[m][p, i] = seen[key]
    return labels, ids


def payoff_lipschitz(market: TinyMarket) -> float:
    """Max over paths of sum of |d profit / d position| bounds."""
    best = 0.0
    for measure in market.ambiguity:
        incr = np.abs(np.diff(measure.paths, axis=1))
        bound = incr + trade_rate_bound(market.costs, measure.paths)
        best = max(best, float(bound.sum(axis=(1, 2)).max()))
    return best


def enumerate_min_cost(
    market: TinyMarket,
    partition: Partition | None = None,
    grid_step: float | None = None,
    budget: float | None = None,
    *,
    max_strategies: int = DEFAULT_MAX_STRATEGIES,
    workers: int = 1,
) -> OracleResult:
    partition = partition if partition is not None else market.partition
    step = grid_step if grid_step is not None else market.grid_step
    bud = budget if budget is not None else market.budget
    cap = market.capital_bound if market.capital_bound is not None else bud
    n, a = market.spec.num_times, market.spec.num_assets
    values = grid_values(bud, step)
    labels, ids = information_sets(market.ambiguity, n)
    num_coords = len(labels) * a
    total = len(values) ** num_coords
    if total > max_strategies:
        raise EnumerationBudgetExceeded(
            f"{total} grid strategies exceed the budget of {max_strategies}"
        )

    measures = []
    for m, measure in enumerate(market.ambiguity.measures):
        assignment = assign_cells(partition, measure.terminal, measure.weights)
        cells = np.zeros((assignment.num_cells, len(measure)))
        cells[assignment.codes, np.arange(len(measure))] = measure.weights
        totals = cells.sum(axis=1)
        occupied = totals > 0
        cells = cells[occupied] / totals[occupied, None]
        # coordinate index of (path, date, asset)
        coord = ids[m][:, :, None] * a + np.arange(a)[None, None, :]
        measures.append((measure.paths, coord, cells, market.payoff_values(m)))

    def scan(lo: int, hi: int):
        flat = np.arange(lo, hi)
        digits = np.stack(np.unravel_index(flat, (len(values),) * num_coords), axis=1)
        grid = values[digits]  # (chunk, coords)
        required = np.full(hi - lo, -np.inf)
        for paths, coord, cells, phi in measures:
            positions = grid[:, coord]  # (chunk, P, n, a)
            profit = gross_profit_batch(positions, paths) - total_cost_batch(market.costs, positions, paths)
            cond = (phi - profit) @ cells.T  # (chunk, cells)
            required = np.maximum(required, cond.max(axis=1))
        best = int(np.argmin(required))
        return float(required[best]), lo + best

    bounds = [(lo, min(lo + CHUNK, total)) for lo in range(0, total, CHUNK)]
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(lambda b: scan(*b), bounds))
    else:
        results = [scan(*b) for b in bounds]
    # ties resolve to the lowest enumeration index
    req, index = min(results, key=lambda r: (r[0], r[1]))
    digits = np.unravel_index(index, (len(values),) * num_coords)
    grid = values[np.asarray(digits)].reshape(len(labels), a)
    c_min = max(req, -cap)
    return OracleResult(
        c_min=float(c_min),
        positions={lab: grid[k].tolist() for k, lab in enumerate(labels)},
        enumeration_count=total,
        grid_step=step,
        lipschitz_bound=payoff_lipschitz(market),
        feasible=req <= cap,
    )


@dataclass
class GapReport:
    trained_value: float
    c_min: float
    gap: float
    tolerance: float
    passed: bool

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def oracle_gap(trained, oracle: OracleResult, tolerance: float = 0.05) -> GapReport:
    """Compare a trained objective value (or `TrainResult`) with the oracle minimum."""
    value = float(getattr(trained, "value", trained))
    gap = value - oracle.c_min
    return GapReport(value, oracle.c_min, gap, tolerance, abs(gap) <= tolerance)
