"""Bounded multi-asset discrete-time market and gross trading gains.

A path is stored as an ``(n + 1, a)`` array whose row 0 is the spot, so
increments and the cost at ``t_0`` come from one array.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from ridgearb.errors import BoundViolation, ShapeError


@dataclass(frozen=True)
class MarketSpec:
    """Asset count, time grid and per-asset price box."""

    num_assets: int
    num_times: int
    lower_bounds: np.ndarray
    upper_bounds: np.ndarray
    spot: np.ndarray

    def __post_init__(self):
        for name in ("lower_bounds", "upper_bounds", "spot"):
            arr = np.array(getattr(self, name), dtype=float).reshape(-1)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.num_assets < 1 or self.num_times < 1:
            raise ValueError("num_assets and num_times must be positive")
        for name in ("lower_bounds", "upper_bounds", "spot"):
            if getattr(self, name).shape != (self.num_assets,):
                raise ShapeError(f"{name} must have length {self.num_assets}")
        if not np.all(self.lower_bounds < self.upper_bounds):
            j = int(np.argmin(self.lower_bounds < self.upper_bounds))
            raise ValueError(f"lower bound must be below upper bound for asset {j}")
        if not np.all((self.lower_bounds <= self.spot) & (self.spot <= self.upper_bounds)):
            raise ValueError("spot lies outside the price bounds")

    @property
    def path_shape(self) -> tuple[int, int]:
        return (self.num_times + 1, self.num_assets)

    def to_dict(self) -> dict:
        return {
            "num_assets": self.num_assets,
            "num_times": self.num_times,
            "lower_bounds": self.lower_bounds.tolist(),
            "upper_bounds": self.upper_bounds.tolist(),
            "spot": self.spot.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MarketSpec":
        return cls(
            num_assets=int(d["num_assets"]),
            num_times=int(d["num_times"]),
            lower_bounds=d["lower_bounds"],
            upper_bounds=d["upper_bounds"],
            spot=d["spot"],
        )

    def __eq__(self, other):
        if not isinstance(other, MarketSpec):
            return NotImplemented
        return (
            self.num_assets == other.num_assets
            and self.num_times == other.num_times
            and np.array_equal(self.lower_bounds, other.lower_bounds)
            and np.array_equal(self.upper_bounds, other.upper_bounds)
            and np.array_equal(self.spot, other.spot)
        )

    __hash__ = None


@dataclass(frozen=True)
class PricePath:
    """One realized path; ``prices[i]`` is the price vector at ``t_i``."""

    prices: np.ndarray

    def __post_init__(self):
        arr = np.array(self.prices, dtype=float)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2:
            raise ShapeError("a price path must be a 2-d array (times x assets)")
        arr.setflags(write=False)
        object.__setattr__(self, "prices", arr)

    @property
    def num_times(self) -> int:
        return self.prices.shape[0] - 1

    @property
    def terminal(self) -> np.ndarray:
        return self.prices[-1]


@dataclass(frozen=True)
class PositionSchedule:
    """Positions ``Delta_i^j`` for ``i = 0..n-1``, one row per trading date."""

    positions: np.ndarray

    def __post_init__(self):
        arr = np.array(self.positions, dtype=float)
        if arr.ndim == 1:
            arr = arr[:, None]
        arr.setflags(write=False)
        object.__setattr__(self, "positions", arr)


@dataclass(frozen=True)
class PathValidity:
    valid: bool
    reason: str = ""
    index: tuple[int, int] | None = None

    def __bool__(self):
        return self.valid


def _as_prices(path) -> np.ndarray:
    if isinstance(path, PricePath):
        return path.prices
    return np.asarray(path, dtype=float)


def _as_positions(schedule) -> np.ndarray:
    if isinstance(schedule, PositionSchedule):
        return schedule.positions
    return np.asarray(schedule, dtype=float)


def validate_path(spec: MarketSpec, path: PricePath | np.ndarray) -> PathValidity:
    """Check a path against the spot and the price box.

    Raises ``ShapeError`` if the path does not have ``(n + 1, a)`` shape.
    Otherwise returns a `PathValidity` naming the first offending ``(i, j)``.
    """
    prices = _as_prices(path)
    if prices.shape != spec.path_shape:
        raise ShapeError(f"path shape {prices.shape} != expected {spec.path_shape}")
    if not np.array_equal(prices[0], spec.spot):
        j = int(np.flatnonzero(prices[0] != spec.spot)[0])
        return PathValidity(False, "row 0 differs from spot", (0, j))
    body = prices[1:]
    bad = ~((body >= spec.lower_bounds) & (body <= spec.upper_bounds))
    if bad.any():
        i, j = np.argwhere(bad)[0]
        return PathValidity(False, "price outside bounds", (int(i) + 1, int(j)))
    return PathValidity(True)


def require_valid(spec: MarketSpec, path) -> None:
    result = validate_path(spec, path)
    if not result:
        raise BoundViolation(f"invalid path: {result.reason} at {result.index}", result.index)


def gross_profit_batch(positions: np.ndarray, prices: np.ndarray) -> np.ndarray:
    """Vectorised gross gain over leading batch axes.

    ``positions`` has shape ``(..., n, a)`` and ``prices`` ``(..., n + 1, a)``;
    leading axes broadcast.
    """
    increments = np.diff(prices, axis=-2)
    return np.sum(positions * increments, axis=(-2, -1))


def gross_profit(schedule: PositionSchedule | np.ndarray, path: PricePath | np.ndarray) -> float:
    """Sum over assets and dates of position times the next price increment."""
    positions = _as_positions(schedule)
    prices = _as_prices(path)
    if positions.ndim != 2 or prices.ndim != 2:
        raise ShapeError("schedule and path must be 2-d")
    if positions.shape[0] + 1 != prices.shape[0] or positions.shape[1] != prices.shape[1]:
        raise ShapeError(
            f"schedule shape {positions.shape} incompatible with path shape {prices.shape}"
        )
    return float(gross_profit_batch(positions, prices))


@dataclass
class ScenarioSet:
    """Finitely supported measure: weighted paths stacked as ``(P, n + 1, a)``."""

    paths: np.ndarray
    weights: np.ndarray | None = None

    def __post_init__(self):
        if isinstance(self.paths, (list, tuple)):
            self.paths = np.stack([_as_prices(p) for p in self.paths]) if self.paths else np.empty((0,))
        self.paths = np.asarray(self.paths, dtype=float)
        if self.paths.ndim == 2:
            self.paths = self.paths[:, :, None]
        if self.paths.ndim != 3 or self.paths.shape[0] == 0:
            raise ValueError("a scenario set needs at least one (n+1) x a path")
        count = self.paths.shape[0]
        if self.weights is None:
            self.weights = np.full(count, 1.0 / count)
        self.weights = np.asarray(self.weights, dtype=float).reshape(-1)
        if self.weights.shape != (count,):
            raise ShapeError("one weight per path required")
        if np.any(self.weights < 0):
            raise ValueError("weights must be non-negative")
        if abs(self.weights.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {self.weights.sum()!r}, not 1")

    def __len__(self):
        return self.paths.shape[0]

    def path(self, idx: int) -> PricePath:
        return PricePath(self.paths[idx])

    def __iter__(self) -> Iterable[PricePath]:
        return (PricePath(p) for p in self.paths)

    @property
    def terminal(self) -> np.ndarray:
        return self.paths[:, -1, :]

    def validate(self, spec: MarketSpec) -> None:
        for idx, p in enumerate(self.paths):
            result = validate_path(spec, p)
            if not result:
                raise BoundViolation(
                    f"path {idx}: {result.reason} at {result.index}", (idx,) + result.index
                )


@dataclass
class AmbiguitySet:
    """A finite, non-empty collection of scenario sets."""

    measures: list[ScenarioSet] = field(default_factory=list)
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.measures = list(self.measures)
        if not self.measures:
            raise ValueError("ambiguity set must contain at least one measure")
        shapes = {m.paths.shape[1:] for m in self.measures}
        if len(shapes) != 1:
            raise ShapeError(f"measures disagree on path shape: {sorted(shapes)}")

    def __len__(self):
        return len(self.measures)

    def __iter__(self):
        return iter(self.measures)

    def validate(self, spec: MarketSpec) -> None:
        for m in self.measures:
            m.validate(spec)


def stack_paths(paths: Sequence) -> np.ndarray:
    return np.stack([_as_prices(p) for p in paths])
