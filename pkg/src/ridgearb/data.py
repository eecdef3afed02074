"""Price tables, bound estimation and scenario (ambiguity set) construction."""

from __future__ import annotations

import csv
import datetime as dt
import hashlib
import json
import logging
from dataclasses import asdict, dataclass
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

from ridgearb.errors import DataError
from ridgearb.market import AmbiguitySet, MarketSpec, ScenarioSet

log = logging.getLogger(__name__)

DEFAULT_MARGIN = 0.25


@dataclass
class PriceTable:
    dates: list[dt.date]
    tickers: list[str]
    values: np.ndarray
    dropped_rows: int = 0

    def __len__(self):
        return len(self.dates)

    def slice(self, start: dt.date | None = None, end: dt.date | None = None) -> "PriceTable":
        keep = [i for i, d in enumerate(self.dates) if (start is None or d >= start) and (end is None or d <= end)]
        return PriceTable([self.dates[i] for i in keep], list(self.tickers), self.values[keep], 0)

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(",".join(self.tickers).encode())
        h.update(",".join(d.isoformat() for d in self.dates).encode())
        h.update(np.ascontiguousarray(self.values).tobytes())
        return h.hexdigest()


def load_prices(file: str | Path) -> PriceTable:
    """Read a header-row CSV: ISO date column followed by one column per ticker.

    Rows with a blank or missing cell are dropped and counted.
    """
    path = Path(file)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or len(rows[0]) < 2:
        raise DataError(f"{path}: expected a header with a date column and at least one ticker")
    tickers = [t.strip() for t in rows[0][1:]]
    dates, values, dropped = [], [], 0
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(tickers) + 1:
            if len(row) < len(tickers) + 1:
                dropped += 1
                continue
            raise DataError(f"{path}:{lineno}: expected {len(tickers) + 1} columns, got {len(row)}")
        try:
            date = dt.date.fromisoformat(row[0].strip())
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: bad date {row[0]!r}") from exc
        cells = [c.strip() for c in row[1:]]
        if any(c == "" or c.lower() in ("nan", "na", "null") for c in cells):
            dropped += 1
            continue
        try:
            vals = [float(c) for c in cells]
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: non-numeric price") from exc
        if any(v <= 0 for v in vals):
            raise DataError(f"{path}:{lineno}: non-positive price")
        if dates and date <= dates[-1]:
            raise DataError(f"{path}:{lineno}: date {date} is not after {dates[-1]}")
        dates.append(date)
        values.append(vals)
    if dropped:
        log.warning("%s: dropped %d row(s) with missing values", path, dropped)
    if not dates:
        raise DataError(f"{path}: no usable rows")
    return PriceTable(dates, tickers, np.array(values, dtype=float), dropped)


def estimate_bounds(table: PriceTable, margin: float = DEFAULT_MARGIN) -> tuple[np.ndarray, np.ndarray]:
    if margin < 0:
        raise ValueError("margin must be non-negative")
    if len(table) == 0:
        raise DataError("empty price table")
    lower = table.values.min(axis=0) * (1.0 - margin)
    upper = table.values.max(axis=0) * (1.0 + margin)
    if np.any(lower >= upper):
        j = int(np.argmax(lower >= upper))
        raise DataError(f"degenerate bounds for {table.tickers[j]}: lower {lower[j]} >= upper {upper[j]}")
    return lower, upper


def market_from_table(table: PriceTable, horizon: int, margin: float = DEFAULT_MARGIN) -> MarketSpec:
    """Market whose spot is the latest observed price row."""
    lower, upper = estimate_bounds(table, margin)
    return MarketSpec(table.values.shape[1], horizon, lower, upper, table.values[-1])


class ScenarioMethod(str, Enum):
    SLIDING_WINDOW = "sliding_window"
    BLOCK_BOOTSTRAP = "block_bootstrap"


@dataclass
class ScenarioConfig:
    horizon: int = 2
    stride: int = 1
    method: ScenarioMethod = ScenarioMethod.SLIDING_WINDOW
    num_measures: int = 1
    paths_per_measure: int | None = None
    block_length: int = 5
    block_lengths: Sequence[int] | None = None
    seed: int = 0

    def __post_init__(self):
        self.method = ScenarioMethod(self.method)
        if self.horizon < 1 or self.num_measures < 1 or self.stride < 1 or self.block_length < 1:
            raise ValueError("horizon, stride, block_length and num_measures must be >= 1")
        if self.block_lengths is not None and len(self.block_lengths) != self.num_measures:
            raise ValueError("block_lengths needs one entry per measure")


def rebase(window: np.ndarray, spot: np.ndarray) -> np.ndarray:
    """Scale each asset column so that row 0 equals ``spot``."""
    return window * (spot / window[0])


def _clip(paths: np.ndarray, spec: MarketSpec, stats: dict) -> np.ndarray:
    body = paths[:, 1:, :]
    clipped = np.clip(body, spec.lower_bounds, spec.upper_bounds)
    changed = int(np.count_nonzero(clipped != body))
    stats["clipped"] += changed
    stats["entries"] += body.size
    out = paths.copy()
    out[:, 1:, :] = clipped
    out[:, 0, :] = spec.spot
    return out


def build_scenarios(table: PriceTable, config: ScenarioConfig, spec: MarketSpec | None = None) -> AmbiguitySet:
    """Ambiguity set of rebased windows or block-bootstrapped paths.

    Out-of-bounds prices are clipped with a warning; the clip rate is stored
    in ``provenance['clip_rate']``.
    """
    n = config.horizon
    if spec is None:
        spec = market_from_table(table, n)
    if spec.num_times != n or spec.num_assets != table.values.shape[1]:
        raise DataError("market spec does not match the table and horizon")
    values = table.values
    if len(values) < n + 1:
        raise DataError(f"need at least {n + 1} rows of history, have {len(values)}")
    stats = {"clipped": 0, "entries": 0}
    measures = []
    if config.method is ScenarioMethod.SLIDING_WINDOW:
        starts = np.arange(0, len(values) - n, config.stride)
        windows = np.stack([rebase(values[s : s + n + 1], spec.spot) for s in starts])
        groups = np.array_split(np.arange(len(windows)), config.num_measures)
        for g in groups:
            if len(g) == 0:
                raise DataError("not enough windows for the requested number of measures")
            if config.paths_per_measure is not None:
                g = g[-config.paths_per_measure :]
            measures.append(ScenarioSet(_clip(windows[g], spec, stats)))
    else:
        returns = values[1:] / values[:-1]
        count = config.paths_per_measure or 100
        seeds = np.random.SeedSequence(config.seed).spawn(config.num_measures)
        for m, ss in enumerate(seeds):
            rng = np.random.default_rng(ss)
            length = config.block_lengths[m] if config.block_lengths is not None else config.block_length
            length = min(length, len(returns))
            max_start = len(returns) - length
            num_blocks = int(np.ceil(n / length))
            starts = rng.integers(0, max_start + 1, size=(count, num_blocks))
            idx = (starts[:, :, None] + np.arange(length)).reshape(count, -1)[:, :n]
            path_returns = returns[idx]  # (count, n, a)
            growth = np.cumprod(path_returns, axis=1)
            paths = np.concatenate(
                [np.broadcast_to(spec.spot, (count, 1, spec.num_assets)), spec.spot * growth], axis=1
            )
            measures.append(ScenarioSet(_clip(paths, spec, stats)))
    clip_rate = stats["clipped"] / max(stats["entries"], 1)
    if stats["clipped"]:
        log.warning("clipped %d of %d scenario prices to bounds (%.3f%%)", stats["clipped"], stats["entries"], 100 * clip_rate)
    ambiguity = AmbiguitySet(measures)
    ambiguity.provenance = {
        "source_digest": table.digest(),
        "config": {**asdict(config), "method": config.method.value},
        "clip_rate": clip_rate,
    }
    return ambiguity


def synthetic_paths(
    num_assets: int = 10,
    num_times: int = 2,
    num_paths: int = 200,
    *,
    drift: float | Sequence[float] = 1.0,
    noise: float = 1.0,
    spread_vol: float = 2.0,
    reversion: float = 0.8,
    spot: float = 100.0,
    half_width: float = 50.0,
    seed: int = 0,
) -> tuple[MarketSpec, np.ndarray]:
    """Drifting assets paired by a mean-reverting spread.

    Asset ``2k`` carries ``+X_t`` and asset ``2k + 1`` carries ``-X_t``, where
    ``X`` is an AR(1) spread started at 0 that reverts by ``reversion`` per step.
    Default drifts alternate ``+d`` and ``-1.25 d`` so holding everything loses.
    """
    if np.ndim(drift) == 0:
        signs = np.where(np.arange(num_assets) % 2 == 0, 1.0, -1.25)
        mu = float(drift) * signs
    else:
        mu = np.asarray(drift, dtype=float)
    rng = np.random.default_rng(seed)
    pairs = (num_assets + 1) // 2
    spread = np.zeros((num_paths, num_times + 1, pairs))
    for t in range(num_times):
        spread[:, t + 1] = (1.0 - reversion) * spread[:, t] + spread_vol * rng.standard_normal((num_paths, pairs))
    loading = np.zeros((pairs, num_assets))
    for j in range(num_assets):
        loading[j // 2, j] = 1.0 if j % 2 == 0 else -1.0
    shocks = noise * rng.standard_normal((num_paths, num_times, num_assets))
    walk = np.concatenate([np.zeros((num_paths, 1, num_assets)), np.cumsum(shocks, axis=1)], axis=1)
    trend = mu[None, None, :] * np.arange(num_times + 1)[None, :, None]
    paths = spot + trend + walk + spread @ loading
    spec = MarketSpec(
        num_assets,
        num_times,
        np.full(num_assets, spot - half_width),
        np.full(num_assets, spot + half_width),
        np.full(num_assets, spot),
    )
    paths = np.clip(paths, spec.lower_bounds, spec.upper_bounds)
    paths[:, 0, :] = spot
    return spec, paths


@dataclass
class SyntheticConfig:
    num_assets: int = 10
    num_times: int = 2
    paths_per_measure: int = 200
    num_measures: int = 2
    drift: float = 1.0
    noise: float = 1.0
    spread_vol: float = 2.0
    reversion: float = 0.8
    drift_ambiguity: float = 0.2
    seed: int = 0


def synthetic_scenarios(config: SyntheticConfig, seed: int | None = None) -> tuple[MarketSpec, AmbiguitySet]:
    """Ambiguity set whose measures differ in drift scale by ``±drift_ambiguity``."""
    seed = config.seed if seed is None else seed
    seeds = np.random.SeedSequence(seed).generate_state(config.num_measures)
    scales = np.linspace(1.0 - config.drift_ambiguity, 1.0 + config.drift_ambiguity, config.num_measures)
    if config.num_measures == 1:
        scales = np.ones(1)
    measures, spec = [], None
    for scale, s in zip(scales, seeds):
        spec, paths = synthetic_paths(
            config.num_assets, config.num_times, config.paths_per_measure,
            drift=config.drift * scale, noise=config.noise, spread_vol=config.spread_vol,
            reversion=config.reversion, seed=int(s),
        )
        measures.append(ScenarioSet(paths))
    ambiguity = AmbiguitySet(measures)
    ambiguity.provenance = {"synthetic": asdict(config), "seed": seed}
    return spec, ambiguity


def save_scenarios(path: str | Path, spec: MarketSpec, ambiguity: AmbiguitySet) -> None:
    doc = {
        "version": 1,
        "spec": spec.to_dict(),
        "measures": [{"paths": m.paths.tolist(), "weights": m.weights.tolist()} for m in ambiguity],
        "provenance": getattr(ambiguity, "provenance", {}),
    }
    Path(path).write_text(json.dumps(doc))


def load_scenarios(path: str | Path) -> tuple[MarketSpec, AmbiguitySet]:
    doc = json.loads(Path(path).read_text())
    spec = MarketSpec.from_dict(doc["spec"])
    ambiguity = AmbiguitySet([ScenarioSet(np.asarray(m["paths"], dtype=float), m.get("weights")) for m in doc["measures"]])
    ambiguity.provenance = doc.get("provenance", {})
    return spec, ambiguity
