"""Random upper-corner box partitions of the terminal price space.

Box ``l`` is ``(p^(l), U_bar]``, a product of half-open intervals whose lower
corner is drawn uniformly from the price box. A terminal price gets a bit
signature whose bit ``l`` says whether it lies in box ``l``; signature
classes are the atoms of the generated sigma-algebra on the sample.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ridgearb.errors import BoundViolation, ShapeError
from ridgearb.market import MarketSpec


@dataclass(frozen=True)
class Partition:
    corners: np.ndarray  # (i, a)
    upper_bounds: np.ndarray
    rng_seed: int | None = None

    def __post_init__(self):
        upper = np.asarray(self.upper_bounds, dtype=float).reshape(-1)
        corners = np.asarray(self.corners, dtype=float).reshape(-1, upper.size)
        corners.setflags(write=False)
        upper.setflags(write=False)
        object.__setattr__(self, "corners", corners)
        object.__setattr__(self, "upper_bounds", upper)

    def __len__(self):
        return self.corners.shape[0]

    def restrict(self, count: int) -> "Partition":
        """The partition generated by the first ``count`` boxes."""
        return Partition(self.corners[:count], self.upper_bounds, self.rng_seed)

    @classmethod
    def trivial(cls, spec: MarketSpec) -> "Partition":
        return cls(np.empty((0, spec.num_assets)), spec.upper_bounds, None)

    def to_dict(self) -> dict:
        return {"seed": self.rng_seed, "corners": self.corners.tolist(), "upper_bounds": self.upper_bounds.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Partition":
        return cls(d["corners"], d["upper_bounds"], d.get("seed"))


def generate_partition(spec: MarketSpec, count: int, seed: int) -> Partition:
    """Draw ``count`` lower corners independently and uniformly in the price box."""
    if count < 0:
        raise ValueError("partition count must be non-negative")
    rng = np.random.default_rng(seed)
    corners = rng.uniform(spec.lower_bounds, spec.upper_bounds, size=(count, spec.num_assets))
    return Partition(corners, spec.upper_bounds, seed)


@dataclass
class CellAssignment:
    """Signature per path and the resulting cells.

    ``codes[p]`` indexes ``signatures``; ``cells`` maps a signature string to
    ``(member indices, total weight)``.
    """

    path_signatures: list[str]
    codes: np.ndarray
    signatures: list[str]
    cells: dict[str, tuple[np.ndarray, float]]

    @property
    def num_cells(self) -> int:
        return len(self.signatures)

    def cell_weights(self, weights: np.ndarray) -> np.ndarray:
        return np.bincount(self.codes, weights=weights, minlength=self.num_cells)


def membership(partition: Partition, terminal: np.ndarray) -> np.ndarray:
    """Boolean ``(P, i)`` matrix: path ``p`` lies in box ``l``."""
    if len(partition) == 0:
        return np.zeros((terminal.shape[0], 0), dtype=bool)
    inside = terminal[:, None, :] > partition.corners[None, :, :]
    inside &= terminal[:, None, :] <= partition.upper_bounds
    return inside.all(axis=2)


def assign_cells(
    partition: Partition,
    terminal_prices: np.ndarray,
    weights: np.ndarray | None = None,
    lower_bounds: np.ndarray | None = None,
) -> CellAssignment:
    terminal = np.asarray(terminal_prices, dtype=float)
    if terminal.ndim == 1:
        terminal = terminal[:, None] if partition.upper_bounds.size == 1 else terminal[None, :]
    if terminal.shape[1] != partition.upper_bounds.size:
        raise ShapeError("terminal prices do not match the partition dimension")
    if terminal.shape[0] == 0:
        raise ValueError("no terminal prices to assign")
    above = terminal > partition.upper_bounds
    if lower_bounds is not None:
        above |= terminal < np.asarray(lower_bounds, dtype=float)
    if above.any():
        p, j = np.argwhere(above)[0]
        raise BoundViolation(f"terminal price of path {p} asset {j} is out of bounds", (int(p), int(j)))
    bits = membership(partition, terminal)
    path_sigs = ["".join("1" if b else "0" for b in row) for row in bits]
    signatures, codes = np.unique(np.array(path_sigs, dtype=object), return_inverse=True)
    signatures = [str(s) for s in signatures]
    codes = codes.reshape(-1).astype(np.intp)
    if weights is None:
        weights = np.full(terminal.shape[0], 1.0 / terminal.shape[0])
    cell_w = np.bincount(codes, weights=weights, minlength=len(signatures))
    cells = {sig: (np.flatnonzero(codes == k), float(cell_w[k])) for k, sig in enumerate(signatures)}
    return CellAssignment(path_sigs, codes, signatures, cells)


def cell_means(values: np.ndarray, codes: np.ndarray, weights: np.ndarray, num_cells: int):
    """Weighted mean and total weight per cell; zero-weight cells get mean 0.

    Means are accumulated as offsets from the first member of each cell so
    that a cell of identical values returns that value bit for bit.
    """
    totals = np.bincount(codes, weights=weights, minlength=num_cells)
    ref = np.zeros(num_cells)
    present, first = np.unique(codes, return_index=True)
    ref[present] = values[first]
    sums = np.bincount(codes, weights=weights * (values - ref[codes]), minlength=num_cells)
    offsets = np.divide(sums, totals, out=np.zeros(num_cells), where=totals > 0)
    means = np.where(totals > 0, ref + offsets, 0.0)
    return means, totals


def conditional_expectation(values, assignment: CellAssignment, weights) -> np.ndarray:
    """Replace each value by the weighted mean of its cell."""
    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if values.size == 0:
        raise ValueError("empty input")
    if values.shape != assignment.codes.shape or weights.shape != values.shape:
        raise ShapeError("values, weights and assignment must have equal length")
    means, totals = cell_means(values, assignment.codes, weights, assignment.num_cells)
    occupied = np.bincount(assignment.codes, minlength=assignment.num_cells) > 0
    if np.any(occupied & (totals <= 0)):
        raise ValueError("an occupied cell has zero total weight")
    return means[assignment.codes]
