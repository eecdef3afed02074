"""Ridgelet-network trading strategies with exact reverse-mode gradients.

A strategy holds the initial capital ``c``, a constant opening position
``delta0`` and one independent network per intermediate date. Network ``i``
reads the flattened prefix ``(S_{t_1}, ..., S_{t_i})`` and its raw output is
squashed as ``B * tanh(raw / B)`` so every emitted position lies strictly
inside ``(-B, B)``.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ridgearb.activations import Activation
from ridgearb.errors import NonFiniteError, ShapeError
from ridgearb.market import MarketSpec, PositionSchedule, PricePath, _as_prices

NORM_EPS = 1e-5
OUTPUT_INIT_SCALE = 0.01
DEFAULT_HIDDEN_MULTIPLIERS = (32, 64, 128)


def strict_bound(budget: float) -> float:
    """Largest float strictly below ``budget``."""
    return float(np.nextafter(budget, 0.0))


@dataclass
class InputNorm:
    """Per-feature standardisation with running statistics."""

    mean: np.ndarray
    var: np.ndarray
    eps: float = NORM_EPS
    frozen: bool = False

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float)
        self.var = np.asarray(self.var, dtype=float)
        if np.any(self.var < 0):
            raise ValueError("normalisation variances must be non-negative")

    @classmethod
    def identity(cls, dim: int) -> "InputNorm":
        return cls(np.zeros(dim), np.full(dim, 1.0 - NORM_EPS))

    @property
    def scale(self) -> np.ndarray:
        return 1.0 / np.sqrt(self.var + self.eps)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return (x - self.mean) * self.scale

    def fit(self, x: np.ndarray, weights: np.ndarray | None = None) -> None:
        mean = np.average(x, axis=0, weights=weights)
        var = np.average((x - mean) ** 2, axis=0, weights=weights)
        self.mean, self.var = mean, var

    def update(self, x: np.ndarray, momentum: float = 0.1, weights=None) -> None:
        if self.frozen:
            return
        mean = np.average(x, axis=0, weights=weights)
        var = np.average((x - mean) ** 2, axis=0, weights=weights)
        self.mean = (1.0 - momentum) * self.mean + momentum * mean
        self.var = (1.0 - momentum) * self.var + momentum * var

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "var": self.var.tolist(), "eps": self.eps, "frozen": self.frozen}

    @classmethod
    def from_dict(cls, d: dict) -> "InputNorm":
        return cls(d["mean"], d["var"], d.get("eps", NORM_EPS), d.get("frozen", False))


@dataclass
class RidgeletLayer:
    """``activation(weights @ x + biases)``: one ridgelet per output unit."""

    weights: np.ndarray
    biases: np.ndarray
    activation: Activation

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.biases = np.asarray(self.biases, dtype=float)
        if self.weights.ndim != 2 or self.biases.shape != (self.weights.shape[0],):
            raise ShapeError("layer weights must be (out, in) with one bias per output")


@dataclass
class StrategyNet:
    input_dim: int
    layers: list[RidgeletLayer]
    output_weights: np.ndarray
    output_bias: np.ndarray
    input_norm: InputNorm

    def __post_init__(self):
        self.output_weights = np.asarray(self.output_weights, dtype=float)
        self.output_bias = np.asarray(self.output_bias, dtype=float)
        width = self.input_dim
        for layer in self.layers:
            if layer.weights.shape[1] != width:
                raise ShapeError(f"layer expects {layer.weights.shape[1]} inputs, got {width}")
            width = layer.weights.shape[0]
        if self.output_weights.shape[1] != width:
            raise ShapeError("output weights do not match the last hidden width")
        if self.input_norm.mean.shape != (self.input_dim,):
            raise ShapeError("input normalisation has the wrong dimension")

    def parameters(self) -> list[np.ndarray]:
        out = []
        for layer in self.layers:
            out += [layer.weights, layer.biases]
        return out + [self.output_weights, self.output_bias]

    def forward(self, x: np.ndarray):
        if x.shape[-1] != self.input_dim:
            raise ShapeError(f"net expects input dim {self.input_dim}, got {x.shape[-1]}")
        h = self.input_norm(x)
        cache = [h]
        for idx, layer in enumerate(self.layers):
            z = h @ layer.weights.T + layer.biases
            h = layer.activation(z)
            if not np.all(np.isfinite(h)):
                raise NonFiniteError(f"non-finite activation in layer {idx}", layer=idx)
            cache.append((z, h))
        raw = h @ self.output_weights.T + self.output_bias
        if not np.all(np.isfinite(raw)):
            raise NonFiniteError("non-finite output layer", layer=len(self.layers))
        return raw, cache

    def backward(self, cache, g_raw: np.ndarray) -> list[np.ndarray]:
        """Parameter gradients (summed over the batch) in `parameters` order."""
        h_last = cache[-1][1] if len(cache) > 1 else cache[0]
        g_out_w = g_raw.T @ h_last
        g_out_b = g_raw.sum(axis=0)
        g_h = g_raw @ self.output_weights
        grads: list[np.ndarray] = []
        for idx in range(len(self.layers) - 1, -1, -1):
            layer = self.layers[idx]
            z, _ = cache[idx + 1]
            h_prev = cache[idx][1] if idx > 0 else cache[0]
            g_z = g_h * layer.activation.grad(z)
            if not np.all(np.isfinite(g_z)):
                raise NonFiniteError(f"non-finite gradient in layer {idx}", layer=idx)
            grads = [g_z.T @ h_prev, g_z.sum(axis=0)] + grads
            g_h = g_z @ layer.weights
        return grads + [g_out_w, g_out_b]

    def to_dict(self) -> dict:
        return {
            "input_dim": self.input_dim,
            "layers": [
                {
                    "weights": layer.weights.tolist(),
                    "biases": layer.biases.tolist(),
                    "activation": layer.activation.to_dict(),
                }
                for layer in self.layers
            ],
            "output_weights": self.output_weights.tolist(),
            "output_bias": self.output_bias.tolist(),
            "input_norm": self.input_norm.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StrategyNet":
        layers = [
            RidgeletLayer(
                np.array(ld["weights"], dtype=float).reshape(len(ld["biases"]), -1),
                ld["biases"],
                Activation.from_dict(ld["activation"]),
            )
            for ld in d["layers"]
        ]
        out_b = np.asarray(d["output_bias"], dtype=float)
        return cls(
            input_dim=int(d["input_dim"]),
            layers=layers,
            output_weights=np.array(d["output_weights"], dtype=float).reshape(out_b.size, -1),
            output_bias=out_b,
            input_norm=InputNorm.from_dict(d["input_norm"]),
        )


def layer_activation(name: str, width: int) -> Activation:
    if name.lower() == "hybrid":
        return Activation.hybrid(width)
    return Activation(name)


def init_net(
    input_dim: int,
    output_dim: int,
    hidden_widths: Sequence[int],
    activation: str,
    rng: np.random.Generator,
) -> StrategyNet:
    layers = []
    fan_in = input_dim
    for width in hidden_widths:
        limit = np.sqrt(6.0 / (fan_in + width))
        layers.append(
            RidgeletLayer(
                rng.uniform(-limit, limit, size=(width, fan_in)),
                np.zeros(width),
                layer_activation(activation, width),
            )
        )
        fan_in = width
    limit = np.sqrt(6.0 / (fan_in + output_dim))
    out_w = OUTPUT_INIT_SCALE * rng.uniform(-limit, limit, size=(output_dim, fan_in))
    return StrategyNet(input_dim, layers, out_w, np.zeros(output_dim), InputNorm.identity(input_dim))


def prefix_features(prices: np.ndarray, i: int) -> np.ndarray:
    """Flatten ``S_{t_1}..S_{t_i}`` (time-major) from ``(..., n + 1, a)`` prices."""
    block = prices[..., 1 : i + 1, :]
    return block.reshape(block.shape[:-2] + (-1,))


@dataclass
class GradientBundle:
    """Flat gradient aligned with `RidgeletStrategy.flat_params`."""

    values: np.ndarray
    num_assets: int

    @property
    def c(self) -> float:
        return float(self.values[0])

    @property
    def delta0(self) -> np.ndarray:
        return self.values[1 : 1 + self.num_assets]

    def __len__(self):
        return self.values.size


@dataclass
class ConstraintReport:
    capital_ok: bool
    delta0_ok: bool
    positions_ok: bool
    max_abs_position: float
    empirical_lipschitz: list[float]
    lipschitz_bound: float
    lipschitz_ok: bool
    messages: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.capital_ok and self.delta0_ok and self.positions_ok


@dataclass
class RidgeletStrategy:
    spec: MarketSpec
    c: float
    delta0: np.ndarray
    nets: list[StrategyNet]
    budget: float
    lipschitz: float = 1.0
    capital_bound: float | None = None

    def __post_init__(self):
        self.c = float(self.c)
        self.delta0 = np.asarray(self.delta0, dtype=float).reshape(-1)
        if self.budget <= 0 or self.lipschitz <= 0:
            raise ValueError("budget and lipschitz must be positive")
        if self.capital_bound is None:
            self.capital_bound = float(self.budget)
        a, n = self.spec.num_assets, self.spec.num_times
        if self.delta0.shape != (a,):
            raise ShapeError(f"delta0 must have length {a}")
        if len(self.nets) != n - 1:
            raise ShapeError(f"need {n - 1} step networks, got {len(self.nets)}")
        for i, net in enumerate(self.nets, start=1):
            if net.input_dim != i * a or net.output_weights.shape[0] != a:
                raise ShapeError(f"net {i} must map {i * a} inputs to {a} positions")

    @classmethod
    def initialize(
        cls,
        spec: MarketSpec,
        budget: float,
        *,
        hidden_widths: Sequence[int] | None = None,
        activation: str = "relu",
        seed: int = 0,
        lipschitz: float = 1.0,
        capital_bound: float | None = None,
    ) -> "RidgeletStrategy":
        a = spec.num_assets
        if hidden_widths is None:
            hidden_widths = [m * a for m in DEFAULT_HIDDEN_MULTIPLIERS]
        rng = np.random.default_rng(seed)
        nets = [init_net(i * a, a, hidden_widths, activation, rng) for i in range(1, spec.num_times)]
        return cls(spec, 0.0, np.zeros(a), nets, budget, lipschitz, capital_bound)

    @classmethod
    def zeros_like(cls, other: "RidgeletStrategy") -> "RidgeletStrategy":
        s = other.copy()
        s.set_flat(np.zeros(s.num_params))
        return s

    def copy(self) -> "RidgeletStrategy":
        return copy.deepcopy(self)

    # parameter vector

    def parameters(self) -> list[np.ndarray]:
        out = []
        for net in self.nets:
            out += net.parameters()
        return out

    @property
    def num_params(self) -> int:
        return 1 + self.delta0.size + sum(p.size for p in self.parameters())

    def flat_params(self) -> np.ndarray:
        parts = [np.array([self.c]), self.delta0] + [p.ravel() for p in self.parameters()]
        return np.concatenate(parts)

    def set_flat(self, vec: np.ndarray) -> None:
        vec = np.asarray(vec, dtype=float)
        if vec.size != self.num_params:
            raise ShapeError(f"expected {self.num_params} parameters, got {vec.size}")
        self.c = float(vec[0])
        a = self.delta0.size
        self.delta0 = vec[1 : 1 + a].copy()
        offset = 1 + a
        for net in self.nets:
            for layer in net.layers:
                for attr in ("weights", "biases"):
                    cur = getattr(layer, attr)
                    setattr(layer, attr, vec[offset : offset + cur.size].reshape(cur.shape).copy())
                    offset += cur.size
            for attr in ("output_weights", "output_bias"):
                cur = getattr(net, attr)
                setattr(net, attr, vec[offset : offset + cur.size].reshape(cur.shape).copy())
                offset += cur.size

    def project(self) -> None:
        """Clip ``c`` to the capital bound and ``delta0`` strictly inside the budget."""
        self.c = float(np.clip(self.c, -self.capital_bound, self.capital_bound))
        lim = strict_bound(self.budget)
        self.delta0 = np.clip(self.delta0, -lim, lim)

    # evaluation

    def positions_batch(self, prices: np.ndarray, *, keep_cache: bool = False):
        """Positions ``(P, n, a)`` for stacked paths ``(P, n + 1, a)``."""
        prices = np.asarray(prices, dtype=float)
        single = prices.ndim == 2
        if single:
            prices = prices[None]
        p_count, rows, a = prices.shape
        n = self.spec.num_times
        if rows != n + 1 or a != self.spec.num_assets:
            raise ShapeError(f"paths of shape {prices.shape[1:]} do not match spec {self.spec.path_shape}")
        out = np.empty((p_count, n, a))
        out[:, 0, :] = self.delta0
        lim = strict_bound(self.budget)
        caches = []
        for i, net in enumerate(self.nets, start=1):
            raw, cache = net.forward(prefix_features(prices, i))
            t = np.tanh(raw / self.budget)
            out[:, i, :] = np.clip(self.budget * t, -lim, lim)
            if keep_cache:
                caches.append((cache, t))
        if single:
            out = out[0]
        return (out, caches) if keep_cache else out

    def backward_batch(self, caches, upstream: np.ndarray, d_c: float = 0.0) -> np.ndarray:
        """Flat gradient of ``sum(upstream * positions) + d_c * c``."""
        upstream = np.asarray(upstream, dtype=float)
        if upstream.ndim == 2:
            upstream = upstream[None]
        parts = [np.array([d_c]), upstream[:, 0, :].sum(axis=0)]
        for i, (net, (cache, t)) in enumerate(zip(self.nets, caches), start=1):
            g_raw = upstream[:, i, :] * (1.0 - t * t)
            parts += [g.ravel() for g in net.backward(cache, g_raw)]
        return np.concatenate(parts)

    def to_dict(self) -> dict:
        return {
            "spec": self.spec.to_dict(),
            "budget": self.budget,
            "capital_bound": self.capital_bound,
            "lipschitz": self.lipschitz,
            "c": self.c,
            "delta0": self.delta0.tolist(),
            "nets": [net.to_dict() for net in self.nets],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RidgeletStrategy":
        return cls(
            spec=MarketSpec.from_dict(d["spec"]),
            c=d["c"],
            delta0=d["delta0"],
            nets=[StrategyNet.from_dict(nd) for nd in d["nets"]],
            budget=float(d["budget"]),
            lipschitz=float(d.get("lipschitz", 1.0)),
            capital_bound=d.get("capital_bound"),
        )


def eval_positions(strategy: RidgeletStrategy, path: PricePath | np.ndarray) -> PositionSchedule:
    return PositionSchedule(strategy.positions_batch(_as_prices(path)))


def eval_with_gradients(
    strategy: RidgeletStrategy, path: PricePath | np.ndarray, upstream: np.ndarray
) -> GradientBundle:
    """Gradient of ``sum(upstream * positions)`` with respect to every parameter."""
    upstream = np.asarray(upstream, dtype=float)
    expected = (strategy.spec.num_times, strategy.spec.num_assets)
    if upstream.shape != expected:
        raise ShapeError(f"upstream shape {upstream.shape} != {expected}")
    _, caches = strategy.positions_batch(_as_prices(path)[None], keep_cache=True)
    return GradientBundle(strategy.backward_batch(caches, upstream[None]), strategy.spec.num_assets)


def _max_pairwise_slope(x: np.ndarray, y: np.ndarray) -> float:
    """Largest ``|y_k(u) - y_k(v)| / ||u - v||`` over distinct sample pairs."""
    best = 0.0
    for idx in range(len(x) - 1):
        dx = np.linalg.norm(x[idx + 1 :] - x[idx], axis=1)
        dy = np.abs(y[idx + 1 :] - y[idx]).max(axis=1)
        mask = dx > 0
        if mask.any():
            best = max(best, float((dy[mask] / dx[mask]).max()))
    return best


def check_constraints(strategy: RidgeletStrategy, sample_paths) -> ConstraintReport:
    """Report on the budget constraints and an empirical Lipschitz estimate per net."""
    prices = np.asarray(
        sample_paths.paths if hasattr(sample_paths, "paths") else [_as_prices(p) for p in sample_paths],
        dtype=float,
    )
    if prices.ndim == 2:
        prices = prices[None]
    messages = []
    capital_ok = abs(strategy.c) <= strategy.capital_bound
    if not capital_ok:
        messages.append(f"|c| = {abs(strategy.c)} exceeds capital bound {strategy.capital_bound}")
    delta0_ok = bool(np.all(np.abs(strategy.delta0) <= strategy.budget))
    if not delta0_ok:
        messages.append("an opening position exceeds the budget")
    max_pos = 0.0
    lips = []
    if prices.size:
        positions = strategy.positions_batch(prices)
        max_pos = float(np.abs(positions).max())
        for i in range(1, strategy.spec.num_times):
            lips.append(_max_pairwise_slope(prefix_features(prices, i), positions[:, i, :]))
    positions_ok = max_pos <= strategy.budget
    if not positions_ok:
        messages.append(f"max |position| {max_pos} exceeds budget {strategy.budget}")
    lip_ok = all(v <= strategy.lipschitz for v in lips)
    if not lip_ok:
        messages.append(f"empirical Lipschitz {max(lips):.4g} above advisory {strategy.lipschitz}")
    return ConstraintReport(
        capital_ok, delta0_ok, positions_ok, max_pos, lips, strategy.lipschitz, lip_ok, messages
    )
