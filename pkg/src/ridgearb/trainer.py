"""Adam minimisation of the penalized objective over an escalating k ladder."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass
from typing import Callable, Sequence

import numpy as np

from ridgearb.costs import CostParams
from ridgearb.errors import DivergenceError, NonFiniteError, ShapeError
from ridgearb.market import AmbiguitySet, MarketSpec
from ridgearb.objective import MeasureData, ObjectiveReport, Payoff, PenaltyConfig, evaluate, prepare
from ridgearb.partition import Partition
from ridgearb.strategy import RidgeletStrategy, prefix_features

log = logging.getLogger(__name__)

CONVERGENCE_WINDOW = 100
CONVERGENCE_RTOL = 1e-5
NORM_MOMENTUM = 0.1


@dataclass
class TrainConfig:
    learning_rate: float | None = None
    k_schedule: Sequence[float] = (10.0, 100.0, 1000.0)
    steps_per_k: int = 2000
    batch: int | None = None
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    grad_clip: float | None = None
    deterministic_reduce: bool = True

    def __post_init__(self):
        self.k_schedule = tuple(float(k) for k in self.k_schedule)
        if not self.k_schedule:
            raise ValueError("k_schedule must not be empty")
        if any(k <= 0 for k in self.k_schedule):
            raise ValueError("k values must be positive")
        if any(b <= a for a, b in zip(self.k_schedule, self.k_schedule[1:])):
            raise ValueError("k_schedule must be strictly increasing")
        if self.learning_rate is not None and self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.steps_per_k < 1:
            raise ValueError("steps_per_k must be at least 1")
        if self.batch is not None and self.batch < 1:
            raise ValueError("batch must be positive")
        if self.grad_clip is not None and self.grad_clip <= 0:
            raise ValueError("grad_clip must be positive")

    def resolved_learning_rate(self, num_assets: int) -> float:
        if self.learning_rate is not None:
            return self.learning_rate
        return 1e-4 if num_assets >= 10 else 1e-3

    def to_dict(self) -> dict:
        d = asdict(self)
        d["k_schedule"] = list(self.k_schedule)
        return d


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def fresh(cls, size: int) -> "AdamState":
        return cls(np.zeros(size), np.zeros(size), 0)


def adam_step(
    params: np.ndarray,
    grads: np.ndarray,
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> tuple[np.ndarray, AdamState]:
    """One bias-corrected Adam update; returns new arrays, inputs untouched."""
    grads = np.asarray(grads, dtype=float)
    if grads.shape != params.shape:
        raise ShapeError("gradient and parameter shapes differ")
    if not np.all(np.isfinite(grads)):
        raise NonFiniteError("non-finite gradient passed to adam_step")
    t = state.t + 1
    m = beta1 * state.m + (1.0 - beta1) * grads
    v = beta2 * state.v + (1.0 - beta2) * grads * grads
    m_hat = m / (1.0 - beta1**t)
    v_hat = v / (1.0 - beta2**t)
    new = params - lr * m_hat / (np.sqrt(v_hat) + eps)
    return new, AdamState(m, v, t)


def strategy_adam_step(strategy: RidgeletStrategy, grads: np.ndarray, state: AdamState, lr, beta1, beta2, eps):
    """Adam update of a strategy in place followed by budget projection."""
    params, state = adam_step(strategy.flat_params(), grads, state, lr, beta1, beta2, eps)
    strategy.set_flat(params)
    strategy.project()
    return state


@dataclass
class TrainResult:
    strategy: RidgeletStrategy
    trace: list[float]
    stage_reports: list[ObjectiveReport]
    stage_strategies: list[RidgeletStrategy]
    wall_time: float
    converged: bool
    learning_rate: float = 0.0

    @property
    def final_report(self) -> ObjectiveReport:
        return self.stage_reports[-1]

    @property
    def value(self) -> float:
        return self.final_report.value


def _fit_norms(strategy: RidgeletStrategy, data: list[MeasureData], momentum: float | None) -> None:
    """Fit (``momentum=None``) or update the input statistics from pooled paths."""
    if not strategy.nets:
        return
    prices = np.concatenate([md.prices for md in data])
    weights = np.concatenate([md.weights for md in data])
    for i, net in enumerate(strategy.nets, start=1):
        x = prefix_features(prices, i)
        if momentum is None:
            net.input_norm.fit(x, weights)
        else:
            net.input_norm.update(x, momentum, weights)


def _freeze_norms(strategy: RidgeletStrategy) -> None:
    for net in strategy.nets:
        net.input_norm.frozen = True


def _minibatch(data: list[MeasureData], size: int, rng: np.random.Generator) -> list[MeasureData]:
    """Subsample each measure; weights renormalised and cell means recomputed in-batch."""
    out = []
    for md in data:
        count = md.prices.shape[0]
        if size >= count:
            out.append(md)
            continue
        idx = np.sort(rng.choice(count, size=size, replace=False))
        w = md.weights[idx]
        w = w / w.sum()
        out.append(MeasureData(md.prices[idx], w, md.codes[idx], md.signatures, md.phi[idx]))
    return out


def train(
    spec: MarketSpec,
    ambiguity: AmbiguitySet,
    partition: Partition,
    phi: Payoff | None,
    costs: CostParams | None,
    config: TrainConfig,
    *,
    strategy: RidgeletStrategy,
    callback: Callable[[int, float], None] | None = None,
) -> TrainResult:
    """Minimise the penalized objective, warm-starting through ``config.k_schedule``.

    ``strategy`` is the initial point and is not modified.
    """
    if strategy.spec != spec:
        raise ShapeError("strategy was built for a different market")
    phi = phi or Payoff.zero()
    costs = costs or CostParams.zero()
    ambiguity.validate(spec)
    data = prepare(ambiguity, partition, phi, max(strategy.budget, strategy.capital_bound))
    strat = strategy.copy()
    strat.project()
    lr = config.resolved_learning_rate(spec.num_assets)
    rng = np.random.default_rng(config.seed)
    state = AdamState.fresh(strat.num_params)
    trace: list[float] = []
    reports: list[ObjectiveReport] = []
    snapshots: list[RidgeletStrategy] = []
    started = time.perf_counter()

    if strat.nets and not all(net.input_norm.frozen for net in strat.nets):
        _fit_norms(strat, data, None)

    for stage, k in enumerate(config.k_schedule):
        penalty = PenaltyConfig(k)
        for step in range(config.steps_per_k):
            batch = data if config.batch is None else _minibatch(data, config.batch, rng)
            if stage == 0 and config.batch is not None:
                _fit_norms(strat, batch, NORM_MOMENTUM)
            try:
                report, grad = evaluate(
                    strat, batch, penalty, costs, want_grad=True,
                    deterministic_reduce=config.deterministic_reduce,
                )
            except NonFiniteError as exc:
                raise DivergenceError(f"divergence at k={k}, step {step}: {exc}", trace) from exc
            trace.append(report.value)
            if callback is not None:
                callback(len(trace), report.value)
            g = grad.values
            if config.grad_clip is not None:
                norm = float(np.linalg.norm(g))
                if norm > config.grad_clip:
                    g = g * (config.grad_clip / norm)
            state = strategy_adam_step(strat, g, state, lr, config.beta1, config.beta2, config.eps)
        if stage == 0:
            _freeze_norms(strat)
        final = evaluate(
            strat, data, penalty, costs, deterministic_reduce=config.deterministic_reduce,
            phi_is_zero=phi.is_zero,
        )
        if not math.isfinite(final.value):
            raise DivergenceError(f"non-finite objective after stage k={k}", trace)
        reports.append(final)
        snapshots.append(strat.copy())
        log.info("stage k=%g finished: value=%.6g c=%.6g penalty=%.3g", k, final.value, final.c, final.penalty_term)

    converged = False
    if len(trace) > CONVERGENCE_WINDOW:
        old, new = trace[-CONVERGENCE_WINDOW - 1], trace[-1]
        converged = abs(new - old) <= CONVERGENCE_RTOL * max(abs(old), 1e-12)
    return TrainResult(
        strategy=strat,
        trace=trace,
        stage_reports=reports,
        stage_strategies=snapshots,
        wall_time=time.perf_counter() - started,
        converged=converged,
        learning_rate=lr,
    )
