"""Run configuration schema (JSON), validated with unknown keys rejected."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from ridgearb.activations import BASE_KINDS
from ridgearb.costs import CostParams, TransactionKind
from ridgearb.trainer import TrainConfig

SCHEMA_VERSION = 1
ACTIVATION_CHOICES = BASE_KINDS + ("hybrid",)


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class CostSection(_Section):
    transaction_kind: str = "none"
    lambda_t: float = Field(0.0, ge=0)
    lambda_l: float = Field(0.0, ge=0)
    lambda_b: float = Field(0.0, ge=0)

    @field_validator("transaction_kind")
    @classmethod
    def _kind(cls, v):
        return TransactionKind.parse(v).value

    def build(self) -> CostParams:
        return CostParams(self.transaction_kind, self.lambda_t, self.lambda_l, self.lambda_b)


class PenaltySection(_Section):
    beta_kind: Literal["squared_hinge"] = "squared_hinge"


class TrainSection(_Section):
    learning_rate: Optional[float] = Field(None, gt=0)
    k_schedule: list[float] = [10.0, 100.0, 1000.0]
    steps_per_k: int = Field(2000, ge=1)
    batch: Optional[int] = Field(None, ge=1)
    beta1: float = Field(0.9, ge=0, lt=1)
    beta2: float = Field(0.999, ge=0, lt=1)
    eps: float = Field(1e-8, gt=0)
    grad_clip: Optional[float] = Field(None, gt=0)

    @field_validator("k_schedule")
    @classmethod
    def _ladder(cls, v):
        if not v or any(k <= 0 for k in v) or any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("k_schedule must be a non-empty strictly increasing list of positive values")
        return v

    def build(self, seed: int, deterministic_reduce: bool) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.learning_rate,
            k_schedule=self.k_schedule,
            steps_per_k=self.steps_per_k,
            batch=self.batch,
            seed=seed,
            beta1=self.beta1,
            beta2=self.beta2,
            eps=self.eps,
            grad_clip=self.grad_clip,
            deterministic_reduce=deterministic_reduce,
        )


class StrategySection(_Section):
    budget: float = Field(1.0, gt=0)
    capital_bound: Optional[float] = Field(None, gt=0)
    lipschitz: float = Field(1.0, gt=0)
    activation: str = "relu"
    hidden_widths: Optional[list[int]] = None
    hidden_multipliers: list[int] = [32, 64, 128]

    @field_validator("activation")
    @classmethod
    def _act(cls, v):
        v = v.lower()
        if v not in ACTIVATION_CHOICES:
            raise ValueError(f"activation must be one of {ACTIVATION_CHOICES}")
        return v

    def widths(self, num_assets: int) -> list[int]:
        if self.hidden_widths is not None:
            return list(self.hidden_widths)
        return [m * num_assets for m in self.hidden_multipliers]


class ScenarioSection(_Section):
    horizon: int = Field(2, ge=1)
    stride: int = Field(1, ge=1)
    method: Literal["sliding_window", "block_bootstrap"] = "sliding_window"
    num_measures: int = Field(1, ge=1)
    paths_per_measure: Optional[int] = Field(None, ge=1)
    block_length: int = Field(5, ge=1)
    block_lengths: Optional[list[int]] = None
    seed: Optional[int] = None


class SyntheticSection(_Section):
    num_assets: int = Field(10, ge=1)
    num_times: int = Field(2, ge=1)
    paths_per_measure: int = Field(200, ge=1)
    num_measures: int = Field(2, ge=1)
    drift: float = 1.0
    noise: float = Field(1.0, ge=0)
    spread_vol: float = Field(2.0, ge=0)
    reversion: float = Field(0.8, ge=0, le=2)
    drift_ambiguity: float = Field(0.2, ge=0)
    test_paths: int = Field(1000, ge=2)
    test_seed_offset: int = 10_000


class DataSection(_Section):
    csv: Optional[str] = None
    scenarios: Optional[str] = None
    fixture: Optional[str] = None
    synthetic: Optional[SyntheticSection] = None
    test_csv: Optional[str] = None
    margin: float = Field(0.25, ge=0)
    train_start: Optional[str] = None
    train_end: Optional[str] = None
    test_start: Optional[str] = None
    test_end: Optional[str] = None


class PartitionSection(_Section):
    num_partitions: int = Field(32, ge=0)
    seed: Optional[int] = None


class BacktestSection(_Section):
    equal_dollar: bool = False


class RunConfig(_Section):
    version: int = SCHEMA_VERSION
    seed: int = 0
    output_dir: str = "runs/default"
    deterministic_reduce: bool = False
    workers: int = Field(1, ge=1)
    tolerance: float = Field(0.05, ge=0)
    data: DataSection = DataSection()
    scenario: ScenarioSection = ScenarioSection()
    partition: PartitionSection = PartitionSection()
    costs: CostSection = CostSection()
    penalty: PenaltySection = PenaltySection()
    train: TrainSection = TrainSection()
    strategy: StrategySection = StrategySection()
    backtest: BacktestSection = BacktestSection()

    @model_validator(mode="after")
    def _version(self):
        if self.version != SCHEMA_VERSION:
            raise ValueError(f"unsupported config version {self.version}")
        return self

    @property
    def partition_seed(self) -> int:
        return self.seed if self.partition.seed is None else self.partition.seed

    @property
    def scenario_seed(self) -> int:
        return self.seed if self.scenario.seed is None else self.scenario.seed


def load_config(path: str | Path | None, overrides: dict | None = None) -> RunConfig:
    """Defaults, then the JSON file, then ``overrides`` (dotted keys allowed)."""
    doc = json.loads(Path(path).read_text()) if path else {}
    for key, value in (overrides or {}).items():
        node = doc
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = value
    return RunConfig.model_validate(doc)


def json_schema() -> dict:
    return RunConfig.model_json_schema()
