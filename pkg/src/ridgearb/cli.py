"""``ridgearb`` command line: ingest, train, detect, backtest, oracle, report.

Exit codes: 0 success, 2 invalid input or configuration, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import datetime as dt
import hashlib
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from ridgearb import persist
from ridgearb.backtest import ROW_LABELS, buy_and_hold, run_backtest, summarize, write_profits, write_table
from ridgearb.config import ACTIVATION_CHOICES, RunConfig, load_config
from ridgearb.costs import CostParams
from ridgearb.data import (
    ScenarioConfig,
    SyntheticConfig,
    build_scenarios,
    load_prices,
    load_scenarios,
    market_from_table,
    save_scenarios,
    synthetic_paths,
    synthetic_scenarios,
)
from ridgearb.errors import BoundViolation, DataError, DivergenceError, EnumerationBudgetExceeded, ShapeError
from ridgearb.market import AmbiguitySet, MarketSpec
from ridgearb.objective import Payoff, PenaltyConfig, detect_arbitrage, evaluate, prepare, verify_arbitrage
from ridgearb.oracle import TinyMarket, enumerate_min_cost, oracle_gap
from ridgearb.partition import Partition, generate_partition
from ridgearb.strategy import RidgeletStrategy
from ridgearb.trainer import TrainResult, train

log = logging.getLogger("ridgearb")

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_RUNTIME = 3


class UsageError(ValueError):
    """Bad input that names the offending config key or file."""


@dataclass
class Problem:
    spec: MarketSpec
    ambiguity: AmbiguitySet
    costs: CostParams
    payoff: Payoff
    partition: Partition
    budget: float
    capital_bound: float | None
    data_digest: str
    source: str


def _digest_arrays(ambiguity: AmbiguitySet) -> str:
    h = hashlib.sha256()
    for m in ambiguity:
        h.update(np.ascontiguousarray(m.paths).tobytes())
        h.update(np.ascontiguousarray(m.weights).tobytes())
    return h.hexdigest()


def _date(value: str | None, key: str) -> dt.date | None:
    if value is None:
        return None
    try:
        return dt.date.fromisoformat(value)
    except ValueError as exc:
        raise UsageError(f"config key {key}: {exc}") from exc


def _synthetic(cfg: RunConfig) -> SyntheticConfig:
    s = cfg.data.synthetic
    return SyntheticConfig(
        num_assets=s.num_assets, num_times=s.num_times, paths_per_measure=s.paths_per_measure,
        num_measures=s.num_measures, drift=s.drift, noise=s.noise, spread_vol=s.spread_vol,
        reversion=s.reversion, drift_ambiguity=s.drift_ambiguity, seed=cfg.seed,
    )


def _scenario_config(cfg: RunConfig) -> ScenarioConfig:
    s = cfg.scenario
    return ScenarioConfig(
        horizon=s.horizon, stride=s.stride, method=s.method, num_measures=s.num_measures,
        paths_per_measure=s.paths_per_measure, block_length=s.block_length,
        block_lengths=s.block_lengths, seed=cfg.scenario_seed,
    )


def _existing(path: str, key: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"config key {key}: file not found: {path}")
    return p


def load_problem(cfg: RunConfig, fixture: str | None = None) -> Problem:
    """Resolve the training data named by the config (or an explicit fixture)."""
    costs = cfg.costs.build()
    fixture = fixture or cfg.data.fixture
    if fixture:
        path = _existing(fixture, "data.fixture")
        market = TinyMarket.load(path)
        return Problem(
            market.spec, market.ambiguity, market.costs,
            Payoff.zero() if market.payoff is None else Payoff.from_table(market.payoff),
            market.partition, market.budget, market.capital_bound,
            persist.sha256_file(path), f"fixture:{path}",
        )
    if cfg.data.scenarios:
        path = _existing(cfg.data.scenarios, "data.scenarios")
        spec, ambiguity = load_scenarios(path)
        digest, source = persist.sha256_file(path), f"scenarios:{path}"
    elif cfg.data.synthetic is not None:
        spec, ambiguity = synthetic_scenarios(_synthetic(cfg))
        digest, source = _digest_arrays(ambiguity), "synthetic"
    elif cfg.data.csv:
        path = _existing(cfg.data.csv, "data.csv")
        table = load_prices(path).slice(
            _date(cfg.data.train_start, "data.train_start"), _date(cfg.data.train_end, "data.train_end")
        )
        spec = market_from_table(table, cfg.scenario.horizon, cfg.data.margin)
        ambiguity = build_scenarios(table, _scenario_config(cfg), spec)
        digest, source = table.digest(), f"csv:{path}"
    else:
        raise UsageError("config key data: set one of fixture, scenarios, synthetic or csv")
    partition = generate_partition(spec, cfg.partition.num_partitions, cfg.partition_seed)
    return Problem(
        spec, ambiguity, costs, Payoff.zero(), partition,
        cfg.strategy.budget, cfg.strategy.capital_bound, digest, source,
    )


def initial_strategy(cfg: RunConfig, problem: Problem) -> RidgeletStrategy:
    return RidgeletStrategy.initialize(
        problem.spec,
        problem.budget,
        hidden_widths=cfg.strategy.widths(problem.spec.num_assets),
        activation=cfg.strategy.activation,
        seed=cfg.seed,
        lipschitz=cfg.strategy.lipschitz,
        capital_bound=problem.capital_bound,
    )


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _run_training(cfg: RunConfig, problem: Problem, payoff: Payoff) -> TrainResult:
    strategy = initial_strategy(cfg, problem)
    tc = cfg.train.build(cfg.seed, cfg.deterministic_reduce)
    return train(problem.spec, problem.ambiguity, problem.partition, payoff, problem.costs, tc, strategy=strategy)


def _base_manifest(cfg: RunConfig, command: str, problem: Problem | None) -> dict:
    config = cfg.model_dump(mode="json")
    output_dir = config.pop("output_dir")
    doc = {
        "command": command,
        "output_dir": output_dir,
        "config": config,
        "seeds": {
            "seed": cfg.seed,
            "partition_seed": cfg.partition_seed,
            "scenario_seed": cfg.scenario_seed,
        },
    }
    if problem is not None:
        doc.update(
            data_source=problem.source,
            data_digest=problem.data_digest,
            market=problem.spec.to_dict(),
            partition=problem.partition.to_dict(),
            costs=problem.costs.to_dict(),
        )
    return doc


def _write_training(out: Path, cfg: RunConfig, problem: Problem, result: TrainResult, command: str) -> dict:
    tc = cfg.train.build(cfg.seed, cfg.deterministic_reduce)
    checkpoints = {}
    for stage, (k, strat) in enumerate(zip(tc.k_schedule, result.stage_strategies)):
        name = f"checkpoint_k{stage}.json"
        persist.save_checkpoint(out / name, strat, k=k)
        checkpoints[name] = persist.sha256_file(out / name)
    persist.save_checkpoint(out / "checkpoint.json", result.strategy, k=tc.k_schedule[-1])
    checkpoints["checkpoint.json"] = persist.sha256_file(out / "checkpoint.json")
    persist.write_trace(out / "trace.csv", result.trace, tc.k_schedule, tc.steps_per_k)
    persist.write_json(
        out / "train_report.json",
        {
            "value": result.value,
            "converged": result.converged,
            "learning_rate": result.learning_rate,
            "stages": [{"k": k, **r.to_dict()} for k, r in zip(tc.k_schedule, result.stage_reports)],
        },
    )
    manifest = _base_manifest(cfg, command, problem)
    manifest.update(
        train_config=tc.to_dict(),
        learning_rate=result.learning_rate,
        value=result.value,
        stage_values=[r.value for r in result.stage_reports],
        converged=result.converged,
        checkpoints=checkpoints,
        trace_sha256=persist.sha256_file(out / "trace.csv"),
        wall_time=result.wall_time,
    )
    return persist.write_manifest(out / "manifest.json", manifest)


# commands ------------------------------------------------------------------


def cmd_ingest(cfg: RunConfig, csv_path: str | None) -> Path:
    path = _existing(csv_path or cfg.data.csv or "", "data.csv")
    raw = load_prices(path)
    table = raw.slice(_date(cfg.data.train_start, "data.train_start"), _date(cfg.data.train_end, "data.train_end"))
    spec = market_from_table(table, cfg.scenario.horizon, cfg.data.margin)
    ambiguity = build_scenarios(table, _scenario_config(cfg), spec)
    out = _out_dir(cfg)
    target = out / "scenarios.json"
    save_scenarios(target, spec, ambiguity)
    manifest = _base_manifest(cfg, "ingest", None)
    manifest.update(
        data_source=f"csv:{path}", data_digest=table.digest(), source_sha256=persist.sha256_file(path),
        dropped_rows=raw.dropped_rows, scenarios_sha256=persist.sha256_file(target),
        clip_rate=ambiguity.provenance.get("clip_rate"),
    )
    persist.write_manifest(out / "ingest_manifest.json", manifest)
    print(f"wrote {target} ({sum(len(m) for m in ambiguity)} paths, {len(ambiguity)} measures)")
    return target


def cmd_train(cfg: RunConfig) -> dict:
    problem = load_problem(cfg)
    result = _run_training(cfg, problem, problem.payoff)
    manifest = _write_training(_out_dir(cfg), cfg, problem, result, "train")
    print(f"value {result.value!r} (converged={result.converged}); wrote {cfg.output_dir}/checkpoint.json")
    return manifest


def cmd_detect(cfg: RunConfig, checkpoint: str | None = None, fixture: str | None = None) -> dict:
    """Train (or load) a strategy against the zero payoff and issue a verdict."""
    problem = load_problem(cfg, fixture)
    out = _out_dir(cfg)
    k_final = cfg.train.k_schedule[-1]
    if checkpoint:
        strategy = persist.load_checkpoint(_existing(checkpoint, "--checkpoint"))
        if strategy.spec != problem.spec:
            raise UsageError(f"{checkpoint}: checkpoint market does not match the configured data")
        data = prepare(problem.ambiguity, problem.partition, Payoff.zero(), max(strategy.budget, strategy.capital_bound))
        report = evaluate(
            strategy, data, PenaltyConfig(k_final), problem.costs,
            deterministic_reduce=cfg.deterministic_reduce, phi_is_zero=True,
        )
    else:
        result = _run_training(cfg, problem, Payoff.zero())
        _write_training(out, cfg, problem, result, "detect")
        strategy, report = result.strategy, result.final_report
    verdict = detect_arbitrage(report, cfg.tolerance)
    verification = verify_arbitrage(strategy, problem.ambiguity, problem.partition, problem.costs, cfg.tolerance)
    doc = {
        "verdict": verdict.value,
        "tolerance": cfg.tolerance,
        "report": report.to_dict(),
        "verification": verification.to_dict(),
    }
    persist.write_json(out / "detect.json", doc)
    print(f"{verdict.value} (value {report.value!r}, tolerance {cfg.tolerance})")
    return doc


def _test_paths(cfg: RunConfig, spec: MarketSpec, test: str | None) -> tuple[np.ndarray, str]:
    source = test or cfg.data.test_csv
    if source:
        path = _existing(source, "--test")
        if path.suffix.lower() == ".json":
            test_spec, ambiguity = load_scenarios(path)
            if test_spec.path_shape != spec.path_shape:
                raise UsageError(f"{path}: test paths have shape {test_spec.path_shape}, expected {spec.path_shape}")
            return np.concatenate([m.paths for m in ambiguity]), persist.sha256_file(path)
        table = load_prices(path).slice(
            _date(cfg.data.test_start, "data.test_start"), _date(cfg.data.test_end, "data.test_end")
        )
        sc = ScenarioConfig(horizon=spec.num_times, stride=cfg.scenario.stride)
        ambiguity = build_scenarios(table, sc, spec)
        return np.concatenate([m.paths for m in ambiguity]), table.digest()
    if cfg.data.synthetic is not None:
        s = cfg.data.synthetic
        test_spec, paths = synthetic_paths(
            s.num_assets, s.num_times, s.test_paths, drift=s.drift, noise=s.noise,
            spread_vol=s.spread_vol, reversion=s.reversion, seed=cfg.seed + s.test_seed_offset,
        )
        if test_spec != spec:
            raise UsageError("config key data.synthetic: does not match the checkpoint market")
        return paths, hashlib.sha256(paths.tobytes()).hexdigest()
    raise UsageError("no test data: pass --test or set data.test_csv or data.synthetic")


def cmd_backtest(cfg: RunConfig, checkpoint: str, test: str | None = None) -> dict:
    strategy = persist.load_checkpoint(_existing(checkpoint, "--checkpoint"))
    paths, digest = _test_paths(cfg, strategy.spec, test)
    costs = cfg.costs.build()
    strat_records = run_backtest(strategy, paths, costs)
    bh_records = buy_and_hold(paths, costs, equal_dollar=cfg.backtest.equal_dollar)
    target = [r.net_profit for r in bh_records]
    reports = {
        "strategy": summarize(strat_records, target=target, model_price=strategy.c),
        "buy_and_hold": summarize(bh_records),
    }
    out = _out_dir(cfg)
    write_table(out / "backtest_table.csv", reports)
    write_profits(out / "profits.csv", {"strategy": strat_records, "buy_and_hold": bh_records})
    doc = {name: r.to_dict() for name, r in reports.items()}
    doc["costs"] = costs.to_dict()
    persist.write_json(out / "backtest.json", doc)
    manifest = _base_manifest(cfg, "backtest", None)
    manifest.update(
        checkpoint_sha256=persist.sha256_file(checkpoint), test_digest=digest, num_paths=int(paths.shape[0]),
        backtest_sha256=persist.sha256_file(out / "backtest.json"),
    )
    persist.write_manifest(out / "backtest_manifest.json", manifest)
    s, b = reports["strategy"], reports["buy_and_hold"]
    print(f"average profit: strategy {s.average_profit:.6g}, buy-and-hold {b.average_profit:.6g}")
    return doc


def cmd_oracle(cfg: RunConfig, fixture: str, checkpoint: str | None = None) -> dict:
    path = _existing(fixture, "--fixture")
    market = TinyMarket.load(path)
    result = enumerate_min_cost(market, workers=cfg.workers)
    problem = load_problem(cfg, fixture)
    out = _out_dir(cfg)
    if checkpoint:
        strategy = persist.load_checkpoint(_existing(checkpoint, "--checkpoint"))
        data = prepare(problem.ambiguity, problem.partition, problem.payoff, max(strategy.budget, strategy.capital_bound))
        trained = evaluate(
            strategy, data, PenaltyConfig(cfg.train.k_schedule[-1]), problem.costs,
            deterministic_reduce=cfg.deterministic_reduce, phi_is_zero=problem.payoff.is_zero,
        ).value
    else:
        train_result = _run_training(cfg, problem, problem.payoff)
        _write_training(out, cfg, problem, train_result, "oracle")
        trained = train_result.value
    gap = oracle_gap(trained, result, cfg.tolerance)
    doc = {"oracle": result.to_dict(), "gap": gap.to_dict(), "fixture_sha256": persist.sha256_file(path)}
    persist.write_json(out / "oracle.json", doc)
    print(f"oracle c_min {result.c_min!r}, trained {trained!r}, gap {gap.gap:.3g} ({'pass' if gap.passed else 'FAIL'})")
    return doc


def cmd_report(cfg: RunConfig, runs: list[str]) -> dict:
    """Merge run outputs into ``tables.csv``/``tables.json`` and render figures."""
    from ridgearb import plotting

    out = _out_dir(cfg)
    run_dirs = [Path(r) for r in runs]
    for r in run_dirs:
        if not r.is_dir():
            raise UsageError(f"run directory not found: {r}")
    multi = len(run_dirs) > 1
    columns, objective, oracle, profits = {}, {}, {}, {}
    for r in run_dirs:
        prefix = f"{r.name}/" if multi else ""
        if (r / "backtest.json").is_file():
            bt = persist.read_json(r / "backtest.json")
            for name in ("strategy", "buy_and_hold"):
                columns[prefix + name] = bt[name]
        if (r / "train_report.json").is_file():
            objective[r.name] = persist.read_json(r / "train_report.json")
        if (r / "detect.json").is_file():
            objective.setdefault(r.name, {})["verdict"] = persist.read_json(r / "detect.json")["verdict"]
        if (r / "oracle.json").is_file():
            oracle[r.name] = persist.read_json(r / "oracle.json")["gap"]
        if (r / "profits.csv").is_file():
            profits[r.name] = np.genfromtxt(r / "profits.csv", delimiter=",", names=True)
    figures = []
    if columns:
        with open(out / "tables.csv", "w") as fh:
            fh.write(",".join(["Metric"] + list(columns)) + "\n")
            for key, label in ROW_LABELS:
                fh.write(",".join([label] + [repr(float(col[key])) for col in columns.values()]) + "\n")
    for name, arr in profits.items():
        series = {col[: -len("_profit")]: arr[col] for col in arr.dtype.names if col.endswith("_profit")}
        tag = f"{name}_" if multi else ""
        figures.append(plotting.plot_cumulative(out / f"{tag}cumulative_profit.png", series))
        figures.append(plotting.plot_histogram(out / f"{tag}profit_histogram.png", series))
    for r in run_dirs:
        if (r / "trace.csv").is_file():
            tr = persist.read_trace(r / "trace.csv")
            tag = f"{r.name}_" if multi else ""
            figures.append(plotting.plot_trace(out / f"{tag}objective_trace.png", tr["step"], tr["value"], tr["k"]))
    doc = {
        "row_labels": [label for _, label in ROW_LABELS],
        "backtest": columns,
        "objective": objective,
        "oracle": oracle,
        "figures": [f.name for f in figures],
    }
    persist.write_json(out / "tables.json", doc)
    print(f"wrote {out / 'tables.json'} and {len(figures)} figures")
    return doc


# argument parsing ------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--out", help="output directory (overrides output_dir)")
    common.add_argument("--deterministic-reduce", action="store_true", default=None,
                        help="order-independent exact summation of path averages")
    common.add_argument("--activation", choices=[c for c in ACTIVATION_CHOICES if c != "sigmoid"])
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="ridgearb", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("ingest", parents=[common], help="build a scenario file from a price CSV")
    p.add_argument("--csv")
    sub.add_parser("train", parents=[common], help="train a strategy, write checkpoints and manifest")
    p = sub.add_parser("detect", parents=[common], help="arbitrage verdict for the configured data")
    p.add_argument("--checkpoint")
    p.add_argument("--fixture")
    p = sub.add_parser("backtest", parents=[common], help="out-of-sample profit statistics")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--test", help="price CSV or scenario JSON")
    p = sub.add_parser("oracle", parents=[common], help="brute-force minimum on a tiny market")
    p.add_argument("--fixture", required=True)
    p.add_argument("--checkpoint")
    p = sub.add_parser("report", parents=[common], help="consolidated tables and figures")
    p.add_argument("--run", nargs="+", required=True, dest="runs")
    return parser


def resolve_config(args) -> RunConfig:
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["output_dir"] = args.out
    if args.deterministic_reduce:
        overrides["deterministic_reduce"] = True
    if args.activation is not None:
        overrides["strategy.activation"] = args.activation
    if args.command == "report" and args.out is None:
        overrides["output_dir"] = args.runs[0]
    return load_config(args.config, overrides)


def _describe_validation(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        key = ".".join(str(p) for p in err["loc"]) or "<root>"
        lines.append(f"config key {key}: {err['msg']}")
    return "; ".join(lines)


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.config and not Path(args.config).is_file():
            raise UsageError(f"--config: file not found: {args.config}")
        cfg = resolve_config(args)
        if args.command == "ingest":
            cmd_ingest(cfg, args.csv)
        elif args.command == "train":
            cmd_train(cfg)
        elif args.command == "detect":
            cmd_detect(cfg, args.checkpoint, args.fixture)
        elif args.command == "backtest":
            cmd_backtest(cfg, args.checkpoint, args.test)
        elif args.command == "oracle":
            cmd_oracle(cfg, args.fixture, args.checkpoint)
        else:
            cmd_report(cfg, args.runs)
    except ValidationError as exc:
        print(f"error: {_describe_validation(exc)}", file=sys.stderr)
        return EXIT_INVALID
    except json.JSONDecodeError as exc:
        print(f"error: malformed JSON: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (DivergenceError, EnumerationBudgetExceeded, FloatingPointError, MemoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (UsageError, DataError, ShapeError, BoundViolation, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
