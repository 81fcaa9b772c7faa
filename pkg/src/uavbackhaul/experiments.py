"""Batch sweeps over the number of UAVs, star baseline and figure data.

Per-run seeds are derived from ``SeedSequence([base_seed, J, run])``, so a
point can be rerun in isolation. Runs may execute in a process pool; results
are always reduced in (J, run) order, which keeps CSV output byte-identical
for a given configuration.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from datetime import datetime, timezone
from importlib import metadata
from pathlib import Path

import numpy as np
import yaml

from .game import RNG_ALGORITHM, FormationRecord, run_formation, star_evaluations
from .scenario import (EnvParams, ForceParams, ModelOptions, RadioParams, Scenario, ScenarioError,
                       UtilityWeights, generate_scenario, params_from_dict)
from .topology import BackhaulGraph, verify_constraints, write_edge_list
from .traffic import PathEvaluation

logger = logging.getLogger(__name__)

BASELINES = ("star", "none")
METRIC_COLUMNS = ["J", "run", "seed", "uav", "rate_dl", "rate_ul", "delay_dl", "delay_ul",
                  "iterations", "stable"]
AGGREGATE_COLUMNS = ["J", "runs", "mean_rate", "mean_delay", "unserved", "iterations_min",
                     "iterations_mean", "iterations_max", "nonconverged"]
GAIN_COLUMNS = ["baseline_mean_rate", "baseline_mean_delay", "baseline_unserved",
                "rate_gain_pct", "delay_gain_pct"]
TRACE_COLUMNS = ["J", "run", "iteration", "round", "uav", "x", "y", "z"]

_PARAM_BLOCKS = {"radio": RadioParams, "env": EnvParams, "forces": ForceParams,
                 "weights": UtilityWeights, "model": ModelOptions}


class ExperimentError(RuntimeError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    uav_counts: tuple = (5, 10, 15, 20)
    runs_per_point: int = 1000
    base_seed: int = 0
    baseline: str = "star"
    max_iterations: int = 1000
    output_dir: str | None = None
    num_sbs: int | None = None  # None: two SBSs per UAV
    area_side: float = 5000.0
    uav_altitude: float = 100.0
    rate_scale: float = 1.0
    params: dict = field(default_factory=dict)  # radio/env/forces/weights/model overrides
    workers: int = 1
    traces: bool = True

    def __post_init__(self):
        if not self.uav_counts:
            raise ValueError("uav_counts must not be empty")
        if any(int(j) < 1 for j in self.uav_counts):
            raise ValueError(f"uav_counts must be >= 1, got {list(self.uav_counts)}")
        if self.runs_per_point < 1:
            raise ValueError(f"runs_per_point must be >= 1, got {self.runs_per_point}")
        if self.baseline not in BASELINES:
            raise ValueError(f"baseline must be one of {BASELINES}, got {self.baseline!r}")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not 0 <= self.base_seed < 2 ** 64:
            raise ValueError("base_seed must be an unsigned 64-bit integer")
        unknown = set(self.params) - set(_PARAM_BLOCKS) - {"packet_size"}
        if unknown:
            raise ValueError(f"unknown scenario parameter block(s) {sorted(unknown)}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["uav_counts"] = list(self.uav_counts)
        return d


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except OSError as e:
        raise ScenarioError(f"{path}: {e.strerror}") from e
    except yaml.YAMLError as e:
        raise ScenarioError(f"{path}: parse error: {e}") from e
    if not isinstance(raw, dict):
        raise ScenarioError(f"{path}: expected a mapping at top level")
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(raw) - known
    if unknown:
        raise ScenarioError(f"{path}: unknown field(s) {sorted(unknown)}")
    try:
        if "uav_counts" in raw:
            raw["uav_counts"] = tuple(int(j) for j in raw["uav_counts"])
        for f in fields(ExperimentConfig):
            # YAML 1.1 reads "5.0e3" as a string
            if isinstance(raw.get(f.name), str) and isinstance(f.default, float):
                raw[f.name] = float(raw[f.name])
        return ExperimentConfig(**raw)
    except (TypeError, ValueError) as e:
        raise ScenarioError(f"{path}: {e}") from e


def run_seed(base_seed: int, num_uavs: int, run: int) -> int:
    return int(np.random.SeedSequence([base_seed, num_uavs, run]).generate_state(1, np.uint64)[0])


def make_scenario(cfg: ExperimentConfig, num_uavs: int, seed: int) -> Scenario:
    blocks = {k: params_from_dict(_PARAM_BLOCKS[k], v, k) for k, v in cfg.params.items() if k in _PARAM_BLOCKS}
    if "packet_size" in cfg.params:
        blocks["packet_size"] = cfg.params["packet_size"]
    num_sbs = 2 * num_uavs if cfg.num_sbs is None else cfg.num_sbs
    return generate_scenario(seed, num_uavs, num_sbs, cfg.area_side, cfg.uav_altitude,
                             rate_scale=cfg.rate_scale, **blocks)


@dataclass
class RunResult:
    num_uavs: int
    run: int
    seed: int
    parent: tuple  # parent map of the final graph
    per_uav: list  # PathEvaluation per UAV
    iterations: int
    stable: bool
    baseline: list | None = None
    trace: list = field(default_factory=list)


def _run_one(cfg: ExperimentConfig, num_uavs: int, run: int) -> RunResult:
    seed = run_seed(cfg.base_seed, num_uavs, run)
    sc = make_scenario(cfg, num_uavs, seed)
    record = FormationRecord() if cfg.traces else None
    g, _, stats = run_formation(sc, cfg.max_iterations, record=record)
    if stats.final_stable:
        report = verify_constraints(g)
        if not report.all_pass:
            raise ExperimentError(f"seed {seed} (J={num_uavs}, run {run}): converged graph violates "
                                  f"constraints {report}")
    baseline = star_baseline_metrics(sc) if cfg.baseline == "star" else None
    trace = record.trace if record is not None else []
    return RunResult(num_uavs, run, seed, g.parent, stats.per_uav, stats.iterations_to_converge,
                     stats.final_stable, baseline, trace)


def _run_task(task):
    return _run_one(*task)


def star_baseline_metrics(scenario: Scenario) -> list[PathEvaluation]:
    """Per-UAV evaluation of the all-direct network at the initial positions."""
    return star_evaluations(scenario)


@dataclass(frozen=True)
class PointMetrics:
    num_uavs: int
    runs: int
    mean_rate: float  # bits/s, mean of DL and UL end-to-end rate
    mean_delay: float  # s, mean of DL and UL path delay over served UAVs
    unserved: int  # UAV samples with unbounded delay, excluded from mean_delay
    iterations_min: int
    iterations_mean: float
    iterations_max: int
    nonconverged: int
    baseline_mean_rate: float | None = None
    baseline_mean_delay: float | None = None
    baseline_unserved: int | None = None

    @property
    def rate_gain(self) -> float | None:
        """Relative rate increase over the baseline (0.4 = 40 %)."""
        if self.baseline_mean_rate is None:
            return None
        return (self.mean_rate - self.baseline_mean_rate) / self.baseline_mean_rate

    @property
    def delay_gain(self) -> float | None:
        """Relative delay reduction over the baseline."""
        if self.baseline_mean_delay is None:
            return None
        return (self.baseline_mean_delay - self.mean_delay) / self.baseline_mean_delay


@dataclass
class AggregateMetrics:
    config: ExperimentConfig
    points: list  # PointMetrics per J, in config order
    runs: list = field(repr=False, default_factory=list)  # RunResult in (J, run) order

    def point(self, num_uavs: int) -> PointMetrics:
        for p in self.points:
            if p.num_uavs == num_uavs:
                return p
        raise KeyError(num_uavs)


def _rate_delay(evals) -> tuple[list, list]:
    rates = [(e.rate_dl + e.rate_ul) / 2 for e in evals]
    delays = [(e.delay_dl + e.delay_ul) / 2 for e in evals]
    return rates, delays


def _summarize(evals) -> tuple[float, float, int]:
    rates, delays = _rate_delay(evals)
    served = [d for d in delays if math.isfinite(d)]
    mean_delay = math.fsum(served) / len(served) if served else math.inf
    return math.fsum(rates) / len(rates), mean_delay, len(delays) - len(served)


def _aggregate(num_uavs: int, results: list, with_baseline: bool) -> PointMetrics:
    its = [r.iterations for r in results]
    rate, delay, unserved = _summarize([e for r in results for e in r.per_uav])
    base = {}
    if with_baseline:
        b_rate, b_delay, b_unserved = _summarize([e for r in results for e in r.baseline])
        base = dict(baseline_mean_rate=b_rate, baseline_mean_delay=b_delay, baseline_unserved=b_unserved)
    return PointMetrics(num_uavs, len(results), rate, delay, unserved, min(its), sum(its) / len(its),
                        max(its), sum(not r.stable for r in results), **base)


def run_experiment(cfg: ExperimentConfig) -> AggregateMetrics:
    tasks = [(cfg, int(J), run) for J in cfg.uav_counts for run in range(cfg.runs_per_point)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            results = list(pool.map(_run_task, tasks, chunksize=max(1, len(tasks) // (8 * cfg.workers))))
    else:
        results = [_run_task(t) for t in tasks]
    results.sort(key=lambda r: (cfg.uav_counts.index(r.num_uavs), r.run))
    points = []
    for J in cfg.uav_counts:
        point = [r for r in results if r.num_uavs == J]
        points.append(_aggregate(int(J), point, cfg.baseline == "star"))
        logger.info("J=%d: %d runs, mean iterations %.2f", J, len(point), points[-1].iterations_mean)
    return AggregateMetrics(cfg, points, results)


# ---------------------------------------------------------------------------
# Output files
# ---------------------------------------------------------------------------

def _num(x) -> str:
    if isinstance(x, bool):
        return str(int(x))
    return repr(float(x)) if isinstance(x, float) else str(x)


def _write_csv(path: Path, header: list, rows) -> None:
    try:
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_num(v) for v in row])
    except OSError as e:
        raise OSError(f"{path}: {e.strerror}") from e


def _metric_rows(runs, baseline: bool):
    for r in runs:
        evals = r.baseline if baseline else r.per_uav
        # the baseline is not a formation run: no iteration count or stability flag
        its, stable = ("", "") if baseline else (r.iterations, r.stable)
        for k, e in enumerate(evals):
            yield [r.num_uavs, r.run, r.seed, k, e.rate_dl, e.rate_ul, e.delay_dl, e.delay_ul, its, stable]


def _aggregate_rows(points, with_gains: bool):
    for p in points:
        row = [p.num_uavs, p.runs, p.mean_rate, p.mean_delay, p.unserved, p.iterations_min,
               p.iterations_mean, p.iterations_max, p.nonconverged]
        if with_gains:
            row += [p.baseline_mean_rate, p.baseline_mean_delay, p.baseline_unserved,
                    100 * p.rate_gain, 100 * p.delay_gain]
        yield row


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def emit_outputs(metrics: AggregateMetrics, output_dir) -> list[Path]:
    """Write per-UAV, baseline and aggregate CSVs, edge lists, traces and a manifest."""
    out = Path(output_dir)
    try:
        (out / "graphs").mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise OSError(f"{out}: cannot create output directory: {e.strerror}") from e
    cfg = metrics.config
    with_baseline = cfg.baseline == "star"
    written = []

    path = out / "metrics.csv"
    _write_csv(path, METRIC_COLUMNS, _metric_rows(metrics.runs, False))
    written.append(path)
    if with_baseline:
        path = out / "baseline_metrics.csv"
        _write_csv(path, METRIC_COLUMNS, _metric_rows(metrics.runs, True))
        written.append(path)
    path = out / "aggregate.csv"
    header = AGGREGATE_COLUMNS + (GAIN_COLUMNS if with_baseline else [])
    _write_csv(path, header, _aggregate_rows(metrics.points, with_baseline))
    written.append(path)

    for r in metrics.runs:
        path = out / "graphs" / f"J{r.num_uavs}_run{r.run:04d}.edges"
        write_edge_list(BackhaulGraph(r.parent), path)
        written.append(path)

    if cfg.traces:
        path = out / "traces.csv"
        _write_csv(path, TRACE_COLUMNS,
                   ([r.num_uavs, r.run, *t] for r in metrics.runs for t in r.trace))
        written.append(path)

    path = out / "manifest.json"
    manifest = {
        "package": "uavbackhaul",
        "version": _version(),
        "base_seed": cfg.base_seed,
        "rng": RNG_ALGORITHM,
        "seed_derivation": "SeedSequence([base_seed, J, run]) -> uint64",
        "config": cfg.to_dict(),
    }
    text = json.dumps(manifest, indent=2, sort_keys=True)
    # the timestamp is the only non-reproducible field; keep it on its own line
    stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
    text = text[:-2] + f',\n  "timestamp": "{stamp}"\n}}\n'
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as e:
        raise OSError(f"{path}: {e.strerror}") from e
    written.append(path)
    return written


def with_overrides(cfg: ExperimentConfig, **kwargs) -> ExperimentConfig:
    """Copy of ``cfg`` with the non-None keyword values applied."""
    changes = {k: v for k, v in kwargs.items() if v is not None}
    if "delta_mode" in changes:
        params = dict(cfg.params)
        params["model"] = {**(params.get("model") or {}), "delta_mode": changes.pop("delta_mode")}
        changes["params"] = params
    return replace(cfg, **changes)
