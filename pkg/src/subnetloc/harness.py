"""Monte Carlo engine: trial scheduling, statistics, and result emission.

Every trial is reproducible in isolation: its generator derives from
SeedSequence([experiment_seed, trial_index]), split into one stream for
the deployment and one for the protocol (subset draws and echoes). The
same trial index therefore sees the same deployment in every
(sweep point, strategy) cell, which pairs the strategy comparison, and
partitioning trials across workers cannot change any emitted number.

Emitted values are rounded to 9 significant digits at record creation,
so aggregates recomputed from records.csv match summary.csv exactly.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .channel import ChannelModel, Fading, SensingParams
from .comms import CommsParams
from .protocol import (
    FrameConfig,
    Strategy,
    TrialRecord,
    max_iterations,
    run_localization,
)
from .scene import DeployConfig, generate_scene
from .selection import NoFeasibleSubsetError
from .wls import WlsConfig

ARTIFACT_VERSION = "0.1.0"

Z_90 = 1.645  # two-sided 90% normal quantile used throughout

EXPERIMENTS = (
    "error-vs-iterations",
    "error-vs-antennas",
    "convergence-cdf",
    "tradeoff-vs-feedback",
    "custom",
)

RECORD_FIELDS = (
    "trial_id",
    "strategy",
    "sweep_point",
    "abs_error_m",
    "iterations",
    "converged",
    "clamped",
    "loss",
)

SUMMARY_FIELDS = ("sweep_point", "strategy", "mean", "ci90_low", "ci90_high", "count")


def round9(x: float) -> float:
    """Round to the 9-significant-digit decimal used for all emitted numbers."""
    return float(f"{x:.9g}")


def fmt9(x: float) -> str:
    return f"{x:.9g}"


@dataclass(frozen=True)
class SweepPoint:
    """One point of an experiment sweep; may pin the fading model."""

    value: float
    channel: Optional[Fading] = None

    @property
    def label(self) -> str:
        base = format(self.value, "g")
        return base if self.channel is None else f"{base}@{self.channel.value}"


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    trials: int
    seed: int
    sweep: tuple[SweepPoint, ...]
    deploy: DeployConfig
    sensing: SensingParams
    frame: FrameConfig
    comms: CommsParams
    strategies: tuple[Strategy, ...]
    channel: ChannelModel
    k: int
    wls: WlsConfig = WlsConfig()

    def __post_init__(self) -> None:
        errors = []
        if self.experiment not in EXPERIMENTS:
            errors.append(f"experiment: unknown name {self.experiment!r}")
        if self.trials < 1:
            errors.append(f"trials: must be >= 1, got {self.trials}")
        if not 0 <= self.seed < 2**64:
            errors.append(f"seed: must be a 64-bit unsigned integer, got {self.seed}")
        if not self.sweep:
            errors.append("sweep: must be non-empty")
        if not self.strategies:
            errors.append("strategies: must be non-empty")
        if not 3 <= self.k <= self.deploy.n_subnets:
            errors.append(f"k: need n_subnets >= k >= 3, got k={self.k}, n={self.deploy.n_subnets}")
        budget = max_iterations(self.frame)
        if self.experiment in ("error-vs-iterations", "custom"):
            for p in self.sweep:
                if p.value != int(p.value) or not 1 <= int(p.value) <= budget:
                    errors.append(
                        f"sweep: iteration counts must be integers in [1, {budget}], got {p.value}"
                    )
        elif self.experiment in ("error-vs-antennas", "convergence-cdf"):
            for p in self.sweep:
                if p.value != int(p.value) or p.value < 1:
                    errors.append(f"sweep: antenna counts must be integers >= 1, got {p.value}")
        elif self.experiment == "tradeoff-vs-feedback":
            for p in self.sweep:
                if p.value < 0:
                    errors.append(f"sweep: feedback durations must be >= 0, got {p.value}")
                elif self.frame.sense_duration + p.value > self.frame.time_budget:
                    errors.append(
                        f"sweep: feedback duration {p.value} leaves no room for an iteration"
                    )
        for s in self.strategies:
            rho = self.frame.sensing_rbs_per_iter * s.rho_factor
            if rho < self.k or rho % self.k:
                errors.append(
                    f"strategies: {s.label} needs sensing RBs divisible by k "
                    f"(rho={rho}, k={self.k})"
                )
        if errors:
            raise ValueError("; ".join(errors))


@dataclass(frozen=True)
class SummaryStats:
    mean: float
    ci90_low: float
    ci90_high: float
    count: int
    cdf_points: Optional[tuple[tuple[float, float], ...]] = None


@dataclass(frozen=True)
class CellResult:
    sweep_point: SweepPoint
    strategy: Strategy
    stats: SummaryStats
    records: tuple[TrialRecord, ...]
    failed_trials: int


@dataclass(frozen=True)
class ExperimentResult:
    config: ExperimentConfig
    cells: tuple[CellResult, ...]

    @property
    def records(self) -> list[TrialRecord]:
        return [r for cell in self.cells for r in cell.records]

    @property
    def failed_trials(self) -> int:
        return sum(cell.failed_trials for cell in self.cells)

    def cell(self, sweep_label: str, strategy_label: str) -> CellResult:
        for c in self.cells:
            if c.sweep_point.label == sweep_label and c.strategy.label == strategy_label:
                return c
        raise KeyError(f"no cell ({sweep_label!r}, {strategy_label!r})")


def confidence_interval_90(samples: Sequence[float]) -> tuple[float, float]:
    """Normal-approximation CI: mean +/- 1.645 * sample std / sqrt(n)."""
    if len(samples) < 2:
        raise ValueError(f"need at least 2 samples, got {len(samples)}")
    arr = np.asarray(samples, dtype=float)
    mean = float(np.mean(arr))
    half = Z_90 * float(np.std(arr, ddof=1)) / math.sqrt(len(arr))
    return mean - half, mean + half


def empirical_cdf(samples: Sequence[float]) -> list[tuple[float, float]]:
    """Right-continuous CDF steps on the sorted unique sample values."""
    if len(samples) == 0:
        raise ValueError("need at least one sample")
    arr = np.sort(np.asarray(samples, dtype=float))
    values, counts = np.unique(arr, return_counts=True)
    fractions = np.cumsum(counts) / len(arr)
    return [(float(v), float(f)) for v, f in zip(values, fractions)]


@dataclass(frozen=True)
class _CellSpec:
    """Everything one worker needs to run trials of one cell."""

    seed: int
    sweep_point: SweepPoint
    strategy: Strategy
    deploy: DeployConfig
    sensing: SensingParams
    frame: FrameConfig
    model: ChannelModel
    wls: WlsConfig
    k: int
    j_max: int


def _derive_cell(cfg: ExperimentConfig, point: SweepPoint, strategy: Strategy) -> _CellSpec:
    sensing = cfg.sensing
    frame = cfg.frame
    model = cfg.channel if point.channel is None else ChannelModel(point.channel, cfg.channel.rician_k)

    if cfg.experiment in ("error-vs-iterations", "custom"):
        j_max = int(point.value)
    elif cfg.experiment in ("error-vs-antennas", "convergence-cdf"):
        sensing = replace(sensing, n_antennas=int(point.value))
        j_max = max_iterations(frame)
    elif cfg.experiment == "tradeoff-vs-feedback":
        frame = replace(frame, feedback_duration=float(point.value))
        j_max = max_iterations(frame)
    else:  # unreachable: config validation rejects unknown experiments
        raise ValueError(cfg.experiment)

    return _CellSpec(
        seed=cfg.seed,
        sweep_point=point,
        strategy=strategy,
        deploy=cfg.deploy,
        sensing=sensing,
        frame=frame,
        model=model,
        wls=cfg.wls,
        k=cfg.k,
        j_max=j_max,
    )


def trial_generators(seed: int, trial_index: int) -> tuple[int, np.random.Generator]:
    """Derive the per-trial deployment seed and protocol generator.

    Mixing rule: SeedSequence([seed, trial_index]) spawns two children,
    the first seeds the deployment, the second drives subset draws and
    echo synthesis.
    """
    root = np.random.SeedSequence([seed, trial_index])
    scene_ss, proto_ss = root.spawn(2)
    scene_seed = int(scene_ss.generate_state(1, np.uint64)[0])
    return scene_seed, np.random.default_rng(proto_ss)


def _run_one_trial(spec: _CellSpec, trial_index: int) -> Optional[TrialRecord]:
    scene_seed, rng = trial_generators(spec.seed, trial_index)
    scene = generate_scene(replace(spec.deploy, seed=scene_seed))
    try:
        record = run_localization(
            scene,
            spec.sensing,
            spec.model,
            spec.frame,
            spec.k,
            spec.strategy,
            spec.wls,
            rng,
            j_max=spec.j_max,
        )
    except NoFeasibleSubsetError:
        return None
    return dataclasses.replace(
        record,
        trial_id=trial_index,
        strategy=spec.strategy.label,
        sweep_point=spec.sweep_point.value,
        abs_error=round9(record.abs_error),
        throughput_loss=round9(record.throughput_loss),
    )


def _run_trial_batch(spec: _CellSpec, trial_indices: Sequence[int]) -> list[Optional[TrialRecord]]:
    return [_run_one_trial(spec, t) for t in trial_indices]


def _summarize(spec: _CellSpec, records: Sequence[TrialRecord], with_cdf: bool) -> SummaryStats:
    errors = [r.abs_error for r in records]
    if len(errors) >= 2:
        low, high = confidence_interval_90(errors)
    else:
        low = high = errors[0] if errors else math.nan
    cdf = None
    if with_cdf and records:
        cdf = tuple(empirical_cdf([float(r.iterations_used) for r in records]))
    return SummaryStats(
        mean=round9(float(np.mean(errors))) if errors else math.nan,
        ci90_low=round9(low),
        ci90_high=round9(high),
        count=len(errors),
        cdf_points=cdf,
    )


def run_experiment(cfg: ExperimentConfig, workers: int = 1) -> ExperimentResult:
    """Run every (sweep point, strategy) cell of the experiment.

    Results are identical for any worker count: each trial's randomness
    depends only on (cfg.seed, trial index), and records are reassembled
    in trial order.
    """
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    with_cdf = cfg.experiment == "convergence-cdf"
    trial_ids = list(range(cfg.trials))

    cells = []
    pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for point in cfg.sweep:
            for strategy in cfg.strategies:
                spec = _derive_cell(cfg, point, strategy)
                if pool is None:
                    outcomes = _run_trial_batch(spec, trial_ids)
                else:
                    chunk = max(1, math.ceil(cfg.trials / workers))
                    batches = [trial_ids[i : i + chunk] for i in range(0, cfg.trials, chunk)]
                    outcomes = [
                        r
                        for batch in pool.map(_run_trial_batch, [spec] * len(batches), batches)
                        for r in batch
                    ]
                records = tuple(r for r in outcomes if r is not None)
                failed = sum(r is None for r in outcomes)
                cells.append(
                    CellResult(
                        sweep_point=point,
                        strategy=strategy,
                        stats=_summarize(spec, records, with_cdf),
                        records=records,
                        failed_trials=failed,
                    )
                )
    finally:
        if pool is not None:
            pool.shutdown()
    return ExperimentResult(config=cfg, cells=tuple(cells))


def _config_to_json(cfg: ExperimentConfig) -> dict:
    def convert(obj):
        if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
            return {f.name: convert(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
        if isinstance(obj, Fading):
            return obj.value
        if isinstance(obj, (tuple, list)):
            return [convert(v) for v in obj]
        if hasattr(obj, "value") and hasattr(obj, "name"):  # remaining enums
            return obj.value
        return obj

    out = convert(cfg)
    out["strategies"] = [s.label for s in cfg.strategies]
    out["sweep"] = [p.label for p in cfg.sweep]
    return out


def write_outputs(result: ExperimentResult, out_dir: str) -> None:
    """Emit records.csv, summary.csv, and meta.json into out_dir."""
    os.makedirs(out_dir, exist_ok=True)

    with open(os.path.join(out_dir, "records.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RECORD_FIELDS)
        for cell in result.cells:
            for r in cell.records:
                writer.writerow(
                    [
                        r.trial_id,
                        r.strategy,
                        cell.sweep_point.label,
                        fmt9(r.abs_error),
                        r.iterations_used,
                        "true" if r.converged else "false",
                        r.clamped_measurements,
                        fmt9(r.throughput_loss),
                    ]
                )

    with open(os.path.join(out_dir, "summary.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_FIELDS)
        for cell in result.cells:
            s = cell.stats
            writer.writerow(
                [
                    cell.sweep_point.label,
                    cell.strategy.label,
                    fmt9(s.mean),
                    fmt9(s.ci90_low),
                    fmt9(s.ci90_high),
                    s.count,
                ]
            )

    meta = {
        "artifact_version": ARTIFACT_VERSION,
        "seed": result.config.seed,
        "config": _config_to_json(result.config),
        "ci_method": "normal approximation, mean +/- 1.645 * sample std / sqrt(n)",
        "failed_trials": result.failed_trials,
    }
    with open(os.path.join(out_dir, "meta.json"), "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
