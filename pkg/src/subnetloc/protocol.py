"""Iterative node selection and refinement, plus the benchmark strategies.

One localization trial runs up to j_max sensing iterations. The proposed
strategy starts from a uniformly random subset of k subnetworks, fuses
their range measurements by weighted Gauss-Newton, then re-selects the
subset by exhaustive WGDOP minimization around the running estimate;
it stops early once the selected subset repeats. The benchmarks replace
the selection step:

  benchmark1  one random subset, a single iteration that concentrates
              the whole j_max * rho RB budget for fairness
  benchmark2  a fresh random subset every iteration, final estimate is
              the mean of the per-iteration estimates
  benchmark3  benchmark2 with the WLS solver warm-started from the
              previous iteration's estimate
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .channel import ChannelModel, SensingParams, simulate_echo
from .ranging import RANGE_FLOOR_M, RangeMeasurement, measure_range
from .scene import Point2, Scene, distance
from .selection import NoFeasibleSubsetError, SubsetSelection, select_subset
from .wls import InitMode, WlsConfig, WlsResult, solve_wls


@dataclass(frozen=True)
class FrameConfig:
    """Frame/timing layout and the per-iteration sensing reservation."""

    frame_duration: float        # s (T)
    slots_per_frame: int         # F
    rbs_per_slot_grid: int       # N_RB across the whole bandwidth
    sense_duration: float        # s per iteration (T_s)
    feedback_duration: float     # s per iteration (T_L)
    time_budget: float           # s for the whole sensing process (T_c)
    sensing_rbs_per_iter: int    # rho
    slot_duration: float         # s

    def __post_init__(self) -> None:
        errors = []
        if self.sense_duration <= 0:
            errors.append(f"sense_duration must be > 0, got {self.sense_duration}")
        if self.feedback_duration < 0:
            errors.append(f"feedback_duration must be >= 0, got {self.feedback_duration}")
        if self.time_budget < self.sense_duration + self.feedback_duration:
            errors.append(
                "time_budget must cover at least one sensing+feedback period "
                f"({self.time_budget} < {self.sense_duration + self.feedback_duration})"
            )
        for name in ("slots_per_frame", "rbs_per_slot_grid", "sensing_rbs_per_iter"):
            if getattr(self, name) < 1:
                errors.append(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.frame_duration <= 0 or self.slot_duration <= 0:
            errors.append("frame_duration and slot_duration must be > 0")
        if errors:
            raise ValueError("; ".join(errors))

    @property
    def slots_per_iteration(self) -> int:
        """Time slots spanned by one sensing+feedback period (F_S)."""
        return max(1, math.ceil((self.sense_duration + self.feedback_duration) / self.slot_duration))


def max_iterations(frame: FrameConfig) -> int:
    """Sensing iterations that fit the time budget, floor(T_c / (T_s + T_L))."""
    return int(frame.time_budget // (frame.sense_duration + frame.feedback_duration))


class StrategyKind(enum.Enum):
    PROPOSED = "proposed"
    BENCHMARK1 = "benchmark1"
    BENCHMARK2 = "benchmark2"
    BENCHMARK3 = "benchmark3"


@dataclass(frozen=True)
class Strategy:
    """A localization strategy plus its sensing-RB multiplier.

    rho_factor scales the per-iteration reservation relative to the
    frame's baseline (the proposed method is studied at both rho and
    2*rho); it must keep the reservation divisible by the subset size.
    """

    kind: StrategyKind
    rho_factor: int = 1

    def __post_init__(self) -> None:
        if self.rho_factor < 1:
            raise ValueError(f"rho_factor must be >= 1, got {self.rho_factor}")

    @property
    def label(self) -> str:
        if self.rho_factor == 1:
            return self.kind.value
        return f"{self.kind.value}-{self.rho_factor}k"


def subnet_rbs(frame: FrameConfig, k: int, strategy: Strategy, j_max: int) -> int:
    """Sensing RBs granted to each selected subnetwork in one iteration
    (benchmark1 concentrates its whole j_max budget in its single
    iteration)."""
    rho = frame.sensing_rbs_per_iter * strategy.rho_factor
    if rho < k or rho % k:
        raise ValueError(f"sensing RBs per iteration ({rho}) must be a positive multiple of k={k}")
    rbs_each = rho // k
    if strategy.kind is StrategyKind.BENCHMARK1:
        rbs_each *= j_max
    return rbs_each


def rb_allocation(frame: FrameConfig, k: int, strategy: Strategy, j_max: int, pilots_per_rb: int) -> int:
    """Pilot resource elements per selected subnetwork per iteration."""
    return subnet_rbs(frame, k, strategy, j_max) * pilots_per_rb


@dataclass(frozen=True)
class IterationRecord:
    """State after one sensing iteration of a trial."""

    members: tuple[int, ...]
    estimate: Point2
    abs_error: float
    wls: WlsResult
    measurements: tuple[RangeMeasurement, ...]


@dataclass(frozen=True)
class TrialRecord:
    """Scalar outcome of one localization trial (history kept for audits)."""

    estimate: Point2
    abs_error: float               # m
    iterations_used: int
    converged: bool
    clamped_measurements: int
    throughput_loss: float
    history: tuple[IterationRecord, ...] = field(repr=False)
    trial_id: int = -1
    strategy: str = ""
    sweep_point: float = math.nan


def _measure_subset(
    members: tuple[int, ...],
    scene: Scene,
    params: SensingParams,
    model: ChannelModel,
    rng: np.random.Generator,
) -> list[RangeMeasurement]:
    out = []
    for i in members:
        d_true = max(distance(scene.target, scene.subnet_positions[i]), RANGE_FLOOR_M)
        block = simulate_echo(params, model, d_true, rng)
        out.append(measure_range(i, block, params))
    return out


def _centroid(members: tuple[int, ...], scene: Scene) -> Point2:
    xy = scene.subnet_xy[list(members)]
    return Point2(float(np.mean(xy[:, 0])), float(np.mean(xy[:, 1])))


def _clip_to_area(p: Point2, area_side: float) -> Point2:
    """Project a fused estimate onto the monitored square; the target is
    known to lie inside, so anything beyond is measurement junk."""
    return Point2(min(max(p.x, 0.0), area_side), min(max(p.y, 0.0), area_side))


def _fuse(
    measurements: list[RangeMeasurement],
    members: tuple[int, ...],
    scene: Scene,
    wls_cfg: WlsConfig,
    init: Point2,
) -> WlsResult:
    anchors = [scene.subnet_positions[i] for i in members]
    bounds = ((0.0, 0.0), (scene.area_side, scene.area_side))
    return solve_wls(measurements, anchors, wls_cfg, init, bounds=bounds)


def run_localization(
    scene: Scene,
    params: SensingParams,
    model: ChannelModel,
    frame: FrameConfig,
    k: int,
    strategy: Strategy,
    wls_cfg: WlsConfig,
    rng: np.random.Generator,
    j_max: Optional[int] = None,
) -> TrialRecord:
    """Run one localization trial and return its record.

    j_max defaults to the frame's time-budget bound and may not exceed
    it. Per-trial draw order: initial subset, then per iteration the
    echoes of the selected subnetworks in ascending index order; random
    benchmark subsets are drawn at the start of each of their iterations.
    Raises NoFeasibleSubsetError only in the pathological all-collinear
    case; callers count such trials as failed.
    """
    n = scene.n_subnets
    budget = max_iterations(frame)
    if j_max is None:
        j_max = budget
    if not 1 <= j_max <= budget:
        raise ValueError(f"j_max must be in [1, {budget}], got {j_max}")
    if not 3 <= k <= n:
        raise ValueError(f"need N >= k >= 3, got N={n}, k={k}")

    rho = frame.sensing_rbs_per_iter * strategy.rho_factor
    params_iter = replace(params, rbs_per_subnet=subnet_rbs(frame, k, strategy, j_max))
    grid_rbs = frame.slots_per_frame * frame.rbs_per_slot_grid

    if strategy.kind is StrategyKind.PROPOSED:
        return _run_proposed(
            scene, params_iter, model, k, wls_cfg, rng, j_max, rho, grid_rbs
        )
    return _run_benchmark(
        scene, params_iter, model, k, strategy, wls_cfg, rng, j_max, rho, grid_rbs
    )


def _random_subset(rng: np.random.Generator, n: int, k: int) -> tuple[int, ...]:
    return tuple(sorted(int(i) for i in rng.choice(n, size=k, replace=False)))


def _run_proposed(
    scene: Scene,
    params: SensingParams,
    model: ChannelModel,
    k: int,
    wls_cfg: WlsConfig,
    rng: np.random.Generator,
    j_max: int,
    rho: int,
    grid_rbs: int,
) -> TrialRecord:
    members = _random_subset(rng, scene.n_subnets, k)
    prev_members = members
    q_hat: Optional[Point2] = None
    history: list[IterationRecord] = []
    clamped = 0
    converged = False

    for j in range(j_max):
        measurements = _measure_subset(members, scene, params, model, rng)
        clamped += sum(not m.valid for m in measurements)
        init = _centroid(members, scene) if q_hat is None else q_hat
        result = _fuse(measurements, members, scene, wls_cfg, init)
        q_hat = _clip_to_area(result.estimate, scene.area_side)
        history.append(
            IterationRecord(
                members=members,
                estimate=q_hat,
                abs_error=distance(q_hat, scene.target),
                wls=result,
                measurements=tuple(measurements),
            )
        )
        if j + 1 >= j_max:
            break
        selection = select_subset(q_hat, scene, params, k)
        if selection.members == prev_members:
            converged = True
            break
        prev_members = selection.members
        members = selection.members

    iterations = len(history)
    return TrialRecord(
        estimate=q_hat,
        abs_error=distance(q_hat, scene.target),
        iterations_used=iterations,
        converged=converged,
        clamped_measurements=clamped,
        throughput_loss=iterations * rho / grid_rbs,
        history=tuple(history),
    )


def _run_benchmark(
    scene: Scene,
    params: SensingParams,
    model: ChannelModel,
    k: int,
    strategy: Strategy,
    wls_cfg: WlsConfig,
    rng: np.random.Generator,
    j_max: int,
    rho: int,
    grid_rbs: int,
) -> TrialRecord:
    iterations = 1 if strategy.kind is StrategyKind.BENCHMARK1 else j_max
    history: list[IterationRecord] = []
    estimates: list[Point2] = []
    clamped = 0
    all_converged = True
    prev_estimate: Optional[Point2] = None

    for _ in range(iterations):
        members = _random_subset(rng, scene.n_subnets, k)
        measurements = _measure_subset(members, scene, params, model, rng)
        clamped += sum(not m.valid for m in measurements)
        if strategy.kind is StrategyKind.BENCHMARK3 and prev_estimate is not None:
            init = prev_estimate
        else:
            init = _centroid(members, scene)
        result = _fuse(measurements, members, scene, wls_cfg, init)
        all_converged &= result.converged
        estimate = _clip_to_area(result.estimate, scene.area_side)
        prev_estimate = estimate
        estimates.append(estimate)
        history.append(
            IterationRecord(
                members=members,
                estimate=estimate,
                abs_error=distance(estimate, scene.target),
                wls=result,
                measurements=tuple(measurements),
            )
        )

    if strategy.kind is StrategyKind.BENCHMARK1:
        final = estimates[0]
        rb_used = j_max * rho
    else:
        final = Point2(
            float(np.mean([p.x for p in estimates])),
            float(np.mean([p.y for p in estimates])),
        )
        rb_used = iterations * rho

    return TrialRecord(
        estimate=final,
        abs_error=distance(final, scene.target),
        iterations_used=iterations,
        converged=all_converged,
        clamped_measurements=clamped,
        throughput_loss=rb_used / grid_rbs,
        history=tuple(history),
    )
