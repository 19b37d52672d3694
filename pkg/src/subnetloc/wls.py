"""Weighted Gauss-Newton trilateration.

Fuses a set of range measurements into a position estimate by
minimizing sum_n (d_hat_n - ||q - s_n||)^2 / weight_n. Steps solve the
2x2 normal equations (H^T W H) dq = H^T W e with H the unit-bearing
Jacobian at the current iterate and e the range residuals; a simple
backtracking fallback halves any step that fails to decrease the
objective, which keeps the iteration from diverging on poor starts.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .ranging import RangeMeasurement
from .scene import Point2

# Norms below this are treated as zero when forming bearings; the
# residual at such a point is just d_hat.
_TINY_NORM = 1e-12

# Backtracking: halve a non-decreasing step at most this many times.
_MAX_HALVINGS = 8

# Slack around the feasible region when ranking basins; noisy estimates
# of an edge target may legitimately sit slightly outside.
_BOUNDS_PAD_M = 20.0


class InitMode(enum.Enum):
    CENTROID = "centroid-of-subset"
    FIXED = "fixed-point"
    WARM_START = "warm-start"


@dataclass(frozen=True)
class WlsConfig:
    epsilon: float = 1e-4        # m, step-norm convergence threshold
    max_iters: int = 50
    init_mode: InitMode = InitMode.CENTROID

    def __post_init__(self) -> None:
        if self.epsilon <= 0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")


@dataclass(frozen=True)
class WlsResult:
    estimate: Point2
    iterations: int
    converged: bool
    final_step_norm: float


class SingularStepError(ValueError):
    """Normal matrix is rank-deficient at the current iterate."""


def _as_xy(anchors: Sequence[Point2]) -> np.ndarray:
    return np.array([[p.x, p.y] for p in anchors], dtype=float)


def residuals(q: Point2, anchors: Sequence[Point2], ranges: Sequence[float]) -> np.ndarray:
    """Range residual vector, element n = d_hat_n - ||q - s_n||."""
    if len(anchors) != len(ranges):
        raise ValueError("anchors and ranges must have equal length")
    diff = q.as_array() - _as_xy(anchors)
    return np.asarray(ranges, dtype=float) - np.hypot(diff[:, 0], diff[:, 1])


def _normal_step(qxy: np.ndarray, xy: np.ndarray, ranges: np.ndarray, inv_w: np.ndarray) -> np.ndarray:
    diff = qxy - xy
    norms = np.hypot(diff[:, 0], diff[:, 1])
    safe = np.maximum(norms, _TINY_NORM)
    h = diff / safe[:, np.newaxis]
    e = ranges - norms

    hw = h * inv_w[:, np.newaxis]
    normal = hw.T @ h
    rhs = hw.T @ e
    det = normal[0, 0] * normal[1, 1] - normal[0, 1] * normal[1, 0]
    scale = normal[0, 0] * normal[1, 1]
    if det <= 0 or (scale > 0 and det / scale < 1e-14):
        raise SingularStepError(f"normal matrix singular (det {det:.3e})")
    return np.array(
        [
            (normal[1, 1] * rhs[0] - normal[0, 1] * rhs[1]) / det,
            (normal[0, 0] * rhs[1] - normal[1, 0] * rhs[0]) / det,
        ]
    )


def gauss_newton_step(
    q: Point2,
    anchors: Sequence[Point2],
    ranges: Sequence[float],
    weights: Sequence[float],
) -> Point2:
    """One unit-damping update increment (H^T W H)^-1 H^T W e.

    W is diagonal with entries 1/weight_n; a common positive scaling of
    the weights cancels exactly.
    """
    w = np.asarray(weights, dtype=float)
    if np.any(w <= 0):
        raise ValueError("weights must be positive")
    step = _normal_step(q.as_array(), _as_xy(anchors), np.asarray(ranges, dtype=float), 1.0 / w)
    return Point2(float(step[0]), float(step[1]))


def _objective(qxy: np.ndarray, xy: np.ndarray, ranges: np.ndarray, inv_w: np.ndarray) -> float:
    diff = qxy - xy
    e = ranges - np.hypot(diff[:, 0], diff[:, 1])
    return float(np.sum(inv_w * e * e))


def _linear_ls_init(xy: np.ndarray, ranges: np.ndarray) -> Optional[np.ndarray]:
    """Closed-form trilateration start: subtracting circle equations
    pairwise turns them into a linear system in q, which has no basin
    ambiguity. Returns None when the anchors are (near-)collinear."""
    a = 2.0 * (xy[1:] - xy[0])
    b = (
        (ranges[0] ** 2 - ranges[1:] ** 2)
        + np.sum(xy[1:] ** 2, axis=1)
        - float(np.sum(xy[0] ** 2))
    )
    m = a.T @ a
    rhs = a.T @ b
    det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
    scale = m[0, 0] * m[1, 1]
    if det <= 0 or (scale > 0 and det / scale < 1e-12):
        return None
    return np.array(
        [
            (m[1, 1] * rhs[0] - m[0, 1] * rhs[1]) / det,
            (m[0, 0] * rhs[1] - m[1, 0] * rhs[0]) / det,
        ]
    )


def _circle_intersections(p0: np.ndarray, r0: float, p1: np.ndarray, r1: float) -> list[np.ndarray]:
    """Intersection points of two range circles (possibly none)."""
    delta = p1 - p0
    d = float(np.hypot(delta[0], delta[1]))
    if d < _TINY_NORM or d > r0 + r1 or d < abs(r0 - r1):
        return []
    along = (r0 * r0 - r1 * r1 + d * d) / (2.0 * d)
    h_sq = r0 * r0 - along * along
    h = math.sqrt(max(h_sq, 0.0))
    unit = delta / d
    mid = p0 + along * unit
    perp = np.array([-unit[1], unit[0]])
    return [mid + h * perp, mid - h * perp]


def _descend(
    start: np.ndarray,
    xy: np.ndarray,
    ranges: np.ndarray,
    inv_w: np.ndarray,
    cfg: WlsConfig,
) -> tuple[WlsResult, float]:
    """Damped Gauss-Newton from one start; returns (result, final objective).

    A step that does not decrease the weighted squared-residual sum is
    halved up to 8 times; if no damping level helps, or the normal
    matrix is singular, the last iterate is returned with
    converged=False.
    """
    qxy = start.copy()
    obj = _objective(qxy, xy, ranges, inv_w)
    step_norm = math.inf
    iterations = 0

    for iterations in range(1, cfg.max_iters + 1):
        try:
            step = _normal_step(qxy, xy, ranges, inv_w)
        except SingularStepError:
            return WlsResult(Point2(float(qxy[0]), float(qxy[1])), iterations, False, step_norm), obj

        accepted = False
        scale = 1.0
        for _ in range(_MAX_HALVINGS + 1):
            candidate = qxy + scale * step
            cand_obj = _objective(candidate, xy, ranges, inv_w)
            if cand_obj <= obj:
                accepted = True
                break
            scale *= 0.5
        if not accepted:
            return WlsResult(Point2(float(qxy[0]), float(qxy[1])), iterations, False, step_norm), obj

        qxy = candidate
        obj = cand_obj
        step_norm = float(np.hypot(scale * step[0], scale * step[1]))
        if step_norm <= cfg.epsilon:
            return WlsResult(Point2(float(qxy[0]), float(qxy[1])), iterations, True, step_norm), obj

    return WlsResult(Point2(float(qxy[0]), float(qxy[1])), iterations, False, step_norm), obj


def _candidate_starts(
    init: Point2,
    xy: np.ndarray,
    measurements: Sequence[RangeMeasurement],
) -> list[np.ndarray]:
    """The caller's init plus deterministic auxiliary starts.

    Range circles of a strongly unequal weight profile intersect in two
    points, and plain descent from a single start lands in the mirror
    basin on a sizable fraction of random geometries. The linear
    least-squares point and both intersections of the two most reliable
    circles cover the basins; solve_wls keeps whichever descent ends
    lowest.
    """
    candidates = [init.as_array()]

    ranges = np.array([m.range for m in measurements], dtype=float)
    valid = np.array([m.valid for m in measurements], dtype=bool)
    use = np.flatnonzero(valid) if int(valid.sum()) >= 3 else np.arange(len(measurements))

    linear = _linear_ls_init(xy[use], ranges[use])
    if linear is not None:
        candidates.append(linear)

    order = sorted(use, key=lambda i: measurements[i].weight_crlb)
    if len(order) >= 2:
        i0, i1 = order[0], order[1]
        candidates.extend(_circle_intersections(xy[i0], ranges[i0], xy[i1], ranges[i1]))
    return candidates


def solve_wls(
    measurements: Sequence[RangeMeasurement],
    anchors: Sequence[Point2],
    cfg: WlsConfig,
    init: Point2,
    bounds: Optional[tuple[tuple[float, float], tuple[float, float]]] = None,
) -> WlsResult:
    """Damped Gauss-Newton descent to the weighted range-residual optimum.

    Descends from ``init`` and from the auxiliary starts of
    _candidate_starts, returning the run with the lowest final weighted
    objective (ties keep the earlier candidate, so an exact init wins).
    Each run iterates until the step norm drops to cfg.epsilon or the
    iteration budget runs out.

    ``bounds`` = ((xmin, ymin), (xmax, ymax)) marks the region known to
    contain the target. Range-only measurements from one-sided anchor
    geometry admit a mirror-image basin, generally far outside that
    region; when bounds are given and at least one run ends inside them
    (padded by 20 m), out-of-region basins are ignored.
    """
    if len(measurements) < 3:
        raise ValueError(f"need at least 3 measurements, got {len(measurements)}")
    if len(measurements) != len(anchors):
        raise ValueError("measurements and anchors must have equal length")

    xy = _as_xy(anchors)
    ranges = np.array([m.range for m in measurements], dtype=float)
    # A common scaling of the weights cancels in the step; leaving the
    # raw inverses keeps that cancellation exact for power-of-two scales.
    inv_w = np.array([1.0 / m.weight_crlb for m in measurements], dtype=float)

    runs = [
        _descend(start, xy, ranges, inv_w, cfg)
        for start in _candidate_starts(init, xy, measurements)
    ]
    pool = runs
    if bounds is not None:
        (xmin, ymin), (xmax, ymax) = bounds
        inside = [
            (result, obj)
            for result, obj in runs
            if xmin - _BOUNDS_PAD_M <= result.estimate.x <= xmax + _BOUNDS_PAD_M
            and ymin - _BOUNDS_PAD_M <= result.estimate.y <= ymax + _BOUNDS_PAD_M
        ]
        if inside:
            pool = inside

    best, _ = min(pool, key=lambda run: run[1])
    return best
