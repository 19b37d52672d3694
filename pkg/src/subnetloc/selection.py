"""Weighted-GDOP scoring and exhaustive fixed-size subset search.

The score of a candidate subset is sqrt(Tr[(H^T W H)^-1]) where H stacks
the unit bearing vectors from the current location estimate to each
member AP and W is diagonal with the inverse range-variance bounds.
Lower is better: it blends member geometry (spread of bearings) with
link quality (bound at the estimated ranges). The best subset of size k
is found by scoring every k-combination; the combination stream is
lexicographic over sorted indices, and the (min score, lexicographic
tie-break) reduction is order-independent, so the enumeration can be
chunked or partitioned freely.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .channel import SensingParams
from .ranging import ecrlb
from .scene import Point2, Scene

# Singularity threshold on det(H^T W H) with W normalized to unit
# geometric mean, making near-collinearity rejection scale-free.
DET_EPS = 1e-10

# Rows closer than this to the estimate are degenerate (no bearing).
_COINCIDENT_EPS = 1e-12

# Chunk size for streaming combination scoring; bounds peak memory.
_CHUNK = 1 << 18

_combo_cache: dict[tuple[int, int], np.ndarray] = {}


class DegenerateGeometryError(ValueError):
    """An AP coincides with the evaluation point; no bearing exists."""


class SingularGeometryError(ValueError):
    """The subset's normal matrix is singular or near-singular."""


class NoFeasibleSubsetError(RuntimeError):
    """Every candidate subset was rejected as singular."""


@dataclass(frozen=True)
class GeometryMatrix:
    """K unit bearing rows from the evaluation point to each member AP."""

    rows: np.ndarray  # (K, 2), each row unit-norm


@dataclass(frozen=True)
class WeightMatrix:
    """Diagonal of inverse range-variance bounds, one entry per member."""

    diag: np.ndarray  # (K,), all > 0

    def __post_init__(self) -> None:
        if np.any(self.diag <= 0) or not np.all(np.isfinite(self.diag)):
            raise ValueError("weights must be positive and finite")


@dataclass(frozen=True)
class SubsetSelection:
    members: tuple[int, ...]  # strictly increasing subnet indices
    wgdop: float
    feasible: bool


def geometry_matrix(q_hat: Point2, positions: list[Point2] | tuple[Point2, ...]) -> GeometryMatrix:
    """Unit vectors (q_hat - s_n) / ||q_hat - s_n|| stacked as rows."""
    pts = np.array([[p.x, p.y] for p in positions], dtype=float)
    diff = q_hat.as_array() - pts
    norms = np.hypot(diff[:, 0], diff[:, 1])
    if np.any(norms < _COINCIDENT_EPS):
        bad = int(np.argmin(norms))
        raise DegenerateGeometryError(f"evaluation point coincides with AP index {bad}")
    return GeometryMatrix(rows=diff / norms[:, np.newaxis])


def wgdop(h: GeometryMatrix, w: WeightMatrix) -> float:
    """sqrt(Tr[(H^T W H)^-1]) for unit-row H and positive diagonal W.

    Raises SingularGeometryError when the normal matrix fails the
    scale-free determinant test (collinear or near-collinear members).
    """
    rows, diag = h.rows, w.diag
    a = float(np.sum(diag * rows[:, 0] * rows[:, 0]))
    b = float(np.sum(diag * rows[:, 0] * rows[:, 1]))
    c = float(np.sum(diag * rows[:, 1] * rows[:, 1]))
    det = a * c - b * b

    gm = math.exp(float(np.mean(np.log(diag))))
    if det / gm**2 <= DET_EPS:
        raise SingularGeometryError(f"normal matrix near singular (scaled det {det / gm**2:.3e})")
    return math.sqrt((a + c) / det)


def _combo_indices(n: int, k: int) -> np.ndarray:
    """(C(n,k), k) index array in lexicographic order, cached per (n, k)."""
    key = (n, k)
    cached = _combo_cache.get(key)
    if cached is None:
        cached = np.fromiter(
            (i for combo in combinations(range(n), k) for i in combo),
            dtype=np.intp,
            count=k * math.comb(n, k),
        ).reshape(-1, k)
        cached.setflags(write=False)
        _combo_cache[key] = cached
    return cached


def select_subset(q_hat: Point2, scene: Scene, params: SensingParams, k: int) -> SubsetSelection:
    """Exhaustively score all k-subsets and return the feasible minimum.

    Weights are the inverse bounds at the ranges implied by q_hat. Ties
    on the score break toward the lexicographically smallest member
    list; subsets failing the determinant test are skipped. Raises
    NoFeasibleSubsetError if nothing survives (all APs collinear with
    the estimate, a measure-zero pathology).
    """
    n = scene.n_subnets
    if not 3 <= k <= n:
        raise ValueError(f"need n >= k >= 3, got n={n}, k={k}")

    diff = q_hat.as_array() - scene.subnet_xy
    norms = np.hypot(diff[:, 0], diff[:, 1])
    usable = norms >= _COINCIDENT_EPS
    units = np.zeros_like(diff)
    units[usable] = diff[usable] / norms[usable, np.newaxis]

    weights = np.array(
        [1.0 / ecrlb(q_hat, s, params) for s in scene.subnet_positions], dtype=float
    )
    log_w = np.where(usable, np.log(weights), 0.0)

    combos = _combo_indices(n, k)
    best_score = math.inf
    best_row = -1
    for start in range(0, combos.shape[0], _CHUNK):
        idx = combos[start : start + _CHUNK]
        u = units[idx]                      # (C, k, 2)
        w = weights[idx]                    # (C, k)
        a = np.einsum("ck,ck->c", w, u[:, :, 0] * u[:, :, 0])
        b = np.einsum("ck,ck->c", w, u[:, :, 0] * u[:, :, 1])
        c = np.einsum("ck,ck->c", w, u[:, :, 1] * u[:, :, 1])
        det = a * c - b * b

        gm_sq = np.exp(2.0 * np.mean(log_w[idx], axis=1))
        feasible = (det / gm_sq > DET_EPS) & np.all(usable[idx], axis=1)
        if not np.any(feasible):
            continue
        score = np.full(det.shape, math.inf)
        score[feasible] = np.sqrt((a[feasible] + c[feasible]) / det[feasible])
        row = int(np.argmin(score))  # argmin returns the first minimum: lexicographic tie-break
        if score[row] < best_score:
            best_score = float(score[row])
            best_row = start + row

    if best_row < 0:
        raise NoFeasibleSubsetError(f"no full-rank subset of size {k} among {n} subnetworks")
    return SubsetSelection(
        members=tuple(int(i) for i in combos[best_row]),
        wgdop=best_score,
        feasible=True,
    )
