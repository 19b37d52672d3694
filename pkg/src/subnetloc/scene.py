"""Deterministic generation of the 2-D deployment geometry.

A scene holds the access-point positions of all subnetworks, the users
served inside each subnetwork, and the single sensing target. Everything
is sampled from one seeded generator so that an identical config always
reproduces the identical scene.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np


@dataclass(frozen=True)
class Point2:
    """A point in the 2-D deployment plane, in meters."""

    x: float
    y: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"coordinates must be finite, got ({self.x}, {self.y})")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=float)


def distance(a: Point2, b: Point2) -> float:
    """Euclidean distance between two points, in meters."""
    return math.hypot(a.x - b.x, a.y - b.y)


@dataclass(frozen=True)
class DeployConfig:
    """Parameters of one random deployment.

    Subnetwork APs and the target are i.i.d. uniform over the
    ``area_side`` x ``area_side`` square; each subnetwork's users are
    uniform by area over an annulus of radii [user_r_min, user_r_max]
    centered on their AP.
    """

    n_subnets: int
    users_per_subnet: int
    area_side: float          # m
    user_r_min: float         # m
    user_r_max: float         # m
    seed: int

    def __post_init__(self) -> None:
        errors = []
        if self.n_subnets < 1:
            errors.append(f"n_subnets must be >= 1, got {self.n_subnets}")
        if self.users_per_subnet < 0:
            errors.append(f"users_per_subnet must be >= 0, got {self.users_per_subnet}")
        if self.area_side <= 0:
            errors.append(f"area_side must be > 0, got {self.area_side}")
        if self.user_r_min <= 0:
            errors.append(f"user_r_min must be > 0, got {self.user_r_min}")
        if self.user_r_max <= self.user_r_min:
            errors.append(
                f"user_r_max must exceed user_r_min, got {self.user_r_max} <= {self.user_r_min}"
            )
        if errors:
            raise ValueError("; ".join(errors))


@dataclass(frozen=True)
class Scene:
    """Immutable deployment: AP positions, per-subnetwork users, target.

    Instances are safe to share across concurrent trial workers.
    """

    subnet_positions: tuple[Point2, ...]
    user_positions: tuple[tuple[Point2, ...], ...]
    target: Point2
    area_side: float

    @cached_property
    def subnet_xy(self) -> np.ndarray:
        """(N, 2) array view of the AP positions."""
        arr = np.array([[p.x, p.y] for p in self.subnet_positions], dtype=float)
        arr.setflags(write=False)
        return arr

    @cached_property
    def target_xy(self) -> np.ndarray:
        arr = self.target.as_array()
        arr.setflags(write=False)
        return arr

    @property
    def n_subnets(self) -> int:
        return len(self.subnet_positions)


def generate_scene(cfg: DeployConfig) -> Scene:
    """Sample a deployment from the config's seed.

    Draw order (fixed for reproducibility): AP coordinates, target
    coordinates, then per-subnetwork user angles and radii in subnet
    order. The annulus radius is drawn with density proportional to r so
    users are uniform by area.
    """
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed))

    aps = rng.uniform(0.0, cfg.area_side, size=(cfg.n_subnets, 2))
    target = rng.uniform(0.0, cfg.area_side, size=2)

    users: list[tuple[Point2, ...]] = []
    r_min_sq = cfg.user_r_min**2
    r_max_sq = cfg.user_r_max**2
    for n in range(cfg.n_subnets):
        theta = rng.uniform(0.0, 2.0 * math.pi, size=cfg.users_per_subnet)
        radius = np.sqrt(rng.uniform(r_min_sq, r_max_sq, size=cfg.users_per_subnet))
        ux = aps[n, 0] + radius * np.cos(theta)
        uy = aps[n, 1] + radius * np.sin(theta)
        users.append(tuple(Point2(float(x), float(y)) for x, y in zip(ux, uy)))

    return Scene(
        subnet_positions=tuple(Point2(float(x), float(y)) for x, y in aps),
        user_positions=tuple(users),
        target=Point2(float(target[0]), float(target[1])),
        area_side=cfg.area_side,
    )
