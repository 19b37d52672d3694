"""Downlink rate accounting and the sensing/communication trade-off.

Communication links are short-range line-of-sight with free-space gain
|h|^2 = (lambda / (4 pi d))^2. Every AP interferes with every other
subnetwork's users on the shared communication RBs; reserving rho RBs
per sensing iteration removes the fraction rho / (F_S * N_RB) of the
grid from communication.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .protocol import FrameConfig, max_iterations
from .scene import Point2, Scene


@dataclass(frozen=True)
class CommsParams:
    per_user_bandwidth: float  # Hz
    user_noise_power: float    # W over the per-user bandwidth
    total_bandwidth: float     # Hz

    def __post_init__(self) -> None:
        if min(self.per_user_bandwidth, self.user_noise_power, self.total_bandwidth) <= 0:
            raise ValueError("all communication parameters must be > 0")


@dataclass(frozen=True)
class CommsResult:
    sum_rate_ideal: float          # bit/s
    sum_rate_effective: float      # bit/s
    throughput_loss_fraction: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.throughput_loss_fraction <= 1.0:
            raise ValueError("loss fraction must lie in [0, 1]")


def _friis_gain(wavelength: float, d: float) -> float:
    return (wavelength / (4.0 * math.pi * max(d, 1e-9))) ** 2


def sinr(
    user: Point2,
    serving_ap: int,
    scene: Scene,
    tx_powers: Sequence[float],
    wavelength: float,
    comms: CommsParams,
) -> float:
    """Downlink SINR at one user: serving power over noise plus the sum
    of co-channel interference from every other AP."""
    uxy = user.as_array()
    diff = scene.subnet_xy - uxy
    d = np.hypot(diff[:, 0], diff[:, 1])
    gains = (wavelength / (4.0 * math.pi * np.maximum(d, 1e-9))) ** 2
    rx = np.asarray(tx_powers, dtype=float) * gains
    interference = float(np.sum(rx)) - float(rx[serving_ap])
    return float(rx[serving_ap]) / (comms.user_noise_power + interference)


def sum_rate(
    scene: Scene,
    tx_powers: Sequence[float],
    wavelength: float,
    comms: CommsParams,
) -> float:
    """Ideal downlink network sum-rate, sum of B*log2(1 + SINR) over all users."""
    total = 0.0
    for n, users in enumerate(scene.user_positions):
        for user in users:
            total += comms.per_user_bandwidth * math.log2(
                1.0 + sinr(user, n, scene, tx_powers, wavelength, comms)
            )
    return total


def effective_rate(r0: float, rho: int, f_s: int, n_rb: int) -> float:
    """Sum-rate left after reserving rho of the F_S * N_RB RBs for sensing."""
    capacity = f_s * n_rb
    if rho > capacity:
        raise ValueError(f"rho={rho} exceeds the {capacity}-RB sensing-period grid")
    return r0 * (1.0 - rho / capacity)


def average_throughput_loss(frame: FrameConfig, k: int, j_used: int) -> float:
    """Fraction of the frame's RB grid spent on sensing over j_used iterations.

    Total sensing RBs consumed divided by the full frame grid,
    j_used * rho / (F * N_RB).
    """
    if j_used < 0:
        raise ValueError(f"j_used must be >= 0, got {j_used}")
    if j_used > max_iterations(frame):
        raise ValueError(
            f"j_used={j_used} exceeds the budget of {max_iterations(frame)} iterations"
        )
    if frame.sensing_rbs_per_iter < k or frame.sensing_rbs_per_iter % k:
        raise ValueError(
            f"sensing RBs per iteration ({frame.sensing_rbs_per_iter}) must be a "
            f"positive multiple of the subset size ({k})"
        )
    return j_used * frame.sensing_rbs_per_iter / (frame.slots_per_frame * frame.rbs_per_slot_grid)


def comms_result(r0: float, frame: FrameConfig, j_used: int, k: int) -> CommsResult:
    """Bundle the ideal rate with its sensing-degraded counterpart."""
    loss = average_throughput_loss(frame, k, j_used)
    return CommsResult(
        sum_rate_ideal=r0,
        sum_rate_effective=r0 * (1.0 - loss),
        throughput_loss_fraction=loss,
    )
