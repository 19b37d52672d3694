"""RSS estimation, range inversion, and Cramer-Rao range bounds.

The receive-power statistic averages |y|^2 over every antenna and
resource element of an echo block and subtracts the known noise power;
inverting the radar range equation through a fourth root turns it into a
range estimate. The theoretical variance bound for that estimate,

    crlb(d) = d^6 * noise_power * (4 pi)^3 / (4 * R * p * Gt * Gr * rcs * lambda^2)

with R the pilot count of the iteration, doubles as a link-quality
weight: evaluated at a measured range it weights the WLS fusion, and
evaluated at the range implied by the current location estimate it
weights the subset-selection score.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import EchoBlock, SensingParams
from .scene import Point2, distance

# Degenerate geometry guard: ranges implied by a location estimate are
# never taken below this, so d^6 weights stay finite near an AP.
RANGE_FLOOR_M = 0.1

# Fraction of the post-averaging noise level used as the minimum usable
# RSS; estimates at or below it are clamped and flagged invalid.
RSS_FLOOR_FRACTION = 1e-3


@dataclass(frozen=True)
class RangeMeasurement:
    """One subnetwork's range estimate and its fusion weight."""

    subnet_id: int
    rss: float          # W, noise-subtracted receive power estimate
    range: float        # m
    weight_crlb: float  # m^2, variance bound at the measured range
    valid: bool         # False iff the RSS had to be clamped to the floor

    def __post_init__(self) -> None:
        if self.range <= 0 or self.weight_crlb <= 0:
            raise ValueError("range and weight_crlb must be positive")


def rss_floor(params: SensingParams) -> float:
    """Minimum usable RSS for range inversion, in watts."""
    return RSS_FLOOR_FRACTION * params.noise_power / (params.n_antennas * params.total_pilots)


def estimate_rss(block: EchoBlock, noise_power: float) -> float:
    """Noise-subtracted mean receive power over the whole block.

    May come out negative in deep noise; callers decide how to handle
    that (see estimate_range).
    """
    if block.samples.size == 0:
        raise ValueError("echo block is empty")
    return float(np.mean(np.abs(block.samples) ** 2)) - noise_power


def estimate_range(rss: float, params: SensingParams) -> tuple[float, bool]:
    """Invert the radar range equation: d = (link_budget / rss)^(1/4).

    An RSS at or below the floor is replaced by the floor, which maps to
    a very large but finite range; the returned flag is False in that
    case. The d^6 growth of the fusion weight then suppresses such
    measurements automatically.
    """
    floor = rss_floor(params)
    valid = rss > floor
    effective = rss if valid else floor
    return (params.link_budget / effective) ** 0.25, valid


def crlb_range(d: float, params: SensingParams) -> float:
    """Variance lower bound for any unbiased range estimate at range d.

    Derived from the Fisher information of the pilot observations,
    1/I(d) with I(d) = 4 a(d)^2 R / (d^2 sigma^2) and a(d)^2 the mean
    echo power. The pilot count R is the per-subnetwork allocation of
    one iteration (antenna count does not enter the bound).
    """
    if d <= 0:
        raise ValueError(f"range must be > 0, got {d}")
    r_tot = params.total_pilots
    return d**6 * params.noise_power / (4.0 * r_tot * params.link_budget)


def ecrlb(q_hat: Point2, s_n: Point2, params: SensingParams) -> float:
    """Range-variance bound with the unknown true range replaced by the
    distance from the current location estimate to the AP.

    A coincident estimate and AP is clamped to RANGE_FLOOR_M so the
    result stays positive and finite.
    """
    d_tilde = max(distance(q_hat, s_n), RANGE_FLOOR_M)
    return crlb_range(d_tilde, params)


def measurement_weight(d_hat: float, params: SensingParams) -> float:
    """Fusion weight for a measured range: the bound evaluated at d_hat."""
    if d_hat <= 0:
        raise ValueError(f"measured range must be > 0, got {d_hat}")
    return crlb_range(d_hat, params)


def measure_range(
    subnet_id: int,
    block: EchoBlock,
    params: SensingParams,
) -> RangeMeasurement:
    """Full per-subnetwork pipeline: RSS estimate, range inversion, weight."""
    rss = estimate_rss(block, params.noise_power)
    d_hat, valid = estimate_range(rss, params)
    return RangeMeasurement(
        subnet_id=subnet_id,
        rss=rss,
        range=d_hat,
        weight_crlb=measurement_weight(d_hat, params),
        valid=valid,
    )
