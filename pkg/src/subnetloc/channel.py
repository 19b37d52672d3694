"""Echo synthesis for mono-static RSS sensing.

One echo block is the set of complex receive samples a subnetwork
collects during a single sensing iteration: ``n_antennas`` rows by
``pilots_per_rb * rbs_per_subnet`` resource elements. Sample model per
antenna m and resource element r:

    y[m, r] = sqrt(mean_echo_power(d)) * alpha[m] * u[r] + z[m, r]

with unit pilots u[r] = 1, additive circularly-symmetric complex
Gaussian noise z of total power ``noise_power``, and a unit-power fading
coefficient alpha drawn once per antenna and held over the block (the
channel is static within a sensing period; spatial diversity comes from
the antenna array).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SensingParams:
    """Physical constants of the sensing link (all linear units)."""

    tx_power: float        # W
    g_t: float             # linear transmit gain
    g_r: float             # linear receive gain
    rcs: float             # m^2, target radar cross-section
    wavelength: float      # m
    noise_power: float     # W per resource element
    pilots_per_rb: int     # resource elements per resource block
    rbs_per_subnet: int    # sensing RBs granted to this subnetwork per iteration
    n_antennas: int        # receive array size

    def __post_init__(self) -> None:
        errors = []
        for name in ("tx_power", "g_t", "g_r", "rcs", "wavelength", "noise_power"):
            if getattr(self, name) <= 0:
                errors.append(f"{name} must be > 0, got {getattr(self, name)}")
        for name in ("pilots_per_rb", "rbs_per_subnet", "n_antennas"):
            if getattr(self, name) < 1:
                errors.append(f"{name} must be >= 1, got {getattr(self, name)}")
        if errors:
            raise ValueError("; ".join(errors))

    @property
    def total_pilots(self) -> int:
        """Resource elements carrying pilots in one sensing iteration."""
        return self.pilots_per_rb * self.rbs_per_subnet

    @property
    def link_budget(self) -> float:
        """Distance-independent part of the echo power, p*Gt*Gr*rcs*lambda^2/(4 pi)^3."""
        return (
            self.tx_power * self.g_t * self.g_r * self.rcs * self.wavelength**2
            / (4.0 * math.pi) ** 3
        )


class Fading(enum.Enum):
    AWGN = "awgn"
    RAYLEIGH = "rayleigh"
    RICIAN = "rician"


@dataclass(frozen=True)
class ChannelModel:
    """Small-scale fading model applied on top of the mean echo power."""

    kind: Fading
    rician_k: float = 7.0  # linear ratio of LoS to scattered power

    def __post_init__(self) -> None:
        if self.rician_k < 0:
            raise ValueError(f"rician_k must be >= 0, got {self.rician_k}")


@dataclass(frozen=True)
class EchoBlock:
    """Receive samples of one sensing iteration, shape (n_antennas, total_pilots)."""

    samples: np.ndarray
    true_range: float  # m


def mean_echo_power(params: SensingParams, d: float) -> float:
    """Mean received echo power at range d, from the radar range equation.

    Returns p * Gt * Gr * rcs * lambda^2 / ((4 pi)^3 * d^4) in watts.
    """
    if d <= 0:
        raise ValueError(f"range must be > 0, got {d}")
    return params.link_budget / d**4


def draw_fading(model: ChannelModel, rng: np.random.Generator) -> complex:
    """Draw one unit-power fading coefficient.

    AWGN: exactly 1. Rayleigh: CN(0, 1). Rician: envelope is
    Rice-distributed with shape ``rician_k`` and unit mean-square value,
    phase uniform.
    """
    return complex(_draw_fading_block(model, rng, 1)[0])


def _draw_fading_block(model: ChannelModel, rng: np.random.Generator, size: int) -> np.ndarray:
    if model.kind is Fading.AWGN:
        return np.ones(size, dtype=complex)
    if model.kind is Fading.RAYLEIGH:
        re = rng.standard_normal(size)
        im = rng.standard_normal(size)
        return (re + 1j * im) / math.sqrt(2.0)
    if model.kind is Fading.RICIAN:
        # LoS amplitude nu and scatter variance per quadrature sigma^2,
        # normalized so E|alpha|^2 = nu^2 + 2 sigma^2 = 1.
        k = model.rician_k
        nu = math.sqrt(k / (k + 1.0))
        sigma = math.sqrt(1.0 / (2.0 * (k + 1.0)))
        envelope = np.hypot(
            nu + sigma * rng.standard_normal(size),
            sigma * rng.standard_normal(size),
        )
        phase = rng.uniform(0.0, 2.0 * math.pi, size)
        return envelope * np.exp(1j * phase)
    raise ValueError(f"unknown fading kind: {model.kind!r}")


def simulate_echo(
    params: SensingParams,
    model: ChannelModel,
    d: float,
    rng: np.random.Generator,
) -> EchoBlock:
    """Synthesize the echo block received from a target at range d.

    Draw order: one fading coefficient per antenna, then the noise block
    row-major. Fading is held constant across the resource elements of
    the block and independent across antennas.
    """
    amp = math.sqrt(mean_echo_power(params, d))
    m, r_tot = params.n_antennas, params.total_pilots

    alpha = _draw_fading_block(model, rng, m)
    noise_scale = math.sqrt(params.noise_power / 2.0)
    noise = noise_scale * (
        rng.standard_normal((m, r_tot)) + 1j * rng.standard_normal((m, r_tot))
    )
    samples = amp * alpha[:, np.newaxis] + noise
    return EchoBlock(samples=samples, true_range=d)
