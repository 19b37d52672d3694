"""Experiment configuration: flat key-value files and figure presets.

Config files are plain ``key = value`` lines with ``#`` comments. Keys
mirror the config dataclasses with dots for nesting; units are SI
(meters, seconds, watts, hertz) and linear gains, with decibel inputs
accepted through explicit ``_dbm`` / ``_db`` key suffixes that are
converted at parse time, e.g. ``sensing.tx_power_dbm = 23``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from typing import Callable, Optional

from .channel import ChannelModel, Fading, SensingParams
from .comms import CommsParams
from .harness import EXPERIMENTS, ExperimentConfig, SweepPoint
from .protocol import FrameConfig, Strategy, StrategyKind
from .scene import DeployConfig
from .wls import InitMode, WlsConfig


class ConfigError(ValueError):
    """Invalid configuration; carries one message per offending field."""

    def __init__(self, problems: list[str]):
        self.problems = problems
        super().__init__("\n".join(problems))


# --- physical constant helpers -------------------------------------------

THERMAL_NOISE_DBM_PER_HZ = -174.0
SUBCARRIER_SPACING_HZ = 15e3
PILOTS_PER_RB = 168  # 12 subcarriers x 14 OFDM symbols per slot


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0) * 1e-3


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def thermal_noise_watts(bandwidth_hz: float) -> float:
    return dbm_to_watts(THERMAL_NOISE_DBM_PER_HZ) * bandwidth_hz


# --- defaults: the evaluated deployment ------------------------------------

N_SUBNETS = 40
USERS_PER_SUBNET = 5
K_DEFAULT = 3
AREA_SIDE_M = 200.0
USER_R_MIN_M = 2.0
USER_R_MAX_M = 6.0
TX_POWER_W = dbm_to_watts(23.0)
RCS_M2 = 1.0                      # 0 dBsm
WAVELENGTH_M = 0.03               # 10 GHz carrier
ANTENNA_GAIN = 1.0                # 0 dBi
NOISE_POWER_W = thermal_noise_watts(SUBCARRIER_SPACING_HZ)  # per resource element
TOTAL_BANDWIDTH_HZ = 20e6
FRAME_DURATION_S = 10e-3
SLOTS_PER_FRAME = 10
SLOT_DURATION_S = 1e-3
RBS_PER_SLOT = 106
SENSE_DURATION_S = 1e-3


def default_deploy(seed: int = 0) -> DeployConfig:
    return DeployConfig(
        n_subnets=N_SUBNETS,
        users_per_subnet=USERS_PER_SUBNET,
        area_side=AREA_SIDE_M,
        user_r_min=USER_R_MIN_M,
        user_r_max=USER_R_MAX_M,
        seed=seed,
    )


def default_sensing(k: int = K_DEFAULT, rho: Optional[int] = None, n_antennas: int = 1) -> SensingParams:
    rho = k if rho is None else rho
    return SensingParams(
        tx_power=TX_POWER_W,
        g_t=ANTENNA_GAIN,
        g_r=ANTENNA_GAIN,
        rcs=RCS_M2,
        wavelength=WAVELENGTH_M,
        noise_power=NOISE_POWER_W,
        pilots_per_rb=PILOTS_PER_RB,
        rbs_per_subnet=max(1, rho // k),
        n_antennas=n_antennas,
    )


def default_frame(rho: int = K_DEFAULT, feedback_duration: float = 0.0) -> FrameConfig:
    return FrameConfig(
        frame_duration=FRAME_DURATION_S,
        slots_per_frame=SLOTS_PER_FRAME,
        rbs_per_slot_grid=RBS_PER_SLOT,
        sense_duration=SENSE_DURATION_S,
        feedback_duration=feedback_duration,
        time_budget=FRAME_DURATION_S,
        sensing_rbs_per_iter=rho,
        slot_duration=SLOT_DURATION_S,
    )


def default_comms(users_per_subnet: int = USERS_PER_SUBNET) -> CommsParams:
    per_user = TOTAL_BANDWIDTH_HZ / users_per_subnet
    return CommsParams(
        per_user_bandwidth=per_user,
        user_noise_power=thermal_noise_watts(per_user),
        total_bandwidth=TOTAL_BANDWIDTH_HZ,
    )


# --- presets ---------------------------------------------------------------

PRESET_TRIALS = 2000  # desk-scale default; the reference study averages many more


def _preset_error_vs_iterations(trials: int, seed: int) -> ExperimentConfig:
    return ExperimentConfig(
        experiment="error-vs-iterations",
        trials=trials,
        seed=seed,
        sweep=tuple(SweepPoint(float(j)) for j in range(1, 6)),
        deploy=default_deploy(),
        sensing=default_sensing(),
        frame=default_frame(),
        comms=default_comms(),
        strategies=(
            Strategy(StrategyKind.PROPOSED),
            Strategy(StrategyKind.PROPOSED, rho_factor=2),
            Strategy(StrategyKind.BENCHMARK1),
            Strategy(StrategyKind.BENCHMARK2),
            Strategy(StrategyKind.BENCHMARK3),
        ),
        channel=ChannelModel(Fading.AWGN),
        k=K_DEFAULT,
    )


def _preset_error_vs_antennas(trials: int, seed: int) -> ExperimentConfig:
    return ExperimentConfig(
        experiment="error-vs-antennas",
        trials=trials,
        seed=seed,
        sweep=tuple(
            SweepPoint(float(m), fading)
            for m in (1, 2, 4, 8, 16, 32, 64)
            for fading in (Fading.RAYLEIGH, Fading.RICIAN)
        ),
        deploy=default_deploy(),
        sensing=default_sensing(),
        frame=default_frame(),
        comms=default_comms(),
        strategies=(Strategy(StrategyKind.PROPOSED),),
        channel=ChannelModel(Fading.RAYLEIGH),
        k=K_DEFAULT,
    )


def _preset_convergence_cdf(trials: int, seed: int) -> ExperimentConfig:
    cfg = _preset_error_vs_antennas(trials, seed)
    return replace(
        cfg,
        experiment="convergence-cdf",
        sweep=tuple(
            SweepPoint(float(m), fading)
            for m in (1, 2, 4, 8)
            for fading in (Fading.RAYLEIGH, Fading.RICIAN)
        ),
    )


def _preset_tradeoff_vs_feedback(trials: int, seed: int) -> ExperimentConfig:
    return ExperimentConfig(
        experiment="tradeoff-vs-feedback",
        trials=trials,
        seed=seed,
        sweep=tuple(
            SweepPoint(t_l * 1e-3, fading)
            for t_l in (0, 1, 2, 3, 4, 5)
            for fading in (Fading.AWGN, Fading.RICIAN, Fading.RAYLEIGH)
        ),
        deploy=default_deploy(),
        sensing=default_sensing(),
        frame=default_frame(),
        comms=default_comms(),
        strategies=(Strategy(StrategyKind.PROPOSED),),
        channel=ChannelModel(Fading.AWGN),
        k=K_DEFAULT,
    )


PRESETS: dict[str, Callable[[int, int], ExperimentConfig]] = {
    "error-vs-iterations": _preset_error_vs_iterations,
    "error-vs-antennas": _preset_error_vs_antennas,
    "convergence-cdf": _preset_convergence_cdf,
    "tradeoff-vs-feedback": _preset_tradeoff_vs_feedback,
}

PRESET_DESCRIPTIONS = {
    "error-vs-iterations": "mean error vs. iteration budget, AWGN, all strategies",
    "error-vs-antennas": "mean error at convergence vs. antenna count, Rayleigh/Rician",
    "convergence-cdf": "CDF of iterations to convergence vs. antenna count",
    "tradeoff-vs-feedback": "error and throughput loss vs. feedback duration",
}


def preset(name: str, trials: int = PRESET_TRIALS, seed: int = 1) -> ExperimentConfig:
    if name not in PRESETS:
        raise ConfigError([f"experiment: unknown preset {name!r} (have {sorted(PRESETS)})"])
    return PRESETS[name](trials, seed)


# --- flat key-value parsing --------------------------------------------------

_STRATEGY_TOKENS = {
    "proposed": Strategy(StrategyKind.PROPOSED),
    "proposed-2k": Strategy(StrategyKind.PROPOSED, rho_factor=2),
    "benchmark1": Strategy(StrategyKind.BENCHMARK1),
    "benchmark2": Strategy(StrategyKind.BENCHMARK2),
    "benchmark3": Strategy(StrategyKind.BENCHMARK3),
}

_INIT_TOKENS = {mode.value: mode for mode in InitMode}

# key -> (target section, field, converter); None section = top level
_INT_FIELDS = {
    "trials", "seed", "k",
    "deploy.n_subnets", "deploy.users_per_subnet",
    "sensing.pilots_per_rb", "sensing.n_antennas",
    "frame.slots_per_frame", "frame.rbs_per_slot_grid", "frame.sensing_rbs_per_iter",
    "wls.max_iters",
}
_FLOAT_FIELDS = {
    "deploy.area_side", "deploy.user_r_min", "deploy.user_r_max",
    "sensing.tx_power", "sensing.g_t", "sensing.g_r", "sensing.rcs",
    "sensing.wavelength", "sensing.noise_power",
    "frame.frame_duration", "frame.sense_duration", "frame.feedback_duration",
    "frame.time_budget", "frame.slot_duration",
    "comms.per_user_bandwidth", "comms.user_noise_power", "comms.total_bandwidth",
    "channel.rician_k",
    "wls.epsilon",
}
_STRING_FIELDS = {"experiment", "channel.kind", "wls.init_mode"}
_LIST_FIELDS = {"sweep", "sweep_channels", "strategies"}

# fields whose watt/linear value may be given in decibels via a suffix
_DB_SUFFIXES = ("_dbm", "_db")


def parse_scalars(text: str) -> dict[str, str]:
    """First pass: raw key -> value-string map with duplicate detection."""
    out: dict[str, str] = {}
    problems: list[str] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            problems.append(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
            continue
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            problems.append(f"line {lineno}: empty key")
            continue
        if key in out:
            problems.append(f"line {lineno}: duplicate key {key!r}")
            continue
        out[key] = value
    if problems:
        raise ConfigError(problems)
    return out


def _convert_db_keys(raw: dict[str, str], problems: list[str]) -> dict[str, str]:
    """Rewrite key_dbm/key_db entries to their linear-unit keys."""
    out: dict[str, str] = {}
    for key, value in raw.items():
        target, factor = key, None
        for suffix in _DB_SUFFIXES:
            if key.endswith(suffix):
                target = key[: -len(suffix)]
                factor = suffix
                break
        if factor is None:
            out[key] = value
            continue
        if target not in _FLOAT_FIELDS:
            problems.append(f"{key}: no decibel form for this field")
            continue
        if target in out or target in raw:
            problems.append(f"{key}: conflicts with {target}")
            continue
        try:
            db_value = float(value)
        except ValueError:
            problems.append(f"{key}: not a number: {value!r}")
            continue
        linear = dbm_to_watts(db_value) if factor == "_dbm" else db_to_linear(db_value)
        out[target] = repr(linear)
    return out


def load_config(
    path: str,
    overrides: Optional[dict[str, object]] = None,
) -> ExperimentConfig:
    """Parse a config file into a validated ExperimentConfig.

    ``overrides`` maps top-level keys (trials, seed, experiment) to
    values taking precedence over the file, mirroring the CLI flags.
    """
    with open(path) as fh:
        raw = parse_scalars(fh.read())
    return build_config(raw, overrides)


def build_config(
    raw: dict[str, str],
    overrides: Optional[dict[str, object]] = None,
) -> ExperimentConfig:
    problems: list[str] = []
    values = _convert_db_keys(raw, problems)

    known = _INT_FIELDS | _FLOAT_FIELDS | _STRING_FIELDS | _LIST_FIELDS
    for key in values:
        if key not in known:
            problems.append(f"{key}: unknown key")

    def take(key: str, convert, default=None):
        if key not in values:
            return default
        try:
            return convert(values[key])
        except (ValueError, KeyError) as exc:
            problems.append(f"{key}: {exc}")
            return default

    def parse_list(value: str) -> list[str]:
        return [tok.strip() for tok in value.split(",") if tok.strip()]

    experiment = take("experiment", str, "custom")
    if experiment not in EXPERIMENTS:
        problems.append(f"experiment: unknown name {experiment!r} (have {EXPERIMENTS})")
        experiment = "custom"

    trials = take("trials", int, PRESET_TRIALS)
    seed = take("seed", int, 1)
    k = take("k", int, K_DEFAULT)

    deploy_kw = {}
    for f in fields(DeployConfig):
        key = f"deploy.{f.name}"
        if key in _INT_FIELDS:
            val = take(key, int)
        elif key in _FLOAT_FIELDS:
            val = take(key, float)
        else:
            continue
        if val is not None:
            deploy_kw[f.name] = val

    sensing_kw = {}
    for f in fields(SensingParams):
        key = f"sensing.{f.name}"
        if key in _INT_FIELDS:
            val = take(key, int)
        elif key in _FLOAT_FIELDS:
            val = take(key, float)
        else:
            continue
        if val is not None:
            sensing_kw[f.name] = val

    frame_kw = {}
    for f in fields(FrameConfig):
        key = f"frame.{f.name}"
        if key in _INT_FIELDS:
            val = take(key, int)
        elif key in _FLOAT_FIELDS:
            val = take(key, float)
        else:
            continue
        if val is not None:
            frame_kw[f.name] = val

    comms_kw = {}
    for f in fields(CommsParams):
        key = f"comms.{f.name}"
        val = take(key, float)
        if val is not None:
            comms_kw[f.name] = val

    kind_name = take("channel.kind", str, "awgn")
    try:
        kind = Fading(kind_name)
    except ValueError:
        problems.append(f"channel.kind: unknown model {kind_name!r}")
        kind = Fading.AWGN
    rician_k = take("channel.rician_k", float, 7.0)

    wls_kw = {}
    if "wls.epsilon" in values:
        wls_kw["epsilon"] = take("wls.epsilon", float)
    if "wls.max_iters" in values:
        wls_kw["max_iters"] = take("wls.max_iters", int)
    if "wls.init_mode" in values:
        mode = take("wls.init_mode", str)
        if mode in _INIT_TOKENS:
            wls_kw["init_mode"] = _INIT_TOKENS[mode]
        else:
            problems.append(f"wls.init_mode: unknown mode {mode!r} (have {sorted(_INIT_TOKENS)})")

    strategy_tokens = parse_list(values.get("strategies", "proposed"))
    strategies = []
    for tok in strategy_tokens:
        if tok in _STRATEGY_TOKENS:
            strategies.append(_STRATEGY_TOKENS[tok])
        else:
            problems.append(f"strategies: unknown strategy {tok!r} (have {sorted(_STRATEGY_TOKENS)})")

    sweep_values = []
    for tok in parse_list(values.get("sweep", "")):
        try:
            sweep_values.append(float(tok))
        except ValueError:
            problems.append(f"sweep: not a number: {tok!r}")
    if not sweep_values:
        problems.append("sweep: must list at least one point")

    sweep_channels: list[Optional[Fading]] = [None]
    if "sweep_channels" in values:
        sweep_channels = []
        for tok in parse_list(values["sweep_channels"]):
            try:
                sweep_channels.append(Fading(tok))
            except ValueError:
                problems.append(f"sweep_channels: unknown model {tok!r}")

    if overrides:
        for key, val in overrides.items():
            if val is None:
                continue
            if key == "trials":
                trials = int(val)
            elif key == "seed":
                seed = int(val)
            elif key == "experiment":
                if val in EXPERIMENTS:
                    experiment = str(val)
                else:
                    problems.append(f"experiment: unknown name {val!r} (have {EXPERIMENTS})")
            else:
                problems.append(f"{key}: unsupported override")

    if problems:
        raise ConfigError(sorted(problems))

    rho = frame_kw.get("sensing_rbs_per_iter", k)
    frame_kw.setdefault("sensing_rbs_per_iter", rho)
    sensing_kw.setdefault("rbs_per_subnet", max(1, rho // max(k, 1)))

    try:
        deploy = replace(default_deploy(), **deploy_kw)
        sensing = replace(default_sensing(k=k, rho=rho), **sensing_kw)
        frame = replace(default_frame(rho=rho), **frame_kw)
        comms = replace(default_comms(), **comms_kw)
        wls = WlsConfig(**wls_kw) if wls_kw else WlsConfig()
        channel = ChannelModel(kind, rician_k)
        sweep = tuple(
            SweepPoint(v, ch) for v in sweep_values for ch in sweep_channels
        )
        return ExperimentConfig(
            experiment=experiment,
            trials=trials,
            seed=seed,
            sweep=sweep,
            deploy=deploy,
            sensing=sensing,
            frame=frame,
            comms=comms,
            strategies=tuple(strategies),
            channel=channel,
            k=k,
            wls=wls,
        )
    except ValueError as exc:
        raise ConfigError([str(exc)]) from exc
