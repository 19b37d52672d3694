"""Trial-based simulator of cooperative RSS target localization in
ISAC-enabled short-range subnetworks: echo synthesis, range estimation
with variance-bound weighting, WGDOP-driven iterative subnetwork subset
selection, Gauss-Newton fusion, and the communication throughput side of
the sensing trade-off."""

from .channel import (
    ChannelModel,
    EchoBlock,
    Fading,
    SensingParams,
    draw_fading,
    mean_echo_power,
    simulate_echo,
)
from .comms import (
    CommsParams,
    CommsResult,
    average_throughput_loss,
    comms_result,
    effective_rate,
    sinr,
    sum_rate,
)
from .harness import (
    ExperimentConfig,
    ExperimentResult,
    SummaryStats,
    SweepPoint,
    confidence_interval_90,
    empirical_cdf,
    run_experiment,
    write_outputs,
)
from .protocol import (
    FrameConfig,
    IterationRecord,
    Strategy,
    StrategyKind,
    TrialRecord,
    max_iterations,
    rb_allocation,
    run_localization,
)
from .ranging import (
    RangeMeasurement,
    crlb_range,
    ecrlb,
    estimate_range,
    estimate_rss,
    measure_range,
    measurement_weight,
)
from .scene import DeployConfig, Point2, Scene, distance, generate_scene
from .selection import (
    DegenerateGeometryError,
    GeometryMatrix,
    NoFeasibleSubsetError,
    SingularGeometryError,
    SubsetSelection,
    WeightMatrix,
    geometry_matrix,
    select_subset,
    wgdop,
)
from .wls import InitMode, WlsConfig, WlsResult, gauss_newton_step, residuals, solve_wls

__version__ = "0.1.0"
