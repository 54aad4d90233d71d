"""Rate and outage simulator for two-relay half-duplex successive relaying."""

from .channel import (
    CASE_III_RELAY_SPACING,
    ChannelBatch,
    ChannelRealization,
    NetworkGeometry,
    preset_geometry,
    sample_realization,
    sample_realizations,
    trial_rng,
)
from .experiments import (
    ConfigError,
    ExperimentConfig,
    SweepRow,
    run_dmt,
    run_experiment,
    run_gain_curve,
    run_geometry_sweep,
    run_single_realization,
    vblast_gap_report,
)
from .mimolinalg import (
    DetectionOrder,
    EquivalentChannel,
    SinrChain,
    build_equivalent_channel,
    logdet_capacity,
    mmse_sic_sinrs,
)
from .outage import DmtPoint, dmt_formula, estimate_dmt, outage_prob_conditioned
from .protocols import (
    AdaptiveRule,
    RateReport,
    Scheme,
    apply_adaptive_fallback,
    capacity_fn,
    capacity_gain_G,
    check_interference_free,
    rate_classic1,
    rate_classic2,
    rate_direct,
    rate_successive_genie,
    rate_successive_vblast,
    rate_theorem1,
)

__all__ = [
    "CASE_III_RELAY_SPACING",
    "AdaptiveRule",
    "ChannelBatch",
    "ChannelRealization",
    "ConfigError",
    "DetectionOrder",
    "DmtPoint",
    "EquivalentChannel",
    "ExperimentConfig",
    "NetworkGeometry",
    "RateReport",
    "Scheme",
    "SinrChain",
    "SweepRow",
    "apply_adaptive_fallback",
    "build_equivalent_channel",
    "capacity_fn",
    "capacity_gain_G",
    "check_interference_free",
    "dmt_formula",
    "estimate_dmt",
    "logdet_capacity",
    "mmse_sic_sinrs",
    "outage_prob_conditioned",
    "preset_geometry",
    "rate_classic1",
    "rate_classic2",
    "rate_direct",
    "rate_successive_genie",
    "rate_successive_vblast",
    "rate_theorem1",
    "run_dmt",
    "run_experiment",
    "run_gain_curve",
    "run_geometry_sweep",
    "run_single_realization",
    "sample_realization",
    "sample_realizations",
    "trial_rng",
    "vblast_gap_report",
]

__version__ = "0.1.0"
