"""Fluid on-off (KAMS) queue model of TCP traffic at a bottleneck router,
a packet-level AIMD reference, and the statistics comparing the two."""

from .ams import ExpOnOffSystem, ams_overflow_probability, dominant_exponent
from .analysis import (
    ComparisonReport,
    EmpiricalCdf,
    build_cdf,
    correction_factor,
    full_buffer_probability,
    loss_overflow_ratio,
    nrmse,
    spikiness,
    time_weighted_ccdf,
    time_weighted_cdf,
    trace_cdf,
)
from .config import SweepSpec, emit_config, parse_config, parse_config_text, preset
from .distributions import (
    Constant,
    EmpiricalPmf,
    ExponentialLaw,
    HalfNormalLaw,
    TruncatedNormalParams,
    estimate_mode,
    fit_truncated_normal,
    tn_cdf,
    tn_mean,
    tn_pdf,
    tn_sample,
)
from .errors import *  # noqa: F401,F403
from .fluid import KamsConfig, advance_queue, bps_to_pps, on_duration, run_kams
from .packet import PacketSimConfig, PacketSimResult, run_packet_sim
from .sweep import compare_point, run_sweep
from .trace import LossSeries, QueueTrace, aggregate_losses

__version__ = "0.1.0"
