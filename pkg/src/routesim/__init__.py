"""Deterministic packet-transport simulator with local-information routing."""

from .engine import (
    DeliveryMode,
    Packet,
    SimConfig,
    SimState,
    StepEvents,
    init,
    inject_packet,
    run,
    step,
    update_on_delivery,
)
from .metrics import (
    Counters,
    JamVerdict,
    RunReport,
    Spectrum,
    delivery_time_series,
    detect_jam,
    fit_loglog_slope,
    histogram,
    learning_fraction,
    middle_decades,
    power_spectrum,
)
from .rng import RunRNG
from .routing import Algorithm, EdgeStats, StatsTable, delta_t, score_cd, score_cdt, score_st, score_std, select_next_hop
from .topology import NetworkTopology, generate_ba, load_adjacency_matrix

__version__ = "0.1.0"

__all__ = [
    "Algorithm",
    "Counters",
    "DeliveryMode",
    "EdgeStats",
    "JamVerdict",
    "NetworkTopology",
    "Packet",
    "RunRNG",
    "RunReport",
    "SimConfig",
    "SimState",
    "Spectrum",
    "StatsTable",
    "StepEvents",
    "delivery_time_series",
    "delta_t",
    "detect_jam",
    "fit_loglog_slope",
    "generate_ba",
    "histogram",
    "init",
    "inject_packet",
    "learning_fraction",
    "load_adjacency_matrix",
    "middle_decades",
    "power_spectrum",
    "run",
    "score_cd",
    "score_cdt",
    "score_st",
    "score_std",
    "select_next_hop",
    "step",
    "update_on_delivery",
]
