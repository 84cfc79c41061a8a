"""Cooperative localization for short-range underwater radio sensor networks."""

__version__ = "0.1.0"

from uwnetloc.channel_model import ChannelModel, GainSample
from uwnetloc.network import Scenario, build_grid, reference_scenario
from uwnetloc.selfloc import Measurements, SelfLocConfig, SelfLocState
from uwnetloc.srls import SrlsInput, SrlsMatrices
from uwnetloc.sim import ExperimentTrace, TrackingRun

__all__ = [
    "ChannelModel",
    "ExperimentTrace",
    "GainSample",
    "Measurements",
    "Scenario",
    "SelfLocConfig",
    "SelfLocState",
    "SrlsInput",
    "SrlsMatrices",
    "TrackingRun",
    "build_grid",
    "reference_scenario",
]
