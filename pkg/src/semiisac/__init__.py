"""Outage, ergodic-rate and radar-information metrics for semi-integrated
sensing and communication uplinks over Nakagami-m fading."""

from .analytic import MetricResult
from .scenario import Scenario, SystemConfig, load_config, preset

__all__ = ["MetricResult", "Scenario", "SystemConfig", "load_config", "preset"]
__version__ = "0.1.0"
