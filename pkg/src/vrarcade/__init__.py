"""Simulator for edge-rendered VR arcades served by 60 GHz access points."""
from vrarcade.engine import MetricsReport, RunConfig, Simulation, run

__all__ = ["MetricsReport", "RunConfig", "Simulation", "run"]
__version__ = "0.1.0"
