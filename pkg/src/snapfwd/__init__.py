"""Simulation and verification of snap-stabilizing message forwarding."""
from .kernel import Configuration, RuleInstance, Simulator, StepRecord, Trace, run
from .topology import Topology

__all__ = ["Configuration", "RuleInstance", "Simulator", "StepRecord", "Topology", "Trace", "run"]
__version__ = "0.1.0"
