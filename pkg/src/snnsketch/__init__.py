"""Streaming sketches compiled into deterministic spiking threshold networks."""

from .network import HashMatrix, Network, validate
from .sim import FiringState, InputSchedule, Simulator, decode_binary, potential, run, step

__all__ = [
    "HashMatrix",
    "Network",
    "validate",
    "FiringState",
    "InputSchedule",
    "Simulator",
    "decode_binary",
    "potential",
    "run",
    "step",
]
