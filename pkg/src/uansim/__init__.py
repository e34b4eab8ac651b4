"""uansim: discrete-event simulation of underwater acoustic networks.

The package models the full chain from acoustic propagation (range
threshold, Thorp attenuation, precomputed arrival tables) through the
physical layer (modulation modes, SNR/BER reception gating, subcarrier
spectrum occupancy), MAC protocols (Aloha, slotted FAMA), routing (static
tables, vector-based forwarding), vehicle mobility (gliders, wave gliders,
instruction-driven AUVs), up to a step-based environment facade for
reinforcement-learning agents that observe the network through real,
delayed, lossy acoustic exchanges.
"""

__version__ = "0.1.0"

from uansim.core import ConfigError, EventFault, SimulationReport, Simulator

__all__ = ["ConfigError", "EventFault", "SimulationReport", "Simulator", "__version__"]
