"""Deterministic simulation of gPTP, PTP-over-wireless and SFN-anchored 5G/TSN time sync."""

from tsn5g_syncsim.clock import SimulatedClock, true_offset

__all__ = ["SimulatedClock", "true_offset"]
__version__ = "0.1.0"
