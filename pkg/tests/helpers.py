"""Small topologies shared by the protocol tests."""

from tsn5g_syncsim.clock import SimulatedClock, true_offset
from tsn5g_syncsim.gptp import GptpSlave, GrandMaster
from tsn5g_syncsim.netsim import Simulator


def gm_slave(link, slave_clock, gm_clock=None, seed=0, sync_interval_ns=31_250_000):
    """gm -> slave over ``link``; returns (sim, gm, slave, corrections)."""
    sim = Simulator(seed)
    gm = sim.add_node(GrandMaster("gm", gm_clock or SimulatedClock(), ["slave"], sync_interval_ns))
    slave = sim.add_node(GptpSlave("slave", slave_clock, "gm"))
    sim.connect("gm", "slave", link)
    corrections = []

    def on_event(sim, node, kind, **info):
        corrections.append((sim.now, info["provisional"], true_offset(info["after"], gm.clock, sim.now),
                            true_offset(info["before"], gm.clock, sim.now)))

    slave.listeners.append(on_event)
    gm.start(sim)
    slave.start(sim)
    return sim, gm, slave, corrections
