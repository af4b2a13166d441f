"""The 5G system acting as a time-aware gPTP bridge (downlink only).

NW-TT stamps each incoming event message with an ingress timestamp (TSi) in
5GS time, adds the upstream link delay in GM time to the correction field and
rewrites the cumulative rate ratio. DS-TT stamps egress (TSe), adds the
residence time ``TSe - TSi`` converted with the carried rate ratio and strips
the suffix. Both translators read one shared 5GS clock.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from fractions import Fraction

from tsn5g_syncsim.clock import SimulatedClock
from tsn5g_syncsim.gptp import GptpMessage, GptpSlave, GrandMaster, RelayBridge
from tsn5g_syncsim.netsim import LinkModel, Simulator


class DoubleIngress(ValueError):
    pass


class MissingTsi(ValueError):
    pass


class NegativeResidence(ValueError):
    pass


def nw_tt_ingress(
    msg: GptpMessage,
    link_delay_ns: int,
    neighbor_rate_ratio: Fraction | int,
    fiveg_clock: SimulatedClock,
    fiveg_now: int,
) -> GptpMessage:
    """Ingress rewrite at the network-side translator.

    The upstream delay is converted with the cumulative rate ratio received in
    the message; the ratio is then replaced by ``received * neighbor_rate_ratio``.
    """
    if msg.suffix_tsi_ns is not None:
        raise DoubleIngress(f"seq {msg.seq_id} already carries TSi={msg.suffix_tsi_ns}")
    ratio_in = msg.cumulative_rate_ratio
    return replace(
        msg,
        correction_ns=msg.correction_ns + round(link_delay_ns * ratio_in),
        cumulative_rate_ratio=ratio_in * Fraction(neighbor_rate_ratio),
        suffix_tsi_ns=fiveg_clock.read(fiveg_now),
    )


def ds_tt_egress(msg: GptpMessage, fiveg_clock: SimulatedClock, fiveg_now: int) -> GptpMessage:
    if msg.suffix_tsi_ns is None:
        raise MissingTsi(f"seq {msg.seq_id} has no TSi suffix")
    tse = fiveg_clock.read(fiveg_now)
    residence = tse - msg.suffix_tsi_ns
    if residence < 0:
        raise NegativeResidence(f"TSe={tse} < TSi={msg.suffix_tsi_ns}")
    return replace(
        msg,
        correction_ns=msg.correction_ns + round(residence * msg.cumulative_rate_ratio),
        suffix_tsi_ns=None,
    )


@dataclass(frozen=True)
class TransitRecord:
    """Per-message audit row of one 5GS crossing."""

    seq_id: int
    tsi_ns: int
    tse_ns: int
    residence_ns: int
    upstream_delay_ns: int
    ratio_in: Fraction
    ratio_out: Fraction
    link_delay_correction_ns: int
    residence_correction_ns: int
    over_bound: bool


class FivegBridge(RelayBridge):
    """NW-TT + user plane + DS-TT, presented to the TSN side as one bridge.

    ``user_plane`` draws the transit time between NW-TT and DS-TT. Crossings
    whose residence exceeds ``residence_bound_ns`` are flagged, never dropped.
    """

    def __init__(
        self,
        name: str,
        fiveg_clock: SimulatedClock,
        upstream: str,
        downstream: list[str],
        user_plane: LinkModel,
        residence_bound_ns: int | None = None,
        **kwargs,
    ):
        super().__init__(name, fiveg_clock, upstream, downstream, residence=user_plane, **kwargs)
        self.residence_bound_ns = residence_bound_ns
        self.transits: list[TransitRecord] = []
        self.over_bound = 0
        self._ingress_info: dict[int, tuple[int, Fraction, int]] = {}

    def ingress(self, sync: GptpMessage, now: int) -> GptpMessage:
        delay = self.port.delay_in()  # upstream neighbor's timebase
        out = nw_tt_ingress(sync, delay, self.port.rate_ratio, self.clock, now)
        self._ingress_info[sync.seq_id] = (delay, sync.cumulative_rate_ratio, out.correction_ns - sync.correction_ns)
        return out

    def egress(self, sync: GptpMessage, now: int) -> GptpMessage:
        out = ds_tt_egress(sync, self.clock, now)
        delay, ratio_in, link_corr = self._ingress_info.pop(sync.seq_id)
        tse = self.clock.read(now)
        residence = tse - sync.suffix_tsi_ns
        over = self.residence_bound_ns is not None and residence > self.residence_bound_ns
        self.over_bound += over
        self.transits.append(
            TransitRecord(
                sync.seq_id,
                sync.suffix_tsi_ns,
                tse,
                residence,
                delay,
                ratio_in,
                sync.cumulative_rate_ratio,
                link_corr,
                out.correction_ns - sync.correction_ns,
                over,
            )
        )
        return out


def build_translator_path(
    sim: Simulator,
    gm_clock: SimulatedClock,
    fiveg_clock: SimulatedClock,
    slave_clock: SimulatedClock,
    user_plane: LinkModel,
    upstream_link: LinkModel,
    downstream_link: LinkModel,
    *,
    sync_interval_ns: int = 31_250_000,
    residence_bound_ns: int | None = None,
):
    """Wire ``gm -> 5gs -> slave`` and start all nodes; returns ``(gm, bridge, slave)``."""
    gm = sim.add_node(GrandMaster("gm", gm_clock, ["5gs"], sync_interval_ns))
    bridge = sim.add_node(
        FivegBridge("5gs", fiveg_clock, "gm", ["slave"], user_plane, residence_bound_ns, seed=sim.seed)
    )
    slave = sim.add_node(GptpSlave("slave", slave_clock, "5gs"))
    sim.connect("gm", "5gs", upstream_link)
    sim.connect("5gs", "slave", downstream_link)
    gm.start(sim)
    bridge.start(sim)
    slave.start(sim)
    return gm, bridge, slave
