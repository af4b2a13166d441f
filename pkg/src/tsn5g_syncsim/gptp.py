"""IEEE 802.1AS-style time distribution over :mod:`tsn5g_syncsim.netsim`.

Two-step only: the grandmaster sends ``Sync`` then ``FollowUp`` carrying the
precise origin timestamp. Link delay is measured with the peer-delay exchange
(``PdelayReq`` / ``PdelayResp`` / ``PdelayRespFollowUp``) and slaves phase-step
their clocks by the measured offset. There is no BMCA; the grandmaster is fixed.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Any, Callable, NamedTuple

from tsn5g_syncsim.clock import SimulatedClock
from tsn5g_syncsim.netsim import Constant, Event, Link, LinkModel, Simulator

DEFAULT_SYNC_INTERVAL_NS = 31_250_000  # 2**-5 s
DEFAULT_PDELAY_INTERVAL_NS = 1_000_000_000
DEFAULT_TURNAROUND_NS = 10_000
DEFAULT_RATIO_WINDOW = 4


class MsgType(str, enum.Enum):
    SYNC = "Sync"
    FOLLOW_UP = "FollowUp"
    PDELAY_REQ = "PdelayReq"
    PDELAY_RESP = "PdelayResp"
    PDELAY_RESP_FOLLOW_UP = "PdelayRespFollowUp"

    def __repr__(self) -> str:
        return self.value


class UnmatchedFollowUp(ValueError):
    pass


@dataclass(frozen=True)
class GptpMessage:
    msg_type: MsgType
    seq_id: int
    precise_origin_ns: int = 0
    correction_ns: int = 0
    cumulative_rate_ratio: Fraction = Fraction(1)
    suffix_tsi_ns: int | None = None
    # requestReceiptTimestamp (t2), carried by PdelayResp only
    receipt_ns: int | None = None

    def __post_init__(self) -> None:
        if not 0 <= self.seq_id < 1 << 16:
            raise ValueError(f"seq_id out of 16-bit range: {self.seq_id}")
        if self.cumulative_rate_ratio <= 0:
            raise ValueError("cumulative_rate_ratio must be > 0")


@dataclass(frozen=True)
class PdelayRecord:
    """Timestamps of one peer-delay exchange.

    ``t1``/``t4`` are requester egress/ingress, ``t2``/``t3`` responder
    ingress/egress. ``neighbor_rate_ratio`` converts a responder interval into
    requester time (requester ticks per responder tick).
    """

    t1: int
    t2: int
    t3: int
    t4: int
    neighbor_rate_ratio: Fraction = Fraction(1)

    def __post_init__(self) -> None:
        if self.t4 < self.t1 or self.t3 < self.t2:
            raise ValueError(f"inconsistent peer-delay timestamps: {self}")


class LinkDelay(NamedTuple):
    delay_ns: int
    negative: bool  # pre-clamp value was below -granularity


def compute_link_delay(rec: PdelayRecord, granularity_ns: int = 1) -> LinkDelay:
    raw = (Fraction(rec.t4 - rec.t1) - Fraction(rec.neighbor_rate_ratio) * (rec.t3 - rec.t2)) / 2
    return LinkDelay(max(round(raw), 0), raw < -granularity_ns)


def slave_process_sync(
    follow_up: GptpMessage,
    ingress_local_ns: int,
    link_delay_ns: int,
    sync_seq_id: int | None = None,
) -> int:
    """Offset of the slave clock from GM time at Sync ingress.

    The caller corrects with ``clock.step_adjust(-offset, now)``.
    """
    if sync_seq_id is not None and follow_up.seq_id != sync_seq_id:
        raise UnmatchedFollowUp(f"FollowUp seq {follow_up.seq_id} != Sync seq {sync_seq_id}")
    gm_at_ingress = follow_up.precise_origin_ns + follow_up.correction_ns + link_delay_ns
    return ingress_local_ns - gm_at_ingress


def master_emit_sync(
    gm_clock: SimulatedClock, now: int, interval_ns: int, seq_id: int = 0
) -> tuple[GptpMessage, GptpMessage, int]:
    if interval_ns <= 0:
        raise ValueError("interval_ns must be > 0")
    origin = gm_clock.read(now)
    sync = GptpMessage(MsgType.SYNC, seq_id)
    follow_up = GptpMessage(MsgType.FOLLOW_UP, seq_id, precise_origin_ns=origin)
    return sync, follow_up, now + interval_ns


def estimate_rate_ratio(history: deque[tuple[int, int]] | list[tuple[int, int]]) -> Fraction:
    """Responder/requester frequency ratio from ``(t3, t4)`` pairs of successive exchanges."""
    if len(history) < 2:
        return Fraction(1)
    (t3_0, t4_0), (t3_n, t4_n) = history[0], history[-1]
    if t4_n == t4_0 or t3_n == t3_0:
        return Fraction(1)
    return Fraction(t3_n - t3_0, t4_n - t4_0)


@dataclass(frozen=True)
class Timer:
    kind: str
    data: Any = None


Listener = Callable[..., None]


class PeerDelayRequester:
    """Requester side of the peer-delay exchange on one port."""

    def __init__(self, owner: str, peer: str, interval_ns: int, window: int = DEFAULT_RATIO_WINDOW):
        self.owner = owner
        self.peer = peer
        self.interval_ns = interval_ns
        self.link_delay_ns: int | None = None  # requester timebase
        self.negative_count = 0
        self.completed = 0
        self._seq = 0
        self._pending: dict[int, dict[str, int]] = {}
        self._history: deque[tuple[int, int]] = deque(maxlen=window)

    @property
    def rate_ratio(self) -> Fraction:
        """Responder (upstream) frequency over local frequency."""
        return estimate_rate_ratio(self._history)

    def delay_in(self, ratio_to_responder: Fraction = Fraction(1)) -> int:
        """Link delay converted into another timebase.

        ``ratio_to_responder`` is that timebase's frequency over the
        responder's, e.g. the cumulative ratio carried by a Sync.
        """
        return round((self.link_delay_ns or 0) * self.rate_ratio * ratio_to_responder)

    def send_request(self, sim: Simulator, clock: SimulatedClock) -> None:
        seq = self._seq
        self._seq = (self._seq + 1) & 0xFFFF
        self._pending[seq] = {"t1": clock.read(sim.now)}
        sim.transmit(self.owner, self.peer, GptpMessage(MsgType.PDELAY_REQ, seq))

    def on_message(self, sim: Simulator, msg: GptpMessage, clock: SimulatedClock, granularity_ns: int) -> bool:
        """Feed a PdelayResp/PdelayRespFollowUp; returns True when an exchange completes."""
        entry = self._pending.get(msg.seq_id)
        if entry is None:
            return False
        if msg.msg_type is MsgType.PDELAY_RESP:
            entry["t4"] = clock.read(sim.now)
            entry["t2"] = msg.receipt_ns
        else:
            entry["t3"] = msg.precise_origin_ns
        if len(entry) < 4:
            return False
        del self._pending[msg.seq_id]
        self._history.append((entry["t3"], entry["t4"]))
        rec = PdelayRecord(entry["t1"], entry["t2"], entry["t3"], entry["t4"], 1 / self.rate_ratio)
        result = compute_link_delay(rec, granularity_ns)
        self.negative_count += result.negative
        self.link_delay_ns = result.delay_ns
        self.completed += 1
        return True


def respond_pdelay(sim: Simulator, node: Any, event: Event, clock: SimulatedClock, turnaround_ns: int) -> None:
    """Responder side: stamp t2 now and schedule the response after the turnaround."""
    t2 = clock.read(sim.now)
    sim.schedule(sim.now + turnaround_ns, node.name, Timer("pdelay_resp", (event.sender, event.payload.seq_id, t2)))


def send_pdelay_response(sim: Simulator, node: Any, data: tuple[str, int, int], clock: SimulatedClock) -> None:
    requester, seq, t2 = data
    t3 = clock.read(sim.now)
    sim.transmit(node.name, requester, GptpMessage(MsgType.PDELAY_RESP, seq, receipt_ns=t2))
    sim.transmit(node.name, requester, GptpMessage(MsgType.PDELAY_RESP_FOLLOW_UP, seq, precise_origin_ns=t3))


class GrandMaster:
    def __init__(
        self,
        name: str,
        clock: SimulatedClock,
        downstream: list[str],
        sync_interval_ns: int = DEFAULT_SYNC_INTERVAL_NS,
        turnaround_ns: int = DEFAULT_TURNAROUND_NS,
    ):
        self.name = name
        self.clock = clock
        self.downstream = list(downstream)
        self.sync_interval_ns = sync_interval_ns
        self.turnaround_ns = turnaround_ns
        self.syncs_sent = 0
        self._seq = 0

    def start(self, sim: Simulator, first_sync_ns: int | None = None) -> None:
        first = self.sync_interval_ns if first_sync_ns is None else first_sync_ns
        sim.schedule(first, self.name, Timer("sync"))

    def handle(self, sim: Simulator, event: Event) -> None:
        payload = event.payload
        if isinstance(payload, Timer):
            if payload.kind == "sync":
                sync, follow_up, nxt = master_emit_sync(self.clock, sim.now, self.sync_interval_ns, self._seq)
                self._seq = (self._seq + 1) & 0xFFFF
                self.syncs_sent += 1
                for dst in self.downstream:
                    sim.transmit(self.name, dst, sync)
                    sim.transmit(self.name, dst, follow_up)
                sim.schedule(nxt, self.name, Timer("sync"))
            elif payload.kind == "pdelay_resp":
                send_pdelay_response(sim, self, payload.data, self.clock)
        elif payload.msg_type is MsgType.PDELAY_REQ:
            respond_pdelay(sim, self, event, self.clock, self.turnaround_ns)


@dataclass
class SlaveStats:
    corrections: int = 0
    provisional: int = 0
    negative_delay: int = 0
    unmatched: int = 0


class GptpSlave:
    """End station slaved to an upstream gPTP port.

    Listeners are called as ``fn(sim, node, kind, **info)``; a correction is
    reported with ``kind="correction"`` and the clock before and after.
    """

    def __init__(
        self,
        name: str,
        clock: SimulatedClock,
        upstream: str,
        pdelay_interval_ns: int = DEFAULT_PDELAY_INTERVAL_NS,
        ratio_window: int = DEFAULT_RATIO_WINDOW,
    ):
        self.name = name
        self.clock = clock
        # peer-delay timestamps come from the free-running oscillator, never stepped
        self.free_clock = clock
        self.upstream = upstream
        self.port = PeerDelayRequester(name, upstream, pdelay_interval_ns, ratio_window)
        self.synced = False
        self.stats = SlaveStats()
        self.listeners: list[Listener] = []
        self._sync_ingress: dict[int, int] = {}
        self._follow_ups: dict[int, GptpMessage] = {}

    def start(self, sim: Simulator) -> None:
        sim.schedule(sim.now, self.name, Timer("pdelay"))

    def handle(self, sim: Simulator, event: Event) -> None:
        payload = event.payload
        if isinstance(payload, Timer):
            if payload.kind == "pdelay":
                self.port.send_request(sim, self.free_clock)
                sim.schedule(sim.now + self.port.interval_ns, self.name, Timer("pdelay"))
            return
        t = payload.msg_type
        if t is MsgType.SYNC:
            self._sync_ingress[payload.seq_id] = self.clock.read(sim.now)
            self._try_correct(sim, payload.seq_id)
        elif t is MsgType.FOLLOW_UP:
            self._follow_ups[payload.seq_id] = payload
            self._try_correct(sim, payload.seq_id)
        elif t in (MsgType.PDELAY_RESP, MsgType.PDELAY_RESP_FOLLOW_UP):
            self.port.on_message(sim, payload, self.free_clock, self.clock.granularity_ns)
            self.stats.negative_delay = self.port.negative_count

    def _try_correct(self, sim: Simulator, seq: int) -> None:
        if seq not in self._sync_ingress or seq not in self._follow_ups:
            self._prune(seq)
            return
        ingress = self._sync_ingress.pop(seq)
        follow_up = self._follow_ups.pop(seq)
        provisional = self.port.link_delay_ns is None
        delay = 0 if provisional else self.port.delay_in(follow_up.cumulative_rate_ratio)
        offset = slave_process_sync(follow_up, ingress, delay, seq)
        before = self.clock
        self.clock = self.clock.step_adjust(-offset, sim.now)
        self.stats.corrections += 1
        self.stats.provisional += provisional
        if not provisional:
            self.synced = True
        for fn in self.listeners:
            fn(sim, self, "correction", before=before, after=self.clock, offset=offset, provisional=provisional)

    def _prune(self, seq: int) -> None:
        # drop half-received pairs more than 64 seq ids behind
        for store in (self._sync_ingress, self._follow_ups):
            for old in [s for s in store if 64 <= (seq - s) & 0xFFFF < 0x8000]:
                del store[old]
                self.stats.unmatched += 1


class RelayBridge:
    """Time-aware relay: upstream requester port, downstream responder ports.

    Sync messages are timestamped on ingress, held for a residence time drawn
    from ``residence`` and re-emitted downstream. The correction accrued by the
    Sync (upstream link delay plus residence, in GM time) is folded into the
    matching FollowUp, which is released only after its Sync has left.
    Subclasses override :meth:`ingress` and :meth:`egress`.
    """

    def __init__(
        self,
        name: str,
        clock: SimulatedClock,
        upstream: str,
        downstream: list[str],
        residence: LinkModel = Constant(10_000),
        pdelay_interval_ns: int = DEFAULT_PDELAY_INTERVAL_NS,
        turnaround_ns: int = DEFAULT_TURNAROUND_NS,
        seed: int = 0,
        ratio_window: int = DEFAULT_RATIO_WINDOW,
    ):
        self.name = name
        self.clock = clock
        self.upstream = upstream
        self.downstream = list(downstream)
        self.turnaround_ns = turnaround_ns
        self.port = PeerDelayRequester(name, upstream, pdelay_interval_ns, ratio_window)
        self.listeners: list[Listener] = []
        self._residence = Link(f"{name}:residence", name, name, residence, seed)
        self._ingress_ts: dict[int, int] = {}
        # seq -> (Sync as received, Sync after ingress/egress rewrite)
        self._in_transit: dict[int, tuple[GptpMessage, GptpMessage]] = {}
        self._egressed: dict[int, tuple[GptpMessage, GptpMessage]] = {}
        self._held_follow_ups: dict[int, GptpMessage] = {}

    @property
    def synced(self) -> bool:
        return self.port.link_delay_ns is not None

    def start(self, sim: Simulator) -> None:
        sim.schedule(sim.now, self.name, Timer("pdelay"))

    def ingress(self, sync: GptpMessage, now: int) -> GptpMessage:
        ratio = sync.cumulative_rate_ratio
        self._ingress_ts[sync.seq_id] = self.clock.read(now)
        return replace(
            sync,
            correction_ns=sync.correction_ns + self.port.delay_in(ratio),
            cumulative_rate_ratio=ratio * self.port.rate_ratio,
        )

    def egress(self, sync: GptpMessage, now: int) -> GptpMessage:
        residence = self.clock.read(now) - self._ingress_ts.pop(sync.seq_id)
        return replace(sync, correction_ns=sync.correction_ns + round(residence * sync.cumulative_rate_ratio))

    def handle(self, sim: Simulator, event: Event) -> None:
        payload = event.payload
        if isinstance(payload, Timer):
            if payload.kind == "pdelay":
                self.port.send_request(sim, self.clock)
                sim.schedule(sim.now + self.port.interval_ns, self.name, Timer("pdelay"))
            elif payload.kind == "pdelay_resp":
                send_pdelay_response(sim, self, payload.data, self.responder_clock)
            elif payload.kind == "egress":
                self._egress(sim, payload.data)
            return
        t = payload.msg_type
        if t is MsgType.SYNC:
            self._in_transit[payload.seq_id] = (payload, self.ingress(payload, sim.now))
            sim.schedule(sim.now + self._residence.sample("down"), self.name, Timer("egress", payload.seq_id))
        elif t is MsgType.FOLLOW_UP:
            if payload.seq_id in self._egressed:
                self._forward_follow_up(sim, payload)
            else:
                self._held_follow_ups[payload.seq_id] = payload
        elif t is MsgType.PDELAY_REQ:
            respond_pdelay(sim, self, event, self.responder_clock, self.turnaround_ns)
        elif t in (MsgType.PDELAY_RESP, MsgType.PDELAY_RESP_FOLLOW_UP):
            self.port.on_message(sim, payload, self.clock, self.clock.granularity_ns)

    @property
    def responder_clock(self) -> SimulatedClock:
        return self.clock

    def _egress(self, sim: Simulator, seq: int) -> None:
        original, stamped = self._in_transit.pop(seq)
        out = self.egress(stamped, sim.now)
        for dst in self.downstream:
            sim.transmit(self.name, dst, out)
        self._egressed[seq] = (original, out)
        if len(self._egressed) > 64:
            self._egressed.pop(next(iter(self._egressed)))
        held = self._held_follow_ups.pop(seq, None)
        if held is not None:
            self._forward_follow_up(sim, held)

    def _forward_follow_up(self, sim: Simulator, follow_up: GptpMessage) -> None:
        original, out = self._egressed[follow_up.seq_id]
        forwarded = replace(
            follow_up,
            correction_ns=follow_up.correction_ns + out.correction_ns - original.correction_ns,
            cumulative_rate_ratio=out.cumulative_rate_ratio,
        )
        for dst in self.downstream:
            sim.transmit(self.name, dst, forwarded)
