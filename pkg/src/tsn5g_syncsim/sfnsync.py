"""SFN-anchored distribution of TSN time to mobile UEs.

The Reference System (a wireline, gPTP-slaved UE) pairs every observed SFN
with its TSN-synchronized clock reading and multicasts the tuple. Each mobile
UE pairs the same SFN with its own local reading; when the tuple arrives it
steps its clock so that

    t_TSN = t_TSN[SFN] - t_UE[SFN] + t_UE[current]

Because both sides reference the common-view frame boundary, the delivery
delay of the tuple drops out of the correction.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, replace

from tsn5g_syncsim import pubsub
from tsn5g_syncsim.clock import SimulatedClock
from tsn5g_syncsim.gptp import GptpSlave
from tsn5g_syncsim.netsim import Event, Simulator
from tsn5g_syncsim.pubsub import SyncTuple
from tsn5g_syncsim.radioframe import FRAME_NS, SFN_MODULUS, SfnEvent

DEFAULT_STORE_CAPACITY = 64
DEFAULT_STALENESS_NS = SFN_MODULUS * FRAME_NS // 2  # 5.12 s


class NoMatchingSfn(LookupError):
    pass


class StaleRecord(LookupError):
    pass


@dataclass(frozen=True)
class LocalSfnRecord:
    sfn: int
    t_ue_ns: int
    observed_at: int


class SfnStore:
    """Bounded store of the UE's own (SFN, local time) pairs, keyed by SFN.

    A newer observation of the same SFN (after the 10.24 s wrap) replaces the
    older one; beyond ``capacity`` the oldest record is evicted.
    """

    def __init__(self, capacity: int = DEFAULT_STORE_CAPACITY):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self._records: OrderedDict[int, LocalSfnRecord] = OrderedDict()

    def insert(self, record: LocalSfnRecord) -> None:
        self._records.pop(record.sfn, None)
        self._records[record.sfn] = record
        while len(self._records) > self.capacity:
            self._records.popitem(last=False)

    def get(self, sfn: int) -> LocalSfnRecord | None:
        return self._records.get(sfn)

    def __len__(self) -> int:
        return len(self._records)

    def __contains__(self, sfn: int) -> bool:
        return sfn in self._records

    def records(self) -> list[LocalSfnRecord]:
        return list(self._records.values())

    def shift(self, delta_ns: int) -> None:
        """Re-express every stored local time after the clock was stepped by ``delta_ns``."""
        for sfn, rec in self._records.items():
            self._records[sfn] = replace(rec, t_ue_ns=rec.t_ue_ns + delta_ns)


def reference_on_sfn(ref_clock_reading: int, sfn: int) -> SyncTuple:
    return SyncTuple(sfn, ref_clock_reading)


def should_publish(sfn: int, decimation: int) -> bool:
    return sfn % decimation == 0


def ue_on_sfn(store: SfnStore, sfn: int, local_reading: int, observed_at: int = 0) -> SfnStore:
    store.insert(LocalSfnRecord(sfn, local_reading, observed_at))
    return store


def corrected_reading(t_tsn_at_sfn: int, t_ue_at_sfn: int, t_ue_current: int) -> int:
    return t_tsn_at_sfn - t_ue_at_sfn + t_ue_current


@dataclass(frozen=True)
class TupleDiagnostics:
    sfn: int
    t_tsn_ns: int
    applied_offset_ns: int
    tuple_age_ns: int


def ue_on_tuple(
    store: SfnStore,
    tup: SyncTuple,
    ue_clock: SimulatedClock,
    now: int,
    staleness_ns: int = DEFAULT_STALENESS_NS,
) -> tuple[SimulatedClock, TupleDiagnostics]:
    """Correct ``ue_clock`` from one received tuple.

    Raises :class:`NoMatchingSfn` if the UE never observed that SFN and
    :class:`StaleRecord` if the stored observation is older than
    ``staleness_ns`` (guards against SFN wrap ambiguity).

    Stored records are shifted along with the clock, so tuples still in
    flight pair against the corrected timebase and are not applied twice.
    """
    record = store.get(tup.sfn)
    if record is None:
        raise NoMatchingSfn(tup.sfn)
    age = now - record.observed_at
    if age > staleness_ns:
        raise StaleRecord(f"sfn {tup.sfn} observed {age} ns ago")
    offset = tup.t_tsn_ns - record.t_ue_ns
    store.shift(offset)
    return ue_clock.step_adjust(offset, now), TupleDiagnostics(tup.sfn, tup.t_tsn_ns, offset, age)


class ReferenceSystem(GptpSlave):
    """Wireline Reference UE: gPTP slave that also publishes SyncTuples.

    Publishing starts only after the first non-provisional gPTP correction.
    """

    def __init__(self, name: str, clock: SimulatedClock, upstream: str, subscribers: list[str], decimation: int = 1, **kwargs):
        super().__init__(name, clock, upstream, **kwargs)
        if decimation < 1:
            raise ValueError("decimation must be >= 1")
        self.subscribers = list(subscribers)
        self.decimation = decimation
        self.published = 0

    def handle(self, sim: Simulator, event: Event) -> None:
        if isinstance(event.payload, SfnEvent):
            self.on_sfn(sim, event.payload)
        else:
            super().handle(sim, event)

    def on_sfn(self, sim: Simulator, ev: SfnEvent) -> None:
        if not self.synced or ev.counter.subframe != 0 or not should_publish(ev.counter.sfn, self.decimation):
            return
        tup = reference_on_sfn(self.clock.read(sim.now), ev.counter.sfn)
        pubsub.multicast_publish(sim, self.name, pubsub.encode(tup), self.subscribers)
        self.published += 1


@dataclass
class UeCounters:
    applied: int = 0
    no_matching_sfn: int = 0
    stale_record: int = 0
    decode_errors: int = 0


class SfnUe:
    """Mobile UE synchronized purely from SFN observations and received tuples.

    Listeners are called as ``fn(sim, node, kind, **info)`` with ``kind`` one
    of ``"correction"``, ``"no_matching_sfn"`` or ``"stale_record"``.
    """

    def __init__(
        self,
        name: str,
        clock: SimulatedClock,
        capacity: int = DEFAULT_STORE_CAPACITY,
        staleness_ns: int = DEFAULT_STALENESS_NS,
    ):
        self.name = name
        self.clock = clock
        self.store = SfnStore(capacity)
        self.staleness_ns = staleness_ns
        self.synced = False
        self.counters = UeCounters()
        self.listeners: list = []

    def handle(self, sim: Simulator, event: Event) -> None:
        payload = event.payload
        if isinstance(payload, SfnEvent):
            # the tuple carries no subframe, so only frame starts are paired
            if payload.counter.subframe == 0:
                ue_on_sfn(self.store, payload.counter.sfn, self.clock.read(sim.now), sim.now)
            return
        try:
            tup = pubsub.decode(payload)
        except pubsub.DecodeError:
            self.counters.decode_errors += 1
            return
        try:
            before = self.clock
            self.clock, diag = ue_on_tuple(self.store, tup, self.clock, sim.now, self.staleness_ns)
        except NoMatchingSfn:
            self.counters.no_matching_sfn += 1
            self._notify(sim, "no_matching_sfn", tuple=tup)
            return
        except StaleRecord:
            self.counters.stale_record += 1
            self._notify(sim, "stale_record", tuple=tup, age=sim.now - self.store.get(tup.sfn).observed_at)
            return
        self.counters.applied += 1
        self.synced = True
        self._notify(sim, "correction", before=before, after=self.clock, diag=diag)

    def _notify(self, sim: Simulator, kind: str, **info) -> None:
        for fn in self.listeners:
            fn(sim, self, kind, **info)
