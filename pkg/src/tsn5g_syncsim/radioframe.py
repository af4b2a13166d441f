"""5G radio-frame clock: 10-bit SFN (10 ms frames) plus subframe number (1 ms).

The gNB ticks the counter and every attached UE observes each frame boundary
as a common-view event, shifted by a per-UE ``observation_offset_ns``.
"""

from __future__ import annotations

from dataclasses import dataclass

from tsn5g_syncsim.netsim import Event, Simulator

SFN_MODULUS = 1024
SUBFRAMES = 10
FRAME_NS = 10_000_000
SUBFRAME_NS = FRAME_NS // SUBFRAMES


class SfnOutOfRange(ValueError):
    pass


class FieldOutOfRange(ValueError):
    pass


@dataclass(frozen=True, order=True)
class SfnCounter:
    sfn: int = 0
    subframe: int = 0

    def __post_init__(self) -> None:
        if not 0 <= self.sfn < SFN_MODULUS or not 0 <= self.subframe < SUBFRAMES:
            raise ValueError(f"invalid counter ({self.sfn}, {self.subframe})")

    def tick(self) -> SfnCounter:
        if self.subframe < SUBFRAMES - 1:
            return SfnCounter(self.sfn, self.subframe + 1)
        return SfnCounter((self.sfn + 1) % SFN_MODULUS, 0)

    def next_frame(self) -> SfnCounter:
        return SfnCounter((self.sfn + 1) % SFN_MODULUS, self.subframe)


def tick(c: SfnCounter) -> SfnCounter:
    return c.tick()


def encode_sfn(sfn: int) -> tuple[int, int]:
    """Split an SFN into the 6 MSBs carried by the MIB and the 4 LSBs carried on PBCH."""
    if not 0 <= sfn < SFN_MODULUS:
        raise SfnOutOfRange(sfn)
    return sfn >> 4, sfn & 0xF


def decode_sfn(mib_msb6: int, pbch_lsb4: int) -> int:
    if not 0 <= mib_msb6 < 64 or not 0 <= pbch_lsb4 < 16:
        raise FieldOutOfRange((mib_msb6, pbch_lsb4))
    return (mib_msb6 << 4) | pbch_lsb4


@dataclass(frozen=True)
class SfnEvent:
    counter: SfnCounter
    boundary_ns: int  # true time of the frame (or subframe) boundary


@dataclass(frozen=True)
class _Boundary:
    pass


class Gnb:
    """Schedules frame boundaries and fans them out to attached UEs.

    With ``per_subframe`` the boundary is every 1 ms and every subframe is
    delivered; otherwise only frame starts (subframe 0) are delivered.
    """

    def __init__(
        self,
        name: str = "gnb",
        start: SfnCounter = SfnCounter(),
        per_subframe: bool = False,
    ):
        self.name = name
        self.counter = start
        self.per_subframe = per_subframe
        self.observation_offsets: dict[str, int] = {}
        self.events_emitted = 0

    def attach(self, ue: str, observation_offset_ns: int = 0) -> None:
        if observation_offset_ns < 0:
            raise ValueError("observation offset must be >= 0")
        self.observation_offsets[ue] = observation_offset_ns

    def start(self, sim: Simulator, first_boundary_ns: int = 0) -> None:
        sim.schedule(first_boundary_ns, self.name, _Boundary())

    def handle(self, sim: Simulator, event: Event) -> None:
        ev = SfnEvent(self.counter, sim.now)
        for ue, offset in self.observation_offsets.items():
            sim.schedule(sim.now + offset, ue, ev, sender=self.name)
        self.events_emitted += 1
        if self.per_subframe:
            self.counter = self.counter.tick()
            step = SUBFRAME_NS
        else:
            self.counter = self.counter.next_frame()
            step = FRAME_NS
        sim.schedule(sim.now + step, self.name, _Boundary())


def gnb_emit_frame_events(sim: Simulator, gnb: Gnb, first_boundary_ns: int = 0) -> None:
    gnb.start(sim, first_boundary_ns)
