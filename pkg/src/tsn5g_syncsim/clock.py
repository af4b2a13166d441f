"""Local clocks with phase offset, constant frequency drift and timestamp granularity.

A :class:`SimulatedClock` maps true simulation time (integer nanoseconds) to the
reading a node would see locally::

    read(now) = quantize(offset_ns + (1 + drift_ppm * 1e-6) * now, granularity_ns)

All arithmetic is exact: drift is held as a :class:`fractions.Fraction` and the
product is evaluated with Python integers, so traces are bit-reproducible.
Quantization truncates toward negative infinity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from fractions import Fraction

MAX_DRIFT_PPM = 1000
_PPM = 1_000_000


def as_fraction(value: int | float | str | Fraction) -> Fraction:
    """Convert config-style numbers to an exact Fraction (floats via their decimal repr)."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        return Fraction(repr(value))
    return Fraction(value)


@dataclass(frozen=True)
class SimulatedClock:
    offset_ns: int = 0
    drift_ppm: Fraction = Fraction(0)
    granularity_ns: int = 1
    last_adjust: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "drift_ppm", as_fraction(self.drift_ppm))
        if abs(self.drift_ppm) > MAX_DRIFT_PPM:
            raise ValueError(f"|drift_ppm| must be <= {MAX_DRIFT_PPM}, got {self.drift_ppm}")
        if self.granularity_ns < 1:
            raise ValueError(f"granularity_ns must be >= 1, got {self.granularity_ns}")

    def read(self, now: int) -> int:
        """Local timestamp at true time ``now``."""
        p, q = self.drift_ppm.numerator, self.drift_ppm.denominator
        num = (self.offset_ns + now) * q * _PPM + now * p
        return (num // (q * _PPM * self.granularity_ns)) * self.granularity_ns

    def step_adjust(self, delta_ns: int, now: int) -> SimulatedClock:
        """Phase-step the clock by ``delta_ns``; the drift is left untouched.

        The new reading at any ``t >= now`` equals the old one plus ``delta_ns``
        exactly when ``delta_ns`` is a multiple of the granularity.
        """
        return replace(self, offset_ns=self.offset_ns + delta_ns, last_adjust=now)

    def true_time_at(self, reading: int) -> int:
        """Earliest true time at which ``read`` returns at least ``reading``."""
        g = self.granularity_ns
        target = -(-reading // g) * g
        rate = 1 + self.drift_ppm / _PPM
        return math.ceil((target - self.offset_ns) / rate)


def read(clock: SimulatedClock, now: int) -> int:
    return clock.read(now)


def step_adjust(clock: SimulatedClock, delta_ns: int, now: int) -> SimulatedClock:
    return clock.step_adjust(delta_ns, now)


def true_offset(clock: SimulatedClock, reference: SimulatedClock, now: int) -> int:
    """Ground-truth synchronization error of ``clock`` against ``reference`` at ``now``."""
    return clock.read(now) - reference.read(now)
