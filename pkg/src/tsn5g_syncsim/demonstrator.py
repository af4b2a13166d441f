"""Dual-carriage demonstrator: turns a start-time error into a position error.

Two carriages run the same trapezoidal profile over the stroke. Each starts
when its own corrected clock reads the commanded start, so a clock error
``dt`` shows up as a position difference ``ds(t) = s1(t) - s2(t)`` whose peak,
reached while both cruise, is ``v_max * dt``. Dividing back by ``v_max``
recovers the start delay.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

ADC_BITS = 12


class ProfileInfeasible(ValueError):
    pass


@dataclass(frozen=True)
class MotionProfile:
    v_max: float = 4.0  # m/s
    a_max: float = 30.0  # m/s^2
    stroke: float = 1.0  # m

    def __post_init__(self) -> None:
        if min(self.v_max, self.a_max, self.stroke) <= 0:
            raise ProfileInfeasible("v_max, a_max and stroke must be positive")
        if self.v_max**2 / self.a_max > self.stroke:
            raise ProfileInfeasible(
                f"no cruise phase: v^2/a = {self.v_max**2 / self.a_max:.4g} m exceeds stroke {self.stroke} m"
            )

    @property
    def t_acc(self) -> float:
        return self.v_max / self.a_max

    @property
    def total_time(self) -> float:
        return self.stroke / self.v_max + self.v_max / self.a_max

    @property
    def cruise_interval(self) -> tuple[float, float]:
        """Time window, relative to start, spent at v_max."""
        return self.t_acc, self.total_time - self.t_acc


def position(profile: MotionProfile, tau: float) -> float:
    """Carriage position ``tau`` seconds after its actual start (0 before start)."""
    if tau <= 0:
        return 0.0
    v, a = profile.v_max, profile.a_max
    t_acc = v / a
    total = profile.total_time
    if tau >= total:
        return profile.stroke
    if tau <= t_acc:
        return 0.5 * a * tau * tau
    if tau <= total - t_acc:
        return v * v / (2 * a) + v * (tau - t_acc)
    rem = total - tau
    return profile.stroke - 0.5 * a * rem * rem


def positions(profile: MotionProfile, tau: np.ndarray) -> np.ndarray:
    """Vectorized :func:`position`."""
    tau = np.asarray(tau, dtype=float)
    v, a, total = profile.v_max, profile.a_max, profile.total_time
    t_acc = v / a
    rem = total - tau
    out = np.select(
        [tau <= 0, tau >= total, tau <= t_acc, tau <= total - t_acc],
        [0.0, profile.stroke, 0.5 * a * tau * tau, v * v / (2 * a) + v * (tau - t_acc)],
        profile.stroke - 0.5 * a * rem * rem,
    )
    return out


@dataclass(frozen=True)
class CarriageRun:
    profile: MotionProfile
    start_time_ns: int  # commanded, in the carriage's corrected local time
    actual_start_true_ns: int

    def position_at(self, t_true_ns: int) -> float:
        return position(self.profile, (t_true_ns - self.actual_start_true_ns) * 1e-9)

    def positions_at(self, t_true_ns: np.ndarray) -> np.ndarray:
        return positions(self.profile, (np.asarray(t_true_ns) - self.actual_start_true_ns) * 1e-9)


def delta_s(run1: CarriageRun, run2: CarriageRun, t_true_ns: int) -> float:
    return run1.position_at(t_true_ns) - run2.position_at(t_true_ns)


def recover_dt(ds_max: float, v_max: float) -> float:
    if v_max <= 0:
        raise ValueError("v_max must be positive")
    return ds_max / v_max


@dataclass(frozen=True)
class SensorModel:
    """Laser distance sensor feeding a 12-bit analog input.

    Resolution grows linearly from ``near_um`` at position 0 to ``far_um`` at
    the far end of the stroke.
    """

    near_um: float = 3.0
    far_um: float = 63.0
    adc_bits: int = ADC_BITS
    stroke: float = 1.0
    enabled: bool = True

    def resolution_m(self, s: float) -> float:
        frac = min(max(s / self.stroke, 0.0), 1.0)
        return (self.near_um + (self.far_um - self.near_um) * frac) * 1e-6

    @property
    def adc_step_m(self) -> float:
        return self.stroke / (1 << self.adc_bits)

    def quantize(self, s: float) -> float:
        if not self.enabled:
            return s
        step = self.resolution_m(s)
        s = round(s / step) * step
        return round(s / self.adc_step_m) * self.adc_step_m

    def quantize_many(self, s: np.ndarray) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        if not self.enabled:
            return s
        frac = np.clip(s / self.stroke, 0.0, 1.0)
        step = (self.near_um + (self.far_um - self.near_um) * frac) * 1e-6
        s = np.round(s / step) * step
        return np.round(s / self.adc_step_m) * self.adc_step_m


def measure(run: CarriageRun, t_true_ns: int, sensor: SensorModel, rng: np.random.Generator | None = None) -> float:
    """Sensor reading of ``run`` at ``t_true_ns``.

    With ``rng`` the true position is dithered uniformly within half the local
    resolution step before quantization.
    """
    s = run.position_at(t_true_ns)
    if rng is not None and sensor.enabled:
        s += rng.uniform(-0.5, 0.5) * sensor.resolution_m(s)
    return sensor.quantize(s)


def sample_grid(run1: CarriageRun, run2: CarriageRun, grid_ns: int) -> np.ndarray:
    """True sample instants covering both motions, aligned to multiples of ``grid_ns``."""
    start = min(run1.actual_start_true_ns, run2.actual_start_true_ns)
    end = max(run1.actual_start_true_ns, run2.actual_start_true_ns) + math.ceil(run1.profile.total_time * 1e9)
    first = (start // grid_ns) * grid_ns
    return np.arange(first, end + grid_ns, grid_ns, dtype=np.int64)


@dataclass(frozen=True)
class DeltaSResult:
    ds_max_m: float  # signed value at the peak of |ds|
    t_peak_ns: int
    in_cruise_overlap: bool

    @property
    def abs_ds_max_m(self) -> float:
        return abs(self.ds_max_m)


def max_delta_s(run1: CarriageRun, run2: CarriageRun, grid_ns: int, sensor: SensorModel | None = None) -> DeltaSResult:
    ts = sample_grid(run1, run2, grid_ns)
    s1, s2 = run1.positions_at(ts), run2.positions_at(ts)
    if sensor is not None:
        s1, s2 = sensor.quantize_many(s1), sensor.quantize_many(s2)
    ds = s1 - s2
    i = int(np.argmax(np.abs(ds)))
    t_peak = int(ts[i])
    return DeltaSResult(float(ds[i]), t_peak, _in_cruise_overlap(run1, run2, t_peak))


def _in_cruise_overlap(run1: CarriageRun, run2: CarriageRun, t_ns: int) -> bool:
    lo, hi = run1.profile.cruise_interval
    windows = [(r.actual_start_true_ns + lo * 1e9, r.actual_start_true_ns + hi * 1e9) for r in (run1, run2)]
    return max(w[0] for w in windows) <= t_ns <= min(w[1] for w in windows)
