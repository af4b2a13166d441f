import math

import pytest
from hypothesis import given, settings, strategies as st

from tsn5g_syncsim.demonstrator import (
    CarriageRun,
    MotionProfile,
    ProfileInfeasible,
    SensorModel,
    delta_s,
    max_delta_s,
    measure,
    position,
    recover_dt,
)
from tsn5g_syncsim.netsim import make_rng

P = MotionProfile()


def runs(dt_ns, start=1_000_000_000):
    return CarriageRun(P, start, start), CarriageRun(P, start, start + dt_ns)


def test_profile_timing():
    assert P.t_acc == pytest.approx(4 / 30)
    assert P.total_time == pytest.approx(1 / 4 + 4 / 30)
    assert P.total_time == pytest.approx(0.38333, abs=1e-5)


@pytest.mark.parametrize("tau,s", [(0, 0.0), (-1, 0.0), (0.1, 0.15), (0.38334, 1.0), (5, 1.0)])
def test_position_examples(tau, s):
    assert position(P, tau) == pytest.approx(s, abs=1e-12)


def test_position_end_is_exact():
    assert position(P, P.total_time) == 1.0


def test_infeasible_profiles():
    with pytest.raises(ProfileInfeasible):
        MotionProfile(v_max=10, a_max=30, stroke=1)
    with pytest.raises(ProfileInfeasible):
        MotionProfile(v_max=0)


@given(st.floats(0, 0.5), st.floats(0, 0.5))
def test_position_monotone_and_bounded(a, b):
    lo, hi = sorted((a, b))
    assert 0 <= position(P, lo) <= position(P, hi) <= 1.0


def test_position_continuous_at_phase_changes():
    for t in (P.t_acc, P.total_time - P.t_acc, P.total_time):
        assert position(P, t - 1e-9) == pytest.approx(position(P, t + 1e-9), abs=1e-8)


def test_identical_starts():
    r1, r2 = runs(0)
    assert all(delta_s(r1, r2, t) == 0 for t in range(r1.actual_start_true_ns, 1_400_000_000, 1_000_000))


def test_cruise_delta():
    r1, r2 = runs(800_000)
    t = 1_000_000_000 + 200_000_000
    assert delta_s(r1, r2, t) == pytest.approx(3.2e-3, abs=1e-12)


@pytest.mark.parametrize("ds,dt", [(2.2e-3, 0.55e-3), (0, 0), (81.1e-3, 20.275e-3)])
def test_recover_dt(ds, dt):
    assert recover_dt(ds, 4.0) == pytest.approx(dt, abs=1e-15)


def test_recover_dt_needs_speed():
    with pytest.raises(ValueError):
        recover_dt(1, 0)


def test_sensor_examples():
    s = SensorModel()
    assert abs(s.quantize(0.0)) <= 3e-6
    assert s.adc_step_m == pytest.approx(1 / 4096)
    assert SensorModel(enabled=False).quantize(0.123456789) == 0.123456789
    assert s.resolution_m(0) == pytest.approx(3e-6) and s.resolution_m(1) == pytest.approx(63e-6)


@given(st.floats(0, 1))
def test_quantized_within_one_combined_step(x):
    s = SensorModel()
    # the 12-bit grid is coarser than the optical resolution everywhere on the stroke
    assert abs(s.quantize(x) - x) <= max(s.resolution_m(x), s.adc_step_m)


def test_measure_dither_is_seeded():
    r1, _ = runs(0)
    t = 1_100_000_000
    a = [measure(r1, t, SensorModel(), make_rng(5)) for _ in range(3)]
    b = [measure(r1, t, SensorModel(), make_rng(5)) for _ in range(3)]
    assert a == b


@settings(max_examples=30, deadline=None)
@given(st.integers(-5_000_000, 5_000_000))
def test_round_trip_ideal(dt_ns):
    r1, r2 = runs(dt_ns)
    res = max_delta_s(r1, r2, 1_000)
    assert res.in_cruise_overlap or dt_ns == 0
    assert recover_dt(res.abs_ds_max_m, P.v_max) == pytest.approx(abs(dt_ns) * 1e-9, abs=1e-9)


@settings(max_examples=10, deadline=None)
@given(st.integers(100_000, 5_000_000))
def test_round_trip_with_sensors(dt_ns):
    sensor = SensorModel()
    r1, r2 = runs(dt_ns)
    res = max_delta_s(r1, r2, 10_000, sensor)
    tol = 2 * sensor.adc_step_m / P.v_max + 10_000e-9
    assert recover_dt(res.abs_ds_max_m, P.v_max) == pytest.approx(dt_ns * 1e-9, abs=tol)


def test_peak_sign_follows_leader():
    r1, r2 = runs(-550_000)  # carriage 2 starts first
    assert max_delta_s(r1, r2, 100_000).ds_max_m < 0
    assert math.isclose(max_delta_s(r1, r2, 1_000).abs_ds_max_m, 2.2e-3, abs_tol=4e-6)


@given(st.lists(st.floats(-0.1, 0.6), min_size=1, max_size=50))
def test_vectorized_matches_scalar(taus):
    from tsn5g_syncsim.demonstrator import positions

    assert list(positions(P, taus)) == pytest.approx([position(P, t) for t in taus], abs=1e-12)
    s = SensorModel()
    xs = [position(P, t) for t in taus]
    assert list(s.quantize_many(xs)) == [s.quantize(x) for x in xs]
