"""Load patterns, the session simulator, profiles, synthesis, and trace I/O."""

from __future__ import annotations

import json
import math

import numpy as np
import pytest

from slastream.core import FEATURE_NAMES, NUM_FEATURES, PERCENT_FEATURES
from slastream.labeling import SloThresholds
from slastream.tracegen import (
    LoadPattern,
    ResponseCurve,
    ServiceModes,
    TestbedProfile,
    TraceFormatError,
    arrival_rate,
    builtin_profile_names,
    concat_traces,
    flash_event_times,
    load_profile,
    read_trace,
    simulate_sessions,
    synthesize_trace,
    write_trace,
)


def small_profile(seed: int = 7, steepness: float = 12.0) -> TestbedProfile:
    curves = {}
    noise = {}
    for i, name in enumerate(FEATURE_NAMES):
        shape = "inverse" if name == "cpu_idle" else ("saturating" if i % 3 else "linear")
        base = 90.0 if name == "cpu_idle" else 1.0 + i
        curves[name] = ResponseCurve(base=base, slope=0.5 + 0.1 * i, shape=shape)
        noise[name] = 0.05
    return TestbedProfile(
        profile_id="tiny", capacity=20.0, seed=seed, curves=curves, noise=noise,
        steepness=steepness,
    )


# -- load patterns -------------------------------------------------------------


def test_periodic_rate_known_points():
    pattern = LoadPattern.periodic(duration=3600, seed=0)
    assert arrival_rate(pattern, 0.0) == pytest.approx(30.0)
    assert arrival_rate(pattern, 900.0) == pytest.approx(50.0)  # quarter period, sin peak
    assert arrival_rate(pattern, 2700.0) == pytest.approx(10.0)
    ts = np.array([0.0, 900.0, 1800.0])
    assert arrival_rate(pattern, ts) == pytest.approx([30.0, 50.0, 30.0])


def test_flashcrowd_rate_piecewise():
    pattern = LoadPattern.flashcrowd(duration=4 * 3600, seed=3, event_rate=0.5)
    events = flash_event_times(pattern)
    assert events == flash_event_times(pattern)  # deterministic
    # pick an event isolated from its neighbours so the pieces are pure
    footprint = pattern.ramp_up + pattern.sustain + pattern.ramp_down
    isolated = None
    for i, e in enumerate(events):
        before = events[i - 1] if i else -math.inf
        after = events[i + 1] if i + 1 < len(events) else math.inf
        if e - before > footprint and after - e > footprint + 2.0:
            isolated = e
            break
    assert isolated is not None
    assert arrival_rate(pattern, isolated + 30.0) == pytest.approx(27.5)  # halfway up 5 -> 50
    assert arrival_rate(pattern, isolated + 90.0) == pytest.approx(50.0)  # sustained
    assert arrival_rate(pattern, isolated + 120.0 + 120.0) == pytest.approx(27.5)  # halfway down
    assert arrival_rate(pattern, isolated + footprint + 1.0) == pytest.approx(5.0)


def test_flashcrowd_overlapping_events_take_the_max():
    pattern = LoadPattern.flashcrowd(duration=7200, seed=1)
    ts = np.arange(0.0, 7200.0, 10.0)
    rates = arrival_rate(pattern, ts)
    assert rates.min() >= 5.0
    assert rates.max() <= 50.0


def test_pattern_validation():
    with pytest.raises(ValueError):
        LoadPattern.periodic(duration=-1, seed=0)
    with pytest.raises(ValueError):
        LoadPattern.periodic(duration=100, seed=0, amplitude=40.0)  # amplitude >= base
    with pytest.raises(ValueError):
        LoadPattern.flashcrowd(duration=100, seed=0, peak_rate=1.0)  # peak < base
    with pytest.raises(ValueError):
        LoadPattern.periodic(duration=100, seed=-1)


def test_pattern_dict_round_trip():
    pattern = LoadPattern.flashcrowd(duration=1800, seed=9)
    assert LoadPattern.from_dict(pattern.to_dict()) == pattern


def test_sessions_deterministic_and_non_negative():
    pattern = LoadPattern.periodic(duration=2000, seed=42)
    a = simulate_sessions(pattern)
    b = simulate_sessions(pattern)
    assert np.array_equal(a, b)
    assert a.dtype == np.int64
    assert len(a) == 2000
    assert a.min() >= 0
    c = simulate_sessions(LoadPattern.periodic(duration=2000, seed=43))
    assert not np.array_equal(a, c)


def test_sessions_mean_tracks_offered_load():
    # stationary M/M/inf: mean occupancy = arrival rate / departure rate
    pattern = LoadPattern.periodic(duration=8000, seed=11, base_rate=30.0, amplitude=0.0)
    sessions = simulate_sessions(pattern)
    mean = sessions[300:].mean()  # discard warmup from the empty start
    assert mean == pytest.approx(30.0, rel=0.05)
    half_life = LoadPattern.periodic(
        duration=8000, seed=11, base_rate=30.0, amplitude=0.0, holding_time_mean=30.0
    )
    assert simulate_sessions(half_life)[300:].mean() == pytest.approx(15.0, rel=0.08)


# -- profiles ------------------------------------------------------------------


def test_response_curve_shapes():
    n = np.array([0.0, 20.0, 60.0])
    linear = ResponseCurve(base=2.0, slope=0.5, shape="linear")
    assert linear.evaluate(n, 20.0) == pytest.approx([2.0, 12.0, 32.0])
    sat = ResponseCurve(base=1.0, slope=2.0, shape="saturating")
    # at u=1 the saturating term is capacity/2
    assert sat.evaluate(np.array([20.0]), 20.0)[0] == pytest.approx(1.0 + 2.0 * 10.0)
    inv = ResponseCurve(base=90.0, slope=2.0, shape="inverse")
    assert inv.evaluate(np.array([20.0]), 20.0)[0] == pytest.approx(90.0 - 2.0 * 10.0)
    with pytest.raises(ValueError):
        ResponseCurve(base=0.0, slope=1.0, shape="quadratic")


def test_service_modes_validation():
    with pytest.raises(ValueError):
        ServiceModes(25.0, 0.0, 12.0, 3.0)
    with pytest.raises(ValueError):
        ServiceModes(10.0, 1.0, 12.0, 3.0)  # degraded mode above healthy mode


def test_violated_probability_transition():
    profile = small_profile()
    assert profile.violated_probability(20.0) == pytest.approx(0.5)
    probs = profile.violated_probability(np.array([0.0, 10.0, 20.0, 30.0, 60.0]))
    assert np.all(np.diff(probs) > 0)
    assert probs[0] < 0.01 and probs[-1] > 0.99


def test_profile_requires_all_features():
    profile = small_profile()
    curves = dict(profile.curves)
    del curves["swap_used"]
    with pytest.raises(ValueError, match="swap_used"):
        TestbedProfile(
            profile_id="broken", capacity=20.0, seed=1, curves=curves, noise=profile.noise
        )


def test_profile_dict_round_trip():
    profile = small_profile()
    again = TestbedProfile.from_dict(profile.to_dict())
    assert again == profile


def test_builtin_profiles_load_by_name():
    names = builtin_profile_names()
    assert "default_a" in names and "default_b" in names
    prof = load_profile("default_a")
    assert prof.profile_id == "default_a"
    assert set(prof.curves) == set(FEATURE_NAMES)
    with pytest.raises(FileNotFoundError, match="default_a"):
        load_profile("no_such_profile")


def test_profile_loads_from_path(tmp_path):
    profile = small_profile()
    path = tmp_path / "custom.json"
    path.write_text(json.dumps(profile.to_dict()))
    assert load_profile(str(path)) == profile


# -- synthesis -----------------------------------------------------------------


def test_synthesize_rows_are_valid_and_deterministic():
    pattern = LoadPattern.periodic(duration=600, seed=5)
    profile = small_profile()
    trace = synthesize_trace(pattern, profile)
    again = synthesize_trace(pattern, profile)
    assert len(trace) == 600
    assert np.array_equal(trace.feature_matrix(), again.feature_matrix())
    matrix = trace.feature_matrix()
    assert np.all(np.isfinite(matrix)) and matrix.min() >= 0.0
    for name in PERCENT_FEATURES:
        col = matrix[:, FEATURE_NAMES.index(name)]
        assert col.max() <= 100.0
    assert all(r.service.fps >= 0.0 and r.service.abs >= 0.0 for r in trace.rows)
    assert trace.meta.duration == 600
    assert trace.meta.profile_id == "tiny"


def test_synthesize_depends_on_both_seeds():
    pattern_a = LoadPattern.periodic(duration=300, seed=5)
    pattern_b = LoadPattern.periodic(duration=300, seed=6)
    profile = small_profile(seed=7)
    other_profile = small_profile(seed=8)
    base = synthesize_trace(pattern_a, profile).feature_matrix()
    assert not np.array_equal(base, synthesize_trace(pattern_b, profile).feature_matrix())
    assert not np.array_equal(base, synthesize_trace(pattern_a, other_profile).feature_matrix())


def test_noise_free_features_follow_the_curves():
    profile = small_profile()
    profile = TestbedProfile(
        profile_id="exact", capacity=profile.capacity, seed=3, curves=profile.curves,
        noise={name: 0.0 for name in FEATURE_NAMES}, steepness=profile.steepness,
    )
    pattern = LoadPattern.periodic(duration=120, seed=2)
    trace = synthesize_trace(pattern, profile)
    sessions = trace.sessions()
    for idx, name in enumerate(FEATURE_NAMES):
        expected = np.clip(
            profile.curves[name].evaluate(sessions.astype(float), profile.capacity),
            0.0, 100.0 if name in PERCENT_FEATURES else np.inf,
        )
        assert trace.feature_matrix()[:, idx] == pytest.approx(expected)


def test_labeled_trace_has_both_classes():
    pattern = LoadPattern.periodic(duration=3600, seed=5)
    trace = synthesize_trace(pattern, load_profile("default_a"))
    labels = [s.label.value for s in trace.labeled(SloThresholds())]
    violated = labels.count("violated") / len(labels)
    assert 0.1 < violated < 0.6


def test_concat_rebases_time_and_records_boundaries():
    profile = small_profile()
    t1 = synthesize_trace(LoadPattern.periodic(duration=100, seed=1), profile, name="one")
    t2 = synthesize_trace(LoadPattern.periodic(duration=150, seed=2), profile, name="two")
    t3 = synthesize_trace(LoadPattern.periodic(duration=50, seed=3), profile, name="three")
    cat = concat_traces([t1, t2, t3])
    assert len(cat) == 300
    assert cat.meta.boundaries == (100, 250)
    stamps = [r.timestamp for r in cat.rows]
    assert stamps == [float(i) for i in range(300)]
    assert cat.meta.sources == ("one", "two", "three")
    assert np.array_equal(cat.feature_matrix()[100:250], t2.feature_matrix())


def test_concat_needs_input():
    with pytest.raises(ValueError):
        concat_traces([])


# -- trace files ---------------------------------------------------------------


def test_write_read_round_trip_exact(tmp_path):
    pattern = LoadPattern.flashcrowd(duration=200, seed=4)
    trace = synthesize_trace(pattern, small_profile())
    path = tmp_path / "t.csv"
    write_trace(trace, path)
    back = read_trace(path)
    assert len(back) == len(trace)
    assert np.array_equal(back.feature_matrix(), trace.feature_matrix())
    assert [r.service.fps for r in back.rows] == [r.service.fps for r in trace.rows]
    assert np.array_equal(back.sessions(), trace.sessions())
    assert back.meta.name == trace.meta.name
    assert back.meta.pattern == trace.meta.pattern
    # and writing again is byte-identical
    second = tmp_path / "u.csv"
    write_trace(back, second)
    assert second.read_bytes() == path.read_bytes()
    meta_a = (tmp_path / "t.meta.json").read_bytes()
    meta_b = (tmp_path / "u.meta.json").read_bytes()
    assert meta_a == meta_b


def test_read_without_sidecar(tmp_path):
    trace = synthesize_trace(LoadPattern.periodic(duration=50, seed=1), small_profile())
    path = tmp_path / "bare.csv"
    write_trace(trace, path)
    (tmp_path / "bare.meta.json").unlink()
    back = read_trace(path)
    assert back.meta.name == "bare"
    assert back.meta.duration == 50


def test_read_rejects_bad_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("timestamp,nope\n1,2\n")
    with pytest.raises(TraceFormatError, match="header"):
        read_trace(path)


def test_read_reports_bad_row_with_line_number(tmp_path):
    trace = synthesize_trace(LoadPattern.periodic(duration=5, seed=1), small_profile())
    path = tmp_path / "t.csv"
    write_trace(trace, path)
    lines = path.read_text().splitlines()
    lines[3] = lines[3] + ",extra"
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(TraceFormatError, match=r"t\.csv:4"):
        read_trace(path)
