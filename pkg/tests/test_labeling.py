"""SLO evaluation and the timestamp join, checked against a brute-force
nearest-neighbour oracle."""

from __future__ import annotations

import logging

import numpy as np
import pytest
from hypothesis import given, strategies as st

from slastream.core import FeatureVector, NUM_FEATURES, ServiceSample, SlaLabel
from slastream.labeling import JOIN_TOLERANCE, SloThresholds, evaluate_sla, join_streams


def device_at(t: float) -> tuple[float, FeatureVector]:
    return (t, FeatureVector.from_array(np.full(NUM_FEATURES, 1.0)))


def service_at(t: float, fps: float = 24.0, abs_rate: float = 30.0) -> ServiceSample:
    return ServiceSample(timestamp=t, fps=fps, abs=abs_rate)


def brute_force_join(device_ts, service_ts, tolerance):
    """For each device timestamp pick the closest service sample, earlier one
    on exact ties, and match only within tolerance."""
    matches = []
    for t in device_ts:
        best = None
        for j, s in enumerate(service_ts):
            d = abs(s - t)
            if best is None or d < abs(service_ts[best] - t):
                best = j
        if best is not None and abs(service_ts[best] - t) <= tolerance:
            matches.append((t, best))
    return matches


def test_slo_fps_boundary():
    slo = SloThresholds()
    assert evaluate_sla(service_at(0.0, fps=19.999), slo) is SlaLabel.VIOLATED
    assert evaluate_sla(service_at(0.0, fps=20.0), slo) is SlaLabel.CONFORMING


def test_slo_abs_disabled_by_default():
    slo = SloThresholds()
    assert slo.use_abs is False
    assert evaluate_sla(service_at(0.0, fps=25.0, abs_rate=5.0), slo) is SlaLabel.CONFORMING


def test_slo_abs_enabled():
    slo = SloThresholds(use_abs=True)
    assert evaluate_sla(service_at(0.0, fps=25.0, abs_rate=5.0), slo) is SlaLabel.VIOLATED
    assert evaluate_sla(service_at(0.0, fps=25.0, abs_rate=20.0), slo) is SlaLabel.CONFORMING
    # either breach suffices
    assert evaluate_sla(service_at(0.0, fps=5.0, abs_rate=25.0), slo) is SlaLabel.VIOLATED


def test_slo_threshold_validation():
    with pytest.raises(ValueError):
        SloThresholds(fps_threshold=0.0)
    with pytest.raises(ValueError):
        SloThresholds(abs_threshold=-1.0)


def test_join_matches_within_tolerance():
    slo = SloThresholds()
    device = [device_at(0.0), device_at(1.0), device_at(2.0)]
    service = [service_at(0.4), service_at(1.4, fps=10.0), service_at(2.1)]
    result = join_streams(device, service, slo)
    assert result.dropped == 0
    assert len(result.samples) == 3
    assert result.samples[0].label is SlaLabel.CONFORMING
    # device 1.0 matches 1.4 (0.4 away beats 0.6 to 0.4's sample) -> fps=10 violates
    assert result.samples[1].timestamp == 1.0
    assert result.samples[1].label is SlaLabel.VIOLATED


def test_join_tie_prefers_earlier_sample():
    slo = SloThresholds()
    device = [device_at(1.0)]
    service = [service_at(0.5, fps=5.0), service_at(1.5, fps=25.0)]
    result = join_streams(device, service, slo)
    assert len(result.samples) == 1
    assert result.samples[0].label is SlaLabel.VIOLATED  # the earlier (fps=5) sample


def test_join_drops_beyond_tolerance():
    slo = SloThresholds()
    device = [device_at(0.0), device_at(10.0)]
    service = [service_at(0.2)]
    result = join_streams(device, service, slo)
    assert len(result.samples) == 1
    assert result.dropped == 1
    assert JOIN_TOLERANCE == 0.5


def test_join_empty_service_warns(caplog):
    slo = SloThresholds()
    device = [device_at(0.0), device_at(1.0)]
    with caplog.at_level(logging.WARNING, logger="slastream.labeling"):
        result = join_streams(device, [], slo)
    assert result.samples == ()
    assert result.dropped == 2
    assert any("service" in rec.message for rec in caplog.records)


def test_join_requires_sorted_streams():
    slo = SloThresholds()
    with pytest.raises(ValueError):
        join_streams([device_at(1.0), device_at(0.0)], [service_at(0.0)], slo)
    with pytest.raises(ValueError):
        join_streams([device_at(0.0)], [service_at(1.0), service_at(0.0)], slo)


@given(
    device_ts=st.lists(st.integers(0, 400), min_size=1, max_size=40, unique=True),
    service_offsets=st.lists(
        st.tuples(st.integers(0, 400), st.integers(-9, 9)), min_size=1, max_size=40
    ),
)
def test_join_agrees_with_brute_force(device_ts, service_offsets):
    device_ts = sorted(float(t) for t in device_ts)
    service_ts = sorted({t + off / 10.0 for t, off in service_offsets})
    slo = SloThresholds()
    device = [device_at(t) for t in device_ts]
    service = [service_at(t) for t in service_ts]
    result = join_streams(device, service, slo)
    expected = brute_force_join(device_ts, service_ts, JOIN_TOLERANCE)
    assert len(result.samples) == len(expected)
    assert result.dropped == len(device_ts) - len(expected)
    for sample, (t, j) in zip(result.samples, expected):
        assert sample.timestamp == t


def test_join_labels_come_from_matched_sample():
    slo = SloThresholds()
    device = [device_at(0.0), device_at(1.0)]
    service = [service_at(0.0, fps=10.0), service_at(1.0, fps=25.0)]
    result = join_streams(device, service, slo)
    assert [s.label for s in result.samples] == [SlaLabel.VIOLATED, SlaLabel.CONFORMING]
