"""SLA labeling: thresholding client service metrics and joining them with
the server-side device stream by timestamp.

The device statistics and the client metrics are collected by different
processes, so their clocks are close but not identical.  ``join_streams``
matches each device sample to the nearest service sample within a small
tolerance and drops device samples with no counterpart.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

from .core import FeatureVector, LabeledSample, ServiceSample, SlaLabel

logger = logging.getLogger(__name__)

# Maximum clock skew (seconds) between a device sample and the service
# sample it is labeled from.
JOIN_TOLERANCE = 0.5


@dataclass(frozen=True)
class SloThresholds:
    """Service level objectives. A second is VIOLATED when fps drops below
    ``fps_threshold``, or (if ``use_abs`` is set) when the audio buffer rate
    drops below ``abs_threshold``."""

    fps_threshold: float = 20.0
    abs_threshold: float = 20.0
    use_abs: bool = False

    def __post_init__(self) -> None:
        if self.fps_threshold <= 0.0 or self.abs_threshold <= 0.0:
            raise ValueError("SLO thresholds must be positive")


def evaluate_sla(sample: ServiceSample, thresholds: SloThresholds) -> SlaLabel:
    """Apply the SLO to one service sample."""
    violated = sample.fps < thresholds.fps_threshold
    if thresholds.use_abs:
        violated = violated or sample.abs < thresholds.abs_threshold
    return SlaLabel.VIOLATED if violated else SlaLabel.CONFORMING


@dataclass(frozen=True)
class JoinResult:
    """Labeled samples plus the count of device samples that found no
    service sample within tolerance."""

    samples: tuple[LabeledSample, ...]
    dropped: int


def _check_sorted(timestamps: Sequence[float], what: str) -> None:
    for i in range(1, len(timestamps)):
        if timestamps[i] < timestamps[i - 1]:
            raise ValueError(f"{what} stream must be timestamp-sorted")


def join_streams(
    device: Sequence[tuple[float, FeatureVector]],
    service: Sequence[ServiceSample],
    thresholds: SloThresholds,
    tolerance: float = JOIN_TOLERANCE,
) -> JoinResult:
    """Label each device sample from the nearest service sample.

    Both inputs must be sorted by timestamp.  A device sample matches the
    service sample minimizing the absolute time difference; ties are broken
    toward the earlier service sample.  Device samples with no service
    sample within ``tolerance`` seconds are dropped and counted.
    """
    if tolerance < 0.0:
        raise ValueError("tolerance must be >= 0")
    if not device or not service:
        logger.warning(
            "join_streams called with an empty input (%d device, %d service samples)",
            len(device),
            len(service),
        )
        return JoinResult(samples=(), dropped=len(device))

    _check_sorted([t for t, _ in device], "device")
    _check_sorted([s.timestamp for s in service], "service")

    samples: list[LabeledSample] = []
    dropped = 0
    j = 0
    for t, features in device:
        # Advance while the next service sample is strictly closer; on a
        # distance tie this keeps the earlier sample.
        while j + 1 < len(service) and abs(service[j + 1].timestamp - t) < abs(
            service[j].timestamp - t
        ):
            j += 1
        nearest = service[j]
        if abs(nearest.timestamp - t) <= tolerance:
            samples.append(
                LabeledSample(timestamp=t, features=features, label=evaluate_sla(nearest, thresholds))
            )
        else:
            dropped += 1
    return JoinResult(samples=tuple(samples), dropped=dropped)
