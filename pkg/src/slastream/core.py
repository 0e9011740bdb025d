"""Shared domain types for the SLA stream toolkit.

Everything here is an immutable value object: per-second device feature
vectors, client-side service samples, binary SLA labels, classifier
predictions, and confusion-matrix accounting with the derived report
metrics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

# Canonical order of the 21 device statistics collected once per second.
# Trace files, numpy matrices and learner internals all use this layout.
FEATURE_NAMES: tuple[str, ...] = (
    "cpu_idle",
    "cpu_user",
    "cpu_system",
    "cpu_iowait",
    "mem_used",
    "mem_committed",
    "swap_used",
    "swap_cached",
    "io_read_tps",
    "io_write_tps",
    "io_bytes_read",
    "io_bytes_written",
    "block_reads",
    "block_writes",
    "proc_new",
    "context_switches",
    "net_rx_packets",
    "net_tx_packets",
    "net_rx_kb",
    "net_tx_kb",
    "iface_util",
)

NUM_FEATURES = len(FEATURE_NAMES)

# Utilization-style fields are percentages; everything else is a
# non-negative count, rate or size.
PERCENT_FEATURES = frozenset(
    {"cpu_idle", "cpu_user", "cpu_system", "cpu_iowait", "iface_util"}
)

# A prediction is "violated" when its score reaches this threshold.
DECISION_THRESHOLD = 0.5


class SlaLabel(Enum):
    """Binary SLA state of one second of service; VIOLATED is the positive class."""

    VIOLATED = "violated"
    CONFORMING = "conforming"


def label_to_int(label: SlaLabel) -> int:
    """VIOLATED maps to 1, CONFORMING to 0."""
    return 1 if label is SlaLabel.VIOLATED else 0


def label_from_int(value: int) -> SlaLabel:
    return SlaLabel.VIOLATED if value else SlaLabel.CONFORMING


@dataclass(frozen=True)
class FeatureVector:
    """One second of server device statistics.

    Attributes mirror ``FEATURE_NAMES``: four CPU utilization shares (percent),
    four memory/swap sizes (KB), four disk I/O rates, two block-device rates,
    process creations and context switches per second, four network rates and
    the interface utilization (percent).
    """

    cpu_idle: float
    cpu_user: float
    cpu_system: float
    cpu_iowait: float
    mem_used: float
    mem_committed: float
    swap_used: float
    swap_cached: float
    io_read_tps: float
    io_write_tps: float
    io_bytes_read: float
    io_bytes_written: float
    block_reads: float
    block_writes: float
    proc_new: float
    context_switches: float
    net_rx_packets: float
    net_tx_packets: float
    net_rx_kb: float
    net_tx_kb: float
    iface_util: float

    def __post_init__(self) -> None:
        for name in FEATURE_NAMES:
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value!r}")
            if value < 0.0:
                raise ValueError(f"{name} must be >= 0, got {value!r}")
            if name in PERCENT_FEATURES and value > 100.0:
                raise ValueError(f"{name} is a percentage, got {value!r}")

    def as_array(self) -> np.ndarray:
        """The 21 values as a float64 vector in canonical order."""
        return np.array([getattr(self, name) for name in FEATURE_NAMES], dtype=np.float64)

    @classmethod
    def from_array(cls, values) -> "FeatureVector":
        values = tuple(float(v) for v in values)
        if len(values) != NUM_FEATURES:
            raise ValueError(f"expected {NUM_FEATURES} features, got {len(values)}")
        return cls(*values)


@dataclass(frozen=True)
class ServiceSample:
    """Client-side service metrics for one second: frame rate and audio buffer rate."""

    timestamp: float
    fps: float
    abs: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.timestamp):
            raise ValueError("timestamp must be finite")
        for name in ("fps", "abs"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0.0:
                raise ValueError(f"{name} must be finite and >= 0, got {value!r}")


@dataclass(frozen=True)
class LabeledSample:
    """A device feature vector paired with the SLA label observed for it."""

    timestamp: float
    features: FeatureVector
    label: SlaLabel


@dataclass(frozen=True)
class Prediction:
    """Classifier output: a hard label plus the score it was derived from."""

    label: SlaLabel
    score: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.score) and 0.0 <= self.score <= 1.0):
            raise ValueError(f"score must be in [0, 1], got {self.score!r}")

    @classmethod
    def from_score(cls, score: float, threshold: float = DECISION_THRESHOLD) -> "Prediction":
        """Label is VIOLATED exactly when ``score >= threshold``."""
        score = float(score)
        label = SlaLabel.VIOLATED if score >= threshold else SlaLabel.CONFORMING
        return cls(label=label, score=score)


@dataclass(frozen=True)
class ConfusionMatrix:
    """Binary confusion counts with VIOLATED as the positive class."""

    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    def __post_init__(self) -> None:
        for name in ("tp", "fp", "tn", "fn"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 0:
                raise ValueError(f"{name} must be a non-negative integer, got {value!r}")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


FAR_AS_PRINTED = "as_printed"
FAR_FPR = "fpr"
FAR_VARIANTS = (FAR_AS_PRINTED, FAR_FPR)


@dataclass(frozen=True)
class MetricsReport:
    """Classification accuracy, balanced accuracy, both class rates and FAR.

    Ratios whose denominator is zero are reported as None (excluded classes
    are surfaced, never silently folded into 0).  ``far_variant`` records
    which convention ``far`` was computed under: "as_printed" is the
    miss-rate form fn/(fn+tp); "fpr" is the conventional false-positive rate
    fp/(fp+tn).  Both conventions are in circulation, so reports always say
    which one they carry.
    """

    ca: float
    ba: float | None
    tpr: float | None
    tnr: float | None
    far: float | None
    far_variant: str

    def __post_init__(self) -> None:
        if self.far_variant not in FAR_VARIANTS:
            raise ValueError(f"far_variant must be one of {FAR_VARIANTS}")


def _ratio(numerator: int, denominator: int) -> float | None:
    if denominator == 0:
        return None
    return numerator / denominator


def compute_metrics(cm: ConfusionMatrix, far_variant: str = FAR_AS_PRINTED) -> MetricsReport:
    """Derive the report metrics from a confusion matrix.

    CA = (tp+tn)/total, TPR = tp/(tp+fn), TNR = tn/(tn+fp) and
    BA = (TPR+TNR)/2.  An all-zero matrix is an empty evaluation and is
    rejected.
    """
    if far_variant not in FAR_VARIANTS:
        raise ValueError(f"far_variant must be one of {FAR_VARIANTS}")
    total = cm.total
    if total == 0:
        raise ValueError("empty evaluation")
    tpr = _ratio(cm.tp, cm.tp + cm.fn)
    tnr = _ratio(cm.tn, cm.tn + cm.fp)
    ba = (tpr + tnr) / 2.0 if tpr is not None and tnr is not None else None
    if far_variant == FAR_AS_PRINTED:
        far = _ratio(cm.fn, cm.fn + cm.tp)
    else:
        far = _ratio(cm.fp, cm.fp + cm.tn)
    return MetricsReport(
        ca=(cm.tp + cm.tn) / total,
        ba=ba,
        tpr=tpr,
        tnr=tnr,
        far=far,
        far_variant=far_variant,
    )
