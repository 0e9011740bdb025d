"""Evaluation protocols: prequential stream evaluation, offline holdout,
and cross-trace transfer.

Prequential evaluation is strictly test-then-train at chunk granularity:
within each chunk every sample is predicted before any sample of the chunk
is learned from.  An initial bootstrap prefix is learned from but never
scored.  Accuracy is tracked cumulatively and over sliding windows so
behaviour around concept changes stays visible.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import (
    DECISION_THRESHOLD,
    ConfusionMatrix,
    LabeledSample,
    MetricsReport,
    SlaLabel,
    compute_metrics,
)
from .learners.base import OfflineModel, OnlineClassifier
from .learners.offline import train_offline

DEFAULT_SLIDING_WINDOWS = (5000, 1000)


@dataclass(frozen=True)
class PrequentialConfig:
    chunk_size: int = 10
    bootstrap_size: int = 500
    sliding_windows: tuple[int, ...] = DEFAULT_SLIDING_WINDOWS

    def __post_init__(self) -> None:
        if self.chunk_size < 1:
            raise ValueError("chunk_size must be >= 1")
        if self.bootstrap_size < 0:
            raise ValueError("bootstrap_size must be >= 0")
        if any(w < 1 for w in self.sliding_windows):
            raise ValueError("sliding windows must be >= 1")


def sliding_accuracy(bits: np.ndarray, window: int) -> np.ndarray:
    """Mean of the trailing ``window`` correctness bits at every position
    (shorter prefixes average what exists so far)."""
    if window < 1:
        raise ValueError("window must be >= 1")
    bits = np.asarray(bits, dtype=np.float64)
    csum = np.concatenate(([0.0], np.cumsum(bits)))
    n = len(bits)
    idx = np.arange(1, n + 1)
    lo = np.maximum(idx - window, 0)
    return (csum[idx] - csum[lo]) / (idx - lo)


@dataclass(eq=False)
class AccuracySeries:
    """Per-scored-sample correctness and the accuracy curves over it."""

    bits: np.ndarray
    cumulative: np.ndarray
    windows: dict[int, np.ndarray] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.bits)

    @classmethod
    def from_bits(cls, bits: np.ndarray, windows: tuple[int, ...] = ()) -> "AccuracySeries":
        bits = np.asarray(bits, dtype=np.float64)
        cumulative = np.cumsum(bits) / np.arange(1, len(bits) + 1) if len(bits) else np.empty(0)
        return cls(bits, cumulative, {w: sliding_accuracy(bits, w) for w in windows})

    def to_csv(self, path, stride: int = 1) -> None:
        if stride < 1:
            raise ValueError("stride must be >= 1")
        window_sizes = sorted(self.windows)
        header = ["index", "correct", "cumulative"] + [f"window_{w}" for w in window_sizes]
        lines = [",".join(header)]
        for i in range(0, len(self.bits), stride):
            row = [str(i), str(int(self.bits[i])), repr(float(self.cumulative[i]))]
            row += [repr(float(self.windows[w][i])) for w in window_sizes]
            lines.append(",".join(row))
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")


@dataclass(eq=False)
class EvalResult:
    confusion: ConfusionMatrix
    metrics: MetricsReport
    series: AccuracySeries | None = None


def _tally(confusion_counts: list[int], predicted: SlaLabel, actual: SlaLabel) -> bool:
    violated = actual is SlaLabel.VIOLATED
    correct = predicted is actual
    if violated:
        confusion_counts[0 if correct else 3] += 1  # tp / fn
    else:
        confusion_counts[2 if correct else 1] += 1  # tn / fp
    return correct


def prequential_evaluate(
    classifier: OnlineClassifier,
    stream: list[LabeledSample],
    config: PrequentialConfig | None = None,
) -> EvalResult:
    """Run test-then-train over the stream and report final metrics plus
    the accuracy series over scored samples.

    Raises ValueError("insufficient bootstrap") when the stream does not
    extend past the bootstrap prefix.
    """
    config = config or PrequentialConfig()
    stream = list(stream)
    if len(stream) <= config.bootstrap_size:
        raise ValueError("insufficient bootstrap")
    for sample in stream[: config.bootstrap_size]:
        classifier.learn(sample)
    counts = [0, 0, 0, 0]  # tp, fp, tn, fn
    bits: list[int] = []
    scored = stream[config.bootstrap_size :]
    for start in range(0, len(scored), config.chunk_size):
        chunk = scored[start : start + config.chunk_size]
        predictions = [classifier.predict(s.features) for s in chunk]
        for pred, sample in zip(predictions, chunk):
            bits.append(int(_tally(counts, pred.label, sample.label)))
        classifier.learn_chunk(chunk)
    confusion = ConfusionMatrix(tp=counts[0], fp=counts[1], tn=counts[2], fn=counts[3])
    series = AccuracySeries.from_bits(np.array(bits), config.sliding_windows)
    return EvalResult(confusion, compute_metrics(confusion), series)


def score_stream(
    model: OfflineModel,
    samples: list[LabeledSample],
    series_windows: tuple[int, ...] | None = None,
) -> EvalResult:
    """Score a fixed model over labeled samples without any training."""
    samples = list(samples)
    predict_scores = getattr(model, "predict_scores", None)
    if predict_scores is not None and samples:
        X = np.array([s.features.as_array() for s in samples])
        predicted_violation = np.asarray(predict_scores(X)) >= DECISION_THRESHOLD
    else:
        predicted_violation = np.array(
            [model.predict(s.features).label is SlaLabel.VIOLATED for s in samples], dtype=bool
        )
    actual_violation = np.array([s.label is SlaLabel.VIOLATED for s in samples], dtype=bool)
    confusion = ConfusionMatrix(
        tp=int(np.sum(predicted_violation & actual_violation)),
        fp=int(np.sum(predicted_violation & ~actual_violation)),
        tn=int(np.sum(~predicted_violation & ~actual_violation)),
        fn=int(np.sum(~predicted_violation & actual_violation)),
    )
    series = None
    if series_windows is not None:
        bits = (predicted_violation == actual_violation).astype(np.float64)
        series = AccuracySeries.from_bits(bits, series_windows)
    return EvalResult(confusion, compute_metrics(confusion), series)


def holdout_evaluate(
    method: str,
    samples: list[LabeledSample],
    split_fraction: float = 0.7,
    seed: int = 0,
    method_params: dict | None = None,
) -> EvalResult:
    """Shuffle, split, train an offline model, and score the held-out part."""
    if not 0.0 < split_fraction < 1.0:
        raise ValueError("split_fraction must be in (0, 1)")
    samples = list(samples)
    if len(samples) < 2:
        raise ValueError("need at least two samples to split")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(samples))
    n_train = min(max(int(round(len(samples) * split_fraction)), 1), len(samples) - 1)
    train = [samples[i] for i in order[:n_train]]
    test = [samples[i] for i in order[n_train:]]
    model = train_offline(method, train, seed=seed, **(method_params or {}))
    return score_stream(model, test)


def cross_trace_evaluate(
    method: str,
    train_samples: list[LabeledSample],
    test_samples: list[LabeledSample],
    seed: int = 0,
    method_params: dict | None = None,
    series_windows: tuple[int, ...] | None = None,
) -> EvalResult:
    """Train on one full trace and score another, to measure transfer."""
    model = train_offline(method, list(train_samples), seed=seed, **(method_params or {}))
    return score_stream(model, test_samples, series_windows=series_windows)
