"""Learner contracts and model snapshot serialization."""

from __future__ import annotations

import pickle
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Iterable, Sequence

from ..core import FeatureVector, LabeledSample, Prediction

SNAPSHOT_FORMAT = "slastream-model"
SNAPSHOT_VERSION = 1


class OnlineClassifier(ABC):
    """Incremental binary classifier.

    ``predict`` never mutates state; ``learn`` consumes exactly one sample
    in amortized constant time with respect to the samples seen so far.
    ``learn_chunk`` exists for learners that train on evaluation chunks
    natively; the default simply feeds the chunk sample by sample.
    """

    @abstractmethod
    def predict(self, features: FeatureVector) -> Prediction:
        ...

    @abstractmethod
    def learn(self, sample: LabeledSample) -> None:
        ...

    @abstractmethod
    def reset(self) -> None:
        ...

    def learn_chunk(self, chunk: Sequence[LabeledSample]) -> None:
        for sample in chunk:
            self.learn(sample)


class OfflineModel(ABC):
    """A trained, frozen model: prediction only."""

    @abstractmethod
    def predict(self, features: FeatureVector) -> Prediction:
        ...


def model_to_bytes(model) -> bytes:
    """Serialize a model into a self-describing, versioned snapshot."""
    envelope = {"format": SNAPSHOT_FORMAT, "version": SNAPSHOT_VERSION, "model": model}
    return pickle.dumps(envelope, protocol=pickle.HIGHEST_PROTOCOL)


def model_from_bytes(data: bytes):
    """Restore a model from a snapshot, rejecting foreign or newer formats."""
    envelope = pickle.loads(data)
    if not isinstance(envelope, dict) or envelope.get("format") != SNAPSHOT_FORMAT:
        raise ValueError("not a model snapshot")
    if envelope.get("version") != SNAPSHOT_VERSION:
        raise ValueError(f"unsupported snapshot version {envelope.get('version')!r}")
    return envelope["model"]


def save_model(model, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(model_to_bytes(model))
    return path


def load_model(path):
    return model_from_bytes(Path(path).read_bytes())
