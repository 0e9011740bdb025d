"""Model snapshots: byte round trips, file round trips, format rejection."""

from __future__ import annotations

import pickle

import numpy as np
import pytest

from slastream.core import FEATURE_NAMES, NUM_FEATURES, FeatureVector, LabeledSample, SlaLabel
from slastream.learners import (
    OFFLINE_METHODS,
    ONLINE_METHODS,
    make_online_classifier,
    train_offline,
)
from slastream.learners.base import (
    SNAPSHOT_FORMAT,
    SNAPSHOT_VERSION,
    load_model,
    model_from_bytes,
    model_to_bytes,
    save_model,
)

INFORMATIVE = FEATURE_NAMES.index("io_read_tps")


def make_sample(value: float, label: int, t: float = 0.0) -> LabeledSample:
    vals = [10.0] * NUM_FEATURES
    vals[INFORMATIVE] = value
    return LabeledSample(
        timestamp=t,
        features=FeatureVector.from_array(vals),
        label=SlaLabel.VIOLATED if label else SlaLabel.CONFORMING,
    )


def training_stream(n: int, seed: int) -> list[LabeledSample]:
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        y = int(rng.random() < 0.5)
        v = max((8.0 if y else 2.0) + 0.6 * rng.standard_normal(), 0.0)
        out.append(make_sample(v, y, t=float(i)))
    return out


PROBES = [0.5, 2.0, 4.9, 5.1, 8.0, 9.5]


def scores(model) -> list[float]:
    return [model.predict(make_sample(v, 0).features).score for v in PROBES]


@pytest.mark.parametrize("method", ONLINE_METHODS)
def test_online_round_trip_preserves_predictions(method):
    params = {"block_size": 100} if method == "oaue" else None
    model = make_online_classifier(method, params)
    for s in training_stream(400, 1):
        model.learn(s)
    before = scores(model)
    restored = model_from_bytes(model_to_bytes(model))
    assert scores(restored) == before
    # the restored model keeps learning without error
    restored.learn(make_sample(3.0, 0, t=400.0))


@pytest.mark.parametrize("method", OFFLINE_METHODS)
def test_offline_round_trip_preserves_predictions(method, tmp_path):
    params = {"n_trees": 10} if method == "random_forest" else {}
    model = train_offline(method, training_stream(300, 2), seed=4, **params)
    before = scores(model)
    path = save_model(model, tmp_path / "models" / f"{method}.bin")
    assert path.is_file()
    assert scores(load_model(path)) == before


def test_snapshot_is_versioned():
    blob = model_to_bytes(make_online_classifier("sgd_logistic"))
    envelope = pickle.loads(blob)
    assert envelope["format"] == SNAPSHOT_FORMAT
    assert envelope["version"] == SNAPSHOT_VERSION == 1


def test_foreign_payloads_are_rejected():
    with pytest.raises(ValueError, match="not a model snapshot"):
        model_from_bytes(pickle.dumps({"weights": [1, 2, 3]}))
    with pytest.raises(ValueError, match="not a model snapshot"):
        model_from_bytes(pickle.dumps([1, 2, 3]))
    newer = pickle.dumps({"format": SNAPSHOT_FORMAT, "version": 999, "model": None})
    with pytest.raises(ValueError, match="version"):
        model_from_bytes(newer)
