"""Online logistic regression trained by chunked gradient ascent.

The model keeps running per-feature mean/variance estimates and
standardizes inputs before the dot product, because the raw device
statistics span several orders of magnitude.  Each chunk of samples is
fitted with a fixed number of full gradient-ascent passes on the
log-likelihood.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import expit

from ..core import NUM_FEATURES, FeatureVector, LabeledSample, Prediction, label_to_int
from .base import OnlineClassifier


class DivergenceError(RuntimeError):
    """Training produced non-finite gradients or weights."""


@dataclass(frozen=True)
class SgdLogisticConfig:
    learning_rate: float = 0.01
    iterations_per_chunk: int = 100
    standardize: bool = True

    def __post_init__(self) -> None:
        if self.learning_rate <= 0.0:
            raise ValueError("learning_rate must be positive")
        if self.iterations_per_chunk < 1:
            raise ValueError("iterations_per_chunk must be >= 1")


class OnlineLogistic(OnlineClassifier):
    """Logistic regression over the 21 device statistics, updated per chunk."""

    def __init__(self, config: SgdLogisticConfig | None = None) -> None:
        self.config = config or SgdLogisticConfig()
        self.reset()

    def reset(self) -> None:
        self._w = np.zeros(NUM_FEATURES, dtype=np.float64)
        self._b = 0.0
        self._count = 0
        self._mean = np.zeros(NUM_FEATURES, dtype=np.float64)
        self._m2 = np.zeros(NUM_FEATURES, dtype=np.float64)

    # -- standardization ----------------------------------------------------

    def _std(self) -> np.ndarray:
        if self._count < 2:
            return np.ones(NUM_FEATURES, dtype=np.float64)
        std = np.sqrt(self._m2 / self._count)
        std[std < 1e-12] = 1.0
        return std

    def _standardize(self, x: np.ndarray) -> np.ndarray:
        if not self.config.standardize:
            return x
        return (x - self._mean) / self._std()

    def _absorb(self, batch: np.ndarray) -> None:
        # Merge the batch into the running moments (parallel Welford update).
        n_b = len(batch)
        if n_b == 0:
            return
        mean_b = batch.mean(axis=0)
        m2_b = ((batch - mean_b) ** 2).sum(axis=0)
        total = self._count + n_b
        delta = mean_b - self._mean
        self._m2 += m2_b + delta * delta * (self._count * n_b / total)
        self._mean += delta * (n_b / total)
        self._count = total

    # -- contract ------------------------------------------------------------

    def predict(self, features: FeatureVector) -> Prediction:
        x = self._standardize(features.as_array())
        return Prediction.from_score(float(expit(x @ self._w + self._b)))

    def learn(self, sample: LabeledSample) -> None:
        self.learn_chunk((sample,))

    def learn_chunk(self, chunk: Sequence[LabeledSample]) -> None:
        if not chunk:
            return
        x_raw = np.array([s.features.as_array() for s in chunk], dtype=np.float64)
        y = np.array([label_to_int(s.label) for s in chunk], dtype=np.float64)
        if self.config.standardize:
            self._absorb(x_raw)
            x = (x_raw - self._mean) / self._std()
        else:
            x = x_raw

        w_before = self._w.copy()
        b_before = self._b
        lr = self.config.learning_rate
        n = len(chunk)
        # Overflow to inf is the divergence signal the isfinite checks catch.
        with np.errstate(over="ignore"):
            for _ in range(self.config.iterations_per_chunk):
                p = expit(x @ self._w + self._b)
                residual = y - p
                grad_w = x.T @ residual / n
                grad_b = float(residual.mean())
                if not (np.all(np.isfinite(grad_w)) and math.isfinite(grad_b)):
                    self._w = w_before
                    self._b = b_before
                    raise DivergenceError("divergence")
                self._w = self._w + lr * grad_w
                self._b = self._b + lr * grad_b
                if not (np.all(np.isfinite(self._w)) and math.isfinite(self._b)):
                    self._w = w_before
                    self._b = b_before
                    raise DivergenceError("divergence")
