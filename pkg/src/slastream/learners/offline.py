"""Batch-trained classifiers: logistic regression, a CART tree, and a
random forest with a hard majority vote.

The tree and forest wrap scikit-learn estimators (Gini impurity, no
pruning, a node must hold at least five samples to be split further); the
forest's score is the fraction of trees voting for a violation, not the
averaged probability.  Logistic regression is fit here directly with
full-batch gradient ascent on the log-likelihood so its behaviour matches
the online variant's update rule.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import expit
from sklearn.ensemble import RandomForestClassifier
from sklearn.tree import DecisionTreeClassifier

from ..core import (
    DECISION_THRESHOLD,
    NUM_FEATURES,
    FeatureVector,
    LabeledSample,
    Prediction,
    label_to_int,
)
from .base import OfflineModel

OFFLINE_METHODS = ("logistic", "cart", "random_forest")

DEFAULT_MIN_SPLIT = 5
DEFAULT_N_TREES = 100
DEFAULT_FEATURES_PER_SPLIT = math.ceil(math.sqrt(NUM_FEATURES))


def _to_arrays(samples) -> tuple[np.ndarray, np.ndarray]:
    samples = list(samples)
    if not samples:
        raise ValueError("no training samples")
    X = np.array([s.features.as_array() for s in samples])
    y = np.array([label_to_int(s.label) for s in samples], dtype=np.int64)
    return X, y


def train_offline(method: str, samples: list[LabeledSample], seed: int = 0, **params) -> OfflineModel:
    """Train one of ``OFFLINE_METHODS`` on labeled samples.

    Raises ValueError("degenerate training set") when only one class is
    present; none of the models can calibrate a decision from that.
    """
    if method not in OFFLINE_METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {OFFLINE_METHODS}")
    X, y = _to_arrays(samples)
    if np.unique(y).size < 2:
        raise ValueError("degenerate training set")
    if method == "logistic":
        return _train_logistic(X, y, **params)
    if method == "cart":
        return _train_cart(X, y, seed, **params)
    return _train_forest(X, y, seed, **params)


# -- logistic regression -----------------------------------------------------


class BatchLogisticModel(OfflineModel):
    def __init__(self, weights: np.ndarray, bias: float, mean: np.ndarray, std: np.ndarray) -> None:
        self.weights = weights
        self.bias = bias
        self.mean = mean
        self.std = std

    def predict_scores(self, X: np.ndarray) -> np.ndarray:
        Xs = (np.asarray(X, dtype=np.float64) - self.mean) / self.std
        return expit(Xs @ self.weights + self.bias)

    def predict(self, features: FeatureVector) -> Prediction:
        score = self.predict_scores(features.as_array()[None, :])[0]
        return Prediction.from_score(float(score))


def _log_likelihood(z: np.ndarray, y: np.ndarray) -> float:
    # sum of y*z - log(1 + e^z), computed stably
    return float(np.sum(y * z - np.logaddexp(0.0, z)))


def _train_logistic(
    X: np.ndarray,
    y: np.ndarray,
    learning_rate: float = 0.5,
    tol: float = 1e-6,
    max_iter: int = 10000,
) -> BatchLogisticModel:
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std = np.where(std < 1e-12, 1.0, std)
    Xs = (X - mean) / std
    n = len(y)
    w = np.zeros(X.shape[1])
    b = 0.0
    z = Xs @ w + b
    ll = _log_likelihood(z, y)
    lr = learning_rate
    for _ in range(max_iter):
        residual = y - expit(z)
        gw = Xs.T @ residual / n
        gb = float(residual.mean())
        while True:
            w_new = w + lr * gw
            b_new = b + lr * gb
            z_new = Xs @ w_new + b_new
            ll_new = _log_likelihood(z_new, y)
            if ll_new >= ll or lr < 1e-12:
                break
            lr *= 0.5
        w, b, z = w_new, b_new, z_new
        if abs(ll_new - ll) / max(1.0, abs(ll)) < tol:
            ll = ll_new
            break
        ll = ll_new
    return BatchLogisticModel(w, b, mean, std)


# -- CART and random forest --------------------------------------------------


def _leaf_distribution(tree, x32: np.ndarray) -> np.ndarray:
    """Walk one fitted sklearn tree to its leaf and return the class
    distribution there.  Input must be float32, matching what the fitted
    tree compared against during training."""
    left = tree.children_left
    right = tree.children_right
    feature = tree.feature
    threshold = tree.threshold
    node = 0
    while left[node] != -1:
        if x32[feature[node]] <= threshold[node]:
            node = left[node]
        else:
            node = right[node]
    value = tree.value[node][0]
    total = value.sum()
    return value / total if total > 0 else np.full_like(value, 1.0 / len(value))


class CartModel(OfflineModel):
    def __init__(self, clf: DecisionTreeClassifier) -> None:
        self._clf = clf
        self._pos = int(np.flatnonzero(clf.classes_ == 1)[0])

    def predict_scores(self, X: np.ndarray) -> np.ndarray:
        return self._clf.predict_proba(np.asarray(X, dtype=np.float32))[:, self._pos]

    def predict(self, features: FeatureVector) -> Prediction:
        x32 = features.as_array().astype(np.float32)
        probs = _leaf_distribution(self._clf.tree_, x32)
        return Prediction.from_score(float(probs[self._pos]))


def _train_cart(X: np.ndarray, y: np.ndarray, seed: int, min_split: int = DEFAULT_MIN_SPLIT) -> CartModel:
    clf = DecisionTreeClassifier(
        criterion="gini",
        min_samples_split=min_split,
        random_state=seed,
    )
    clf.fit(X, y)
    return CartModel(clf)


class RandomForestModel(OfflineModel):
    """Forest whose score is the fraction of member trees predicting a
    violation; a tree votes for the class holding at least half of its
    leaf distribution."""

    def __init__(self, clf: RandomForestClassifier) -> None:
        self._clf = clf
        self._pos = int(np.flatnonzero(clf.classes_ == 1)[0])

    def predict_scores(self, X: np.ndarray) -> np.ndarray:
        X32 = np.asarray(X, dtype=np.float32)
        votes = np.zeros(len(X32))
        for est in self._clf.estimators_:
            votes += est.predict_proba(X32)[:, self._pos] >= DECISION_THRESHOLD
        return votes / len(self._clf.estimators_)

    def predict(self, features: FeatureVector) -> Prediction:
        x32 = features.as_array().astype(np.float32)
        votes = 0
        for est in self._clf.estimators_:
            probs = _leaf_distribution(est.tree_, x32)
            if probs[self._pos] >= DECISION_THRESHOLD:
                votes += 1
        return Prediction.from_score(votes / len(self._clf.estimators_))


def _train_forest(
    X: np.ndarray,
    y: np.ndarray,
    seed: int,
    n_trees: int = DEFAULT_N_TREES,
    features_per_split: int = DEFAULT_FEATURES_PER_SPLIT,
    bootstrap: bool = True,
    min_split: int = DEFAULT_MIN_SPLIT,
) -> RandomForestModel:
    clf = RandomForestClassifier(
        n_estimators=n_trees,
        criterion="gini",
        min_samples_split=min_split,
        max_features=features_per_split,
        bootstrap=bootstrap,
        random_state=seed,
        n_jobs=1,
    )
    clf.fit(X, y)
    return RandomForestModel(clf)
