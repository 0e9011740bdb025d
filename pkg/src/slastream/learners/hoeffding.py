"""Incremental decision tree induction with Hoeffding-bounded splits.

Leaves keep per-class Gaussian summaries of every attribute (count, mean,
M2, observed range).  Every ``grace_period`` samples a leaf ranks candidate
binary splits by information gain, estimating the class counts on each
side of a threshold from the Gaussian summaries, and splits when the gain
gap beats the Hoeffding bound or the bound has shrunk below the tie
threshold.  Leaves predict with the class majority, naive Bayes over the
same summaries, or adaptively whichever of the two has been more accurate
at that leaf so far.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from ..core import (
    FEATURE_NAMES,
    NUM_FEATURES,
    FeatureVector,
    LabeledSample,
    Prediction,
    label_to_int,
)
from .base import OnlineClassifier

LEAF_PREDICTORS = ("majority", "naive_bayes", "adaptive_nb")

_VARIANCE_FLOOR = 1e-12


def hoeffding_bound(range_width: float, confidence: float, n: int) -> float:
    """Maximum deviation of an n-sample mean of a variable with the given
    range, exceeded with probability at most ``confidence``:
    sqrt(range^2 * ln(1/confidence) / (2 n)).
    """
    if range_width <= 0.0:
        raise ValueError("range_width must be positive")
    if not 0.0 < confidence < 1.0:
        raise ValueError("confidence must be in (0, 1)")
    if n < 1:
        raise ValueError("n must be >= 1")
    return math.sqrt(range_width * range_width * math.log(1.0 / confidence) / (2.0 * n))


@dataclass(frozen=True)
class HoeffdingTreeConfig:
    grace_period: int = 100
    split_confidence: float = 0.01
    tie_threshold: float = 0.05
    leaf_predictor: str = "adaptive_nb"
    numeric_bins: int = 10

    def __post_init__(self) -> None:
        if self.grace_period < 1:
            raise ValueError("grace_period must be >= 1")
        if not 0.0 < self.split_confidence < 1.0:
            raise ValueError("split_confidence must be in (0, 1)")
        if self.tie_threshold < 0.0:
            raise ValueError("tie_threshold must be >= 0")
        if self.leaf_predictor not in LEAF_PREDICTORS:
            raise ValueError(f"leaf_predictor must be one of {LEAF_PREDICTORS}")
        if self.numeric_bins < 1:
            raise ValueError("numeric_bins must be >= 1")


class _LeafStats:
    """Sufficient statistics of one leaf: class counts, per-class Gaussian
    attribute summaries, the observed attribute ranges, and the counters
    driving split scheduling and the adaptive leaf predictor."""

    __slots__ = ("counts", "mean", "m2", "amin", "amax", "since_eval", "mc_correct", "nb_correct", "prior")

    def __init__(self, prior: np.ndarray | None = None) -> None:
        self.counts = np.zeros(2, dtype=np.int64)
        self.mean = np.zeros((2, NUM_FEATURES), dtype=np.float64)
        self.m2 = np.zeros((2, NUM_FEATURES), dtype=np.float64)
        self.amin = np.full(NUM_FEATURES, np.inf)
        self.amax = np.full(NUM_FEATURES, -np.inf)
        self.since_eval = 0
        self.mc_correct = 0
        self.nb_correct = 0
        self.prior = prior

    def update(self, x: np.ndarray, y: int) -> None:
        self.counts[y] += 1
        c = self.counts[y]
        row = self.mean[y]
        delta = x - row
        row += delta / c
        self.m2[y] += delta * (x - row)
        np.minimum(self.amin, x, out=self.amin)
        np.maximum(self.amax, x, out=self.amax)
        self.since_eval += 1

    def class_probs(self) -> np.ndarray:
        total = self.counts.sum()
        if total > 0:
            return self.counts / total
        # Empty leaf: fall back to the parent's class distribution.
        if self.prior is not None and self.prior.sum() > 0:
            return self.prior / self.prior.sum()
        return np.array([0.5, 0.5])

    def nb_probs(self, x: np.ndarray) -> np.ndarray:
        counts = self.counts.astype(np.float64)
        total = counts.sum()
        if total == 0.0:
            return self.class_probs()
        present = counts > 0.0
        var = self.m2 / np.maximum(counts, 1.0)[:, None]
        # Use an attribute only when every observed class has a usable
        # Gaussian for it; otherwise the likelihoods are not comparable.
        eligible = np.ones(NUM_FEATURES, dtype=bool)
        for c in range(2):
            if present[c]:
                eligible &= (counts[c] >= 2.0) & (var[c] > _VARIANCE_FLOOR)
        log_post = np.where(present, np.log(np.maximum(counts, 1e-300) / total), -np.inf)
        if eligible.any():
            xe = x[eligible]
            for c in range(2):
                if not present[c]:
                    continue
                v = var[c, eligible]
                d = xe - self.mean[c, eligible]
                log_post[c] += -0.5 * float(np.sum(np.log(2.0 * math.pi * v) + d * d / v))
        shift = log_post.max()
        p = np.exp(log_post - shift)
        return p / p.sum()


class _LeafNode:
    __slots__ = ("stats", "parent")

    def __init__(self, stats: _LeafStats, parent: "_SplitNode | None" = None) -> None:
        self.stats = stats
        self.parent = parent


class _SplitNode:
    __slots__ = ("feature", "threshold", "children", "parent")

    def __init__(self, feature: int, threshold: float, parent: "_SplitNode | None" = None) -> None:
        self.feature = feature
        self.threshold = threshold
        self.children: list = [None, None]
        self.parent = parent

    def route(self, x: np.ndarray) -> int:
        return 0 if x[self.feature] <= self.threshold else 1


def _binary_entropy(p) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    out = np.zeros_like(p)
    mask = (p > 0.0) & (p < 1.0)
    pm = p[mask]
    qm = 1.0 - pm
    out[mask] = -(pm * np.log2(pm) + qm * np.log2(qm))
    return out


def _candidate_splits(stats: _LeafStats, config: HoeffdingTreeConfig) -> tuple[np.ndarray, np.ndarray]:
    """Best information gain and threshold per attribute.

    Candidate thresholds are ``numeric_bins`` equally spaced points strictly
    inside the observed attribute range; the class counts left and right of
    a threshold are estimated from the per-class Gaussian summaries.
    Attributes without spread get a gain of -inf.
    """
    counts = stats.counts.astype(np.float64)
    n = counts.sum()
    span = stats.amax - stats.amin
    bins = config.numeric_bins
    frac = np.arange(1, bins + 1, dtype=np.float64) / (bins + 1.0)
    thresholds = stats.amin[:, None] + span[:, None] * frac[None, :]  # (attrs, bins)

    sd = np.sqrt(stats.m2 / np.maximum(counts, 1.0)[:, None])
    sd = np.maximum(sd, math.sqrt(_VARIANCE_FLOOR))
    z = (thresholds[None, :, :] - stats.mean[:, :, None]) / sd[:, :, None]
    left = counts[:, None, None] * ndtr(z)  # estimated per-class counts left of t
    n_left = left.sum(axis=0)
    n_right = n - n_left
    left_pos = left[1]
    right_pos = counts[1] - left_pos

    h0 = float(_binary_entropy(counts[1] / n))
    safe_left = np.maximum(n_left, 1e-300)
    safe_right = np.maximum(n_right, 1e-300)
    gains = (
        h0
        - (n_left / n) * _binary_entropy(left_pos / safe_left)
        - (n_right / n) * _binary_entropy(right_pos / safe_right)
    )
    # A split that routes (essentially) everything one way is no split.
    gains[(n_left < 1e-6) | (n_right < 1e-6)] = -np.inf
    gains[span <= 0.0, :] = -np.inf

    best_bin = np.argmax(gains, axis=1)
    attr_idx = np.arange(gains.shape[0])
    return gains[attr_idx, best_bin], thresholds[attr_idx, best_bin]


class HoeffdingTree(OnlineClassifier):
    """Streaming decision tree over the 21 device statistics."""

    def __init__(self, config: HoeffdingTreeConfig | None = None) -> None:
        self.config = config or HoeffdingTreeConfig()
        self.reset()

    def reset(self) -> None:
        self._root: _LeafNode | _SplitNode = _LeafNode(_LeafStats())
        self._n_splits = 0

    # -- introspection -------------------------------------------------------

    @property
    def n_splits(self) -> int:
        return self._n_splits

    @property
    def n_leaves(self) -> int:
        return self._n_splits + 1

    def root_split(self) -> tuple[str, float] | None:
        """Feature name and threshold of the root test, if the root has split."""
        if isinstance(self._root, _SplitNode):
            return FEATURE_NAMES[self._root.feature], self._root.threshold
        return None

    # -- internals -----------------------------------------------------------

    def _route(self, x: np.ndarray) -> _LeafNode:
        node = self._root
        while isinstance(node, _SplitNode):
            node = node.children[node.route(x)]
        return node

    def _leaf_probs(self, leaf: _LeafNode, x: np.ndarray) -> np.ndarray:
        mode = self.config.leaf_predictor
        stats = leaf.stats
        if mode == "majority":
            return stats.class_probs()
        if mode == "naive_bayes":
            return stats.nb_probs(x)
        if stats.nb_correct > stats.mc_correct:
            return stats.nb_probs(x)
        return stats.class_probs()

    def _predict_proba(self, x: np.ndarray) -> float:
        leaf = self._route(x)
        return float(self._leaf_probs(leaf, x)[1])

    def _learn(self, x: np.ndarray, y: int) -> None:
        leaf = self._route(x)
        stats = leaf.stats
        if self.config.leaf_predictor == "adaptive_nb":
            # Score both leaf predictors on the incoming sample before it
            # is absorbed, so the comparison is honest test-then-train.
            mc_label = 1 if stats.class_probs()[1] >= 0.5 else 0
            nb_label = 1 if stats.nb_probs(x)[1] >= 0.5 else 0
            if mc_label == y:
                stats.mc_correct += 1
            if nb_label == y:
                stats.nb_correct += 1
        stats.update(x, y)
        if stats.since_eval >= self.config.grace_period and stats.counts.min() > 0:
            self._try_split(leaf)

    def _try_split(self, leaf: _LeafNode) -> bool:
        stats = leaf.stats
        stats.since_eval = 0
        gains, thresholds = _candidate_splits(stats, self.config)
        order = np.argsort(-gains, kind="stable")
        best = int(order[0])
        best_gain = gains[best]
        if not np.isfinite(best_gain) or best_gain <= 0.0:
            return False
        # The runner-up merit includes "do not split", whose gain is zero.
        second_gain = max(float(gains[int(order[1])]) if len(order) > 1 else 0.0, 0.0)
        n = int(stats.counts.sum())
        eps = hoeffding_bound(1.0, self.config.split_confidence, n)
        if best_gain - second_gain <= eps and eps >= self.config.tie_threshold:
            return False
        self._split_leaf(leaf, best, float(thresholds[best]))
        return True

    def _split_leaf(self, leaf: _LeafNode, feature: int, threshold: float) -> None:
        node = _SplitNode(feature, threshold, parent=leaf.parent)
        prior = leaf.stats.counts.astype(np.float64)
        node.children[0] = _LeafNode(_LeafStats(prior=prior.copy()), parent=node)
        node.children[1] = _LeafNode(_LeafStats(prior=prior.copy()), parent=node)
        if leaf.parent is None:
            self._root = node
        else:
            side = leaf.parent.children.index(leaf)
            leaf.parent.children[side] = node
        self._n_splits += 1

    # -- contract ------------------------------------------------------------

    def predict(self, features: FeatureVector) -> Prediction:
        return Prediction.from_score(self._predict_proba(features.as_array()))

    def learn(self, sample: LabeledSample) -> None:
        self._learn(sample.features.as_array(), label_to_int(sample.label))
