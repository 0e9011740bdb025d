"""Block-weighted online ensemble of Hoeffding trees.

Every incoming sample trains all current members, then joins the current
block.  When a block completes, each member is weighted by the inverse of
its mean squared probability error over that block (plus the error of a
random guesser under the block's class distribution, so weights stay
bounded), a fresh tree trained on the block joins as a candidate, and the
lowest-weighted of members-plus-candidate is dropped if the ensemble is
full.  Members therefore adapt continuously while the weighting and
replacement react at block granularity.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..core import FeatureVector, LabeledSample, Prediction, label_to_int
from .base import OnlineClassifier
from .hoeffding import HoeffdingTree, HoeffdingTreeConfig

WEIGHT_EPSILON = 1e-9


def oaue_weight(mse_r: float, mse_i: float, epsilon: float = WEIGHT_EPSILON) -> float:
    """Member weight 1 / (mse_r + mse_i + epsilon)."""
    return 1.0 / (mse_r + mse_i + epsilon)


def class_distribution_mse(labels: np.ndarray) -> float:
    """Mean squared error of a predictor that draws labels from the block's
    own class distribution: sum over classes of p(c) * (1 - p(c))^2."""
    labels = np.asarray(labels)
    if labels.size == 0:
        raise ValueError("empty block")
    p1 = float(np.mean(labels))
    p0 = 1.0 - p1
    return p0 * (1.0 - p0) ** 2 + p1 * (1.0 - p1) ** 2


@dataclass(frozen=True)
class OaueConfig:
    max_members: int = 100
    block_size: int = 500
    base_config: HoeffdingTreeConfig = field(default_factory=HoeffdingTreeConfig)

    def __post_init__(self) -> None:
        if self.max_members < 1:
            raise ValueError("max_members must be >= 1")
        if self.block_size < 1:
            raise ValueError("block_size must be >= 1")


class _Member:
    __slots__ = ("tree", "weight")

    def __init__(self, tree: HoeffdingTree, weight: float) -> None:
        self.tree = tree
        self.weight = weight


class OaueEnsemble(OnlineClassifier):
    """Online accuracy-updated ensemble over Hoeffding tree members."""

    def __init__(self, config: OaueConfig | None = None) -> None:
        self.config = config or OaueConfig()
        self.reset()

    def reset(self) -> None:
        self._members: list[_Member] = []
        self._block_x: list[np.ndarray] = []
        self._block_y: list[int] = []

    @property
    def n_members(self) -> int:
        return len(self._members)

    @property
    def member_weights(self) -> tuple[float, ...]:
        return tuple(m.weight for m in self._members)

    def predict(self, features: FeatureVector) -> Prediction:
        if not self._members:
            return Prediction.from_score(0.5)
        x = features.as_array()
        weighted = 0.0
        total = 0.0
        for m in self._members:
            weighted += m.weight * m.tree._predict_proba(x)
            total += m.weight
        return Prediction.from_score(weighted / total)

    def learn(self, sample: LabeledSample) -> None:
        x = sample.features.as_array()
        y = label_to_int(sample.label)
        for m in self._members:
            m.tree._learn(x, y)
        self._block_x.append(x)
        self._block_y.append(y)
        if len(self._block_y) >= self.config.block_size:
            self._complete_block()

    def _complete_block(self) -> None:
        ys = np.asarray(self._block_y, dtype=np.int64)
        mse_r = class_distribution_mse(ys)
        for m in self._members:
            m.weight = oaue_weight(mse_r, self._block_mse(m.tree, ys))
        candidate_tree = HoeffdingTree(self.config.base_config)
        for x, y in zip(self._block_x, self._block_y):
            candidate_tree._learn(x, int(y))
        # The candidate has seen exactly this block, so its block error is
        # taken as zero and only the reference term bounds its weight.
        candidate = _Member(candidate_tree, oaue_weight(mse_r, 0.0))
        if len(self._members) < self.config.max_members:
            self._members.append(candidate)
        else:
            pool = self._members + [candidate]
            weights = np.array([m.weight for m in pool])
            pool.pop(int(np.argmin(weights)))
            self._members = pool
        self._block_x.clear()
        self._block_y.clear()

    def _block_mse(self, tree: HoeffdingTree, ys: np.ndarray) -> float:
        total = 0.0
        for x, y in zip(self._block_x, ys):
            p1 = tree._predict_proba(x)
            f = p1 if y == 1 else 1.0 - p1
            total += (1.0 - f) ** 2
        return total / len(ys)
