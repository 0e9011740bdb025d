"""Online and offline classifiers for the violation-prediction task."""

from __future__ import annotations

from .base import (
    OfflineModel,
    OnlineClassifier,
    load_model,
    model_from_bytes,
    model_to_bytes,
    save_model,
)
from .hoeffding import HoeffdingTree, HoeffdingTreeConfig, hoeffding_bound
from .oaue import OaueConfig, OaueEnsemble
from .offline import OFFLINE_METHODS, train_offline
from .sgd import DivergenceError, OnlineLogistic, SgdLogisticConfig

ONLINE_METHODS = ("sgd_logistic", "hoeffding_tree", "oaue")


def make_online_classifier(method: str, params: dict | None = None) -> OnlineClassifier:
    """Instantiate an online classifier by name.

    ``params`` feeds the method's config dataclass; for "oaue" a nested
    "base" dict configures the member trees.
    """
    params = dict(params or {})
    if method == "sgd_logistic":
        return OnlineLogistic(SgdLogisticConfig(**params))
    if method == "hoeffding_tree":
        return HoeffdingTree(HoeffdingTreeConfig(**params))
    if method == "oaue":
        base = params.pop("base", None)
        if base is not None:
            params["base_config"] = HoeffdingTreeConfig(**base)
        return OaueEnsemble(OaueConfig(**params))
    raise ValueError(f"unknown method {method!r}; expected one of {ONLINE_METHODS}")


__all__ = [
    "OFFLINE_METHODS",
    "ONLINE_METHODS",
    "DivergenceError",
    "HoeffdingTree",
    "HoeffdingTreeConfig",
    "OaueConfig",
    "OaueEnsemble",
    "OfflineModel",
    "OnlineClassifier",
    "OnlineLogistic",
    "SgdLogisticConfig",
    "hoeffding_bound",
    "load_model",
    "make_online_classifier",
    "model_from_bytes",
    "model_to_bytes",
    "save_model",
    "train_offline",
]
