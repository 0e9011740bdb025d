"""slastream: synthetic service-quality traces and streaming learners for
predicting SLA violations from device statistics."""

from __future__ import annotations

from .core import (
    DECISION_THRESHOLD,
    FAR_AS_PRINTED,
    FAR_FPR,
    FEATURE_NAMES,
    NUM_FEATURES,
    ConfusionMatrix,
    FeatureVector,
    LabeledSample,
    MetricsReport,
    Prediction,
    ServiceSample,
    SlaLabel,
    compute_metrics,
)
from .evaluation import (
    AccuracySeries,
    EvalResult,
    PrequentialConfig,
    cross_trace_evaluate,
    holdout_evaluate,
    prequential_evaluate,
    score_stream,
    sliding_accuracy,
)
from .labeling import JoinResult, SloThresholds, evaluate_sla, join_streams
from .learners import (
    OFFLINE_METHODS,
    ONLINE_METHODS,
    DivergenceError,
    HoeffdingTree,
    HoeffdingTreeConfig,
    OaueConfig,
    OaueEnsemble,
    OfflineModel,
    OnlineClassifier,
    OnlineLogistic,
    SgdLogisticConfig,
    hoeffding_bound,
    load_model,
    make_online_classifier,
    model_from_bytes,
    model_to_bytes,
    save_model,
    train_offline,
)
from .tracegen import (
    LoadPattern,
    ResponseCurve,
    TestbedProfile,
    Trace,
    TraceMeta,
    TraceRow,
    arrival_rate,
    builtin_profile_names,
    concat_traces,
    load_profile,
    read_trace,
    simulate_sessions,
    synthesize_trace,
    write_trace,
)

__version__ = "0.1.0"
