"""Synthetic load and trace generation.

The load side reproduces two client arrival processes, a sinusoidal
periodic load and a flash-crowd pattern, feeding an infinite-server
birth-death session model sampled at one second resolution.  A
profile-driven response model then maps the active-session count to the 21
device statistics and to the client service metrics, replacing a physical
video-serving testbed so that labeled experiments stay reproducible at
desk scale.

All generator constants (capacity, response curves, noise levels, service
metric modes) live in profile JSON files shipped with the package or
supplied by the user, never in code, so real traces written in the same
CSV schema can replace synthetic ones without code changes.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.special import expit

from .core import (
    FEATURE_NAMES,
    PERCENT_FEATURES,
    FeatureVector,
    LabeledSample,
    ServiceSample,
)
from .labeling import SloThresholds, join_streams

# Sub-stream tags so the independent random draws of one seed never collide.
_ARRIVALS = 0
_EVENTS = 1
_SYNTH = 2

PATTERN_KINDS = ("periodic", "flashcrowd")
CURVE_SHAPES = ("linear", "saturating", "inverse")


@dataclass(frozen=True)
class LoadPattern:
    """Client arrival process over a fixed horizon.

    Rates are clients per minute.  ``periodic`` oscillates around
    ``base_rate`` with the given amplitude and period; ``flashcrowd`` sits
    at ``base_rate`` and superimposes randomly timed events that ramp up to
    ``peak_rate``, sustain, and decay, overlapping events taking the
    pointwise maximum.  Session holding times are exponential with mean
    ``holding_time_mean`` seconds.
    """

    kind: str
    duration: int
    seed: int
    holding_time_mean: float = 60.0
    base_rate: float = 30.0
    amplitude: float = 20.0
    period: float = 3600.0
    event_rate: float = 10.0
    peak_rate: float = 50.0
    ramp_up: float = 60.0
    sustain: float = 60.0
    ramp_down: float = 240.0

    def __post_init__(self) -> None:
        if self.kind not in PATTERN_KINDS:
            raise ValueError(f"kind must be one of {PATTERN_KINDS}, got {self.kind!r}")
        if not isinstance(self.duration, int) or self.duration < 0:
            raise ValueError("duration must be a non-negative integer (seconds)")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ValueError("seed must be a non-negative integer")
        if self.holding_time_mean <= 0.0 or self.base_rate <= 0.0:
            raise ValueError("holding_time_mean and base_rate must be positive")
        if self.kind == "periodic":
            if self.amplitude < 0.0 or self.amplitude >= self.base_rate:
                raise ValueError("amplitude must satisfy 0 <= amplitude < base_rate")
            if self.period <= 0.0:
                raise ValueError("period must be positive")
        else:
            if self.event_rate <= 0.0:
                raise ValueError("event_rate must be positive")
            if self.peak_rate < self.base_rate:
                raise ValueError("peak_rate must be >= base_rate")
            if min(self.ramp_up, self.sustain, self.ramp_down) <= 0.0:
                raise ValueError("event phase durations must be positive")

    @classmethod
    def periodic(
        cls,
        duration: int,
        seed: int,
        base_rate: float = 30.0,
        amplitude: float = 20.0,
        period: float = 3600.0,
        holding_time_mean: float = 60.0,
    ) -> "LoadPattern":
        return cls(
            kind="periodic",
            duration=duration,
            seed=seed,
            holding_time_mean=holding_time_mean,
            base_rate=base_rate,
            amplitude=amplitude,
            period=period,
        )

    @classmethod
    def flashcrowd(
        cls,
        duration: int,
        seed: int,
        base_rate: float = 5.0,
        event_rate: float = 10.0,
        peak_rate: float = 50.0,
        ramp_up: float = 60.0,
        sustain: float = 60.0,
        ramp_down: float = 240.0,
        holding_time_mean: float = 60.0,
    ) -> "LoadPattern":
        return cls(
            kind="flashcrowd",
            duration=duration,
            seed=seed,
            holding_time_mean=holding_time_mean,
            base_rate=base_rate,
            amplitude=0.0,
            event_rate=event_rate,
            peak_rate=peak_rate,
            ramp_up=ramp_up,
            sustain=sustain,
            ramp_down=ramp_down,
        )

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "LoadPattern":
        return cls(**data)


@lru_cache(maxsize=None)
def flash_event_times(pattern: LoadPattern) -> tuple[float, ...]:
    """Start times of the flash-crowd events, a Poisson process at
    ``event_rate`` per hour over the pattern horizon."""
    if pattern.kind != "flashcrowd":
        return ()
    rng = np.random.default_rng(np.random.SeedSequence([pattern.seed, _EVENTS]))
    mean_gap = 3600.0 / pattern.event_rate
    times: list[float] = []
    t = rng.exponential(mean_gap)
    while t < pattern.duration:
        times.append(float(t))
        t += rng.exponential(mean_gap)
    return tuple(times)


def arrival_rate(pattern: LoadPattern, t) -> float | np.ndarray:
    """Arrival rate (clients/minute) at time ``t`` seconds; scalar or array."""
    t_arr = np.asarray(t, dtype=np.float64)
    if pattern.kind == "periodic":
        rate = pattern.base_rate + pattern.amplitude * np.sin(
            2.0 * math.pi * t_arr / pattern.period
        )
    else:
        rate = np.full_like(t_arr, pattern.base_rate)
        up_end = pattern.ramp_up
        sustain_end = up_end + pattern.sustain
        down_end = sustain_end + pattern.ramp_down
        span = pattern.peak_rate - pattern.base_rate
        for start in flash_event_times(pattern):
            tau = t_arr - start
            contrib = np.select(
                [
                    (tau >= 0.0) & (tau < up_end),
                    (tau >= up_end) & (tau < sustain_end),
                    (tau >= sustain_end) & (tau < down_end),
                ],
                [
                    pattern.base_rate + span * tau / up_end,
                    np.full_like(t_arr, pattern.peak_rate),
                    pattern.peak_rate - span * (tau - sustain_end) / pattern.ramp_down,
                ],
                default=pattern.base_rate,
            )
            rate = np.maximum(rate, contrib)
    if np.ndim(t) == 0:
        return float(rate)
    return rate


def simulate_sessions(pattern: LoadPattern) -> np.ndarray:
    """Active session count at each whole second of the horizon.

    Arrivals within second ``t`` are Poisson with mean ``rate(t)/60`` and
    land uniformly inside the second; each session holds for an independent
    exponential time.  This is an infinite-server birth-death process, so
    under a constant rate the stationary mean session count is
    (arrival rate per second) * (mean holding time).
    """
    d = pattern.duration
    if d == 0:
        return np.zeros(0, dtype=np.int64)
    rng = np.random.default_rng(np.random.SeedSequence([pattern.seed, _ARRIVALS]))
    seconds = np.arange(d, dtype=np.float64)
    lam = np.asarray(arrival_rate(pattern, seconds)) / 60.0
    counts = rng.poisson(lam)
    n = int(counts.sum())
    starts = np.repeat(seconds, counts) + rng.random(n)
    ends = starts + rng.exponential(pattern.holding_time_mean, n)
    # A session occupies every whole second s with start <= s < end.
    delta = np.zeros(d + 1, dtype=np.int64)
    first = np.clip(np.ceil(starts).astype(np.int64), 0, d)
    last = np.clip(np.ceil(ends).astype(np.int64), 0, d)
    np.add.at(delta, first, 1)
    np.add.at(delta, last, -1)
    return np.cumsum(delta[:d])


@dataclass(frozen=True)
class ResponseCurve:
    """How one device statistic responds to the active session count.

    ``linear`` grows as base + slope*n; ``saturating`` approaches
    base + slope*capacity as utilization grows; ``inverse`` is the mirrored
    saturating shape for idle/free-style metrics that fall under load.
    """

    base: float
    slope: float
    shape: str

    def __post_init__(self) -> None:
        if self.shape not in CURVE_SHAPES:
            raise ValueError(f"shape must be one of {CURVE_SHAPES}, got {self.shape!r}")
        if not (math.isfinite(self.base) and math.isfinite(self.slope)):
            raise ValueError("base and slope must be finite")

    def evaluate(self, sessions: np.ndarray, capacity: float) -> np.ndarray:
        u = sessions / capacity
        if self.shape == "linear":
            return self.base + self.slope * sessions
        saturation = capacity * u / (1.0 + u)
        if self.shape == "saturating":
            return self.base + self.slope * saturation
        return self.base - self.slope * saturation


@dataclass(frozen=True)
class ServiceModes:
    """Two-mode model of a client service metric: a healthy mode and a
    degraded mode, each normal with its own mean and spread."""

    conforming_mean: float
    conforming_sd: float
    violated_mean: float
    violated_sd: float

    def __post_init__(self) -> None:
        if self.conforming_sd <= 0.0 or self.violated_sd <= 0.0:
            raise ValueError("mode standard deviations must be positive")
        if self.conforming_mean <= self.violated_mean:
            raise ValueError("conforming mode must sit above the violated mode")


@dataclass(frozen=True)
class TestbedProfile:
    """Response model of one server deployment.

    ``capacity`` is the session count at which service degradation becomes
    even odds; ``steepness`` controls how sharply the violated-mode
    probability switches around it.  ``curves`` and ``noise`` (lognormal
    coefficient of variation) describe every device statistic; the service
    metrics are drawn from the conforming or violated mode per second.
    """

    __test__ = False  # keep pytest from collecting the Test* class name

    profile_id: str
    capacity: float
    seed: int
    curves: dict[str, ResponseCurve]
    noise: dict[str, float]
    steepness: float = 8.0
    fps_modes: ServiceModes = ServiceModes(25.0, 1.0, 12.0, 3.0)
    abs_modes: ServiceModes = ServiceModes(30.0, 2.0, 10.0, 3.0)

    def __post_init__(self) -> None:
        if self.capacity <= 0.0:
            raise ValueError("capacity must be positive")
        if self.steepness <= 0.0:
            raise ValueError("steepness must be positive")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ValueError("seed must be a non-negative integer")
        expected = set(FEATURE_NAMES)
        if set(self.curves) != expected:
            missing = sorted(expected - set(self.curves))
            extra = sorted(set(self.curves) - expected)
            raise ValueError(f"curves must cover every feature (missing {missing}, extra {extra})")
        if set(self.noise) != expected:
            raise ValueError("noise must cover every feature")
        for name, cv in self.noise.items():
            if not math.isfinite(cv) or cv < 0.0:
                raise ValueError(f"noise[{name}] must be finite and >= 0")

    def violated_probability(self, sessions) -> np.ndarray:
        """Probability that a second with this many active sessions is served
        in the degraded mode."""
        u = np.asarray(sessions, dtype=np.float64) / self.capacity
        return expit(self.steepness * (u - 1.0))

    def to_dict(self) -> dict:
        return {
            "profile_id": self.profile_id,
            "capacity": self.capacity,
            "steepness": self.steepness,
            "seed": self.seed,
            "fps_modes": dataclasses.asdict(self.fps_modes),
            "abs_modes": dataclasses.asdict(self.abs_modes),
            "curves": {
                name: dataclasses.asdict(curve) for name, curve in sorted(self.curves.items())
            },
            "noise": dict(sorted(self.noise.items())),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TestbedProfile":
        return cls(
            profile_id=data["profile_id"],
            capacity=float(data["capacity"]),
            steepness=float(data.get("steepness", 8.0)),
            seed=int(data["seed"]),
            fps_modes=ServiceModes(**data["fps_modes"]) if "fps_modes" in data else ServiceModes(25.0, 1.0, 12.0, 3.0),
            abs_modes=ServiceModes(**data["abs_modes"]) if "abs_modes" in data else ServiceModes(30.0, 2.0, 10.0, 3.0),
            curves={name: ResponseCurve(**curve) for name, curve in data["curves"].items()},
            noise={name: float(cv) for name, cv in data["noise"].items()},
        )

    @classmethod
    def from_file(cls, path) -> "TestbedProfile":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def builtin_profile_names() -> tuple[str, ...]:
    root = resources.files("slastream") / "profiles"
    return tuple(sorted(p.name[: -len(".json")] for p in root.iterdir() if p.name.endswith(".json")))


def load_profile(name_or_path: str) -> TestbedProfile:
    """Load a packaged profile by name (e.g. "default_a") or any profile
    JSON file by path."""
    candidate = resources.files("slastream") / "profiles" / f"{name_or_path}.json"
    if candidate.is_file():
        return TestbedProfile.from_dict(json.loads(candidate.read_text(encoding="utf-8")))
    path = Path(name_or_path)
    if path.is_file():
        return TestbedProfile.from_file(path)
    raise FileNotFoundError(
        f"unknown profile {name_or_path!r}; packaged profiles: {', '.join(builtin_profile_names())}"
    )


@dataclass(frozen=True)
class TraceMeta:
    """Provenance of a trace: how it was generated and where concatenation
    boundaries sit (row indices where a new source trace begins)."""

    name: str
    duration: int
    profile_id: str | None = None
    profile_seed: int | None = None
    pattern: dict | None = None
    boundaries: tuple[int, ...] = ()
    sources: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "duration": self.duration,
            "profile_id": self.profile_id,
            "profile_seed": self.profile_seed,
            "pattern": self.pattern,
            "boundaries": list(self.boundaries),
            "sources": list(self.sources),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TraceMeta":
        return cls(
            name=data["name"],
            duration=int(data["duration"]),
            profile_id=data.get("profile_id"),
            profile_seed=data.get("profile_seed"),
            pattern=data.get("pattern"),
            boundaries=tuple(int(b) for b in data.get("boundaries", ())),
            sources=tuple(data.get("sources", ())),
        )


@dataclass(frozen=True)
class TraceRow:
    """One second of a trace: device features, service metrics, session count."""

    timestamp: float
    features: FeatureVector
    service: ServiceSample
    sessions: int


@dataclass
class Trace:
    """A contiguous 1 Hz recording of device and service metrics."""

    meta: TraceMeta
    rows: list[TraceRow]

    def __len__(self) -> int:
        return len(self.rows)

    def device_stream(self) -> list[tuple[float, FeatureVector]]:
        return [(row.timestamp, row.features) for row in self.rows]

    def service_stream(self) -> list[ServiceSample]:
        return [row.service for row in self.rows]

    def sessions(self) -> np.ndarray:
        return np.array([row.sessions for row in self.rows], dtype=np.int64)

    def feature_matrix(self) -> np.ndarray:
        return np.array([row.features.as_array() for row in self.rows], dtype=np.float64)

    def labeled(self, thresholds: SloThresholds) -> list[LabeledSample]:
        """Label every second through the documented join path."""
        result = join_streams(self.device_stream(), self.service_stream(), thresholds)
        return list(result.samples)


def synthesize_from_sessions(
    sessions: np.ndarray,
    profile: TestbedProfile,
    pattern_seed: int = 0,
    name: str = "custom",
    pattern: dict | None = None,
) -> Trace:
    """Map a session-count series through a profile to a full trace.

    Deterministic for a given (profile seed, pattern seed) pair.  Feature
    values are clamped to their domains before and after noise is applied,
    so every row is a valid feature vector.
    """
    sessions = np.asarray(sessions, dtype=np.int64)
    if sessions.ndim != 1:
        raise ValueError("sessions must be a 1-D array")
    if len(sessions) and sessions.min() < 0:
        raise ValueError("session counts must be >= 0")
    t_count = len(sessions)
    rng = np.random.default_rng(np.random.SeedSequence([profile.seed, pattern_seed, _SYNTH]))

    matrix = np.empty((t_count, len(FEATURE_NAMES)), dtype=np.float64)
    for idx, fname in enumerate(FEATURE_NAMES):
        upper = 100.0 if fname in PERCENT_FEATURES else np.inf
        raw = np.clip(profile.curves[fname].evaluate(sessions, profile.capacity), 0.0, upper)
        cv = profile.noise[fname]
        if cv > 0.0 and t_count:
            sigma = math.sqrt(math.log1p(cv * cv))
            # Lognormal factor with unit mean keeps the curve the expected value.
            raw = raw * np.exp(rng.normal(-0.5 * sigma * sigma, sigma, t_count))
        matrix[:, idx] = np.clip(raw, 0.0, upper)

    p_violated = profile.violated_probability(sessions)
    degraded = rng.random(t_count) < p_violated
    fps_mean = np.where(degraded, profile.fps_modes.violated_mean, profile.fps_modes.conforming_mean)
    fps_sd = np.where(degraded, profile.fps_modes.violated_sd, profile.fps_modes.conforming_sd)
    fps = np.clip(fps_mean + fps_sd * rng.standard_normal(t_count), 0.0, None)
    abs_mean = np.where(degraded, profile.abs_modes.violated_mean, profile.abs_modes.conforming_mean)
    abs_sd = np.where(degraded, profile.abs_modes.violated_sd, profile.abs_modes.conforming_sd)
    abs_rate = np.clip(abs_mean + abs_sd * rng.standard_normal(t_count), 0.0, None)

    rows = [
        TraceRow(
            timestamp=float(t),
            features=FeatureVector.from_array(matrix[t]),
            service=ServiceSample(timestamp=float(t), fps=float(fps[t]), abs=float(abs_rate[t])),
            sessions=int(sessions[t]),
        )
        for t in range(t_count)
    ]
    meta = TraceMeta(
        name=name,
        duration=t_count,
        profile_id=profile.profile_id,
        profile_seed=profile.seed,
        pattern=pattern,
    )
    return Trace(meta=meta, rows=rows)


def synthesize_trace(pattern: LoadPattern, profile: TestbedProfile, name: str | None = None) -> Trace:
    """Simulate the load pattern and synthesize the resulting trace."""
    sessions = simulate_sessions(pattern)
    return synthesize_from_sessions(
        sessions,
        profile,
        pattern_seed=pattern.seed,
        name=name or pattern.kind,
        pattern=pattern.to_dict(),
    )


def concat_traces(traces: Sequence[Trace], name: str | None = None) -> Trace:
    """Concatenate traces into one stream with rebased timestamps.

    Row indices where each new source trace begins are recorded in the
    metadata boundaries, in order.
    """
    if not traces:
        raise ValueError("need at least one trace to concatenate")
    rows: list[TraceRow] = []
    boundaries: list[int] = []
    for trace in traces:
        if rows:
            boundaries.append(len(rows))
        for row in trace.rows:
            t = float(len(rows))
            rows.append(
                TraceRow(
                    timestamp=t,
                    features=row.features,
                    service=ServiceSample(timestamp=t, fps=row.service.fps, abs=row.service.abs),
                    sessions=row.sessions,
                )
            )
    names = [t.meta.name for t in traces]
    profile_ids = sorted({t.meta.profile_id for t in traces if t.meta.profile_id})
    meta = TraceMeta(
        name=name or "+".join(names),
        duration=len(rows),
        profile_id="+".join(profile_ids) if profile_ids else None,
        boundaries=tuple(boundaries),
        sources=tuple(names),
    )
    return Trace(meta=meta, rows=rows)


# ---------------------------------------------------------------------------
# Trace file format: a CSV with a fixed header plus a JSON metadata sidecar.

TRACE_COLUMNS: tuple[str, ...] = ("timestamp", *FEATURE_NAMES, "fps", "abs", "sessions")
TRACE_HEADER = ",".join(TRACE_COLUMNS)


def _meta_path(path: Path) -> Path:
    return path.with_name(path.stem + ".meta.json")


def write_trace(trace: Trace, path) -> Path:
    """Write the trace CSV and its metadata sidecar.

    Floats are written with full round-trip precision, so reading the file
    back reproduces the trace exactly.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [TRACE_HEADER]
    for row in trace.rows:
        values = [repr(row.timestamp)]
        arr = row.features.as_array()
        values.extend(repr(float(v)) for v in arr)
        values.append(repr(row.service.fps))
        values.append(repr(row.service.abs))
        values.append(str(row.sessions))
        lines.append(",".join(values))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    _meta_path(path).write_text(
        json.dumps(trace.meta.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return path


class TraceFormatError(ValueError):
    """A trace file does not match the documented schema."""


def read_trace(path) -> Trace:
    """Read a trace CSV (and its sidecar metadata, when present).

    The header must match the documented schema exactly; malformed rows are
    rejected with their line number.
    """
    path = Path(path)
    rows: list[TraceRow] = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if header != TRACE_HEADER:
            raise TraceFormatError(
                f"{path}: unexpected header; expected columns {TRACE_HEADER!r}"
            )
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != len(TRACE_COLUMNS):
                raise TraceFormatError(
                    f"{path}:{lineno}: expected {len(TRACE_COLUMNS)} fields, got {len(parts)}"
                )
            try:
                timestamp = float(parts[0])
                features = FeatureVector.from_array([float(v) for v in parts[1 : 1 + len(FEATURE_NAMES)]])
                fps = float(parts[-3])
                abs_rate = float(parts[-2])
                sessions = int(parts[-1])
                service = ServiceSample(timestamp=timestamp, fps=fps, abs=abs_rate)
            except ValueError as exc:
                raise TraceFormatError(f"{path}:{lineno}: {exc}") from exc
            if sessions < 0:
                raise TraceFormatError(f"{path}:{lineno}: sessions must be >= 0")
            rows.append(
                TraceRow(timestamp=timestamp, features=features, service=service, sessions=sessions)
            )
    meta_file = _meta_path(path)
    if meta_file.is_file():
        meta = TraceMeta.from_dict(json.loads(meta_file.read_text(encoding="utf-8")))
    else:
        meta = TraceMeta(name=path.stem, duration=len(rows))
    return Trace(meta=meta, rows=rows)
