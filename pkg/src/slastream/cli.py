"""Command line interface.

Three subcommands:

* ``generate`` synthesizes one load trace and writes it as CSV plus a
  metadata sidecar.
* ``run`` executes an experiment matrix described by a JSON config:
  materializes traces, labels them, runs every configured (method,
  protocol, trace) combination on a worker pool, and emits a metrics
  table (CSV and aligned text) plus per-run accuracy-series CSVs.
* ``suite`` runs the built-in default matrix: three traces, three offline
  methods under holdout, three online methods under prequential
  evaluation, cross-trace transfer for the random forest, and
  concatenated-trace drift runs for the block ensemble.

All outputs are fully determined by the config and the global seed.
"""

from __future__ import annotations

import argparse
import json
import os
import re
import sys
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .core import compute_metrics, FAR_FPR
from .evaluation import (
    PrequentialConfig,
    cross_trace_evaluate,
    holdout_evaluate,
    prequential_evaluate,
)
from .labeling import SloThresholds
from .learners import ONLINE_METHODS, make_online_classifier
from .learners.offline import OFFLINE_METHODS
from .tracegen import (
    PATTERN_KINDS,
    LoadPattern,
    Trace,
    load_profile,
    read_trace,
    synthesize_trace,
    write_trace,
)

PROTOCOLS = ("holdout", "prequential", "cross_trace")

QUICK_DURATION = 1800  # seconds; --quick shrinks every generated trace to this

_NAME_RE = re.compile(r"^[A-Za-z0-9][A-Za-z0-9_-]*$")


class ConfigError(ValueError):
    """Invalid experiment configuration; reported before any work starts."""


def parse_duration(value) -> int:
    """Duration in seconds from an int or a string like '900', '30m', '4h'."""
    if isinstance(value, bool):
        raise ConfigError(f"cannot parse duration {value!r}")
    if isinstance(value, int):
        return value
    if isinstance(value, float) and value.is_integer():
        return int(value)
    m = re.fullmatch(r"(\d+)\s*([smh]?)", str(value).strip().lower())
    if not m:
        raise ConfigError(f"cannot parse duration {value!r}")
    return int(m.group(1)) * {"": 1, "s": 1, "m": 60, "h": 3600}[m.group(2)]


def _derive_seed(*parts) -> int:
    entropy = [zlib.crc32(str(p).encode("utf-8")) for p in parts]
    return int(np.random.SeedSequence(entropy).generate_state(1)[0])


# -- experiment description ---------------------------------------------------


@dataclass(frozen=True)
class TraceSpec:
    """One named trace: either a file to read or a pattern to synthesize."""

    name: str
    file: str | None = None
    pattern: str | None = None
    profile: str | None = None
    duration: int | None = None
    seed: int | None = None
    pattern_params: tuple[tuple[str, float], ...] = ()


@dataclass
class RunSpec:
    run_id: str
    method: str
    protocol: str
    trace_names: tuple[str, ...]
    seed: int
    method_params: dict = field(default_factory=dict)
    split_fraction: float = 0.7

    @property
    def trace_label(self) -> str:
        if self.protocol == "cross_trace":
            return f"{self.trace_names[0]}->{self.trace_names[1]}"
        return "+".join(self.trace_names)


@dataclass
class Experiment:
    seed: int
    slo: SloThresholds
    prequential: PrequentialConfig
    trace_specs: dict[str, TraceSpec]
    runs: list[RunSpec]


_TRACE_KEYS = {"file", "pattern", "profile", "duration", "seed", "pattern_params"}
_RUN_KEYS = {"method", "protocol", "trace", "train_trace", "test_trace", "params", "split_fraction"}


def _parse_trace_spec(name: str, raw: dict, global_seed: int, quick: bool) -> TraceSpec:
    if not _NAME_RE.match(name):
        raise ConfigError(f"invalid trace name {name!r}")
    unknown = set(raw) - _TRACE_KEYS
    if unknown:
        raise ConfigError(f"trace {name!r}: unknown keys {sorted(unknown)}")
    if "file" in raw:
        if set(raw) != {"file"}:
            raise ConfigError(f"trace {name!r}: 'file' excludes generator keys")
        return TraceSpec(name=name, file=str(raw["file"]))
    pattern = raw.get("pattern")
    if pattern not in PATTERN_KINDS:
        raise ConfigError(f"trace {name!r}: pattern must be one of {PATTERN_KINDS}")
    if "profile" not in raw:
        raise ConfigError(f"trace {name!r}: profile is required")
    if "duration" not in raw:
        raise ConfigError(f"trace {name!r}: duration is required")
    duration = parse_duration(raw["duration"])
    if quick:
        duration = min(duration, QUICK_DURATION)
    seed = int(raw["seed"]) if "seed" in raw else _derive_seed(global_seed, "trace", name)
    params = raw.get("pattern_params", {})
    if not isinstance(params, dict):
        raise ConfigError(f"trace {name!r}: pattern_params must be an object")
    return TraceSpec(
        name=name,
        pattern=pattern,
        profile=str(raw["profile"]),
        duration=duration,
        seed=seed,
        pattern_params=tuple(sorted(params.items())),
    )


def _run_trace_names(raw: dict, index: int, protocol: str) -> tuple[str, ...]:
    if protocol == "cross_trace":
        if "train_trace" not in raw or "test_trace" not in raw:
            raise ConfigError(f"run {index}: cross_trace needs train_trace and test_trace")
        return (str(raw["train_trace"]), str(raw["test_trace"]))
    trace = raw.get("trace")
    if isinstance(trace, str):
        return (trace,)
    if isinstance(trace, list) and trace and all(isinstance(t, str) for t in trace):
        if protocol == "holdout" and len(trace) != 1:
            raise ConfigError(f"run {index}: holdout takes exactly one trace")
        return tuple(trace)
    raise ConfigError(f"run {index}: trace must be a name or a list of names")


def parse_config(data: dict, quick: bool = False, seed_override: int | None = None) -> Experiment:
    if not isinstance(data, dict):
        raise ConfigError("config root must be an object")
    seed = int(seed_override if seed_override is not None else data.get("seed", 0))
    try:
        slo = SloThresholds(**data.get("slo", {}))
        preq_raw = dict(data.get("prequential", {}))
        if "sliding_windows" in preq_raw:
            preq_raw["sliding_windows"] = tuple(int(w) for w in preq_raw["sliding_windows"])
        preq = PrequentialConfig(**preq_raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc

    traces_raw = data.get("traces", {})
    if not isinstance(traces_raw, dict):
        raise ConfigError("traces must be an object of name -> spec")
    trace_specs = {
        name: _parse_trace_spec(name, raw, seed, quick) for name, raw in traces_raw.items()
    }

    runs_raw = data.get("runs", [])
    if not runs_raw:
        raise ConfigError("no runs configured")
    runs: list[RunSpec] = []
    used_ids: set[str] = set()
    for i, raw in enumerate(runs_raw):
        if not isinstance(raw, dict):
            raise ConfigError(f"run {i}: must be an object")
        unknown = set(raw) - _RUN_KEYS
        if unknown:
            raise ConfigError(f"run {i}: unknown keys {sorted(unknown)}")
        protocol = raw.get("protocol")
        if protocol not in PROTOCOLS:
            raise ConfigError(f"run {i}: protocol must be one of {PROTOCOLS}")
        method = raw.get("method")
        allowed = ONLINE_METHODS if protocol == "prequential" else OFFLINE_METHODS
        if method not in allowed:
            raise ConfigError(f"run {i}: method for {protocol} must be one of {allowed}")
        names = _run_trace_names(raw, i, protocol)
        for n in names:
            if n not in trace_specs:
                raise ConfigError(f"run {i}: unknown trace {n!r}")
        label = f"{names[0]}__to__{names[1]}" if protocol == "cross_trace" else "+".join(names)
        run_id = f"{protocol}__{method}__{label}"
        k = 2
        while run_id in used_ids:
            run_id = f"{protocol}__{method}__{label}__{k}"
            k += 1
        used_ids.add(run_id)
        params = raw.get("params", {})
        if not isinstance(params, dict):
            raise ConfigError(f"run {i}: params must be an object")
        runs.append(
            RunSpec(
                run_id=run_id,
                method=method,
                protocol=protocol,
                trace_names=names,
                seed=_derive_seed(seed, "run", run_id),
                method_params=params,
                split_fraction=float(raw.get("split_fraction", 0.7)),
            )
        )
    return Experiment(seed=seed, slo=slo, prequential=preq, trace_specs=trace_specs, runs=runs)


def default_config(seed: int = 1) -> dict:
    """The built-in experiment matrix: 3 traces x (3 offline holdout +
    3 online prequential) + 6 cross-trace forest runs + 3 concatenated
    drift runs for the block ensemble."""
    trace_names = ("periodic_a", "periodic_b", "flashcrowd_a")
    runs: list[dict] = []
    for t in trace_names:
        for m in OFFLINE_METHODS:
            runs.append({"method": m, "protocol": "holdout", "trace": t})
    for t in trace_names:
        for m in ONLINE_METHODS:
            runs.append({"method": m, "protocol": "prequential", "trace": t})
    for a in trace_names:
        for b in trace_names:
            if a != b:
                runs.append(
                    {"method": "random_forest", "protocol": "cross_trace", "train_trace": a, "test_trace": b}
                )
    for pair in (("periodic_a", "periodic_b"), ("periodic_b", "periodic_a"), ("flashcrowd_a", "periodic_b")):
        runs.append({"method": "oaue", "protocol": "prequential", "trace": list(pair)})
    return {
        "seed": seed,
        "slo": {"fps_threshold": 20.0, "abs_threshold": 20.0, "use_abs": False},
        "prequential": {"chunk_size": 10, "bootstrap_size": 500, "sliding_windows": [5000, 1000]},
        "traces": {
            "periodic_a": {"pattern": "periodic", "profile": "default_a", "duration": "5h"},
            "periodic_b": {"pattern": "periodic", "profile": "default_b", "duration": "4h"},
            "flashcrowd_a": {"pattern": "flashcrowd", "profile": "default_a", "duration": "5h"},
        },
        "runs": runs,
    }


# -- run execution -------------------------------------------------------------

# Per-process caches so a worker builds and labels each trace at most once.
_TRACES: dict[TraceSpec, Trace] = {}
_LABELED: dict[tuple[TraceSpec, SloThresholds], tuple] = {}


def _build_trace(spec: TraceSpec) -> Trace:
    if spec.file is not None:
        return read_trace(spec.file)
    kwargs = dict(spec.pattern_params)
    if spec.pattern == "periodic":
        pattern = LoadPattern.periodic(duration=spec.duration, seed=spec.seed, **kwargs)
    else:
        pattern = LoadPattern.flashcrowd(duration=spec.duration, seed=spec.seed, **kwargs)
    return synthesize_trace(pattern, load_profile(spec.profile), name=spec.name)


def _cached_trace(spec: TraceSpec) -> Trace:
    trace = _TRACES.get(spec)
    if trace is None:
        trace = _build_trace(spec)
        _TRACES[spec] = trace
    return trace


def _cached_labeled(spec: TraceSpec, slo: SloThresholds) -> tuple:
    key = (spec, slo)
    samples = _LABELED.get(key)
    if samples is None:
        samples = tuple(_cached_trace(spec).labeled(slo))
        _LABELED[key] = samples
    return samples


def _metrics_dict(confusion) -> dict:
    printed = compute_metrics(confusion)
    fpr = compute_metrics(confusion, far_variant=FAR_FPR).far
    return {
        "ca": printed.ca,
        "ba": printed.ba,
        "tpr": printed.tpr,
        "tnr": printed.tnr,
        "far_as_printed": printed.far,
        "far_fpr": fpr,
    }


def _execute_run(payload) -> dict:
    run, trace_specs, slo, preq = payload
    out = {
        "run_id": run.run_id,
        "method": run.method,
        "protocol": run.protocol,
        "trace": run.trace_label,
        "traces": list(run.trace_names),
        "seed": run.seed,
        "ok": True,
    }
    try:
        if run.protocol == "prequential":
            parts = [_cached_labeled(trace_specs[n], slo) for n in run.trace_names]
            samples = [s for part in parts for s in part]
            rows = np.cumsum([len(p) for p in parts])[:-1]
            classifier = make_online_classifier(run.method, run.method_params)
            result = prequential_evaluate(classifier, samples, preq)
            out["concat_boundaries_rows"] = [int(b) for b in rows]
            out["concat_boundaries_scored"] = [max(int(b) - preq.bootstrap_size, 0) for b in rows]
        elif run.protocol == "holdout":
            samples = list(_cached_labeled(trace_specs[run.trace_names[0]], slo))
            result = holdout_evaluate(
                run.method, samples, run.split_fraction, run.seed, run.method_params
            )
        else:
            train = list(_cached_labeled(trace_specs[run.trace_names[0]], slo))
            test = list(_cached_labeled(trace_specs[run.trace_names[1]], slo))
            result = cross_trace_evaluate(
                run.method, train, test, run.seed, run.method_params,
                series_windows=preq.sliding_windows,
            )
    except Exception as exc:  # reported per-run; other runs continue
        out["ok"] = False
        out["error"] = f"{type(exc).__name__}: {exc}"
        return out
    cm = result.confusion
    out["confusion"] = {"tp": cm.tp, "fp": cm.fp, "tn": cm.tn, "fn": cm.fn}
    out["metrics"] = _metrics_dict(cm)
    out["n_scored"] = cm.total
    out["series"] = result.series
    return out


# -- output files --------------------------------------------------------------

_METRIC_COLUMNS = ("ca", "ba", "tpr", "tnr", "far_as_printed", "far_fpr")


def _fmt_metric(value, digits: int = 6) -> str:
    return "undefined" if value is None else f"{value:.{digits}f}"


def _write_metrics_csv(path: Path, results: list[dict]) -> None:
    lines = ["run_id,method,protocol,trace," + ",".join(_METRIC_COLUMNS) + ",tp,fp,tn,fn"]
    for r in results:
        if not r["ok"]:
            continue
        m = r["metrics"]
        cm = r["confusion"]
        lines.append(
            ",".join(
                [r["run_id"], r["method"], r["protocol"], r["trace"]]
                + [_fmt_metric(m[c]) for c in _METRIC_COLUMNS]
                + [str(cm[k]) for k in ("tp", "fp", "tn", "fn")]
            )
        )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _write_metrics_txt(path: Path, results: list[dict]) -> None:
    blocks: list[str] = []
    header = ("method", "trace", "ca", "ba", "tpr", "tnr", "far", "fpr")
    for protocol in PROTOCOLS:
        rows = [r for r in results if r["ok"] and r["protocol"] == protocol]
        if not rows:
            continue
        table = [header]
        for r in rows:
            m = r["metrics"]
            table.append(
                (
                    r["method"],
                    r["trace"],
                    _fmt_metric(m["ca"], 4),
                    _fmt_metric(m["ba"], 4),
                    _fmt_metric(m["tpr"], 4),
                    _fmt_metric(m["tnr"], 4),
                    _fmt_metric(m["far_as_printed"], 4),
                    _fmt_metric(m["far_fpr"], 4),
                )
            )
        widths = [max(len(row[i]) for row in table) for i in range(len(header))]
        blocks.append(f"== {protocol} ==")
        for row in table:
            blocks.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip())
        blocks.append("")
    path.write_text("\n".join(blocks), encoding="utf-8")


def _trace_meta(spec: TraceSpec, n_rows: int) -> dict:
    if spec.file is not None:
        return {"file": spec.file, "rows": n_rows}
    return {
        "pattern": spec.pattern,
        "profile": spec.profile,
        "duration": spec.duration,
        "seed": spec.seed,
        "pattern_params": dict(spec.pattern_params),
        "rows": n_rows,
    }


def _write_run_metadata(path: Path, experiment: Experiment, results: list[dict],
                        trace_rows: dict[str, int], stride: int) -> None:
    runs_meta = []
    for r in results:
        entry = {k: r[k] for k in ("run_id", "method", "protocol", "traces", "seed")}
        entry["status"] = "ok" if r["ok"] else "failed"
        if r["ok"]:
            entry["confusion"] = r["confusion"]
            entry["metrics"] = r["metrics"]
            entry["n_scored"] = r["n_scored"]
            for key in ("concat_boundaries_rows", "concat_boundaries_scored"):
                if key in r:
                    entry[key] = r[key]
        else:
            entry["error"] = r["error"]
        runs_meta.append(entry)
    meta = {
        "version": __version__,
        "seed": experiment.seed,
        "stride": stride,
        "slo": {
            "fps_threshold": experiment.slo.fps_threshold,
            "abs_threshold": experiment.slo.abs_threshold,
            "use_abs": experiment.slo.use_abs,
        },
        "prequential": {
            "chunk_size": experiment.prequential.chunk_size,
            "bootstrap_size": experiment.prequential.bootstrap_size,
            "sliding_windows": list(experiment.prequential.sliding_windows),
        },
        "traces": {
            name: _trace_meta(spec, trace_rows[name])
            for name, spec in sorted(experiment.trace_specs.items())
        },
        "runs": runs_meta,
    }
    path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _execute_experiment(experiment: Experiment, out_dir: str, workers: int,
                        stride: int, config_data: dict) -> int:
    out = Path(out_dir)
    (out / "series").mkdir(parents=True, exist_ok=True)
    (out / "traces").mkdir(exist_ok=True)
    (out / "config.json").write_text(
        json.dumps(config_data, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )

    trace_rows: dict[str, int] = {}
    for name in sorted(experiment.trace_specs):
        trace = _cached_trace(experiment.trace_specs[name])
        trace_rows[name] = len(trace)
        write_trace(trace, out / "traces" / f"{name}.csv")

    payloads = [(run, experiment.trace_specs, experiment.slo, experiment.prequential)
                for run in experiment.runs]
    if workers <= 1:
        results = [_execute_run(p) for p in payloads]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_execute_run, payloads))

    _write_metrics_csv(out / "metrics.csv", results)
    _write_metrics_txt(out / "metrics.txt", results)
    for r in results:
        series = r.get("series")
        if r["ok"] and series is not None:
            series.to_csv(out / "series" / f"{r['run_id']}.csv", stride=stride)
    _write_run_metadata(out / "run-metadata.json", experiment, results, trace_rows, stride)

    failures = [r for r in results if not r["ok"]]
    for r in failures:
        print(f"run failed: {r['run_id']}: {r['error']}", file=sys.stderr)
    print(f"{len(results) - len(failures)}/{len(results)} runs succeeded; outputs in {out}")
    return 1 if failures else 0


# -- subcommands ---------------------------------------------------------------


def cmd_generate(args) -> int:
    duration = parse_duration(args.duration)
    if args.pattern == "periodic":
        pattern = LoadPattern.periodic(duration=duration, seed=args.seed)
    else:
        pattern = LoadPattern.flashcrowd(duration=duration, seed=args.seed)
    profile = load_profile(args.profile)
    name = args.name or f"{args.pattern}_{Path(args.profile).stem}_{args.seed}"
    if not _NAME_RE.match(name):
        raise ConfigError(f"invalid trace name {name!r}")
    trace = synthesize_trace(pattern, profile, name=name)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{name}.csv"
    write_trace(trace, path)
    print(path)
    return 0


def _load_config_file(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc


def _run_from_data(data: dict, args) -> int:
    if args.seed is not None:
        data = dict(data)
        data["seed"] = args.seed
    experiment = parse_config(data, quick=args.quick, seed_override=args.seed)
    if args.stride < 1:
        raise ConfigError("stride must be >= 1")
    workers = args.workers if args.workers is not None else (os.cpu_count() or 1)
    if workers < 1:
        raise ConfigError("workers must be >= 1")
    return _execute_experiment(experiment, args.out, workers, args.stride, data)


def cmd_run(args) -> int:
    return _run_from_data(_load_config_file(args.config), args)


def cmd_suite(args) -> int:
    return _run_from_data(default_config(), args)


def _add_exec_flags(parser: argparse.ArgumentParser, default_out: str) -> None:
    parser.add_argument("--out", default=default_out, help="output directory")
    parser.add_argument("--seed", type=int, default=None, help="override the config's global seed")
    parser.add_argument("--workers", type=int, default=None,
                        help="parallel runs (default: available cores)")
    parser.add_argument("--quick", action="store_true",
                        help="shrink generated traces to 30 minutes for a smoke pass")
    parser.add_argument("--stride", type=int, default=1,
                        help="write every Nth point of the accuracy series")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="slastream",
        description="Synthetic service-quality traces and SLA-violation predictors.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="synthesize one load trace")
    gen.add_argument("--pattern", choices=PATTERN_KINDS, required=True)
    gen.add_argument("--profile", default="default_a",
                     help="built-in profile name or path to a profile JSON")
    gen.add_argument("--duration", default="1h", help="trace length, e.g. 900, 30m, 4h")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--name", default=None, help="basename for the output files")
    gen.add_argument("--out", default=".", help="output directory")
    gen.set_defaults(func=cmd_generate)

    run = sub.add_parser("run", help="execute an experiment matrix from a JSON config")
    run.add_argument("--config", required=True)
    _add_exec_flags(run, default_out="results")
    run.set_defaults(func=cmd_run)

    suite = sub.add_parser("suite", help="run the built-in default experiment matrix")
    _add_exec_flags(suite, default_out="suite-results")
    suite.set_defaults(func=cmd_suite)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
