"""End-to-end run: label -> split -> tune -> fit -> evaluate -> forecast -> plot data."""

from __future__ import annotations

import csv
import datetime as dt
import hashlib
import io
import json
import logging
import platform
import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .core import DEFAULT_MU, DIMENSIONS, DataError, EgoNetwork, ParameterError
from .dynamics import GroupScheme, InteractionMode, _step_state
from .io import emit_plot_data, load_trajectories
from .labeling import DEFAULT_DELTA, SigmaDataset, Split, build_dataset, save_dataset, split_dataset
from .pso import PsoConfig, SearchSpace, default_space, history_csv, tune_regressor
from .regress import (
    FittedModel,
    RegressorSpec,
    fit_dataset,
    mse,
    parse_family,
    predict,
    save_model,
)

log = logging.getLogger(__name__)

METRICS_FORMAT = 1
FORECAST_TOLERANCE = 0.02
FORECAST_COLUMNS = ("ego_id", "dimension", "segment", "current", "forecast")


@dataclass
class RunConfig:
    inputs: list = field(default_factory=list)
    out: str = "out"
    mu: float = DEFAULT_MU
    delta: float = DEFAULT_DELTA
    fractions: tuple = (0.7, 0.2, 0.1)  # train, test, validation
    pso: PsoConfig = field(default_factory=PsoConfig)
    spaces: dict = field(default_factory=dict)
    families: tuple = ("svr", "gp", "elasticnet", "ridge")
    primary_family: str = "svr"
    max_train_samples: int | None = 1000
    seed: int = 0
    mode: str = "ego-only"
    scheme: str = "sequential"
    interpolate: bool = False
    next_segment: str | None = None  # trajectories one segment past the inputs, for scoring forecasts

    def __post_init__(self):
        self.fractions = tuple(float(f) for f in self.fractions)
        self.families = tuple(parse_family(f) for f in self.families)
        self.primary_family = parse_family(self.primary_family)
        if self.primary_family not in self.families:
            self.families = (self.primary_family, *self.families)
        if isinstance(self.pso, dict):
            self.pso = PsoConfig.from_dict(self.pso)
        self.spaces = {parse_family(k): v if isinstance(v, SearchSpace) else SearchSpace.from_dict(v)
                       for k, v in self.spaces.items()}
        InteractionMode.parse(self.mode)
        GroupScheme.parse(self.scheme)
        if not 0 < self.mu <= 0.5:
            raise ParameterError(f"mu must lie in (0, 0.5], got {self.mu!r}")
        if self.delta <= 0:
            raise ParameterError("delta must be > 0")
        missing = [str(p) for p in [*self.inputs, self.next_segment] if p and not Path(p).exists()]
        if missing:
            raise DataError(f"missing input files: {', '.join(missing)}")

    def space(self, family: str) -> SearchSpace:
        return self.spaces.get(family) or default_space(family)

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["pso"] = self.pso.to_dict()
        d["spaces"] = {k: v.to_dict() for k, v in self.spaces.items()}
        d["fractions"] = list(self.fractions)
        d["families"] = list(self.families)
        d["inputs"] = [str(p) for p in self.inputs]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ParameterError(f"unknown config keys {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "RunConfig":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


# --- forecasting ------------------------------------------------------------

@dataclass
class Forecast:
    ego_id: str
    segment: int  # the forecast target segment
    current: np.ndarray  # ego profile at the last observed segment
    forecast: np.ndarray
    sigma: np.ndarray  # predicted threshold per (alter, dimension)
    rounds: int


def forecast_network(model: FittedModel, net: EgoNetwork, mu: float = DEFAULT_MU,
                     mode="ego-only", scheme="sequential", max_rounds: int = 20) -> Forecast:
    """Forecast the ego's next profile from its last observed segment.

    The threshold features include the ego's *next* value, which is what is
    being forecast. It is imputed by fixed-point iteration: start from the
    current value, predict a threshold per (alter, dimension), take one group
    step with those thresholds, and feed the result back until it stops
    changing.
    """
    mode, scheme = InteractionMode.parse(mode), GroupScheme.parse(scheme)
    if net.has_gaps():
        raise DataError(f"{net.ego_id}: trajectories have gaps")
    last = net.segments[-1]
    state = net.state(last)
    ego = state[0]
    n_alters = len(net.alter_ids)
    guess = ego.copy()
    sigma = np.zeros((n_alters, len(DIMENSIONS)))
    rounds = 0
    for rounds in range(1, max_rounds + 1):
        feats = np.stack([
            np.broadcast_to(ego, (n_alters, len(DIMENSIONS))),
            state[1:],
            np.broadcast_to(guess, (n_alters, len(DIMENSIONS))),
            np.full((n_alters, len(DIMENSIONS)), mu),
        ], axis=-1).reshape(-1, 4)
        sigma = predict(model, feats).reshape(n_alters, len(DIMENSIONS))
        new_state, _ = _step_state(state, mu, sigma, mode, scheme)
        new = new_state[0]
        if np.max(np.abs(new - guess)) <= 1e-12:
            guess = new
            break
        guess = new
    return Forecast(net.ego_id, last + 1, ego.copy(), guess, sigma, rounds)


def forecasts_csv(forecasts: Sequence[Forecast], truth: dict | None = None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([*FORECAST_COLUMNS, *(["truth"] if truth is not None else [])])
    for f in forecasts:
        for d, dim in enumerate(DIMENSIONS):
            row = [f.ego_id, dim.value, f.segment, repr(float(f.current[d])), repr(float(f.forecast[d]))]
            if truth is not None:
                row.append(repr(float(truth[f.ego_id][d])))
            w.writerow(row)
    return buf.getvalue()


def next_segment_truth(networks: Sequence[EgoNetwork]) -> dict[str, np.ndarray]:
    """Ego profile at the first segment of each network, keyed by ego id."""
    return {n.ego_id: n.scores[0, 0].copy() for n in networks}


def forecast_accuracy(forecasts: Sequence[Forecast], truth: dict, tolerance=FORECAST_TOLERANCE,
                      egos=None) -> dict:
    errs = []
    for f in forecasts:
        if egos is not None and f.ego_id not in egos:
            continue
        if f.ego_id not in truth:
            raise DataError(f"no next-segment truth for {f.ego_id}")
        errs.extend(np.abs(f.forecast - truth[f.ego_id]).tolist())
    if not errs:
        raise DataError("no forecasts to score")
    errs = np.array(errs)
    return {"pairs": len(errs), "tolerance": tolerance,
            "within_tolerance": float(np.mean(errs <= tolerance)),
            "mean_abs_error": float(errs.mean()), "max_abs_error": float(errs.max())}


# --- stages -----------------------------------------------------------------

def label_stage(networks: Sequence[EgoNetwork], config: RunConfig) -> SigmaDataset:
    if not networks:
        raise DataError("no networks loaded")
    d = build_dataset(networks, config.mu, config.delta)
    if len(d) == 0:
        raise DataError("labeling produced no tuples (every network has fewer than 2 segments)")
    return d


def split_stage(d: SigmaDataset, config: RunConfig) -> Split:
    split = split_dataset(d, config.fractions, config.seed)
    if len(split.validation) == 0:
        # no validation share requested: hold out part of train for tuning
        inner = split_dataset(split.train, (0.875, 0.125, 0.0), config.seed + 1)
        split = Split(inner.train, inner.test, split.test)
    return split


@dataclass
class TuneOutcome:
    family: str
    spec: RegressorSpec
    validation_mse: float
    result: object  # pso.OptimizeResult


def tune_stage(split: Split, family: str, config: RunConfig) -> TuneOutcome:
    pso = replace(config.pso, seed=config.seed)
    spec, val, result = tune_regressor(split.train, split.validation, family, config.space(family),
                                       pso, max_samples=config.max_train_samples)
    return TuneOutcome(family, spec, val, result)


def fit_stage(split: Split, spec: RegressorSpec, config: RunConfig) -> FittedModel:
    model = fit_dataset(split.train, spec, max_samples=config.max_train_samples, seed=config.seed)
    if model.info.get("converged") is False:
        log.warning("%s fit hit the iteration cap (KKT gap %.3g); predictions are usable but "
                    "not at the requested tolerance", spec.family, model.info["kkt_gap"])
    return model


def evaluate_model(model: FittedModel, d: SigmaDataset) -> tuple[float, np.ndarray]:
    d.require_nonempty()
    pred = predict(model, d.X)
    return mse(pred, d.y), pred


# --- orchestration ------------------------------------------------------------

def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def dump_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n", encoding="utf-8")


@dataclass
class PipelineResult:
    out: Path
    metrics: dict
    dataset: SigmaDataset
    split: Split
    tuned: dict
    models: dict
    forecasts: list
    artifacts: dict


def run_pipeline(config: RunConfig, networks: Sequence[EgoNetwork] | None = None,
                 next_segment: Sequence[EgoNetwork] | None = None) -> PipelineResult:
    """Run every stage and write artifacts plus ``manifest.json`` under ``config.out``.

    On failure the manifest marks the run partial and names the failed stage;
    the :class:`StageError` is then re-raised.
    """
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    artifacts: dict[str, Path] = {}
    stages: dict[str, str] = {}
    state: dict = {}

    def run(stage, fn):
        try:
            value = fn()
        except Exception as exc:
            stages[stage] = f"failed: {exc}"
            _write_manifest(out, config, artifacts, stages, partial=True)
            raise StageError(stage, exc) from exc
        stages[stage] = "ok"
        return value

    def load():
        nets = list(networks) if networks is not None else [
            n for p in config.inputs for n in load_trajectories(p, interpolate=config.interpolate)]
        if not nets:
            raise DataError("no networks loaded")
        nxt = next_segment
        if nxt is None and config.next_segment:
            nxt = load_trajectories(config.next_segment)
        return nets, nxt

    nets, nxt = run("load", load)
    dataset = run("label", lambda: label_stage(nets, config))
    artifacts["dataset"] = out / "dataset.csv"
    save_dataset(dataset, artifacts["dataset"])
    split = run("split", lambda: split_stage(dataset, config))

    tuned: dict[str, TuneOutcome] = {}
    models: dict[str, FittedModel] = {}
    family_metrics = {}
    for fam in config.families:
        tuned[fam] = run(f"tune:{fam}", lambda: tune_stage(split, fam, config))
        p = out / f"pso_history_{fam}.csv"
        p.write_text(history_csv(tuned[fam].result), encoding="utf-8")
        artifacts[f"pso_history_{fam}"] = p
        models[fam] = run(f"fit:{fam}", lambda: fit_stage(split, tuned[fam].spec, config))
        p = out / f"model_{fam}.json"
        save_model(models[fam], p)
        artifacts[f"model_{fam}"] = p
        test_mse, _ = run(f"evaluate:{fam}", lambda: evaluate_model(models[fam], split.test))
        family_metrics[fam] = {
            "best_spec": tuned[fam].spec.to_dict(),
            "validation_mse": tuned[fam].validation_mse,
            "test_mse": test_mse,
            "pso_evaluations": tuned[fam].result.evaluations,
        }

    primary = config.primary_family
    best_spec_path = out / "best_spec.json"
    dump_json(tuned[primary].spec.to_dict(), best_spec_path)
    artifacts["best_spec"] = best_spec_path
    artifacts["model"] = out / "model.json"
    save_model(models[primary], artifacts["model"])

    forecasts = run("forecast", lambda: [
        forecast_network(models[primary], n, config.mu, config.mode, config.scheme) for n in nets])
    truth = next_segment_truth(nxt) if nxt else None
    artifacts["forecasts"] = out / "forecasts.csv"
    artifacts["forecasts"].write_text(forecasts_csv(forecasts, truth), encoding="utf-8")

    metrics = {
        "format_version": METRICS_FORMAT,
        "seed": config.seed,
        "mu": config.mu,
        "delta": config.delta,
        "dataset": {
            "tuples": len(dataset),
            "egos": len(dataset.egos()),
            "train_tuples": len(split.train), "validation_tuples": len(split.validation),
            "test_tuples": len(split.test),
            "train_egos": len(split.train.egos()), "validation_egos": len(split.validation.egos()),
            "test_egos": len(split.test.egos()),
        },
        "families": family_metrics,
        "primary_family": primary,
        "test_mse": family_metrics[primary]["test_mse"],
    }
    if truth is not None:
        metrics["forecast"] = run("score-forecast", lambda: {
            "all_egos": forecast_accuracy(forecasts, truth),
            "test_egos": forecast_accuracy(forecasts, truth, egos=set(split.test.egos())),
        })
    artifacts["metrics"] = out / "metrics.json"
    dump_json(metrics, artifacts["metrics"])

    def plots():
        written = {}
        p = out / "plot_hyperparam_variation.csv"
        p.write_text(emit_plot_data("hyperparam-variation", tuned[primary].result), encoding="utf-8")
        written["plot_hyperparam_variation"] = p
        p = out / "plot_model_loss.csv"
        p.write_text(emit_plot_data("model-loss", {f: m["test_mse"] for f, m in family_metrics.items()}),
                     encoding="utf-8")
        written["plot_model_loss"] = p
        if truth is not None:
            actual = [float(v) for f in forecasts for v in truth[f.ego_id]]
            predicted = [float(v) for f in forecasts for v in f.forecast]
        else:
            _, pred = evaluate_model(models[primary], split.test)
            actual, predicted = split.test.y, pred
        p = out / "plot_actual_vs_predicted.csv"
        p.write_text(emit_plot_data("actual-vs-predicted", (actual, predicted)), encoding="utf-8")
        written["plot_actual_vs_predicted"] = p
        return written

    artifacts.update(run("plot-data", plots))
    _write_manifest(out, config, artifacts, stages, partial=False)
    return PipelineResult(out, metrics, dataset, split, tuned, models, forecasts, artifacts)


def _write_manifest(out: Path, config: RunConfig, artifacts: dict, stages: dict, partial: bool):
    manifest = {
        "created": dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds"),
        "versions": {"valuedyn": __version__, "python": platform.python_version(),
                     "numpy": np.__version__},
        "argv": sys.argv,
        "seed": config.seed,
        "config": config.to_dict(),
        "stages": stages,
        "partial": partial,
        "artifacts": {k: {"path": p.name, "sha256": _sha256(p)} for k, p in sorted(artifacts.items())
                      if p.exists()},
    }
    dump_json(manifest, out / "manifest.json")
