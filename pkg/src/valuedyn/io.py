"""Trajectory ingestion, synthetic corpora with known thresholds, and CSV/JSON output."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from .core import (
    DEFAULT_MU,
    DIMENSIONS,
    N_DIMS,
    BcmParams,
    DataError,
    EgoNetwork,
    ParameterError,
    ValueDimension,
)
from .dynamics import GroupScheme, InteractionMode, _step_state

TRAJECTORY_COLUMNS = ("ego_id", "user_id", "segment", "dimension", "score")
TRAJECTORY_TAG = "valuedyn-trajectories/1"
TRUTH_COLUMNS = ("ego_id", "true_mu", "true_sigma")
JSON_FORMAT = 1


class TrajectoryRecord(NamedTuple):
    ego_id: str
    user_id: str
    segment: int
    dimension: ValueDimension
    score: float


class GroundTruth(NamedTuple):
    ego_id: str
    true_mu: float
    true_sigma: float


@dataclass(frozen=True)
class SynthSpec:
    num_networks: int = 275
    alters_per_network: int = 5
    num_segments: int = 20
    true_mu: float = DEFAULT_MU
    true_sigma: float | tuple[float, float] = (0.1, 0.9)
    noise: float = 0.0
    mode: InteractionMode = InteractionMode.EgoOnly
    scheme: GroupScheme = GroupScheme.Sequential
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "mode", InteractionMode.parse(self.mode))
        object.__setattr__(self, "scheme", GroupScheme.parse(self.scheme))
        if isinstance(self.true_sigma, (list, tuple)):
            object.__setattr__(self, "true_sigma", tuple(float(s) for s in self.true_sigma))
        if self.num_networks < 0:
            raise ParameterError("num_networks must be >= 0")
        if not 1 <= self.alters_per_network <= 5:
            raise ParameterError("alters_per_network must lie in 1..5")
        if self.num_segments < 1:
            raise ParameterError("num_segments must be >= 1")
        if self.noise < 0:
            raise ParameterError("noise stdev must be >= 0")
        lo, hi = self.sigma_bounds
        if not 0 <= lo <= hi <= 1:
            raise ParameterError(f"true_sigma range must lie within [0, 1], got {self.true_sigma}")
        BcmParams(self.true_mu, lo)

    @property
    def sigma_bounds(self) -> tuple[float, float]:
        s = self.true_sigma
        return (s[0], s[1]) if isinstance(s, tuple) else (float(s), float(s))

    def to_dict(self) -> dict:
        return {"num_networks": self.num_networks, "alters_per_network": self.alters_per_network,
                "num_segments": self.num_segments, "true_mu": self.true_mu,
                "true_sigma": list(self.true_sigma) if isinstance(self.true_sigma, tuple)
                else self.true_sigma,
                "noise": self.noise, "mode": self.mode.value, "scheme": self.scheme.value,
                "seed": self.seed}


@dataclass
class SynthResult:
    networks: list[EgoNetwork]
    truth: list[GroundTruth]
    next_segment: list[EgoNetwork] = field(default_factory=list)  # noiseless, one segment each


def generate_synthetic(spec: SynthSpec) -> SynthResult:
    """Simulate ego networks whose thresholds are known.

    Initial profiles are uniform on [0, 1]; each later segment is one group
    step of the dynamics with the network's true (mu, sigma). Observations add
    clamped Gaussian noise to the latent state, which itself evolves
    noiselessly. ``next_segment`` holds the latent state one step past the
    last observed segment.
    """
    networks, truth, following = [], [], []
    lo, hi = spec.sigma_bounds
    n_users = spec.alters_per_network + 1
    for k in range(spec.num_networks):
        rng = np.random.default_rng([spec.seed, k])
        sigma = float(rng.uniform(lo, hi)) if hi > lo else lo
        ego_id = f"e{k:03d}"
        alters = tuple(f"{ego_id}.a{j + 1}" for j in range(spec.alters_per_network))
        state = rng.uniform(0.0, 1.0, size=(n_users, N_DIMS))
        latent = [state]
        for _ in range(spec.num_segments):
            state, _ = _step_state(state, spec.true_mu, sigma, spec.mode, spec.scheme)
            latent.append(state)
        observed = np.stack(latent[:-1], axis=1)
        if spec.noise > 0:
            observed = np.clip(observed + rng.normal(0.0, spec.noise, observed.shape), 0.0, 1.0)
        networks.append(EgoNetwork(ego_id, alters, observed, 0))
        following.append(EgoNetwork(ego_id, alters, latent[-1][:, None, :], spec.num_segments))
        truth.append(GroundTruth(ego_id, spec.true_mu, sigma))
    return SynthResult(networks, truth, following)


def interpolate_gaps(net: EgoNetwork) -> EgoNetwork:
    """Fill interior missing segments linearly, per user and dimension."""
    if not net.has_gaps():
        return net
    scores = np.array(net.scores)
    idx = np.arange(net.n_segments)
    for u, user in enumerate(net.user_ids):
        missing = np.isnan(scores[u]).all(axis=1)
        if not missing.any():
            continue
        if missing[0] or missing[-1]:
            raise DataError(f"{net.ego_id}/{user}: gap at trajectory boundary cannot be interpolated")
        for d in range(N_DIMS):
            scores[u, missing, d] = np.interp(idx[missing], idx[~missing], scores[u, ~missing, d])
    return EgoNetwork(net.ego_id, net.alter_ids, scores, net.first_segment)


def _records_to_networks(records: Iterable[TrajectoryRecord], source: str, interpolate: bool):
    by_ego: dict[str, dict[str, dict[int, dict[ValueDimension, float]]]] = {}
    for r in records:
        by_ego.setdefault(r.ego_id, {}).setdefault(r.user_id, {}).setdefault(r.segment, {})[r.dimension] = r.score
    networks = []
    for ego_id, users in by_ego.items():
        if ego_id not in users:
            raise DataError(f"{source}: ego {ego_id} has no trajectory of its own")
        alters = [u for u in users if u != ego_id]
        order = [ego_id, *alters]
        segs = [s for u in order for s in users[u]]
        first, last = min(segs), max(segs)
        scores = np.full((len(order), last - first + 1, N_DIMS), np.nan)
        for ui, user in enumerate(order):
            for seg, dims in users[user].items():
                if len(dims) != N_DIMS:
                    absent = [d.value for d in DIMENSIONS if d not in dims]
                    raise DataError(f"{source}: {ego_id}/{user} segment {seg} lacks {', '.join(absent)}")
                scores[ui, seg - first] = [dims[d] for d in DIMENSIONS]
        try:
            net = EgoNetwork(ego_id, tuple(alters), scores, first)
        except DataError as exc:
            raise DataError(f"{source}: {exc}") from None
        if net.has_gaps():
            if not interpolate:
                holes = sorted({first + int(s) for s in np.argwhere(np.isnan(scores).all(axis=2))[:, 1]})
                raise DataError(f"{source}: {ego_id}: missing segments {holes} "
                                "(use interpolation to repair interior gaps)")
            net = interpolate_gaps(net)
        networks.append(net)
    return networks


def _parse_record(row: Mapping, where: str) -> TrajectoryRecord:
    try:
        ego = (row.get("ego_id") or "").strip()
        user = (row.get("user_id") or "").strip()
        if not ego or not user:
            raise DataError("empty ego_id or user_id")
        seg = int(row["segment"])
        if seg < 0:
            raise DataError("segment must be >= 0")
        dim = ValueDimension.parse(row["dimension"])
        score = float(row["score"])
    except DataError as exc:
        raise DataError(f"{where}: {exc}") from None
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{where}: malformed field ({exc})") from None
    if not math.isfinite(score) or not 0.0 <= score <= 1.0:
        raise DataError(f"{where}: score {score!r} out of [0,1]")
    return TrajectoryRecord(ego, user, seg, dim, score)


def _dedupe(records: Iterable[tuple[str, TrajectoryRecord]]):
    seen = set()
    for where, r in records:
        key = (r.ego_id, r.user_id, r.segment, r.dimension)
        if key in seen:
            raise DataError(f"{where}: duplicate row for {r.ego_id}/{r.user_id} "
                            f"segment {r.segment} {r.dimension.value}")
        seen.add(key)
        yield r


def _csv_records(path: Path):
    with path.open(encoding="utf-8", newline="") as fh:
        lines = [(n, line) for n, line in enumerate(fh, start=1) if not line.startswith("#")]
    if not lines:
        return
    reader = csv.DictReader([line for _, line in lines])
    missing = set(TRAJECTORY_COLUMNS) - set(reader.fieldnames or ())
    if missing:
        raise DataError(f"{path}: missing columns {sorted(missing)}")
    for (n, _), row in zip(lines[1:], reader):
        where = f"{path}: row {n}"
        yield where, _parse_record(row, where)


def _json_records(path: Path):
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc})") from None
    nets = doc.get("networks", []) if isinstance(doc, dict) else doc
    for i, net in enumerate(nets):
        try:
            ego_id = str(net["ego_id"])
            profiles = net["profiles"]
            declared = [ego_id, *map(str, net.get("alters", []))]
        except (KeyError, TypeError) as exc:
            raise DataError(f"{path}: network {i}: missing field {exc}") from None
        extra = set(profiles) - set(declared)
        if extra:
            raise DataError(f"{path}: network {ego_id}: profiles for undeclared users {sorted(extra)}")
        for user in declared:
            for seg, dims in profiles.get(user, {}).items():
                for dim, score in dims.items():
                    where = f"{path}: network {ego_id}, user {user}, segment {seg}, {dim}"
                    yield where, _parse_record(
                        {"ego_id": ego_id, "user_id": user, "segment": seg,
                         "dimension": dim, "score": score}, where)


def load_trajectories(path, format: str | None = None, interpolate: bool = False) -> list[EgoNetwork]:
    path = Path(path)
    fmt = (format or path.suffix.lstrip(".")).lower()
    if fmt not in ("csv", "json"):
        raise DataError(f"{path}: unknown trajectory format {fmt!r}")
    if not path.exists():
        raise DataError(f"{path}: no such file")
    records = _csv_records(path) if fmt == "csv" else _json_records(path)
    return _records_to_networks(_dedupe(records), str(path), interpolate)


def trajectory_records(networks: Iterable[EgoNetwork]):
    for net in networks:
        for u, user in enumerate(net.user_ids):
            for k, seg in enumerate(net.segments):
                for d, dim in enumerate(DIMENSIONS):
                    s = net.scores[u, k, d]
                    if not math.isnan(s):
                        yield TrajectoryRecord(net.ego_id, user, seg, dim, float(s))


def save_trajectories(networks: Sequence[EgoNetwork], path, format: str | None = None) -> None:
    path = Path(path)
    fmt = (format or path.suffix.lstrip(".")).lower()
    if fmt == "csv":
        with path.open("w", encoding="utf-8", newline="") as fh:
            fh.write(f"# {TRAJECTORY_TAG}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TRAJECTORY_COLUMNS)
            for r in trajectory_records(networks):
                w.writerow([r.ego_id, r.user_id, r.segment, r.dimension.value, repr(r.score)])
    elif fmt == "json":
        doc = {"format_version": JSON_FORMAT, "networks": [_network_json(n) for n in networks]}
        path.write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")
    else:
        raise DataError(f"{path}: unknown trajectory format {fmt!r}")


def _network_json(net: EgoNetwork) -> dict:
    profiles = {}
    for u, user in enumerate(net.user_ids):
        profiles[user] = {
            str(seg): {dim.value: float(net.scores[u, k, d]) for d, dim in enumerate(DIMENSIONS)}
            for k, seg in enumerate(net.segments)
            if not np.isnan(net.scores[u, k]).all()
        }
    return {"ego_id": net.ego_id, "alters": list(net.alter_ids), "segments": net.n_segments,
            "first_segment": net.first_segment, "profiles": profiles}


def save_ground_truth(truth: Sequence[GroundTruth], path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRUTH_COLUMNS)
        for t in truth:
            w.writerow([t.ego_id, repr(t.true_mu), repr(t.true_sigma)])


def load_ground_truth(path) -> list[GroundTruth]:
    with Path(path).open(encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(line for line in fh if not line.startswith("#"))
        try:
            return [GroundTruth(r["ego_id"], float(r["true_mu"]), float(r["true_sigma"])) for r in reader]
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"{path}: malformed ground truth ({exc})") from None


PLOT_KINDS = ("hyperparam-variation", "model-loss", "actual-vs-predicted")


def emit_plot_data(kind: str, inputs) -> str:
    """Long-format CSV for an external plotting tool.

    hyperparam-variation
        ``inputs``: PSO result or its history. Columns ``generation,
        best_fitness`` then one column per hyperparameter of the generation's
        best configuration (blank when inactive).
    model-loss
        ``inputs``: mapping family -> MSE. Columns ``family, mse``.
    actual-vs-predicted
        ``inputs``: pair ``(actual, predicted)``. Columns ``index, actual, predicted``.
    """
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if kind == "hyperparam-variation":
        history = getattr(inputs, "history", inputs)
        if not history:
            raise DataError("hyperparam-variation needs a non-empty PSO history")
        names = list(dict.fromkeys(k for rec in history for k in rec.best_params))
        w.writerow(["generation", "best_fitness", *names])
        for rec in history:
            w.writerow([rec.generation, repr(float(rec.best_fitness)),
                        *(_cell(rec.best_params.get(k, "")) for k in names)])
    elif kind == "model-loss":
        if not inputs:
            raise DataError("model-loss needs at least one family")
        w.writerow(["family", "mse"])
        for family, value in inputs.items():
            w.writerow([family, repr(float(value))])
    elif kind == "actual-vs-predicted":
        actual, predicted = inputs
        if len(actual) == 0 or len(actual) != len(predicted):
            raise DataError("actual-vs-predicted needs equal-length non-empty sequences")
        w.writerow(["index", "actual", "predicted"])
        for i, (a, p) in enumerate(zip(actual, predicted)):
            w.writerow([i, repr(float(a)), repr(float(p))])
    else:
        raise ParameterError(f"unknown plot kind {kind!r}; choose from {', '.join(PLOT_KINDS)}")
    return buf.getvalue()


def _cell(v):
    return repr(v) if isinstance(v, float) else v
