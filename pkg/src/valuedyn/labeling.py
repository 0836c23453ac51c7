"""Build the sigma-regression dataset by inverting the pairwise BCM update.

The BCM output is a two-valued step function of sigma: either the pair
interacted (any sigma >= |delta|) or it did not (any sigma < |delta|). A label
therefore records which branch explains the observed next value best, plus a
representative threshold from that branch's feasible interval.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .core import DEFAULT_MU, DIMENSIONS, DataError, EgoNetwork, ParameterError, ValueDimension
from .dynamics import _pair_update

log = logging.getLogger(__name__)

DEFAULT_DELTA = 0.01
FEATURES = ("v_i_t", "v_j_t", "v_i_next", "mu")
CSV_COLUMNS = ("ego_id", "alter_id", "dimension", "segment", *FEATURES, "sigma_label")
FORMAT_TAG = "valuedyn-sigma-dataset/1"


@dataclass(frozen=True)
class SigmaTuple:
    ego_id: str
    alter_id: str
    dimension: ValueDimension
    segment: int
    v_i_t: float
    v_j_t: float
    v_i_next: float
    mu: float
    sigma_label: float

    @property
    def features(self) -> tuple[float, float, float, float]:
        return (self.v_i_t, self.v_j_t, self.v_i_next, self.mu)


@dataclass
class SigmaDataset:
    tuples: list[SigmaTuple] = field(default_factory=list)
    provenance: dict = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    def __len__(self):
        return len(self.tuples)

    def __iter__(self):
        return iter(self.tuples)

    @cached_property
    def X(self) -> np.ndarray:
        return np.array([t.features for t in self.tuples], dtype=float).reshape(-1, len(FEATURES))

    @cached_property
    def y(self) -> np.ndarray:
        return np.array([t.sigma_label for t in self.tuples], dtype=float)

    @cached_property
    def groups(self) -> np.ndarray:
        return np.array([t.ego_id for t in self.tuples], dtype=object)

    def egos(self) -> list[str]:
        """Ego ids in first-appearance order."""
        return list(dict.fromkeys(t.ego_id for t in self.tuples))

    def subset(self, ego_ids: Iterable[str], role: str | None = None) -> "SigmaDataset":
        keep = set(ego_ids)
        prov = dict(self.provenance)
        if role:
            prov["split"] = role
        return SigmaDataset([t for t in self.tuples if t.ego_id in keep], prov)

    def require_nonempty(self):
        if not self.tuples:
            raise DataError("sigma dataset is empty")


def label_sigma(v_i_t, v_j_t, v_i_next, mu=DEFAULT_MU, delta=DEFAULT_DELTA) -> float:
    if delta <= 0:
        raise ParameterError("delta must be > 0")
    gap = abs(v_j_t - v_i_t)
    e_on = (v_i_t + mu * (v_j_t - v_i_t) - v_i_next) ** 2
    e_off = (v_i_t - v_i_next) ** 2
    if e_on <= e_off:
        return min(gap + delta, 1.0)
    return gap / 2.0


def label_sigma_oracle(v_i_t, v_j_t, v_i_next, mu=DEFAULT_MU, resolution=1e-3) -> float:
    """Brute-force threshold label by enumerating sigma on a uniform grid.

    Returns the median of the error-minimising grid points, except when that
    set is an upper interval (it contains sigma = 1 but not sigma = 0), where
    the smallest member is returned: the infimum of the interaction branch.
    """
    if resolution < 1e-3:
        raise ParameterError("resolution must be >= 1e-3")
    n = int(round(1.0 / resolution))
    grid = np.linspace(0.0, 1.0, n + 1)
    pred = _pair_update(np.full_like(grid, v_i_t), np.full_like(grid, v_j_t), mu, grid)
    err = (pred - v_i_next) ** 2
    best = grid[err <= err.min()]
    if best[-1] == 1.0 and best[0] > 0.0:
        return float(best[0])
    return float(np.median(best))


def _label_array(v_i, v_j, v_next, mu, delta):
    gap = np.abs(v_j - v_i)
    e_on = (v_i + mu * (v_j - v_i) - v_next) ** 2
    e_off = (v_i - v_next) ** 2
    return np.where(e_on <= e_off, np.minimum(gap + delta, 1.0), gap / 2.0)


def build_dataset(
    networks: Sequence[EgoNetwork],
    mu: float = DEFAULT_MU,
    delta: float = DEFAULT_DELTA,
) -> SigmaDataset:
    """One tuple per (ego, alter, dimension, consecutive-segment transition).

    Ordering: ego id, then segment, alter order, dimension order. Networks with
    fewer than two segments are skipped with a warning.
    """
    if delta <= 0:
        raise ParameterError("delta must be > 0")
    if not 0 < mu <= 0.5:
        raise ParameterError(f"mu must lie in (0, 0.5], got {mu!r}")
    tuples: list[SigmaTuple] = []
    warnings: list[str] = []
    if not networks:
        warnings.append("no networks supplied")
    for net in sorted(networks, key=lambda n: n.ego_id):
        if net.n_segments < 2:
            warnings.append(f"{net.ego_id}: fewer than 2 segments, skipped")
            continue
        if net.has_gaps():
            raise DataError(f"{net.ego_id}: trajectories have gaps")
        s = net.scores
        ego = s[0]
        for k in range(net.n_segments - 1):
            seg = net.first_segment + k
            v_i, v_next = ego[k], ego[k + 1]
            for a, alter_id in enumerate(net.alter_ids):
                v_j = s[a + 1, k]
                labels = _label_array(v_i, v_j, v_next, mu, delta)
                for d, dim in enumerate(DIMENSIONS):
                    tuples.append(SigmaTuple(
                        net.ego_id, alter_id, dim, seg,
                        float(v_i[d]), float(v_j[d]), float(v_next[d]), float(mu),
                        float(labels[d]),
                    ))
    for w in warnings:
        log.warning(w)
    prov = {"mu": mu, "delta": delta, "networks": len(networks), "tuples": len(tuples)}
    return SigmaDataset(tuples, prov, warnings)


class Split(NamedTuple):
    train: SigmaDataset
    validation: SigmaDataset
    test: SigmaDataset


def _allocate(n: int, fractions: Sequence[float]) -> list[int]:
    raw = [f * n for f in fractions]
    counts = [math.floor(r) for r in raw]
    order = sorted(range(len(raw)), key=lambda i: (counts[i] - raw[i], i))
    for i in order[: n - sum(counts)]:
        counts[i] += 1
    # every requested split gets at least one ego, taken from the largest
    for i, f in enumerate(fractions):
        if f > 0 and counts[i] == 0:
            donor = max(range(len(counts)), key=lambda j: counts[j])
            if counts[donor] <= 1:
                raise DataError(f"{n} egos cannot fill splits {tuple(fractions)}")
            counts[donor] -= 1
            counts[i] += 1
    return counts


def split_dataset(d: SigmaDataset, fractions=(0.7, 0.2, 0.1), seed: int = 0) -> Split:
    """Partition by ego into train/validation/test.

    ``fractions`` are given as (train, test, validation); pass
    ``(0.7, 0.3, 0.0)`` for a plain train/test split without validation.
    """
    fractions = tuple(float(f) for f in fractions)
    if len(fractions) != 3 or min(fractions) < 0 or abs(sum(fractions) - 1.0) > 1e-9:
        raise ParameterError(f"fractions must be three non-negative numbers summing to 1: {fractions}")
    egos = sorted(d.egos())
    n_train, n_test, n_val = _allocate(len(egos), fractions)
    rng = np.random.default_rng(seed)
    order = [egos[i] for i in rng.permutation(len(egos))]
    train = order[:n_train]
    test = order[n_train:n_train + n_test]
    val = order[n_train + n_test:]
    return Split(d.subset(train, "train"), d.subset(val, "validation"), d.subset(test, "test"))


def save_dataset(d: SigmaDataset, path) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        fh.write(f"# {FORMAT_TAG} {json.dumps(d.provenance, sort_keys=True)}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for t in d.tuples:
            w.writerow([t.ego_id, t.alter_id, t.dimension.value, t.segment,
                        repr(t.v_i_t), repr(t.v_j_t), repr(t.v_i_next), repr(t.mu),
                        repr(t.sigma_label)])


def load_dataset(path) -> SigmaDataset:
    path = Path(path)
    provenance: dict = {}
    tuples = []
    with path.open(encoding="utf-8", newline="") as fh:
        lines = []
        for line in fh:
            if line.startswith("#"):
                _, _, rest = line[1:].strip().partition(" ")
                if rest:
                    provenance = json.loads(rest)
                continue
            lines.append(line)
    reader = csv.DictReader(lines)
    if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
        raise DataError(f"{path}: expected columns {','.join(CSV_COLUMNS)}")
    for row_no, row in enumerate(reader, start=2):
        try:
            tuples.append(SigmaTuple(
                row["ego_id"], row["alter_id"], ValueDimension.parse(row["dimension"]),
                int(row["segment"]), *(float(row[c]) for c in FEATURES),
                float(row["sigma_label"]),
            ))
        except (TypeError, ValueError) as exc:
            raise DataError(f"{path}: row {row_no}: {exc}") from None
    return SigmaDataset(tuples, provenance)
