"""Domain types: value dimensions, profiles, ego networks, segments, BCM parameters."""

from __future__ import annotations

import datetime as dt
import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

MAX_ALTERS = 5
DEFAULT_MU = 0.4
SEGMENT_MONTHS = 6


class ValueDynError(Exception):
    """Base class for errors raised by this package."""


class ParameterError(ValueDynError, ValueError):
    """A parameter lies outside its admissible range."""


class DataError(ValueDynError, ValueError):
    """Input data violates a schema or structural invariant."""


class NumericalError(ValueDynError, ArithmeticError):
    """A numerical routine failed (e.g. a non positive-definite matrix)."""


class ValueDimension(enum.Enum):
    OpennessToChange = "OpennessToChange"
    SelfTranscendence = "SelfTranscendence"
    SelfEnhancement = "SelfEnhancement"
    Conservation = "Conservation"
    Hedonism = "Hedonism"

    @classmethod
    def parse(cls, name: str | "ValueDimension") -> "ValueDimension":
        """Accept the CamelCase name or its snake/kebab-case spelling."""
        if isinstance(name, cls):
            return name
        key = str(name).strip().replace("-", "").replace("_", "").lower()
        for dim in cls:
            if dim.value.lower() == key:
                return dim
        raise DataError(f"unknown value dimension {name!r}")

    @property
    def index(self) -> int:
        return DIMENSIONS.index(self)


DIMENSIONS: tuple[ValueDimension, ...] = tuple(ValueDimension)
N_DIMS = len(DIMENSIONS)


@dataclass(frozen=True)
class ValueProfile:
    """Scores for the five dimensions, in ``DIMENSIONS`` order.

    Construction does not validate; a missing score is stored as NaN so that
    :func:`validate_profile` can report it.
    """

    scores: tuple[float, ...]

    def __post_init__(self):
        if len(self.scores) != N_DIMS:
            raise DataError(f"expected {N_DIMS} scores, got {len(self.scores)}")
        object.__setattr__(self, "scores", tuple(float(s) for s in self.scores))

    @classmethod
    def from_mapping(cls, scores: Mapping) -> "ValueProfile":
        parsed = {ValueDimension.parse(k): float(v) for k, v in scores.items()}
        return cls(tuple(parsed.get(d, math.nan) for d in DIMENSIONS))

    @classmethod
    def uniform(cls, value: float) -> "ValueProfile":
        return cls((value,) * N_DIMS)

    def __getitem__(self, dim) -> float:
        return self.scores[ValueDimension.parse(dim).index]

    def as_dict(self) -> dict[str, float]:
        return {d.value: s for d, s in zip(DIMENSIONS, self.scores)}

    def as_array(self) -> np.ndarray:
        return np.array(self.scores, dtype=float)


def validate_profile(p: ValueProfile) -> list[str]:
    """Return the violated invariants of ``p``; an empty list means ok."""
    violations = []
    for dim, s in zip(DIMENSIONS, p.scores):
        if math.isnan(s):
            violations.append(f"{dim.value}: missing score")
        elif not 0.0 <= s <= 1.0:
            violations.append(f"{dim.value}: score out of [0,1] ({s!r})")
    return violations


@dataclass(frozen=True)
class BcmParams:
    mu: float = DEFAULT_MU
    sigma: float = 1.0

    def __post_init__(self):
        if not (0.0 < self.mu <= 0.5):
            raise ParameterError(f"mu must lie in (0, 0.5], got {self.mu!r}")
        if not (0.0 <= self.sigma <= 1.0):
            raise ParameterError(f"sigma must lie in [0, 1], got {self.sigma!r}")


@dataclass(frozen=True, eq=False)
class EgoNetwork:
    """An ego with 1-5 alters and their per-segment value trajectories.

    ``scores`` has shape ``(1 + n_alters, n_segments, 5)``; row 0 is the ego,
    rows 1.. follow ``alter_ids``. Segment ``k`` of the array is segment index
    ``first_segment + k``. NaN marks a missing (user, segment) cell, which only
    the ingestion path produces; see :meth:`has_gaps`.
    """

    ego_id: str
    alter_ids: tuple[str, ...]
    scores: np.ndarray
    first_segment: int = 0

    def __post_init__(self):
        alters = tuple(str(a) for a in self.alter_ids)
        object.__setattr__(self, "ego_id", str(self.ego_id))
        object.__setattr__(self, "alter_ids", alters)
        if not 1 <= len(alters) <= MAX_ALTERS:
            raise DataError(f"{self.ego_id}: need 1..{MAX_ALTERS} alters, got {len(alters)}")
        if self.ego_id in alters:
            raise DataError(f"{self.ego_id}: ego listed among its own alters")
        if len(set(alters)) != len(alters):
            raise DataError(f"{self.ego_id}: duplicate alter ids")
        if self.first_segment < 0:
            raise DataError(f"{self.ego_id}: negative first segment")
        arr = np.array(self.scores, dtype=float)
        if arr.ndim != 3 or arr.shape[0] != 1 + len(alters) or arr.shape[2] != N_DIMS:
            raise DataError(
                f"{self.ego_id}: scores shape {arr.shape} does not match "
                f"({1 + len(alters)}, segments, {N_DIMS})"
            )
        if arr.shape[1] < 1:
            raise DataError(f"{self.ego_id}: no segments")
        observed = arr[~np.isnan(arr)]
        if observed.size and (observed.min() < 0.0 or observed.max() > 1.0):
            raise DataError(f"{self.ego_id}: score out of [0,1]")
        arr.setflags(write=False)
        object.__setattr__(self, "scores", arr)

    @property
    def user_ids(self) -> tuple[str, ...]:
        return (self.ego_id,) + self.alter_ids

    @property
    def n_segments(self) -> int:
        return self.scores.shape[1]

    @property
    def segments(self) -> range:
        return range(self.first_segment, self.first_segment + self.n_segments)

    def has_gaps(self) -> bool:
        return bool(np.isnan(self.scores).any())

    def user_index(self, user_id: str) -> int:
        try:
            return self.user_ids.index(user_id)
        except ValueError:
            raise KeyError(user_id) from None

    def profile(self, user_id: str, segment: int) -> ValueProfile:
        return ValueProfile(tuple(self.scores[self.user_index(user_id), segment - self.first_segment]))

    def trajectory(self, user_id: str) -> list[ValueProfile]:
        row = self.scores[self.user_index(user_id)]
        return [ValueProfile(tuple(r)) for r in row]

    def state(self, segment: int) -> np.ndarray:
        """Scores of every user at ``segment`` as a ``(n_users, 5)`` copy."""
        k = segment - self.first_segment
        if not 0 <= k < self.n_segments:
            raise DataError(f"{self.ego_id}: segment {segment} outside {self.segments}")
        return self.scores[:, k, :].copy()

    def __eq__(self, other):
        if not isinstance(other, EgoNetwork):
            return NotImplemented
        return (
            self.ego_id == other.ego_id
            and self.alter_ids == other.alter_ids
            and self.first_segment == other.first_segment
            and self.scores.shape == other.scores.shape
            and np.array_equal(self.scores, other.scores, equal_nan=True)
        )

    @classmethod
    def from_profiles(
        cls,
        ego_id: str,
        alter_ids: Sequence[str],
        trajectories: Mapping[str, Sequence[ValueProfile]],
        first_segment: int = 0,
    ) -> "EgoNetwork":
        users = [ego_id, *alter_ids]
        lengths = {len(trajectories[u]) for u in users}
        if len(lengths) != 1:
            raise DataError(f"{ego_id}: trajectories differ in length {sorted(lengths)}")
        arr = np.array([[p.scores for p in trajectories[u]] for u in users], dtype=float)
        return cls(ego_id, tuple(alter_ids), arr, first_segment)


def _add_months(d: dt.date, months: int) -> dt.date:
    y, m = divmod(d.month - 1 + months, 12)
    year, month = d.year + y, m + 1
    # clip the day for short months
    for day in (d.day, 30, 29, 28):
        try:
            return dt.date(year, month, min(d.day, day))
        except ValueError:
            continue
    raise AssertionError("unreachable")


@dataclass(frozen=True)
class Segment:
    index: int
    start: dt.date
    end: dt.date

    @classmethod
    def from_index(cls, index: int, epoch: dt.date) -> "Segment":
        if index < 0:
            raise ParameterError("segment index must be >= 0")
        start = _add_months(epoch, SEGMENT_MONTHS * index)
        return cls(index, start, _add_months(epoch, SEGMENT_MONTHS * (index + 1)))

    def __contains__(self, d: dt.date) -> bool:
        return self.start <= d < self.end


def epoch_for(dates: Iterable[dt.date]) -> dt.date:
    """First observed date truncated to the start of its month."""
    first = min(dates)
    return first.replace(day=1)


def segment_index_for(date: dt.date, epoch: dt.date) -> int:
    if date < epoch:
        raise ParameterError("date precedes epoch")
    months = (date.year - epoch.year) * 12 + (date.month - epoch.month)
    if date.day < epoch.day:
        months -= 1
    return months // SEGMENT_MONTHS
