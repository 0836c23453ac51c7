"""Bounded Confidence Model over star-shaped ego networks.

Every dimension evolves independently. One simulation step is one
segment-to-segment transition, within which the ego meets each alter once.
The gate is closed: a pair interacts when ``|v_j - v_i| <= sigma``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .core import (
    DIMENSIONS,
    BcmParams,
    DataError,
    EgoNetwork,
    ParameterError,
    ValueDimension,
    ValueProfile,
)


class InteractionMode(enum.Enum):
    EgoOnly = "ego-only"
    Symmetric = "symmetric"

    @classmethod
    def parse(cls, s) -> "InteractionMode":
        return _parse_enum(cls, s)


class GroupScheme(enum.Enum):
    Sequential = "sequential"
    MeanField = "meanfield"

    @classmethod
    def parse(cls, s) -> "GroupScheme":
        return _parse_enum(cls, s)


def _parse_enum(cls, s):
    if isinstance(s, cls):
        return s
    key = str(s).strip().lower().replace("_", "-")
    for m in cls:
        if key in (m.value, m.name.lower()):
            return m
    raise ParameterError(f"unknown {cls.__name__} {s!r}")


class Interaction(NamedTuple):
    ego_id: str
    alter_id: str
    dimension: ValueDimension
    interacted: bool


@dataclass(frozen=True, eq=False)
class StepTrace:
    step: int
    user_ids: tuple[str, ...]
    snapshot: np.ndarray  # (n_users, 5)
    interactions: tuple[Interaction, ...] = ()

    def profile(self, user_id: str) -> ValueProfile:
        return ValueProfile(tuple(self.snapshot[self.user_ids.index(user_id)]))

    def spread(self) -> float:
        """Largest max-min gap across users, over all dimensions."""
        return float(np.max(self.snapshot.max(axis=0) - self.snapshot.min(axis=0)))


def bcm_pair_update(v_i, v_j, params: BcmParams):
    """Move ``v_i`` a fraction ``mu`` toward ``v_j`` if they are within ``sigma``.

    Works elementwise on arrays. Gated-out entries are returned unchanged
    (bit-identical).
    """
    if not isinstance(params, BcmParams):
        raise ParameterError("params must be BcmParams")
    return _pair_update(v_i, v_j, params.mu, params.sigma)


def _pair_update(v_i, v_j, mu, sigma):
    v_i = np.asarray(v_i, dtype=float)
    v_j = np.asarray(v_j, dtype=float)
    diff = v_j - v_i
    gate = np.abs(diff) <= sigma
    out = np.where(gate, np.clip(v_i + mu * diff, 0.0, 1.0), v_i)
    return float(out) if out.ndim == 0 else out


def _step_state(state, mu, sigma, mode, scheme):
    """Advance ``state`` (n_users, 5), ego in row 0, by one step.

    ``sigma`` is a scalar or one threshold per alter (shape ``(n_alters,)``
    or ``(n_alters, 5)``). Returns the new state and the boolean gate matrix
    ``(n_alters, 5)``.
    """
    state = np.array(state, dtype=float)
    n_alters = state.shape[0] - 1
    sig = np.asarray(sigma, dtype=float)
    if sig.ndim == 1:
        sig = sig[:, None]
    sig = np.broadcast_to(sig, (n_alters, state.shape[1]))
    gates = np.zeros((n_alters, state.shape[1]), dtype=bool)
    symmetric = mode is InteractionMode.Symmetric

    if scheme is GroupScheme.Sequential:
        for k in range(n_alters):
            ego, alter = state[0].copy(), state[k + 1].copy()
            gates[k] = np.abs(alter - ego) <= sig[k]
            state[0] = _pair_update(ego, alter, mu, sig[k])
            if symmetric:
                state[k + 1] = _pair_update(alter, ego, mu, sig[k])
        return state, gates

    ego = state[0].copy()
    alters = state[1:].copy()
    gates = np.abs(alters - ego) <= sig
    count = gates.sum(axis=0)
    pulled = np.where(gates, alters, 0.0).sum(axis=0)
    has = count > 0
    mean = np.divide(pulled, count, out=ego.copy(), where=has)
    state[0] = np.where(has, np.clip(ego + mu * (mean - ego), 0.0, 1.0), ego)
    if symmetric:
        # each qualifying alter gives back an equal share, so the group sum is conserved
        share = np.divide(mu, count, out=np.zeros_like(ego), where=has)
        state[1:] = np.where(gates, alters + share * (ego - alters), alters)
    return state, gates


def _interactions(net_ids, gates):
    ego_id, alter_ids = net_ids[0], net_ids[1:]
    return tuple(
        Interaction(ego_id, alter_ids[k], dim, bool(gates[k, d]))
        for k in range(len(alter_ids))
        for d, dim in enumerate(DIMENSIONS)
    )


def group_step(
    net: EgoNetwork,
    segment: int,
    params: BcmParams,
    mode: InteractionMode = InteractionMode.EgoOnly,
    scheme: GroupScheme = GroupScheme.Sequential,
) -> tuple[ValueProfile, StepTrace]:
    """One influence step starting from the observed state at ``segment``."""
    if net.has_gaps():
        raise DataError(f"{net.ego_id}: trajectories have gaps")
    state, gates = _step_state(net.state(segment), params.mu, params.sigma, mode, scheme)
    trace = StepTrace(1, net.user_ids, state, _interactions(net.user_ids, gates))
    return ValueProfile(tuple(state[0])), trace


def simulate(
    net: EgoNetwork,
    params: BcmParams,
    mode: InteractionMode = InteractionMode.EgoOnly,
    scheme: GroupScheme = GroupScheme.Sequential,
    steps: int = 1,
    seed: int = 0,
    segment: int | None = None,
) -> list[StepTrace]:
    """Run ``steps`` group steps from the state at ``segment`` (default: first).

    The update schedule is deterministic; ``seed`` is recorded for interface
    stability and has no effect on the result.
    """
    if steps < 0:
        raise ParameterError("steps must be >= 0")
    if net.has_gaps():
        raise DataError(f"{net.ego_id}: trajectories have gaps")
    mode, scheme = InteractionMode.parse(mode), GroupScheme.parse(scheme)
    state = net.state(net.first_segment if segment is None else segment)
    traces = [StepTrace(0, net.user_ids, state)]
    for t in range(1, steps + 1):
        state, gates = _step_state(state, params.mu, params.sigma, mode, scheme)
        traces.append(StepTrace(t, net.user_ids, state, _interactions(net.user_ids, gates)))
    return traces


def converged(traces: Sequence[StepTrace], tolerance: float) -> tuple[bool, float]:
    if tolerance <= 0:
        raise ParameterError("tolerance must be > 0")
    if not traces:
        raise ParameterError("empty trace list")
    spread = traces[-1].spread()
    return spread < tolerance, spread
