"""Box-constrained particle swarm over conditional hyperparameter spaces.

A position holds a coordinate for every dimension of the space, active or
not; decoding drops the dimensions whose activation rule fails. Continuous
and integer coordinates move with a velocity, categorical ones jump to the
personal or global best with probabilities weighted by ``phi1`` and ``phi2``
(the inertia weight is the weight of keeping the current choice).

Random draws come from a generator keyed on ``(seed, generation, particle)``,
so results do not depend on the order in which fitness values are computed.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .core import DataError, ParameterError

log = logging.getLogger(__name__)

Fitness = Callable[[dict], float]


@dataclass(frozen=True)
class Dimension:
    name: str
    kind: str  # "continuous" | "integer" | "categorical"
    lo: float = 0.0
    hi: float = 1.0
    choices: tuple = ()
    log: bool = False
    when: tuple | None = None  # (categorical dimension name, required choice)
    param: str | None = None  # decoded parameter name, defaults to ``name``

    def __post_init__(self):
        if self.kind not in ("continuous", "integer", "categorical"):
            raise ParameterError(f"{self.name}: unknown kind {self.kind!r}")
        if self.kind == "categorical":
            if not self.choices:
                raise ParameterError(f"{self.name}: categorical dimension needs choices")
            object.__setattr__(self, "choices", tuple(self.choices))
        else:
            if not self.lo <= self.hi:  # lo == hi pins the dimension
                raise ParameterError(f"{self.name}: lo must not exceed hi")
            if self.log and self.lo <= 0:
                raise ParameterError(f"{self.name}: log scale needs lo > 0")
        if self.when is not None:
            object.__setattr__(self, "when", tuple(self.when))

    @property
    def key(self) -> str:
        return self.param or self.name

    @property
    def bounds(self) -> tuple[float, float]:
        """Bounds in internal coordinates (log10 for log dimensions, index for categoricals)."""
        if self.kind == "categorical":
            return 0.0, float(len(self.choices) - 1)
        if self.log:
            return math.log10(self.lo), math.log10(self.hi)
        return float(self.lo), float(self.hi)

    def decode(self, x: float):
        if self.kind == "categorical":
            return self.choices[int(x)]
        v = 10.0 ** x if self.log else float(x)
        if self.kind == "integer":
            return int(round(v))
        return min(max(v, self.lo), self.hi)

    def to_dict(self) -> dict:
        d = {"name": self.name, "kind": self.kind}
        if self.kind == "categorical":
            d["choices"] = list(self.choices)
        else:
            d.update(lo=self.lo, hi=self.hi)
            if self.log:
                d["log"] = True
        if self.when is not None:
            d["when"] = list(self.when)
        if self.param:
            d["param"] = self.param
        return d


@dataclass(frozen=True)
class SearchSpace:
    dimensions: tuple[Dimension, ...]

    def __post_init__(self):
        dims = tuple(self.dimensions)
        object.__setattr__(self, "dimensions", dims)
        names = [d.name for d in dims]
        if len(set(names)) != len(names):
            raise ParameterError("duplicate dimension names")
        by_name = {d.name: d for d in dims}
        for d in dims:
            if d.when is None:
                continue
            parent = by_name.get(d.when[0])
            if parent is None or parent.kind != "categorical":
                raise ParameterError(f"{d.name}: activation must reference a categorical dimension")
            if d.when[1] not in parent.choices:
                raise ParameterError(f"{d.name}: {d.when[1]!r} is not a choice of {parent.name}")
        for d in dims:
            seen, cur = {d.name}, d
            while cur.when is not None:
                cur = by_name[cur.when[0]]
                if cur.name in seen:
                    raise ParameterError(f"cyclic activation through {cur.name}")
                seen.add(cur.name)
        keys = {}
        for d in dims:
            keys.setdefault(d.key, []).append(d)
        self._check_exclusive(keys)
        # activation chains as (parent index, required choice index) pairs
        index = {d.name: i for i, d in enumerate(dims)}
        chains = []
        for d in dims:
            chain, cur = [], d
            while cur.when is not None:
                parent = by_name[cur.when[0]]
                chain.append((index[parent.name], parent.choices.index(cur.when[1])))
                cur = parent
            chains.append(tuple(chain))
        object.__setattr__(self, "_chains", tuple(chains))
        object.__setattr__(self, "_lower", np.array([d.bounds[0] for d in dims]))
        object.__setattr__(self, "_upper", np.array([d.bounds[1] for d in dims]))

    @staticmethod
    def _check_exclusive(keys):
        # dimensions sharing a decoded name must be mutually exclusive branches
        for key, group in keys.items():
            if len(group) > 1:
                conds = [g.when for g in group]
                if None in conds or len(set(conds)) != len(conds) or len({c[0] for c in conds}) != 1:
                    raise ParameterError(f"dimensions decoding to {key!r} are not exclusive")

    def __len__(self):
        return len(self.dimensions)

    @property
    def lower(self) -> np.ndarray:
        return self._lower.copy()

    @property
    def upper(self) -> np.ndarray:
        return self._upper.copy()

    @property
    def categorical(self) -> np.ndarray:
        return np.array([d.kind == "categorical" for d in self.dimensions], dtype=bool)

    @property
    def integer(self) -> np.ndarray:
        return np.array([d.kind == "integer" for d in self.dimensions], dtype=bool)

    def active(self, position) -> list[bool]:
        return [all(int(position[p]) == c for p, c in chain) for chain in self._chains]

    def decode(self, position) -> dict:
        act = self.active(position)
        return {d.key: d.decode(x) for d, x, a in zip(self.dimensions, position, act) if a}

    def to_dict(self) -> dict:
        return {"dimensions": [d.to_dict() for d in self.dimensions]}

    @classmethod
    def from_dict(cls, d) -> "SearchSpace":
        dims = d["dimensions"] if isinstance(d, dict) else d
        return cls(tuple(Dimension(**x) for x in dims))


@dataclass(frozen=True)
class PsoConfig:
    num_particles: int = 10
    num_generations: int = 15
    phi1: float = 1.5
    phi2: float = 2.0
    max_speed: float | None = None
    inertia: float = 0.7298
    seed: int = 0

    def __post_init__(self):
        if self.num_particles < 1:
            raise ParameterError("num_particles must be >= 1")
        if self.num_generations < 0:
            raise ParameterError("num_generations must be >= 0")
        if self.phi1 < 0 or self.phi2 < 0:
            raise ParameterError("phi1 and phi2 must be >= 0")
        if not 0 < self.inertia <= 1:
            raise ParameterError("inertia must lie in (0, 1]")
        if self.max_speed is not None and self.max_speed <= 0:
            raise ParameterError("max_speed must be > 0 when set")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "PsoConfig":
        return cls(**d)


@dataclass
class ParticleState:
    position: np.ndarray
    velocity: np.ndarray
    fitness: float = math.inf
    best_position: np.ndarray | None = None
    best_fitness: float = math.inf
    diagnostics: list = field(default_factory=list)

    def copy(self) -> "ParticleState":
        return ParticleState(self.position.copy(), self.velocity.copy(), self.fitness,
                             None if self.best_position is None else self.best_position.copy(),
                             self.best_fitness, list(self.diagnostics))


@dataclass
class GenerationRecord:
    generation: int
    best_fitness: float
    best_params: dict


@dataclass
class OptimizeResult:
    best_position: np.ndarray
    best_params: dict
    best_fitness: float
    history: list[GenerationRecord]
    initial_best: float
    evaluations: int
    diagnostics: list = field(default_factory=list)


def _rng(seed: int, generation: int, particle: int) -> np.random.Generator:
    return np.random.default_rng([seed, generation, particle])


def sample_initial(space: SearchSpace, config: PsoConfig) -> list[ParticleState]:
    lo, hi = space.lower, space.upper
    cat, integer = space.categorical, space.integer
    particles = []
    for k in range(config.num_particles):
        rng = _rng(config.seed, 0, k)
        pos = rng.uniform(lo, hi)
        for i, d in enumerate(space.dimensions):
            if cat[i]:
                pos[i] = rng.integers(len(d.choices))
        pos[integer] = np.clip(np.round(pos[integer]), lo[integer], hi[integer])
        half = (hi - lo) / 2
        vel = rng.uniform(-half, half)
        vel[cat] = 0.0
        particles.append(ParticleState(pos, vel))
    return particles


def _evaluate(space, fitness, positions, executor=None):
    params = [space.decode(p) for p in positions]
    calls = executor.map(fitness, params) if executor is not None else map(fitness, params)
    out = []
    for v in calls:
        try:
            out.append(float(v))
        except (TypeError, ValueError):
            out.append(math.nan)
    return out


def _record(particle: ParticleState, value: float, where: str):
    particle.fitness = value
    if not math.isfinite(value):
        particle.diagnostics.append(f"{where}: non-finite fitness {value!r}")
        return
    if particle.best_position is None or value < particle.best_fitness:
        particle.best_fitness = value
        particle.best_position = particle.position.copy()


def _global_best(particles, current=None):
    best = current
    for p in particles:
        if p.best_position is None:
            continue
        if best is None or p.best_fitness < best[1]:
            best = (p.best_position.copy(), p.best_fitness)
    return best


def evaluate_initial(particles, space, fitness, executor=None):
    values = _evaluate(space, fitness, [p.position for p in particles], executor)
    for p, v in zip(particles, values):
        _record(p, v, "generation 0")
    return _global_best(particles)


def step(particles: Sequence[ParticleState], space: SearchSpace, config: PsoConfig,
         fitness: Fitness, gbest=None, generation: int = 1, executor=None):
    """Move every particle once, evaluate, and update the bests.

    ``gbest`` is ``(position, fitness)`` or None (derived from the particles'
    personal bests). Returns ``(new particles, new gbest)``.
    """
    lo, hi = space.lower, space.upper
    cat, integer = space.categorical, space.integer
    gbest = gbest if gbest is not None else _global_best(particles)
    w, c1, c2 = config.inertia, config.phi1, config.phi2
    moved = []
    for k, old in enumerate(particles):
        p = old.copy()
        rng = _rng(config.seed, generation, k)
        r1 = rng.random(len(space))
        r2 = rng.random(len(space))
        u = rng.random(len(space))
        pb = p.best_position if p.best_position is not None else p.position
        gb = gbest[0] if gbest is not None else p.position
        v = w * p.velocity + c1 * r1 * (pb - p.position) + c2 * r2 * (gb - p.position)
        if config.max_speed is not None:
            vmax = config.max_speed * (hi - lo)
            v = np.clip(v, -vmax, vmax)
        x = p.position + v
        hit = (x < lo) | (x > hi)
        x = np.clip(x, lo, hi)
        v[hit] = 0.0
        x[integer] = np.clip(np.round(x[integer]), lo[integer], hi[integer])
        # categorical coordinates: keep / personal best / global best
        total = w + c1 + c2
        take_p = u < c1 / total
        take_g = (u >= c1 / total) & (u < (c1 + c2) / total)
        x[cat] = np.where(take_p[cat], pb[cat], np.where(take_g[cat], gb[cat], p.position[cat]))
        v[cat] = 0.0
        p.position, p.velocity = x, v
        moved.append(p)
    values = _evaluate(space, fitness, [p.position for p in moved], executor)
    for p, val in zip(moved, values):
        _record(p, val, f"generation {generation}")
    return moved, _global_best(moved, gbest)


def optimize(space: SearchSpace, config: PsoConfig, fitness: Fitness, executor=None) -> OptimizeResult:
    particles = sample_initial(space, config)
    gbest = evaluate_initial(particles, space, fitness, executor)
    initial = gbest[1] if gbest is not None else math.inf
    history = []
    for g in range(1, config.num_generations + 1):
        particles, gbest = step(particles, space, config, fitness, gbest, g, executor)
        if gbest is None:
            history.append(GenerationRecord(g, math.inf, {}))
        else:
            history.append(GenerationRecord(g, gbest[1], space.decode(gbest[0])))
    diagnostics = [d for p in particles for d in p.diagnostics]
    evaluations = config.num_particles * (config.num_generations + 1)
    if gbest is None:
        return OptimizeResult(np.full(len(space), np.nan), {}, math.inf, history, initial,
                              evaluations, diagnostics)
    return OptimizeResult(gbest[0], space.decode(gbest[0]), gbest[1], history, initial,
                          evaluations, diagnostics)


def history_csv(result: OptimizeResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["generation", "best_fitness"])
    for rec in result.history:
        w.writerow([rec.generation, repr(rec.best_fitness)])
    return buf.getvalue()


# Search spaces for the regressor families. SVR follows the kernel-conditional
# table; gamma's lower bound is lifted off zero because RBF needs gamma > 0.
def svr_space() -> SearchSpace:
    return SearchSpace((
        Dimension("kernel", "categorical", choices=("rbf", "linear", "poly")),
        Dimension("rbf.gamma", "continuous", 1e-6, 50.0, when=("kernel", "rbf"), param="gamma"),
        Dimension("rbf.C", "continuous", 1.0, 100.0, when=("kernel", "rbf"), param="C"),
        Dimension("linear.C", "continuous", 1.0, 100.0, when=("kernel", "linear"), param="C"),
        Dimension("poly.degree", "integer", 2, 5, when=("kernel", "poly"), param="degree"),
        Dimension("poly.C", "continuous", 1000.0, 20000.0, when=("kernel", "poly"), param="C"),
        Dimension("poly.coef0", "continuous", 0.0, 1.0, when=("kernel", "poly"), param="coef0"),
    ))


def gp_space() -> SearchSpace:
    return SearchSpace((
        Dimension("normalize_y", "categorical", choices=(True, False)),
        Dimension("alpha", "continuous", 1e-10, 1e-2, log=True),
        Dimension("gamma", "continuous", 1e-3, 50.0, log=True),
    ))


def elasticnet_space() -> SearchSpace:
    return SearchSpace((
        Dimension("alpha", "continuous", 0.0, 1.0),
        Dimension("l1_ratio", "continuous", 0.0, 1.0),
        Dimension("tol", "continuous", 1e-4, 0.01),
    ))


def ridge_space() -> SearchSpace:
    return SearchSpace((Dimension("alpha", "continuous", 1e-6, 10.0, log=True),))


DEFAULT_SPACES = {"svr": svr_space, "gp": gp_space, "elasticnet": elasticnet_space,
                  "ridge": ridge_space}


def default_space(family: str) -> SearchSpace:
    from .regress import parse_family

    return DEFAULT_SPACES[parse_family(family)]()


def load_pso_document(path) -> tuple[PsoConfig | None, dict[str, SearchSpace]]:
    """Parse ``{"pso": {...}, "spaces": {family: {"dimensions": [...]}}}``."""
    from .regress import parse_family

    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    try:
        config = PsoConfig.from_dict(doc["pso"]) if "pso" in doc else None
        spaces = {parse_family(f): SearchSpace.from_dict(s) for f, s in doc.get("spaces", {}).items()}
    except (KeyError, TypeError) as exc:
        raise DataError(f"{path}: malformed PSO document ({exc})") from None
    return config, spaces


def tune_regressor(train, validation, family: str, space: SearchSpace | None = None,
                   config: PsoConfig | None = None, max_samples: int | None = None,
                   fixed: dict | None = None, executor=None):
    """PSO over ``space`` minimising validation MSE of a model fit on ``train``.

    Returns ``(best RegressorSpec, validation MSE, OptimizeResult)``.
    """
    from .core import NumericalError
    from .regress import RegressorSpec, fit_dataset, mse, parse_family, predict

    family = parse_family(family)
    space = space or default_space(family)
    config = config or PsoConfig()
    train.require_nonempty()
    validation.require_nonempty()
    fixed = dict(fixed or {})
    Xv, yv = validation.X, validation.y

    def fitness(params: dict) -> float:
        try:
            spec = RegressorSpec(family, {**fixed, **params})
            model = fit_dataset(train, spec, max_samples=max_samples, seed=config.seed)
            return mse(predict(model, Xv), yv)
        except (NumericalError, ParameterError, FloatingPointError) as exc:
            log.debug("fitness failed for %s: %s", params, exc)
            return math.inf

    result = optimize(space, config, fitness, executor)
    if not math.isfinite(result.best_fitness):
        raise NumericalError(f"every {family} fitness evaluation was non-finite")
    return RegressorSpec(family, {**fixed, **result.best_params}), result.best_fitness, result
