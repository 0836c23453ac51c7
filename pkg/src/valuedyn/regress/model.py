from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from ..core import DataError, ParameterError
from .gp import gp_fit
from .kernels import Kernel, kernel_matrix
from .linear import elasticnet_cd, ridge_solve
from .svr import solve_svr_dual

FAMILIES = ("svr", "gp", "elasticnet", "ridge")
_ALIASES = {
    "svr": "svr", "sv": "svr",
    "gp": "gp", "gaussianprocess": "gp", "gaussian-process": "gp",
    "elasticnet": "elasticnet", "elastic-net": "elasticnet", "enet": "elasticnet",
    "ridge": "ridge",
}
MODEL_FORMAT = 1
SVR_EPSILON = 0.01
SVR_TOL = 1e-3


def parse_family(name: str) -> str:
    try:
        return _ALIASES[str(name).strip().lower().replace("_", "")]
    except KeyError:
        raise ParameterError(f"unknown regressor family {name!r}") from None


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, X) -> "Standardizer":
        X = np.asarray(X, dtype=float)
        scale = X.std(axis=0)
        # constant columns (e.g. a fixed mu) map to zero rather than NaN
        scale = np.where(scale > 0, scale, 1.0)
        return cls(X.mean(axis=0), scale)

    def transform(self, X) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.mean) / self.scale

    def inverse(self, Z) -> np.ndarray:
        return np.asarray(Z, dtype=float) * self.scale + self.mean


@dataclass(frozen=True)
class RegressorSpec:
    family: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "family", parse_family(self.family))
        object.__setattr__(self, "params", dict(self.params))
        self.validate()

    def validate(self) -> None:
        p = self.params
        if self.family == "svr":
            kind = p.get("kernel", "rbf")
            if kind == "rbf" and "gamma" not in p:
                raise ParameterError("RBF kernel needs gamma")
            if kind != "rbf" and "gamma" in p:
                raise ParameterError("gamma is only valid with the RBF kernel")
            if kind != "poly" and ({"degree", "coef0"} & p.keys()):
                raise ParameterError("degree/coef0 are only valid with the polynomial kernel")
            if kind == "poly" and "degree" not in p:
                raise ParameterError("polynomial kernel needs degree")
            Kernel.from_params(p)
            if not p.get("C", 1.0) > 0:
                raise ParameterError("C must be > 0")
            if p.get("epsilon", SVR_EPSILON) < 0:
                raise ParameterError("epsilon must be >= 0")
        elif self.family == "gp":
            if not p.get("alpha", 1e-10) > 0:
                raise ParameterError("GP alpha must be > 0")
            if not p.get("gamma", 1.0) > 0:
                raise ParameterError("GP gamma must be > 0")
        elif self.family == "elasticnet":
            if p.get("alpha", 1.0) < 0:
                raise ParameterError("alpha must be >= 0")
            if not 0 <= p.get("l1_ratio", 0.5) <= 1:
                raise ParameterError("l1_ratio must lie in [0, 1]")
            if not p.get("tol", 1e-4) > 0:
                raise ParameterError("tol must be > 0")
        elif p.get("alpha", 1.0) < 0:
            raise ParameterError("alpha must be >= 0")

    def to_dict(self) -> dict:
        return {"family": self.family, "params": _jsonable(self.params)}

    @classmethod
    def from_dict(cls, d: dict) -> "RegressorSpec":
        return cls(d["family"], d.get("params", {}))


@dataclass(frozen=True, eq=False)
class FittedModel:
    family: str
    hyperparameters: dict
    standardizer: Standardizer
    coefficients: dict
    info: dict = field(default_factory=dict)

    @property
    def n_features(self) -> int:
        return len(self.standardizer.mean)

    def to_dict(self) -> dict:
        return {
            "format_version": MODEL_FORMAT,
            "family": self.family,
            "hyperparameters": _jsonable(self.hyperparameters),
            "standardization": {"mean": self.standardizer.mean.tolist(),
                                "scale": self.standardizer.scale.tolist()},
            "coefficients": {k: _jsonable(v) for k, v in self.coefficients.items()
                             if k not in _TRANSIENT},
            "info": _jsonable(self.info),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FittedModel":
        if d.get("format_version") != MODEL_FORMAT:
            raise DataError(f"unsupported model format {d.get('format_version')!r}")
        std = Standardizer(np.array(d["standardization"]["mean"], dtype=float),
                           np.array(d["standardization"]["scale"], dtype=float))
        coefs = {k: (np.array(v, dtype=float) if isinstance(v, list) else v)
                 for k, v in d["coefficients"].items()}
        return cls(parse_family(d["family"]), d["hyperparameters"], std, coefs, d.get("info", {}))


# mean prediction needs only the weight vector, so the factor is not serialised
_TRANSIENT = {"cholesky"}


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        return v.item()
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


def save_model(m: FittedModel, path) -> None:
    Path(path).write_text(json.dumps(m.to_dict(), indent=1, sort_keys=True) + "\n", encoding="utf-8")


def load_model(path) -> FittedModel:
    return FittedModel.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _prepare(X, y):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if len(X) == 0 or len(X) != len(y):
        raise DataError(f"need matching non-empty X and y, got {len(X)} and {len(y)}")
    std = Standardizer.fit(X)
    return std, std.transform(X), y


def fit_svr(X, y, spec: RegressorSpec, tol: float = SVR_TOL, max_iter: int = 100_000) -> FittedModel:
    if spec.family != "svr":
        raise ParameterError("fit_svr needs an SVR spec")
    std, Z, y = _prepare(X, y)
    p = spec.params
    kernel = Kernel.from_params(p)
    C = float(p.get("C", 1.0))
    eps = float(p.get("epsilon", SVR_EPSILON))
    res = solve_svr_dual(kernel_matrix(kernel, Z, Z), y, C, eps, tol=tol, max_iter=max_iter)
    sv = np.abs(res.coef) > 0
    coefs = {
        "support_vectors": Z[sv],
        "dual_coef": res.coef[sv],
        "intercept": res.intercept,
    }
    info = {"n_iter": res.n_iter, "converged": res.converged, "kkt_gap": res.gap,
            "n_support": int(sv.sum()), "n_train": len(y)}
    return FittedModel("svr", {**kernel.params(), "C": C, "epsilon": eps}, std, coefs, info)


def fit_elasticnet(X, y, spec: RegressorSpec, max_iter: int = 10_000) -> FittedModel:
    if spec.family != "elasticnet":
        raise ParameterError("fit_elasticnet needs an ElasticNet spec")
    std, Z, y = _prepare(X, y)
    p = spec.params
    alpha, l1 = float(p.get("alpha", 1.0)), float(p.get("l1_ratio", 0.5))
    tol = float(p.get("tol", 1e-4))
    y_mean = float(y.mean())
    history: list[float] = []
    w, sweeps = elasticnet_cd(Z, y - y_mean, alpha, l1, tol=tol, max_iter=max_iter, history=history)
    info = {"n_sweeps": sweeps, "objective": history}
    return FittedModel("elasticnet", {"alpha": alpha, "l1_ratio": l1, "tol": tol}, std,
                       {"weights": w, "intercept": y_mean}, info)


def fit_ridge(X, y, spec: RegressorSpec) -> FittedModel:
    if spec.family != "ridge":
        raise ParameterError("fit_ridge needs a Ridge spec")
    std, Z, y = _prepare(X, y)
    alpha = float(spec.params.get("alpha", 1.0))
    y_mean = float(y.mean())
    w = ridge_solve(Z, y - y_mean, alpha)
    return FittedModel("ridge", {"alpha": alpha}, std, {"weights": w, "intercept": y_mean})


def fit_gp(X, y, spec: RegressorSpec) -> FittedModel:
    if spec.family != "gp":
        raise ParameterError("fit_gp needs a GaussianProcess spec")
    std, Z, y = _prepare(X, y)
    p = spec.params
    kernel = Kernel("rbf", gamma=float(p.get("gamma", 1.0)))
    alpha = float(p.get("alpha", 1e-10))
    normalize = bool(p.get("normalize_y", False))
    weights, L, y_mean, y_scale = gp_fit(Z, y, kernel, alpha, normalize)
    coefs = {"train_inputs": Z, "weights": weights, "y_mean": y_mean, "y_scale": y_scale,
             "cholesky": L}
    hyper = {"kernel": "rbf", "gamma": kernel.gamma, "alpha": alpha, "normalize_y": normalize}
    return FittedModel("gp", hyper, std, coefs)


_FITTERS = {"svr": fit_svr, "elasticnet": fit_elasticnet, "ridge": fit_ridge, "gp": fit_gp}


def fit(X, y, spec: RegressorSpec) -> FittedModel:
    return _FITTERS[spec.family](X, y, spec)


def subsample(n: int, max_samples: int | None, seed: int) -> np.ndarray:
    """Sorted row indices of a seeded subsample (all rows when under the cap)."""
    if max_samples is None or n <= max_samples:
        return np.arange(n)
    return np.sort(np.random.default_rng(seed).choice(n, size=max_samples, replace=False))


def fit_dataset(d, spec: RegressorSpec, max_samples: int | None = None, seed: int = 0) -> FittedModel:
    d.require_nonempty()
    rows = subsample(len(d), max_samples, seed)
    m = fit(d.X[rows], d.y[rows], spec)
    m.info["n_available"] = len(d)
    return m


def predict_raw(m: FittedModel, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != m.n_features:
        raise ParameterError(f"expected {m.n_features} features, got {X.shape[1]}")
    Z = m.standardizer.transform(X)
    c = m.coefficients
    if m.family == "svr":
        kernel = Kernel.from_params(m.hyperparameters)
        sv = np.atleast_2d(c["support_vectors"]).reshape(-1, m.n_features)
        if len(sv) == 0:
            return np.full(len(Z), float(c["intercept"]))
        return kernel_matrix(kernel, Z, sv) @ np.asarray(c["dual_coef"]) + float(c["intercept"])
    if m.family == "gp":
        kernel = Kernel("rbf", gamma=float(m.hyperparameters["gamma"]))
        Ks = kernel_matrix(kernel, Z, c["train_inputs"])
        return float(c["y_mean"]) + float(c["y_scale"]) * (Ks @ np.asarray(c["weights"]))
    return Z @ np.asarray(c["weights"]) + float(c["intercept"])


def predict(m: FittedModel, x) -> np.ndarray | float:
    """Clamped sigma prediction for one feature vector or a batch."""
    single = np.ndim(x) == 1
    out = np.clip(predict_raw(m, x), 0.0, 1.0)
    return float(out[0]) if single else out


def mse(predictions, labels) -> float:
    p = np.asarray(predictions, dtype=float).ravel()
    t = np.asarray(labels, dtype=float).ravel()
    if len(p) != len(t):
        raise ParameterError(f"length mismatch: {len(p)} vs {len(t)}")
    if len(p) == 0:
        raise ParameterError("mse of empty input")
    return float(np.mean((p - t) ** 2))


class CVResult(NamedTuple):
    mean: float
    scores: list


def cross_validate(d, spec: RegressorSpec, folds: int = 10, iterations: int = 10,
                   seed: int = 0, max_samples: int | None = None) -> CVResult:
    """Ego-grouped k-fold CV, reshuffled with a fresh seed each iteration."""
    if folds < 2:
        raise ParameterError("folds must be >= 2")
    egos = np.array(sorted(d.egos()), dtype=object)
    if len(egos) < folds:
        raise DataError(f"{len(egos)} egos is too few for {folds} folds")
    groups = d.groups
    X, y = d.X, d.y
    scores = []
    for it in range(iterations):
        rng = np.random.default_rng([seed, it])
        parts = np.array_split(rng.permutation(len(egos)), folds)
        for k, part in enumerate(parts):
            held = np.isin(groups, egos[part])
            train_rows = np.flatnonzero(~held)
            train_rows = train_rows[subsample(len(train_rows), max_samples, seed + 7919 * it + k)]
            m = fit(X[train_rows], y[train_rows], spec)
            scores.append(mse(predict(m, X[held]), y[held]))
    return CVResult(float(np.mean(scores)), scores)
