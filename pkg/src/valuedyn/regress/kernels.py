from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import ParameterError

KINDS = ("linear", "rbf", "poly")


@dataclass(frozen=True)
class Kernel:
    kind: str = "rbf"
    gamma: float = 1.0
    degree: int = 3
    coef0: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown kernel {self.kind!r}")
        if self.kind == "rbf" and not self.gamma > 0:
            raise ParameterError("RBF gamma must be > 0")
        if self.kind == "poly" and int(self.degree) < 1:
            raise ParameterError("polynomial degree must be >= 1")

    @classmethod
    def from_params(cls, params: dict) -> "Kernel":
        kind = params.get("kernel", "rbf")
        if kind == "rbf":
            return cls("rbf", gamma=float(params["gamma"]))
        if kind == "poly":
            return cls("poly", degree=int(params["degree"]), coef0=float(params.get("coef0", 0.0)))
        return cls(kind)

    def params(self) -> dict:
        if self.kind == "rbf":
            return {"kernel": "rbf", "gamma": self.gamma}
        if self.kind == "poly":
            return {"kernel": "poly", "degree": int(self.degree), "coef0": self.coef0}
        return {"kernel": self.kind}

    def __call__(self, A, B) -> np.ndarray:
        return kernel_matrix(self, A, B)


def kernel_eval(k: Kernel, x, y) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ParameterError(f"feature vectors differ in shape: {x.shape} vs {y.shape}")
    if k.kind == "rbf":
        d = x - y
        return float(np.exp(-k.gamma * (d @ d)))
    return float(kernel_matrix(k, x[None, :], y[None, :])[0, 0])


def kernel_matrix(k: Kernel, A, B) -> np.ndarray:
    """Gram matrix ``K[a, b] = k(A[a], B[b])``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if A.shape[1] != B.shape[1]:
        raise ParameterError(f"feature count mismatch: {A.shape[1]} vs {B.shape[1]}")
    dot = A @ B.T
    if k.kind == "linear":
        return dot
    if k.kind == "poly":
        return (dot + k.coef0) ** int(k.degree)
    sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * dot
    return np.exp(-k.gamma * np.maximum(sq, 0.0))
