"""Comparison predictors: P1, Pk, ridge (RG), lasso (LS) and DPRR without w (PD)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .dprr import MODEL_FORMAT, DprrConfig, DprrModel, ModelFormatError, SameTargetGroups, fit, ridge_solution
from .features import Dataset, Standardizer

REG_GRID = tuple(10.0**e for e in range(-3, 4))


def predict_p1(history: Sequence[float], fallback: float) -> float:
    """The most recent completed delay, or ``fallback`` with no history."""
    return float(history[-1]) if len(history) else float(fallback)


def predict_pk(history: Sequence[float], k: int, fallback: float) -> float:
    """Mean of the last ``min(k, len(history))`` delays, or ``fallback``."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if not len(history):
        return float(fallback)
    tail = history[-k:]
    return float(sum(tail) / len(tail))


def predict_history(histories: Sequence[Sequence[float]], k: int, fallback: float) -> np.ndarray:
    return np.array([predict_pk(h, k, fallback) for h in histories], dtype=float)


@dataclass
class LinearModel:
    kind: str  # "ridge" or "lasso"
    coef: np.ndarray
    reg: float
    scaler: Standardizer | None = None
    iterations: int = 0
    gap: float = 0.0

    def predict(self, X, targets=None) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != len(self.coef):
            raise ValueError(f"X has shape {X.shape}, model expects (n, {len(self.coef)})")
        return np.maximum(0.0, X @ self.coef)

    def to_dict(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "kind": self.kind,
            "d": len(self.coef),
            "coef": [float(c) for c in self.coef],
            "reg": float(self.reg),
            "scaler": None if self.scaler is None else self.scaler.to_dict(),
            "diagnostics": {"iterations": self.iterations, "gap": self.gap},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "LinearModel":
        if data.get("format") != MODEL_FORMAT or data.get("kind") not in ("ridge", "lasso"):
            raise ModelFormatError("not a ridge/lasso model file")
        coef = np.array(data["coef"], dtype=float)
        if len(coef) != int(data["d"]):
            raise ModelFormatError("model dimension mismatch")
        diag = data.get("diagnostics", {})
        return cls(
            kind=data["kind"],
            coef=coef,
            reg=float(data["reg"]),
            scaler=None if data.get("scaler") is None else Standardizer.from_dict(data["scaler"]),
            iterations=int(diag.get("iterations", 0)),
            gap=float(diag.get("gap", 0.0)),
        )


def fit_ridge(dataset: Dataset, alpha: float) -> LinearModel:
    """Exact minimizer of ``||Xw - y||^2 + alpha ||w||^2``."""
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    return LinearModel("ridge", ridge_solution(dataset.X, dataset.y, alpha), alpha, dataset.scaler)


def lasso_objective(X, y, w, lam) -> float:
    r = X @ w - y
    return float(r @ r + lam * np.abs(w).sum())


def lasso_duality_gap(X, y, w, lam) -> float:
    r = y - X @ w
    primal = float(r @ r + lam * np.abs(w).sum())
    s = 2.0 * r
    corr = float(np.max(np.abs(X.T @ s))) if X.shape[1] else 0.0
    if corr > lam:
        s *= lam / corr
    dual = float(s @ y - 0.25 * (s @ s))
    return primal - dual


def fit_lasso(
    dataset: Dataset,
    lam: float,
    tol: float = 1e-6,
    max_sweeps: int = 1_000_000,
    backend: str | None = None,
) -> LinearModel:
    """Cyclic coordinate descent on ``||Xw - y||^2 + lam ||w||_1``.

    Sweeps run on the Gram matrix, so each costs O(d^2) regardless of the
    row count. Stops once the duality gap is at most ``tol * ||y||^2``.
    """
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    X = np.asarray(dataset.X, dtype=float)
    y = np.asarray(dataset.y, dtype=float)
    G = np.ascontiguousarray(X.T @ X)
    c = np.ascontiguousarray(X.T @ y)
    yy = float(y @ y)
    w = np.zeros(X.shape[1])
    target = tol * max(yy, 1e-300)
    floor = 0.0
    if lam == 0:
        # the scaled dual point degenerates to 0, so the kernel's "gap" is the
        # plain residual; offset the target by the least-squares optimum
        floor = max(yy - float(c @ np.linalg.lstsq(G, c, rcond=None)[0]), 0.0)
    sweeps, _ = kernels.get_backend(backend).lasso_cd(G, c, yy, float(lam), w, target + floor, int(max_sweeps))
    gap = lasso_duality_gap(X, y, w, lam) if lam > 0 else max(lasso_objective(X, y, w, 0.0) - floor, 0.0)
    return LinearModel("lasso", w, lam, dataset.scaler, iterations=int(sweeps), gap=gap)


def fit_pd(
    dataset: Dataset,
    groups: SameTargetGroups | None = None,
    config: DprrConfig = DprrConfig(),
    backend: str | None = None,
) -> DprrModel:
    """DPRR with the global parameter held at zero."""
    return fit(dataset, groups, config, pin_w=True, backend=backend)
