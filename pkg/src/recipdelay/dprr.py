"""DPRR: global ridge parameters plus per-relation localized parameters.

The model minimizes

    sum_i (x_i . (w + wt_i) - y_i)^2 + alpha ||w||^2
        + beta * sum_{i != j, same target} ||wt_i - wt_j||

where the last sum runs over ordered pairs (each unordered pair counts
twice). It is solved by scaled-dual ADMM over copies ``a_i = w + wt_i`` and
one copy ``z_ij`` of ``wt_i`` per ordered pair. A new relation is scored
with ``x . w`` when its target user is unseen, otherwise with
``x . (w + b)`` where ``b`` is the geometric median of that user's
training ``wt_i``.

Note the objective is unchanged by moving any vector from ``w`` into every
``wt_i`` except through ``alpha ||w||^2``, so its exact minimizer has
``w = 0`` whenever ``alpha > 0``. ``w`` is warm-started at the ridge
solution and the iteration stops on the usual primal/dual residual test.
"""

from __future__ import annotations

import json
import logging
import math
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Hashable, Sequence

import numpy as np

from . import kernels
from .features import Dataset, Standardizer

log = logging.getLogger(__name__)

MODEL_FORMAT = "recipdelay-model/1"


class NumericalError(FloatingPointError):
    pass


class ModelFormatError(ValueError):
    pass


@dataclass(frozen=True)
class DprrConfig:
    alpha: float = 1.0
    beta: float = 0.5
    rho: float = 1.0
    max_iterations: int = 500
    eps_primal: float = 1e-4
    eps_dual: float = 1e-4
    seed: int = 0
    group_cap: int = 200
    warm_start: str = "ridge"  # or "zero"

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be nonnegative")
        if self.rho <= 0:
            raise ValueError("rho must be positive")
        if self.eps_primal <= 0 or self.eps_dual <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.warm_start not in ("ridge", "zero"):
            raise ValueError(f"unknown warm_start {self.warm_start!r}")


# -- same-target groups ----------------------------------------------------------

@dataclass(frozen=True)
class SameTargetGroups:
    """Rows partitioned by target user, with the ordered in-group pairs.

    Ordered pair ``2q`` is ``(i, j)`` and ``2q + 1`` is ``(j, i)``.
    """

    labels: np.ndarray
    members: tuple
    pair_owner: np.ndarray
    owned_ptr: np.ndarray
    owned_idx: np.ndarray
    m: np.ndarray
    capped: tuple = ()

    @property
    def n(self) -> int:
        return len(self.labels)

    @property
    def n_pairs(self) -> int:
        """Number of ordered pairs (P)."""
        return len(self.pair_owner)

    @property
    def pair_partner(self) -> np.ndarray:
        partner = np.empty_like(self.pair_owner)
        partner[0::2] = self.pair_owner[1::2]
        partner[1::2] = self.pair_owner[0::2]
        return partner

    def adjacency(self) -> np.ndarray:
        A = np.zeros((self.n, self.n), dtype=np.int8)
        A[self.pair_owner, self.pair_partner] = 1
        return A


def build_same_target_groups(labels, cap: int = 200, seed: int = 0) -> SameTargetGroups:
    """Partition rows by target label and enumerate in-group pairs.

    ``labels`` may be a Dataset (its ``group`` column is used) or any
    sequence of hashable target ids. Groups larger than ``cap`` only pair a
    seeded random subset of ``cap`` rows; the rest get no partners.
    """
    if isinstance(labels, Dataset):
        labels = labels.group
    labels = np.asarray(labels)
    n = len(labels)
    index: dict = {}
    buckets: list[list[int]] = []
    for i, lab in enumerate(labels.tolist()):
        k = index.get(lab)
        if k is None:
            index[lab] = k = len(buckets)
            buckets.append([])
        buckets[k].append(i)
    rng = np.random.default_rng(seed)
    owners: list[np.ndarray] = []
    capped = []
    for k, rows in enumerate(buckets):
        if len(rows) > cap:
            capped.append(k)
            rows = sorted(rng.choice(rows, size=cap, replace=False).tolist())
        g = len(rows)
        if g < 2:
            continue
        ii, jj = np.triu_indices(g, k=1)
        r = np.asarray(rows, dtype=np.int64)
        pairs = np.empty(2 * len(ii), dtype=np.int64)
        pairs[0::2] = r[ii]
        pairs[1::2] = r[jj]
        owners.append(pairs)
    if capped:
        warnings.warn(
            f"{len(capped)} target group(s) exceed group_cap={cap}; pairing a random subset of each",
            RuntimeWarning,
            stacklevel=2,
        )
    pair_owner = np.concatenate(owners) if owners else np.zeros(0, dtype=np.int64)
    m = np.bincount(pair_owner, minlength=n).astype(np.int64)
    owned_idx = np.argsort(pair_owner, kind="stable").astype(np.int64)
    owned_ptr = np.concatenate([[0], np.cumsum(m)]).astype(np.int64)
    return SameTargetGroups(
        labels=labels,
        members=tuple(np.asarray(b, dtype=np.int64) for b in buckets),
        pair_owner=pair_owner,
        owned_ptr=owned_ptr,
        owned_idx=owned_idx,
        m=m,
        capped=tuple(capped),
    )


# -- objective -------------------------------------------------------------------

def objective(X, y, groups: SameTargetGroups, w, w_tilde, alpha: float, beta: float) -> float:
    """Squared loss + alpha ||w||^2 + beta * ordered-pair network lasso."""
    X = np.asarray(X, dtype=float)
    w = np.asarray(w, dtype=float)
    w_tilde = np.asarray(w_tilde, dtype=float)
    if X.shape[1] != w.shape[0] or w_tilde.shape != X.shape or len(y) != X.shape[0]:
        raise ValueError(f"dimension mismatch: X{X.shape}, w{w.shape}, w_tilde{w_tilde.shape}, y({len(y)})")
    resid = np.einsum("ij,ij->i", X, w + w_tilde) - y
    po = groups.pair_owner
    diffs = w_tilde[po[0::2]] - w_tilde[po[1::2]]
    lasso = 2.0 * np.sqrt(np.einsum("ij,ij->i", diffs, diffs)).sum()
    return float(resid @ resid + alpha * (w @ w) + beta * lasso)


# -- ADMM state and updates --------------------------------------------------------

@dataclass
class AdmmState:
    a: np.ndarray
    w: np.ndarray
    z: np.ndarray
    u: np.ndarray
    iteration: int = 0
    history: list = field(default_factory=list)  # (primal, dual) per iteration

    @classmethod
    def initial(cls, X, y, groups: SameTargetGroups, w0) -> "AdmmState":
        n, d = X.shape
        w0 = np.array(w0, dtype=float)
        P = groups.n_pairs
        z = np.zeros((P, d))
        u = np.zeros((P, d))
        # paired rows: a = w0 (wt = 0 is feasible); isolated rows absorb their residual
        a = kernels.python_backend.update_a(
            X, y, _row_norms(X), groups.owned_ptr, groups.owned_idx, groups.m, z, u, w0, 1.0
        )
        a[groups.m > 0] = w0
        return cls(a=a, w=w0, z=z, u=u)

    def w_tilde(self, groups: SameTargetGroups) -> np.ndarray:
        """Localized parameters: mean of each row's z copies, or a_i - w when unpaired."""
        wt = self.a - self.w
        paired = groups.m > 0
        if paired.any():
            sums = kernels.python_backend.row_pair_sums(self.z, groups.owned_ptr, groups.owned_idx, groups.n)
            wt[paired] = sums[paired] / groups.m[paired, None]
        return wt


def _row_norms(X) -> np.ndarray:
    return np.einsum("ij,ij->i", X, X)


def update_a(state: AdmmState, dataset: Dataset, groups: SameTargetGroups, rho: float) -> np.ndarray:
    X, y = dataset.X, dataset.y
    return kernels.python_backend.update_a(
        X, y, _row_norms(X), groups.owned_ptr, groups.owned_idx, groups.m, state.z, state.u, state.w, rho
    )


def update_w(state: AdmmState, dataset: Dataset, groups: SameTargetGroups, alpha: float, rho: float) -> np.ndarray:
    if groups.n_pairs == 0:
        return state.w.copy()
    return kernels.python_backend.update_w(state.a, state.z, state.u, groups.pair_owner, alpha, rho)


def update_z(state: AdmmState, dataset: Dataset, groups: SameTargetGroups, beta: float, rho: float) -> np.ndarray:
    return kernels.python_backend.update_z(state.a, state.u, state.w, groups.pair_owner, beta, rho)


def update_u(state: AdmmState, groups: SameTargetGroups) -> np.ndarray:
    u = state.u.copy()
    kernels.python_backend.update_u(u, state.a, state.w, state.z, groups.pair_owner)
    return u


# -- geometric median -------------------------------------------------------------

def weber_point(points, tol: float = 1e-8, max_iter: int = 10_000, backend=None) -> np.ndarray:
    """Geometric median of the rows of ``points``.

    Duplicate rows are merged into weights; one point returns itself and two
    points return their midpoint.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[0] == 0:
        raise ValueError("weber_point needs at least one point")
    uniq, counts = np.unique(pts, axis=0, return_counts=True)
    if len(uniq) == 1:
        return uniq[0].copy()
    if len(uniq) == 2 and counts[0] == counts[1]:
        return 0.5 * (uniq[0] + uniq[1])
    be = kernels.get_backend(backend)
    if len(uniq) == 2:
        # unequal multiplicities: the heavier point is the median
        return uniq[int(np.argmax(counts))].copy()
    med, _ = be.weiszfeld(np.ascontiguousarray(uniq), counts.astype(float), tol, max_iter)
    return np.asarray(med)


def weber_cost(b, points) -> float:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    return float(np.linalg.norm(pts - b, axis=1).sum())


# -- fitting ----------------------------------------------------------------------

@dataclass
class DprrModel:
    w: np.ndarray
    weber: dict  # target id -> localized parameter representative
    scaler: Standardizer | None
    config: DprrConfig
    kind: str = "dprr"  # "pd" when w is pinned to zero
    w_tilde: np.ndarray | None = None
    converged: bool = False
    iterations: int = 0
    objective: float = float("nan")
    first_objective: float = float("nan")
    primal_residual: float = float("nan")
    dual_residual: float = float("nan")

    @property
    def d(self) -> int:
        return len(self.w)

    def predict_one(self, x, target: Hashable | None = None) -> float:
        x = np.asarray(x, dtype=float)
        if x.shape != self.w.shape:
            raise ValueError(f"feature vector has dimension {x.shape}, model expects ({self.d},)")
        b = self.weber.get(target)
        coef = self.w if b is None else self.w + b
        return max(0.0, float(x @ coef))

    def predict(self, X, targets: Sequence[Hashable]) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.d:
            raise ValueError(f"X has shape {X.shape}, model expects (n, {self.d})")
        coef = np.array([self.w + self.weber[t] if t in self.weber else self.w for t in targets])
        if len(coef) == 0:
            return np.zeros(0)
        return np.maximum(0.0, np.einsum("ij,ij->i", X, coef))


def predict(model: DprrModel, feature_vector, target_user: Hashable | None = None) -> float:
    """Delay estimate in days, clamped at zero."""
    return model.predict_one(feature_vector, target_user)


def ridge_solution(X, y, alpha: float) -> np.ndarray:
    """argmin ||Xw - y||^2 + alpha ||w||^2 (minimum-norm when singular)."""
    X = np.asarray(X, dtype=float)
    d = X.shape[1]
    G = X.T @ X + alpha * np.eye(d)
    rhs = X.T @ y
    if alpha > 0:
        try:
            return np.linalg.solve(G, rhs)
        except np.linalg.LinAlgError:
            pass
    return np.linalg.lstsq(X, y, rcond=None)[0] if alpha == 0 else np.linalg.lstsq(G, rhs, rcond=None)[0]


def fit(
    dataset: Dataset,
    groups: SameTargetGroups | None = None,
    config: DprrConfig = DprrConfig(),
    pin_w: bool = False,
    backend: str | None = None,
    targets: Sequence[Hashable] | None = None,
) -> DprrModel:
    """Fit DPRR by ADMM; with ``pin_w`` the global part is fixed at zero (PD).

    ``targets`` names each row's target user for the prediction lookup and
    defaults to ``dataset.v``.
    """
    X = np.ascontiguousarray(dataset.X, dtype=float)
    if dataset.y is None:
        raise ValueError("dataset has no targets")
    y = np.ascontiguousarray(dataset.y, dtype=float)
    n, d = X.shape
    if n < 1 or d < 1:
        raise ValueError("need at least one row and one feature")
    if groups is None:
        groups = build_same_target_groups(dataset.group, cap=config.group_cap, seed=config.seed)
    if groups.n != n:
        raise ValueError("groups do not match the dataset")
    be = kernels.get_backend(backend)

    if pin_w or config.warm_start == "zero":
        w0 = np.zeros(d)
    else:
        w0 = ridge_solution(X, y, config.alpha)
    state = AdmmState.initial(X, y, groups, w0)
    xx = _row_norms(X)
    P = groups.n_pairs
    scale = math.sqrt(max(P, 1) * d)
    tol_p = config.eps_primal * scale
    tol_d = config.eps_dual * scale

    first_obj = float("nan")
    converged = P == 0
    primal = dual = 0.0
    it = 0
    while not converged and it < config.max_iterations:
        primal, dual = be.admm_step(
            X, y, xx, groups.owned_ptr, groups.owned_idx, groups.pair_owner, groups.m,
            state.a, state.z, state.u, state.w,
            float(config.alpha), float(config.rho), float(config.beta), bool(pin_w),
        )
        it += 1
        state.history.append((primal, dual))
        if not (math.isfinite(primal) and math.isfinite(dual)):
            raise NumericalError(f"non-finite ADMM residuals at iteration {it}")
        if it == 1:
            first_obj = objective(X, y, groups, state.w, state.w_tilde(groups), config.alpha, config.beta)
        converged = primal < tol_p and dual < tol_d
    state.iteration = it
    if not converged:
        log.warning("ADMM stopped at max_iterations=%d (primal %.3g, dual %.3g)", it, primal, dual)

    w = state.w.copy()
    if P == 0:
        # nothing couples rows: isolated-row rule on the warm start
        state.a = kernels.python_backend.update_a(
            X, y, xx, groups.owned_ptr, groups.owned_idx, groups.m, state.z, state.u, w, config.rho
        )
    wt = state.w_tilde(groups)
    if not np.all(np.isfinite(wt)):
        raise NumericalError("non-finite localized parameters")
    obj = objective(X, y, groups, w, wt, config.alpha, config.beta)
    if it == 0:
        first_obj = obj

    keys = list(dataset.v) if targets is None else list(targets)
    weber = {}
    for rows in groups.members:
        weber[keys[rows[0]]] = weber_point(wt[rows], backend=backend)
    return DprrModel(
        w=w,
        weber=weber,
        scaler=dataset.scaler,
        config=config,
        kind="pd" if pin_w else "dprr",
        w_tilde=wt,
        converged=converged,
        iterations=it,
        objective=obj,
        first_objective=first_obj,
        primal_residual=primal,
        dual_residual=dual,
    )


# -- serialization ----------------------------------------------------------------

def _floats(a) -> list:
    return [float(x) for x in np.asarray(a).ravel()]


def model_to_dict(model: DprrModel) -> dict:
    return {
        "format": MODEL_FORMAT,
        "kind": model.kind,
        "d": model.d,
        "w": _floats(model.w),
        "weber": {str(k): _floats(v) for k, v in model.weber.items()},
        "scaler": None if model.scaler is None else model.scaler.to_dict(),
        "config": asdict(model.config),
        "diagnostics": {
            "converged": model.converged,
            "iterations": model.iterations,
            "objective": model.objective,
            "first_objective": model.first_objective,
            "primal_residual": model.primal_residual,
            "dual_residual": model.dual_residual,
        },
    }


def model_from_dict(data: dict) -> DprrModel:
    if data.get("format") != MODEL_FORMAT:
        raise ModelFormatError(f"unsupported model format {data.get('format')!r}")
    if data.get("kind") not in ("dprr", "pd"):
        raise ModelFormatError(f"not a DPRR model: kind={data.get('kind')!r}")
    d = int(data["d"])
    w = np.array(data["w"], dtype=float)
    weber = {k: np.array(v, dtype=float) for k, v in data["weber"].items()}
    if len(w) != d or any(len(v) != d for v in weber.values()):
        raise ModelFormatError("model dimension mismatch")
    diag = data.get("diagnostics", {})
    return DprrModel(
        w=w,
        weber=weber,
        scaler=None if data.get("scaler") is None else Standardizer.from_dict(data["scaler"]),
        config=DprrConfig(**data["config"]),
        kind=data["kind"],
        converged=bool(diag.get("converged", False)),
        iterations=int(diag.get("iterations", 0)),
        objective=float(diag.get("objective", float("nan"))),
        first_objective=float(diag.get("first_objective", float("nan"))),
        primal_residual=float(diag.get("primal_residual", float("nan"))),
        dual_residual=float(diag.get("dual_residual", float("nan"))),
    )


def save_model(path: str | Path, model) -> None:
    from .baselines import LinearModel

    data = model.to_dict() if isinstance(model, LinearModel) else model_to_dict(model)
    Path(path).write_text(json.dumps(data, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def load_model(path: str | Path):
    from .baselines import LinearModel

    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if data.get("kind") in ("ridge", "lasso"):
        return LinearModel.from_dict(data)
    return model_from_dict(data)
