"""Error metrics, the repeated-split benchmark, cross-validation and the beta sweep."""

from __future__ import annotations

import csv
import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .analytics import format_value
from .baselines import REG_GRID, fit_lasso, fit_ridge, predict_history
from .dprr import DprrConfig, fit
from .features import Dataset
from .stats import TTestResult, paired_t_test

log = logging.getLogger(__name__)

METHODS = ("p1", "pk", "rg", "ls", "pd", "dprr")
BETA_SWEEP_GRID = (0.001, 0.01, 0.05, 0.1, 0.5, 1.0, 10.0, 100.0, 1000.0)
TEST_RATIOS = (50, 70, 90)
K_GRID = tuple(range(1, 9))
DPRR_BETA_GRID = (0.01, 0.05, 0.1, 0.5, 1.0)


class SplitError(ValueError):
    pass


def _check_pair(d, d_hat) -> tuple[np.ndarray, np.ndarray]:
    d = np.asarray(d, dtype=float)
    d_hat = np.asarray(d_hat, dtype=float)
    if d.shape != d_hat.shape:
        raise ValueError(f"length mismatch: {d.shape} vs {d_hat.shape}")
    if d.size == 0:
        raise ValueError("cannot score an empty set")
    return d, d_hat


def mae(d, d_hat) -> float:
    d, d_hat = _check_pair(d, d_hat)
    return float(np.mean(np.abs(d - d_hat)))


def rmse(d, d_hat) -> float:
    d, d_hat = _check_pair(d, d_hat)
    return float(np.sqrt(np.mean((d - d_hat) ** 2)))


def derive_seed(*parts: int) -> int:
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


def sample_split(dataset: Dataset, train_size: int, test_ratio_percent: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Disjoint uniform train/test row indices; test size = train_size * ratio / 100."""
    n_test = int(round(train_size * test_ratio_percent / 100.0))
    if train_size < 1 or n_test < 1:
        raise SplitError("train and test sets must be nonempty")
    if train_size + n_test > len(dataset):
        raise SplitError(f"need {train_size + n_test} rows for this split, dataset has {len(dataset)}")
    perm = np.random.default_rng(seed).permutation(len(dataset))
    return np.sort(perm[:train_size]), np.sort(perm[train_size : train_size + n_test])


# -- method adapters ---------------------------------------------------------------
# Each adapter maps (standardized train, standardized test, params) -> test predictions.

def _p1(train: Dataset, test: Dataset, params: Mapping) -> np.ndarray:
    return predict_history(_histories(test), 1, float(train.y.mean()))


def _pk(train: Dataset, test: Dataset, params: Mapping) -> np.ndarray:
    return predict_history(_histories(test), int(params["k"]), float(train.y.mean()))


def _rg(train: Dataset, test: Dataset, params: Mapping) -> np.ndarray:
    return fit_ridge(train, float(params["alpha"])).predict(test.X)


def _ls(train: Dataset, test: Dataset, params: Mapping) -> np.ndarray:
    return fit_lasso(train, float(params["lam"])).predict(test.X)


def _dprr_like(pin: bool):
    def run(train: Dataset, test: Dataset, params: Mapping) -> np.ndarray:
        cfg = params["config"]
        if "beta" in params:
            cfg = replace(cfg, beta=float(params["beta"]))
        model = fit(train, config=cfg, pin_w=pin)
        return model.predict(test.X, test.v)

    return run


def _histories(ds: Dataset) -> list:
    if ds.histories is None:
        raise ValueError("P1/Pk need per-row delay histories (build the dataset from a graph)")
    return ds.histories


ADAPTERS: dict[str, Callable] = {
    "p1": _p1,
    "pk": _pk,
    "rg": _rg,
    "ls": _ls,
    "pd": _dprr_like(True),
    "dprr": _dprr_like(False),
}


def cross_validate(
    dataset: Dataset,
    method: str | Callable,
    param_grid: Mapping[str, Sequence],
    folds: int = 5,
    seed: int = 0,
    fixed: Mapping | None = None,
) -> dict:
    """Grid point with the lowest mean held-out MAE over ``folds`` folds.

    ``dataset`` must already be standardized if the method needs it. Ties
    go to the lexicographically smallest parameter values.
    """
    if folds < 2:
        raise ValueError("folds must be >= 2")
    if len(dataset) < folds:
        raise ValueError("fewer rows than folds")
    run = ADAPTERS[method] if isinstance(method, str) else method
    names = sorted(param_grid)
    points = sorted(itertools.product(*(sorted(param_grid[k]) for k in names)))
    if len(points) == 1:
        return dict(zip(names, points[0]))
    fold_of = np.random.default_rng(seed).permutation(len(dataset)) % folds
    best, best_score = None, math.inf
    for point in points:
        params = {**(fixed or {}), **dict(zip(names, point))}
        errs = []
        for f in range(folds):
            tr = dataset.subset(np.flatnonzero(fold_of != f))
            te = dataset.subset(np.flatnonzero(fold_of == f))
            errs.append(mae(te.y, run(tr, te, params)))
        score = float(np.mean(errs))
        if score < best_score:
            best, best_score = dict(zip(names, point)), score
    return best


# -- benchmark ---------------------------------------------------------------------

@dataclass
class TrialRecord:
    method: str
    ratio: float
    trial: int
    mae: float
    rmse: float
    ok: bool = True
    error: str = ""
    params: str = ""


@dataclass
class EvalReport:
    config: dict
    records: list[TrialRecord] = field(default_factory=list)

    def methods(self) -> list[str]:
        seen = []
        for r in self.records:
            if r.method not in seen:
                seen.append(r.method)
        return seen

    def ratios(self) -> list[float]:
        return sorted({r.ratio for r in self.records})

    def values(self, method: str, ratio: float, metric: str = "mae") -> list[float]:
        return [getattr(r, metric) for r in self.records if r.method == method and r.ratio == ratio and r.ok]

    def mean(self, method: str, ratio: float, metric: str = "mae") -> float:
        v = self.values(method, ratio, metric)
        return float(np.mean(v)) if v else float("nan")

    def t_test(self, method: str, ratio: float, metric: str = "mae", against: str = "dprr") -> TTestResult | None:
        """Paired t-test over trials where both methods succeeded."""
        a = {r.trial: getattr(r, metric) for r in self.records if r.method == against and r.ratio == ratio and r.ok}
        b = {r.trial: getattr(r, metric) for r in self.records if r.method == method and r.ratio == ratio and r.ok}
        common = sorted(set(a) & set(b))
        if method == against or len(common) < 2:
            return None
        return paired_t_test([a[t] for t in common], [b[t] for t in common])

    def summary_rows(self) -> list[tuple]:
        rows = []
        for ratio in self.ratios():
            for m in self.methods():
                tt_mae = self.t_test(m, ratio, "mae")
                tt_rmse = self.t_test(m, ratio, "rmse")
                failed = sum(1 for r in self.records if r.method == m and r.ratio == ratio and not r.ok)
                rows.append(
                    (
                        ratio,
                        m,
                        self.mean(m, ratio, "mae"),
                        self.mean(m, ratio, "rmse"),
                        len(self.values(m, ratio)),
                        failed,
                        float("nan") if tt_mae is None else tt_mae.p_value,
                        float("nan") if tt_rmse is None else tt_rmse.p_value,
                    )
                )
        return rows

    SUMMARY_HEADER = ("test_ratio", "method", "mae", "rmse", "trials_ok", "trials_failed", "p_mae_vs_dprr", "p_rmse_vs_dprr")
    TRIALS_HEADER = ("test_ratio", "trial", "method", "mae", "rmse", "ok", "params", "error")

    def write(self, trials_path: str | Path, summary_path: str | Path) -> None:
        with open(trials_path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.TRIALS_HEADER)
            for r in self.records:
                w.writerow([format_value(x) for x in (r.ratio, r.trial, r.method, r.mae, r.rmse, int(r.ok), r.params, r.error)])
        with open(summary_path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.SUMMARY_HEADER)
            for row in self.summary_rows():
                w.writerow([format_value(x) for x in row])


@dataclass(frozen=True)
class BenchmarkSettings:
    train_size: int = 2000
    ratios: tuple = TEST_RATIOS
    trials: int = 10
    seed: int = 0
    cv_folds: int = 5
    dprr: DprrConfig = DprrConfig()
    tune_dprr_beta: bool = True
    dprr_beta_grid: tuple = DPRR_BETA_GRID
    reg_grid: tuple = REG_GRID
    k_grid: tuple = K_GRID
    threads: int = 1


def _standardize_pair(train: Dataset, test: Dataset) -> tuple[Dataset, Dataset]:
    train = train.raw()
    test = test.raw()
    tr = train.standardized()
    return tr, test.standardized(tr.scaler)


def _tune_dprr_betas(dataset: Dataset, methods: Sequence[str], s: BenchmarkSettings) -> dict:
    """Pick beta for DPRR and PD once, by CV on the first split's training rows."""
    out = {}
    if not s.tune_dprr_beta:
        return out
    tr_idx, _ = sample_split(dataset, s.train_size, s.ratios[0], derive_seed(s.seed, 0, 0))
    train = dataset.raw().subset(tr_idx).standardized()
    for m in ("dprr", "pd"):
        if m in methods:
            best = cross_validate(
                train, m, {"beta": s.dprr_beta_grid}, folds=s.cv_folds,
                seed=derive_seed(s.seed, 1), fixed={"config": s.dprr},
            )
            out[m] = best["beta"]
            log.info("cross-validated beta for %s: %g", m, best["beta"])
    return out


def _run_trial(dataset: Dataset, methods: Sequence[str], ratio: float, trial: int, s: BenchmarkSettings, betas: dict) -> list[TrialRecord]:
    split_seed = derive_seed(s.seed, int(round(ratio * 1000)), trial)
    tr_idx, te_idx = sample_split(dataset, s.train_size, ratio, split_seed)
    train, test = _standardize_pair(dataset.subset(tr_idx), dataset.subset(te_idx))
    cv_seed = derive_seed(split_seed, 7)
    out = []
    for m in methods:
        try:
            if m == "p1":
                params = {}
            elif m == "pk":
                params = cross_validate(train, "pk", {"k": s.k_grid}, s.cv_folds, cv_seed)
            elif m == "rg":
                params = cross_validate(train, "rg", {"alpha": s.reg_grid}, s.cv_folds, cv_seed)
            elif m == "ls":
                params = cross_validate(train, "ls", {"lam": s.reg_grid}, s.cv_folds, cv_seed)
            else:
                params = {"beta": betas.get(m, s.dprr.beta)}
            run_params = {**params, "config": s.dprr} if m in ("pd", "dprr") else params
            pred = ADAPTERS[m](train, test, run_params)
            if not np.all(np.isfinite(pred)):
                raise FloatingPointError("non-finite predictions")
            desc = ";".join(f"{k}={format_value(v)}" for k, v in sorted(params.items()))
            out.append(TrialRecord(m, ratio, trial, mae(test.y, pred), rmse(test.y, pred), params=desc))
        except Exception as exc:  # recorded per trial, excluded from the means
            log.warning("method %s failed on ratio %s trial %d: %s", m, ratio, trial, exc)
            out.append(TrialRecord(m, ratio, trial, float("nan"), float("nan"), ok=False, error=f"{type(exc).__name__}: {exc}"))
    return out


def run_benchmark(dataset: Dataset, methods: Sequence[str] = METHODS, settings: BenchmarkSettings = BenchmarkSettings()) -> EvalReport:
    """Repeat (split, fit, score) ``trials`` times per test ratio, same rows for every method."""
    if not methods:
        raise ValueError("need at least one method")
    unknown = [m for m in methods if m not in ADAPTERS]
    if unknown:
        raise ValueError(f"unknown methods: {', '.join(unknown)}")
    if dataset.y is None:
        raise ValueError("benchmark needs a labelled dataset")
    betas = _tune_dprr_betas(dataset, methods, settings)
    jobs = [(ratio, trial) for ratio in settings.ratios for trial in range(settings.trials)]
    if settings.threads > 1:
        with ThreadPoolExecutor(max_workers=settings.threads) as pool:
            results = list(pool.map(lambda j: _run_trial(dataset, methods, j[0], j[1], settings, betas), jobs))
    else:
        results = [_run_trial(dataset, methods, r, t, settings, betas) for r, t in jobs]
    config = {k: v for k, v in asdict(settings).items() if k != "dprr"}
    config.update({f"dprr_{k}": v for k, v in asdict(settings.dprr).items()})
    config.update({f"cv_beta_{m}": b for m, b in betas.items()})
    config["methods"] = list(methods)
    config["rows"] = len(dataset)
    report = EvalReport(config=config)
    for recs in results:
        report.records.extend(recs)
    return report


def beta_sweep(
    dataset: Dataset,
    config: DprrConfig = DprrConfig(),
    beta_grid: Iterable[float] = BETA_SWEEP_GRID,
    train_size: int = 2000,
    test_ratio: float = 50,
    seed: int = 0,
) -> list[tuple[float, float, float]]:
    """DPRR test error for each beta on one fixed split: rows (beta, MAE, RMSE)."""
    grid = list(beta_grid)
    if not grid:
        raise ValueError("beta grid is empty")
    tr_idx, te_idx = sample_split(dataset, train_size, test_ratio, derive_seed(seed, int(round(test_ratio * 1000)), 0))
    train, test = _standardize_pair(dataset.subset(tr_idx), dataset.subset(te_idx))
    rows = []
    for b in grid:
        model = fit(train, config=replace(config, beta=float(b)))
        pred = model.predict(test.X, test.v)
        rows.append((float(b), mae(test.y, pred), rmse(test.y, pred)))
    return rows
