import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from recipdelay import evaluation as ev
from recipdelay.baselines import fit_pd
from recipdelay.dprr import DprrConfig, fit
from recipdelay.evaluation import BenchmarkSettings, EvalReport, cross_validate, mae, rmse, sample_split

import oracles

TIGHT = DprrConfig(eps_primal=1e-8, eps_dual=1e-8, max_iterations=100_000)


def test_metric_examples():
    assert mae([1, 3], [2, 5]) == 1.5
    assert rmse([1, 3], [2, 5]) == math.sqrt(2.5)
    assert mae([2, 2], [2, 2]) == rmse([2, 2], [2, 2]) == 0.0


def test_metric_input_checks():
    with pytest.raises(ValueError):
        mae([1, 2], [1])
    with pytest.raises(ValueError):
        rmse([], [])


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.floats(-1e6, 1e6), st.floats(-1e6, 1e6)), min_size=1, max_size=50))
def test_mae_never_exceeds_rmse(pairs):
    d, dh = zip(*pairs)
    # errors below ~1e-154 underflow to zero when squared
    assert mae(d, dh) <= rmse(d, dh) * (1 + 1e-12) + 1e-150


def toy_dataset(n=120, n_groups=4, seed=0, y=None):
    rng = np.random.default_rng(seed)
    X = np.column_stack([rng.normal(size=(n, 5)), np.ones(n)])
    labels = np.repeat(np.arange(n_groups), n // n_groups)
    ds = oracles.make_dataset(X, rng.poisson(5, size=n).astype(float) if y is None else y, labels)
    ds.histories = [[4, 4]] * n
    return ds


def test_split_sizes_and_disjointness():
    ds = toy_dataset(n=2000, n_groups=10)
    tr, te = sample_split(ds, 1000, 50, seed=3)
    assert len(tr) == 1000 and len(te) == 500
    assert len(np.union1d(tr, te)) == 1500
    assert not np.intersect1d(tr, te).size
    tr2, te2 = sample_split(ds, 1000, 50, seed=3)
    assert np.array_equal(tr, tr2) and np.array_equal(te, te2)
    with pytest.raises(ev.SplitError):
        sample_split(ds, 1500, 50, seed=0)


def test_cross_validate_single_point_and_determinism():
    ds = toy_dataset()
    assert cross_validate(ds, "rg", {"alpha": [3.0]}) == {"alpha": 3.0}
    grid = {"alpha": [0.01, 1.0, 100.0]}
    assert cross_validate(ds, "rg", grid, seed=4) == cross_validate(ds, "rg", grid, seed=4)
    with pytest.raises(ValueError):
        cross_validate(ds, "rg", grid, folds=1)


def test_cross_validate_ties_prefer_smallest():
    ds = toy_dataset()
    constant = lambda train, test, params: np.zeros(len(test))  # noqa: E731
    assert cross_validate(ds, constant, {"a": [5, 1, 3], "b": [2, 0]}) == {"a": 1, "b": 0}


def test_cross_validate_recovers_generating_alpha():
    # Bayesian ridge data: w ~ N(0, I / alpha_true), noise N(0, 1) makes alpha_true optimal
    grid = [10.0**e for e in range(-3, 4)]
    picks = []
    for seed in range(9):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(40, 20))
        w = rng.normal(scale=1 / math.sqrt(10.0), size=20)
        y = X @ w + rng.normal(size=40)
        ds = oracles.make_dataset(X, y, np.arange(40))
        picks.append(grid.index(cross_validate(ds, "rg", {"alpha": grid}, seed=seed)["alpha"]))
    assert abs(np.median(picks) - grid.index(10.0)) <= 1


def test_constant_delays_are_predicted_exactly():
    ds = toy_dataset(y=np.full(120, 4.0))
    s = BenchmarkSettings(train_size=60, ratios=(50,), trials=2, tune_dprr_beta=False, dprr=TIGHT)
    report = ev.run_benchmark(ds, ev.METHODS, s)
    for m in ev.METHODS:
        assert report.mean(m, 50) < 1e-3


def test_benchmark_structure_and_csv(tmp_path):
    ds = toy_dataset(n=200)
    s = BenchmarkSettings(train_size=60, ratios=(50, 70, 90), trials=3, tune_dprr_beta=False,
                          dprr=DprrConfig(max_iterations=50))
    report = ev.run_benchmark(ds, ev.METHODS, s)
    assert len(report.records) == 3 * 3 * len(ev.METHODS)
    for m in ev.METHODS:
        for ratio in (50, 70, 90):
            assert len(report.values(m, ratio)) == 3
            assert report.mean(m, ratio, "mae") <= report.mean(m, ratio, "rmse")
    trials, summary = tmp_path / "t.csv", tmp_path / "s.csv"
    report.write(trials, summary)
    lines = summary.read_text().splitlines()
    assert lines[0] == ",".join(EvalReport.SUMMARY_HEADER)
    assert len(lines) == 1 + 3 * len(ev.METHODS)
    assert len(trials.read_text().splitlines()) == 1 + len(report.records)


def test_same_rows_for_every_method():
    ds = toy_dataset(n=200)
    seen = {}

    def spy(name):
        def run(train, test, params):
            seen.setdefault(name, []).append((tuple(train.u), tuple(test.u)))
            return np.zeros(len(test))
        return run

    orig = dict(ev.ADAPTERS)
    try:
        ev.ADAPTERS.update({"p1": spy("p1"), "rg": spy("rg")})
        ev.run_benchmark(ds, ["p1", "rg"], BenchmarkSettings(train_size=50, ratios=(50,), trials=2,
                                                             reg_grid=(1.0,)))
    finally:
        ev.ADAPTERS.clear()
        ev.ADAPTERS.update(orig)
    assert seen["p1"] == seen["rg"]


def test_failures_are_flagged_and_excluded():
    ds = toy_dataset(n=200)
    calls = {"n": 0}

    def flaky(train, test, params):
        calls["n"] += 1
        if calls["n"] == 1:
            raise FloatingPointError("boom")
        return np.full(len(test), 5.0)

    orig = dict(ev.ADAPTERS)
    try:
        ev.ADAPTERS["p1"] = flaky
        report = ev.run_benchmark(ds, ["p1"], BenchmarkSettings(train_size=50, ratios=(50,), trials=3))
    finally:
        ev.ADAPTERS.clear()
        ev.ADAPTERS.update(orig)
    bad = [r for r in report.records if not r.ok]
    assert len(bad) == 1 and "boom" in bad[0].error
    assert len(report.values("p1", 50)) == 2 and np.isfinite(report.mean("p1", 50))
    assert report.summary_rows()[0][5] == 1


def test_benchmark_rejects_bad_methods():
    with pytest.raises(ValueError):
        ev.run_benchmark(toy_dataset(), [])
    with pytest.raises(ValueError):
        ev.run_benchmark(toy_dataset(), ["nope"])


def test_threads_do_not_change_results():
    ds = toy_dataset(n=200)
    s = BenchmarkSettings(train_size=60, ratios=(50, 90), trials=2, tune_dprr_beta=False,
                          dprr=DprrConfig(max_iterations=30))
    a = ev.run_benchmark(ds, ["rg", "dprr"], s)
    b = ev.run_benchmark(ds, ["rg", "dprr"], BenchmarkSettings(**{**s.__dict__, "threads": 3}))
    assert [(r.method, r.mae, r.rmse) for r in a.records] == [(r.method, r.mae, r.rmse) for r in b.records]


def test_beta_sweep_rows(small_dataset):
    rows = ev.beta_sweep(small_dataset, DprrConfig(max_iterations=40), train_size=300, test_ratio=50, seed=1)
    assert [r[0] for r in rows] == list(ev.BETA_SWEEP_GRID)
    assert all(r[1] <= r[2] for r in rows)
    with pytest.raises(ValueError):
        ev.beta_sweep(small_dataset, beta_grid=[])


def test_beta_zero_matches_decoupled_fit():
    # with beta = 0 both DPRR and PD reach the zero-loss decoupled optimum
    rng = np.random.default_rng(2)
    X, y, labels = oracles.random_instance(rng)
    ds = oracles.make_dataset(X, y, labels)
    cfg = DprrConfig(beta=0.0, eps_primal=1e-8, eps_dual=1e-8, max_iterations=100_000)
    d, p = fit(ds, config=cfg), fit_pd(ds, config=cfg)
    assert d.objective < 1e-6 and p.objective < 1e-6
    np.testing.assert_allclose(np.einsum("ij,ij->i", X, d.w + d.w_tilde), np.einsum("ij,ij->i", X, p.w_tilde), atol=1e-5)
