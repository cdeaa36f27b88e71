import numpy as np
import pytest
from sklearn.linear_model import Lasso

from recipdelay.analytics import ReciprocalRelation as R
from recipdelay.analytics import sequential_pk_error
from recipdelay.baselines import (
    LinearModel,
    fit_lasso,
    fit_ridge,
    lasso_duality_gap,
    lasso_objective,
    predict_history,
    predict_p1,
    predict_pk,
)
from recipdelay.dprr import load_model, save_model
from recipdelay import kernels

import oracles

backends = ["python"] + (["cython"] if kernels.compiled_backend is not None else [])


def ds_from(X, y):
    return oracles.make_dataset(X, y, np.arange(len(y)))


def test_history_predictors():
    assert predict_p1([2, 4, 6], 3.2) == 6
    assert predict_p1([], 3.2) == 3.2
    assert predict_pk([2, 4, 6], 2, 0) == 5
    assert predict_pk([7], 5, 0) == 7
    assert predict_pk([], 3, 1.5) == 1.5
    with pytest.raises(ValueError):
        predict_pk([1], 0, 0)


def test_pk_pooled_error_matches_analytics():
    rng = np.random.default_rng(0)
    rels, t = [], 0
    for v in range(20):
        for d in rng.poisson(5, size=int(rng.integers(3, 12))):
            t += 1
            rels.append(R(f"u{t}", f"v{v}", t, t + int(d), int(d)))
    rels.sort(key=lambda r: (r.t2, r.t1))
    seqs = {}
    for r in rels:
        seqs.setdefault(r.v, []).append(r.delay)
    for k in (1, 3, 5):
        errs = []
        for seq in seqs.values():
            for i in range(k, len(seq)):
                errs.append(seq[i] - predict_pk(seq[:i], k, 0.0))
        _, mae, _, n = sequential_pk_error(rels, [k], delay_cutoff=50)[0]
        assert n == len(errs) and mae == pytest.approx(np.mean(np.abs(errs)), rel=1e-12)
    assert list(predict_history([[1, 2, 3], []], 1, 9.0)) == [predict_p1([1, 2, 3], 9), 9.0]


def test_ridge_hand_example():
    m = fit_ridge(ds_from([[1.0]], [2.0]), alpha=1.0)
    assert m.coef[0] == pytest.approx(1.0, abs=1e-15)


def test_ridge_interpolates_with_zero_alpha():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(4, 4))
    y = rng.normal(size=4)
    np.testing.assert_allclose(fit_ridge(ds_from(X, y), 0.0).coef, np.linalg.solve(X, y), atol=1e-10)


def test_ridge_gradient_vanishes():
    rng = np.random.default_rng(1)
    X, y = rng.normal(size=(30, 5)), rng.normal(size=30)
    w = fit_ridge(ds_from(X, y), 0.7).coef

    def f(v):
        r = X @ v - y
        return r @ r + 0.7 * v @ v

    h = 1e-6
    fd = np.array([(f(w + h * e) - f(w - h * e)) / (2 * h) for e in np.eye(5)])
    assert np.max(np.abs(fd)) < 1e-6


@pytest.mark.parametrize("backend", backends)
def test_lasso_threshold_gives_zero(backend):
    rng = np.random.default_rng(2)
    X, y = rng.normal(size=(40, 6)), rng.normal(size=40)
    lam = 2 * np.max(np.abs(X.T @ y))
    assert not fit_lasso(ds_from(X, y), lam, backend=backend).coef.any()
    assert fit_lasso(ds_from(X, y), 0.99 * lam, backend=backend).coef.any()


@pytest.mark.parametrize("backend", backends)
def test_lasso_zero_lambda_is_least_squares(backend):
    rng = np.random.default_rng(3)
    X, y = rng.normal(size=(40, 6)), rng.normal(size=40)
    np.testing.assert_allclose(fit_lasso(ds_from(X, y), 0.0, tol=1e-13, backend=backend).coef,
                               fit_ridge(ds_from(X, y), 0.0).coef, atol=1e-6)


@pytest.mark.parametrize("seed", range(4))
def test_lasso_matches_sklearn(seed):
    rng = np.random.default_rng(seed)
    X, y = rng.normal(size=(60, 8)), rng.normal(size=60) + X_col(rng)
    lam = 5.0
    ours = fit_lasso(ds_from(X, y), lam, tol=1e-12).coef
    # sklearn minimizes ||y - Xw||^2 / (2n) + a ||w||_1, the same problem at a = lam / (2n)
    ref = Lasso(alpha=lam / (2 * len(y)), fit_intercept=False, tol=1e-14, max_iter=100_000).fit(X, y).coef_
    np.testing.assert_allclose(ours, ref, atol=1e-6)


def X_col(rng):
    return 3 * rng.normal()


def test_lasso_dominates_perturbations():
    rng = np.random.default_rng(4)
    X, y = rng.normal(size=(50, 7)), rng.normal(size=50)
    m = fit_lasso(ds_from(X, y), 3.0)
    assert m.gap <= 1e-6 * float(y @ y)
    base = lasso_objective(X, y, m.coef, 3.0)
    for _ in range(100):
        assert base <= lasso_objective(X, y, m.coef + rng.normal(scale=0.05, size=7), 3.0)


def test_lasso_collinear_columns_converge():
    rng = np.random.default_rng(5)
    a = rng.normal(size=200)
    X = np.column_stack([a, a + 1e-3 * rng.normal(size=200), rng.normal(size=200)])
    y = 2 * a + rng.normal(size=200)
    m = fit_lasso(ds_from(X, y), 0.1)
    assert lasso_duality_gap(X, y, m.coef, 0.1) <= 1e-6 * float(y @ y)


@pytest.mark.skipif(len(backends) < 2, reason="compiled kernels not built")
def test_lasso_backends_agree():
    rng = np.random.default_rng(6)
    X, y = rng.normal(size=(80, 9)), rng.normal(size=80)
    a = fit_lasso(ds_from(X, y), 2.0, backend="python")
    b = fit_lasso(ds_from(X, y), 2.0, backend="cython")
    assert a.iterations == b.iterations
    np.testing.assert_allclose(a.coef, b.coef, atol=1e-12)


def test_linear_model_clamps_and_round_trips(tmp_path):
    m = LinearModel("ridge", np.array([1.0, -2.0]), 1.0)
    np.testing.assert_array_equal(m.predict([[1.0, 0.0], [0.0, 1.0]]), [1.0, 0.0])
    path = tmp_path / "r.json"
    save_model(path, m)
    back = load_model(path)
    assert isinstance(back, LinearModel) and np.array_equal(back.coef, m.coef)
