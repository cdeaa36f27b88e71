"""Pure-numpy ADMM and Weiszfeld kernels.

Reference implementation and import-time fallback for ``_kernels_ext``.
Both expose the same functions with the same in-place semantics.

Pair layout: ordered in-group pairs are stored so that pair ``2q`` is
``(i, j)`` and pair ``2q + 1`` is ``(j, i)``; ``pair_owner[p]`` is the row
whose copy ``z[p]`` is. ``owned_ptr``/``owned_idx`` list each row's pairs
in CSR form.
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"


def row_pair_sums(V: np.ndarray, owned_ptr: np.ndarray, owned_idx: np.ndarray, n: int) -> np.ndarray:
    """Per-row sums of pair vectors ``V[p]`` over the pairs each row owns."""
    out = np.zeros((n, V.shape[1]))
    if len(owned_idx) == 0:
        return out
    m = np.diff(owned_ptr)
    rows = np.flatnonzero(m)
    out[rows] = np.add.reduceat(V[owned_idx], owned_ptr[rows], axis=0)
    return out


def update_a(X, y, xx, owned_ptr, owned_idx, m, Z, U, w, rho, out=None):
    """Row-wise minimizer of ``(x.a - y)^2 + rho/2 * sum_j ||a - z_ij - w + u_ij||^2``.

    Rows without partners get ``w`` plus the minimum-norm localized
    correction that zeroes their residual.
    """
    n, d = X.shape
    a = np.empty((n, d)) if out is None else out
    paired = m > 0
    if paired.any():
        s = row_pair_sums(Z - U, owned_ptr, owned_idx, n)[paired]
        xp = X[paired]
        c = rho * m[paired].astype(float)
        b = 2.0 * y[paired, None] * xp + rho * (s + m[paired, None] * w)
        # Sherman-Morrison on (2 x x^T + c I)
        coef = 2.0 * np.einsum("ij,ij->i", xp, b) / (c + 2.0 * xx[paired])
        a[paired] = (b - coef[:, None] * xp) / c[:, None]
    iso = ~paired
    if iso.any():
        xi = X[iso]
        r = y[iso] - xi @ w
        nz = xx[iso] > 0
        scale = np.where(nz, r / np.where(nz, xx[iso], 1.0), 0.0)
        a[iso] = w + scale[:, None] * xi
    return a


def update_w(A, Z, U, pair_owner, alpha, rho):
    """Minimizer of ``alpha ||w||^2 + rho/2 * sum_p ||a_owner - z_p - w + u_p||^2``."""
    P = len(pair_owner)
    C = A[pair_owner] - Z + U
    return rho * C.sum(axis=0) / (2.0 * alpha + rho * P)


def update_z(A, U, w, pair_owner, beta, rho):
    """Joint prox of ``2 beta ||z_ij - z_ji||`` for every unordered pair."""
    C = A[pair_owner] - w + U
    ci = C[0::2]
    cj = C[1::2]
    diff = ci - cj
    nrm = np.sqrt(np.einsum("ij,ij->i", diff, diff))
    with np.errstate(divide="ignore", invalid="ignore"):
        theta = np.where(nrm > 0, np.maximum(0.0, 1.0 - 4.0 * beta / (rho * nrm)), 0.0)
    mid = 0.5 * (ci + cj)
    Z = np.empty_like(C)
    Z[0::2] = theta[:, None] * ci + (1.0 - theta[:, None]) * mid
    Z[1::2] = theta[:, None] * cj + (1.0 - theta[:, None]) * mid
    return Z


def update_u(U, A, w, Z, pair_owner):
    """Scaled dual ascent; returns the constraint residual ``a - w - z``."""
    R = A[pair_owner] - w - Z
    U += R
    return R


def admm_step(X, y, xx, owned_ptr, owned_idx, pair_owner, m, A, Z, U, w, alpha, rho, beta, pinned):
    """One a -> w -> z -> u sweep, in place. Returns (primal, dual) residual norms."""
    update_a(X, y, xx, owned_ptr, owned_idx, m, Z, U, w, rho, out=A)
    if not pinned and len(pair_owner):
        w[:] = update_w(A, Z, U, pair_owner, alpha, rho)
    Znew = update_z(A, U, w, pair_owner, beta, rho)
    dual = rho * float(np.linalg.norm(Znew - Z))
    Z[:] = Znew
    R = update_u(U, A, w, Z, pair_owner)
    return float(np.linalg.norm(R)), dual


def weiszfeld(points: np.ndarray, weights: np.ndarray, tol: float, max_iter: int):
    """Weighted geometric median by Weiszfeld with the Vardi-Zhang anchor fix.

    ``points`` must be distinct rows; ``weights`` are their multiplicities.
    Returns (median, iterations).
    """
    k = len(points)
    if k == 1:
        return points[0].copy(), 0
    if k == 2:
        return 0.5 * (points[0] + points[1]), 0
    y = (weights[:, None] * points).sum(axis=0) / weights.sum()
    for it in range(1, max_iter + 1):
        diff = points - y
        dist = np.sqrt(np.einsum("ij,ij->i", diff, diff))
        at = dist == 0
        far = ~at
        inv = weights[far] / dist[far]
        T = (inv[:, None] * points[far]).sum(axis=0) / inv.sum()
        if at.any():
            eta = float(weights[at].sum())
            R = (inv[:, None] * diff[far]).sum(axis=0)
            r = float(np.linalg.norm(R))
            if r <= eta:
                return y, it
            frac = eta / r
            y_new = (1.0 - frac) * T + frac * y
        else:
            y_new = T
        step = float(np.linalg.norm(y_new - y))
        y = y_new
        if step <= tol:
            return y, it
    return y, max_iter


def _gram_gap(c, yy, lam, w, q):
    # duality gap of ||Xw - y||^2 + lam ||w||_1 from G = X'X, c = X'y, q = Gw
    cw = float(c @ w)
    rr = max(yy - 2.0 * cw + float(w @ q), 0.0)
    corr = 2.0 * float(np.max(np.abs(c - q))) if len(c) else 0.0
    scale = lam / corr if corr > lam else 1.0
    return rr + lam * float(np.abs(w).sum()) - (2.0 * scale * (yy - cw) - scale * scale * rr)


def lasso_cd(G, c, yy, lam, w, target, max_sweeps):
    """Cyclic coordinate descent in Gram form; updates ``w`` in place.

    Returns (sweeps, duality gap). Stops once the gap is <= ``target``.
    """
    d = len(w)
    q = G @ w
    gap = _gram_gap(c, yy, lam, w, q)
    sweeps = 0
    half = 0.5 * lam
    while gap > target and sweeps < max_sweeps:
        sweeps += 1
        for j in range(d):
            gjj = G[j, j]
            if gjj == 0.0:
                continue
            old = w[j]
            rho_j = c[j] - q[j] + gjj * old
            new = np.sign(rho_j) * max(abs(rho_j) - half, 0.0) / gjj
            if new != old:
                q += G[:, j] * (new - old)
                w[j] = new
        gap = _gram_gap(c, yy, lam, w, q)
    return sweeps, gap
