# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled ADMM sweep and Weiszfeld iteration.

Same contracts as ``recipdelay._kernels_py``; the Python module documents
the pair layout.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs

cnp.import_array()

BACKEND = "cython"


def admm_step(double[:, ::1] X, double[::1] y, double[::1] xx,
              cnp.int64_t[::1] owned_ptr, cnp.int64_t[::1] owned_idx,
              cnp.int64_t[::1] pair_owner, cnp.int64_t[::1] m,
              double[:, ::1] A, double[:, ::1] Z, double[:, ::1] U, double[::1] w,
              double alpha, double rho, double beta, bint pinned):
    cdef Py_ssize_t n = X.shape[0]
    cdef Py_ssize_t d = X.shape[1]
    cdef Py_ssize_t P = pair_owner.shape[0]
    cdef Py_ssize_t i, j, k, p, q, pi, pj
    cdef double c, xb, coef, r, nrm, theta, ci, cj, mid, zi, zj, s
    cdef double primal = 0.0, dual = 0.0
    cdef double[::1] b = np.empty(d)
    cdef double[::1] acc = np.empty(d)
    cdef double[::1] diff = np.empty(d)

    with nogil:
        # a-update
        for i in range(n):
            if m[i] > 0:
                c = rho * m[i]
                for k in range(d):
                    acc[k] = 0.0
                for j in range(owned_ptr[i], owned_ptr[i + 1]):
                    p = owned_idx[j]
                    for k in range(d):
                        acc[k] += Z[p, k] - U[p, k]
                xb = 0.0
                for k in range(d):
                    b[k] = 2.0 * y[i] * X[i, k] + rho * (acc[k] + m[i] * w[k])
                    xb += X[i, k] * b[k]
                coef = 2.0 * xb / (c + 2.0 * xx[i])
                for k in range(d):
                    A[i, k] = (b[k] - coef * X[i, k]) / c
            else:
                r = y[i]
                for k in range(d):
                    r -= X[i, k] * w[k]
                if xx[i] > 0:
                    r /= xx[i]
                else:
                    r = 0.0
                for k in range(d):
                    A[i, k] = w[k] + r * X[i, k]

        # w-update
        if not pinned and P > 0:
            for k in range(d):
                acc[k] = 0.0
            for p in range(P):
                i = pair_owner[p]
                for k in range(d):
                    acc[k] += A[i, k] - Z[p, k] + U[p, k]
            for k in range(d):
                w[k] = rho * acc[k] / (2.0 * alpha + rho * P)

        # z-update, one unordered pair at a time
        for q in range(P // 2):
            pi = 2 * q
            pj = pi + 1
            nrm = 0.0
            for k in range(d):
                diff[k] = (A[pair_owner[pi], k] - w[k] + U[pi, k]) - (A[pair_owner[pj], k] - w[k] + U[pj, k])
                nrm += diff[k] * diff[k]
            nrm = sqrt(nrm)
            if nrm > 0:
                theta = 1.0 - 4.0 * beta / (rho * nrm)
                if theta < 0:
                    theta = 0.0
            else:
                theta = 0.0
            for k in range(d):
                ci = A[pair_owner[pi], k] - w[k] + U[pi, k]
                cj = A[pair_owner[pj], k] - w[k] + U[pj, k]
                mid = 0.5 * (ci + cj)
                zi = theta * ci + (1.0 - theta) * mid
                zj = theta * cj + (1.0 - theta) * mid
                dual += (zi - Z[pi, k]) * (zi - Z[pi, k]) + (zj - Z[pj, k]) * (zj - Z[pj, k])
                Z[pi, k] = zi
                Z[pj, k] = zj

        # u-update
        for p in range(P):
            i = pair_owner[p]
            for k in range(d):
                r = A[i, k] - w[k] - Z[p, k]
                U[p, k] += r
                primal += r * r

    return sqrt(primal), rho * sqrt(dual)


def weiszfeld(double[:, ::1] points, double[::1] weights, double tol, Py_ssize_t max_iter):
    cdef Py_ssize_t kpts = points.shape[0]
    cdef Py_ssize_t d = points.shape[1]
    cdef Py_ssize_t i, k, it
    cdef double wsum, dist, inv, invsum, eta, rnorm, frac, step, t
    cdef cnp.ndarray[double, ndim=1] y_arr = np.empty(d)
    cdef double[::1] y = y_arr
    cdef double[::1] T = np.empty(d)
    cdef double[::1] R = np.empty(d)

    if kpts == 1:
        return np.asarray(points[0]).copy(), 0
    if kpts == 2:
        return 0.5 * (np.asarray(points[0]) + np.asarray(points[1])), 0

    wsum = 0.0
    for k in range(d):
        y[k] = 0.0
    for i in range(kpts):
        wsum += weights[i]
        for k in range(d):
            y[k] += weights[i] * points[i, k]
    for k in range(d):
        y[k] /= wsum

    for it in range(1, max_iter + 1):
        eta = 0.0
        invsum = 0.0
        for k in range(d):
            T[k] = 0.0
            R[k] = 0.0
        for i in range(kpts):
            dist = 0.0
            for k in range(d):
                t = points[i, k] - y[k]
                dist += t * t
            dist = sqrt(dist)
            if dist == 0:
                eta += weights[i]
                continue
            inv = weights[i] / dist
            invsum += inv
            for k in range(d):
                T[k] += inv * points[i, k]
                R[k] += inv * (points[i, k] - y[k])
        for k in range(d):
            T[k] /= invsum
        if eta > 0:
            rnorm = 0.0
            for k in range(d):
                rnorm += R[k] * R[k]
            rnorm = sqrt(rnorm)
            if rnorm <= eta:
                return y_arr, it
            frac = eta / rnorm
        else:
            frac = 0.0
        step = 0.0
        for k in range(d):
            t = (1.0 - frac) * T[k] + frac * y[k]
            step += (t - y[k]) * (t - y[k])
            y[k] = t
        if sqrt(step) <= tol:
            return y_arr, it
    return y_arr, max_iter


cdef double _gram_gap(double[:, ::1] G, double[::1] c, double yy, double lam,
                      double[::1] w, double[::1] q) noexcept nogil:
    cdef Py_ssize_t d = w.shape[0]
    cdef Py_ssize_t j
    cdef double cw = 0.0, wq = 0.0, l1 = 0.0, corr = 0.0, t, rr, scale
    for j in range(d):
        cw += c[j] * w[j]
        wq += w[j] * q[j]
        l1 += fabs(w[j])
        t = 2.0 * fabs(c[j] - q[j])
        if t > corr:
            corr = t
    rr = yy - 2.0 * cw + wq
    if rr < 0.0:
        rr = 0.0
    scale = lam / corr if corr > lam else 1.0
    return rr + lam * l1 - (2.0 * scale * (yy - cw) - scale * scale * rr)


def lasso_cd(double[:, ::1] G, double[::1] c, double yy, double lam,
             double[::1] w, double target, Py_ssize_t max_sweeps):
    cdef Py_ssize_t d = w.shape[0]
    cdef Py_ssize_t j, k, sweeps = 0
    cdef double gjj, old, rho_j, new, delta, half = 0.5 * lam, gap
    cdef double[::1] q = np.zeros(d)
    with nogil:
        for j in range(d):
            for k in range(d):
                q[j] += G[j, k] * w[k]
        gap = _gram_gap(G, c, yy, lam, w, q)
        while gap > target and sweeps < max_sweeps:
            sweeps += 1
            for j in range(d):
                gjj = G[j, j]
                if gjj == 0.0:
                    continue
                old = w[j]
                rho_j = c[j] - q[j] + gjj * old
                if rho_j > half:
                    new = (rho_j - half) / gjj
                elif rho_j < -half:
                    new = (rho_j + half) / gjj
                else:
                    new = 0.0
                if new != old:
                    delta = new - old
                    for k in range(d):
                        q[k] += G[k, j] * delta
                    w[j] = new
            gap = _gram_gap(G, c, yy, lam, w, q)
    return sweeps, gap
