# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled t-SNE hot kernels: per-point perplexity binary search and the
embedding gradient. Semantics match fieldvae._kernels.numpy_impl exactly;
the loops here avoid the N x N temporaries of the numpy fallback."""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, fabs, log

cnp.import_array()

cdef double LOG2 = 0.6931471805599453
cdef double Q_FLOOR = 1e-12
cdef double INF = float("inf")


def conditional_probs(double[:, ::1] d2, double target_entropy_bits,
                      double tol=1e-5, int max_iter=100):
    cdef Py_ssize_t n = d2.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] P_arr = np.zeros((n, n))
    cdef cnp.ndarray[cnp.float64_t, ndim=1] betas_arr = np.ones(n)
    cdef double[:, ::1] P = P_arr
    cdef double[::1] betas = betas_arr
    cdef cnp.ndarray[cnp.float64_t, ndim=1] row_arr = np.empty(n)
    cdef double[::1] row = row_arr
    cdef Py_ssize_t i, j, it
    cdef int n_hit_cap = 0
    cdef double beta, lo, hi, s, pd, dmin, h_bits, diff, v
    cdef bint converged

    for i in range(n):
        dmin = INF
        for j in range(n):
            if j != i and d2[i, j] < dmin:
                dmin = d2[i, j]
        beta = 1.0
        lo = 0.0
        hi = INF
        converged = False
        for it in range(max_iter):
            s = 0.0
            pd = 0.0
            for j in range(n):
                if j == i:
                    row[j] = 0.0
                    continue
                v = exp(-beta * (d2[i, j] - dmin))
                row[j] = v
                s += v
                pd += v * (d2[i, j] - dmin)
            pd /= s
            h_bits = (log(s) + beta * pd) / LOG2
            diff = h_bits - target_entropy_bits
            if fabs(diff) <= tol:
                converged = True
                break
            if diff > 0.0:
                lo = beta
                beta = beta * 2.0 if hi == INF else 0.5 * (beta + hi)
            else:
                hi = beta
                beta = 0.5 * (beta + lo)
        if not converged:
            n_hit_cap += 1
        for j in range(n):
            P[i, j] = row[j] / s if j != i else 0.0
        betas[i] = beta
    return P_arr, betas_arr, n_hit_cap


def kl_grad(double[:, ::1] P, double[:, ::1] Y):
    cdef Py_ssize_t n = Y.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] W_arr = np.empty((n, n))
    cdef double[:, ::1] W = W_arr
    cdef cnp.ndarray[cnp.float64_t, ndim=2] grad_arr = np.zeros((n, 2))
    cdef double[:, ::1] grad = grad_arr
    cdef Py_ssize_t i, j
    cdef double dy0, dy1, w, s, q, pqw, kl, p

    s = 0.0
    for i in range(n):
        W[i, i] = 0.0
        for j in range(i + 1, n):
            dy0 = Y[i, 0] - Y[j, 0]
            dy1 = Y[i, 1] - Y[j, 1]
            w = 1.0 / (1.0 + dy0 * dy0 + dy1 * dy1)
            W[i, j] = w
            W[j, i] = w
            s += 2.0 * w

    kl = 0.0
    for i in range(n):
        for j in range(n):
            if j == i:
                continue
            w = W[i, j]
            p = P[i, j]
            pqw = (p - w / s) * w
            dy0 = Y[i, 0] - Y[j, 0]
            dy1 = Y[i, 1] - Y[j, 1]
            grad[i, 0] += 4.0 * pqw * dy0
            grad[i, 1] += 4.0 * pqw * dy1
            if p > 0.0:
                q = w / s
                if q < Q_FLOOR:
                    q = Q_FLOOR
                kl += p * log(p / q)
    return grad_arr, kl
