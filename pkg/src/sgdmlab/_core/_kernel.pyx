# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled batch engine for quadratic objectives with additive noise.

Same contract as the pure-numpy fallback: per-trial momentum recursions with
summary statistics written into caller-allocated arrays.  The trial loop and
the per-iteration linear algebra run in C, which pays off when many short
trajectories are simulated (small d, large trial counts).
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def simulate_quadratic_additive(
    double[:, ::1] A,
    double[::1] b,
    double[::1] x0,
    double[::1] alphas,
    double[::1] betas,
    double a1,
    double[:, :, ::1] noise,
    double[:, ::1] f_x,
    double[:, ::1] g_norm2,
    double[:, ::1] step_norm2,
    double[:, ::1] m_resid2,
    double[:, ::1] f_z,
):
    cdef Py_ssize_t T = noise.shape[0]
    cdef Py_ssize_t K = noise.shape[1]
    cdef Py_ssize_t d = noise.shape[2]
    cdef Py_ssize_t t, k, i, j
    cdef double bk, ak, gi, zi, acc_fx, acc_fz, acc_g2, acc_m2, acc_r2, av, ri

    buf = np.empty((4, d), dtype=np.float64)
    cdef double[:, ::1] work = buf
    cdef double[::1] x = work[0]
    cdef double[::1] m = work[1]
    cdef double[::1] S = work[2]
    cdef double[::1] g = work[3]

    for t in range(T):
        for i in range(d):
            x[i] = x0[i]
            m[i] = 0.0
            S[i] = 0.0
        for k in range(K):
            ak = alphas[k]
            bk = betas[k]
            acc_fx = 0.0
            acc_fz = 0.0
            acc_g2 = 0.0
            for i in range(d):
                av = 0.0
                zi = 0.0
                for j in range(d):
                    av += A[i, j] * x[j]
                    zi += A[i, j] * (x[j] - a1 * m[j])
                gi = av - b[i]
                g[i] = gi
                acc_g2 += gi * gi
                acc_fx += 0.5 * x[i] * av - b[i] * x[i]
                acc_fz += 0.5 * (x[i] - a1 * m[i]) * zi - b[i] * (x[i] - a1 * m[i])
            f_x[t, k] = acc_fx
            f_z[t, k] = acc_fz
            g_norm2[t, k] = acc_g2
            acc_m2 = 0.0
            acc_r2 = 0.0
            for i in range(d):
                m[i] = bk * m[i] + (1.0 - bk) * (g[i] + noise[t, k, i])
                S[i] = bk * S[i] + (1.0 - bk) * g[i]
                ri = m[i] - S[i]
                acc_r2 += ri * ri
                acc_m2 += m[i] * m[i]
            m_resid2[t, k] = acc_r2
            step_norm2[t, k] = ak * ak * acc_m2
            for i in range(d):
                x[i] = x[i] - ak * m[i]
        acc_fz = 0.0
        for i in range(d):
            zi = 0.0
            for j in range(d):
                zi += A[i, j] * (x[j] - a1 * m[j])
            acc_fz += 0.5 * (x[i] - a1 * m[i]) * zi - b[i] * (x[i] - a1 * m[i])
        f_z[t, K] = acc_fz
