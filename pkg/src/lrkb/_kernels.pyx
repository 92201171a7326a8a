# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled integration kernels (see _kernels_py.py for the contract).

Matrices here are desk scale (n up to a few hundred), so plain C loops beat
per-step NumPy dispatch by a wide margin; no BLAS linkage is needed.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, isfinite

cnp.import_array()

BACKEND_NAME = "compiled"


cdef void _mm(double[:, ::1] a, double[:, ::1] b, double[:, ::1] out,
              Py_ssize_t n, Py_ssize_t m, Py_ssize_t k) noexcept nogil:
    # out (n x k) = a (n x m) @ b (m x k)
    cdef Py_ssize_t i, j, l
    cdef double acc
    for i in range(n):
        for j in range(k):
            acc = 0.0
            for l in range(m):
                acc += a[i, l] * b[l, j]
            out[i, j] = acc


cdef void _mtm(double[:, ::1] a, double[:, ::1] b, double[:, ::1] out,
               Py_ssize_t n, Py_ssize_t m, Py_ssize_t k) noexcept nogil:
    # out (m x k) = a^T (m x n) @ b (n x k), a given as (n x m)
    cdef Py_ssize_t i, j, l
    cdef double acc
    for i in range(m):
        for j in range(k):
            acc = 0.0
            for l in range(n):
                acc += a[l, i] * b[l, j]
            out[i, j] = acc


cdef double _fro(double[:, ::1] a, Py_ssize_t n, Py_ssize_t m) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double acc = 0.0
    for i in range(n):
        for j in range(m):
            acc += a[i, j] * a[i, j]
    return sqrt(acc)


cdef double _oja_rhs(double[:, ::1] a, double[:, ::1] u, double[:, ::1] f,
                     double[:, ::1] au, double[:, ::1] w,
                     Py_ssize_t n, Py_ssize_t r) noexcept nogil:
    # f = (I - u u^T) a u; returns ||f||_F
    cdef Py_ssize_t i, j, l
    cdef double acc
    _mm(a, u, au, n, n, r)
    _mtm(u, au, w, n, r, r)
    for i in range(n):
        for j in range(r):
            acc = au[i, j]
            for l in range(r):
                acc -= u[i, l] * w[l, j]
            f[i, j] = acc
    return _fro(f, n, r)


cdef int _mgs(double[:, ::1] u, Py_ssize_t n, Py_ssize_t r) noexcept nogil:
    # In-place modified Gram-Schmidt; diagonal of the implicit R stays
    # positive, matching np.linalg.qr with the sign fix in the fallback.
    cdef Py_ssize_t i, j, l
    cdef double nrm, dot
    for j in range(r):
        nrm = 0.0
        for i in range(n):
            nrm += u[i, j] * u[i, j]
        nrm = sqrt(nrm)
        if not (nrm > 0.0 and isfinite(nrm)):
            return 1
        for i in range(n):
            u[i, j] /= nrm
        for l in range(j + 1, r):
            dot = 0.0
            for i in range(n):
                dot += u[i, j] * u[i, l]
            for i in range(n):
                u[i, l] -= dot * u[i, j]
    return 0


def oja_rk4(cnp.ndarray a_in, cnp.ndarray u0, double h, long max_steps,
            double tol_conv, long record_every):
    cdef double[:, ::1] a = np.ascontiguousarray(a_in, dtype=np.float64)
    cdef Py_ssize_t n = u0.shape[0]
    cdef Py_ssize_t r = u0.shape[1]
    cdef cnp.ndarray u_arr = np.ascontiguousarray(u0, dtype=np.float64).copy()
    cdef double[:, ::1] u = u_arr

    cdef long cap = max_steps // record_every + 2
    cdef cnp.ndarray frames_arr = np.empty((cap, n, r), dtype=np.float64)
    cdef cnp.ndarray res_arr = np.empty(cap, dtype=np.float64)
    cdef cnp.ndarray steps_arr = np.empty(cap, dtype=np.int64)
    cdef double[:, :, ::1] frames = frames_arr
    cdef double[::1] residuals = res_arr
    cdef long[::1] steps = steps_arr

    cdef double[:, ::1] k1 = np.empty((n, r))
    cdef double[:, ::1] k2 = np.empty((n, r))
    cdef double[:, ::1] k3 = np.empty((n, r))
    cdef double[:, ::1] k4 = np.empty((n, r))
    cdef double[:, ::1] ut = np.empty((n, r))
    cdef double[:, ::1] au = np.empty((n, r))
    cdef double[:, ::1] w = np.empty((r, r))

    cdef Py_ssize_t i, j
    cdef long k = 0, m = 0
    cdef int status = 0
    cdef double res

    with nogil:
        res = _oja_rhs(a, u, k1, au, w, n, r)
        frames[m, :, :] = u
        residuals[m] = res
        steps[m] = 0
        m += 1
        if res < tol_conv:
            status = 1
        while status == 0 and k < max_steps:
            _oja_rhs(a, u, k1, au, w, n, r)
            for i in range(n):
                for j in range(r):
                    ut[i, j] = u[i, j] + 0.5 * h * k1[i, j]
            _oja_rhs(a, ut, k2, au, w, n, r)
            for i in range(n):
                for j in range(r):
                    ut[i, j] = u[i, j] + 0.5 * h * k2[i, j]
            _oja_rhs(a, ut, k3, au, w, n, r)
            for i in range(n):
                for j in range(r):
                    ut[i, j] = u[i, j] + h * k3[i, j]
            _oja_rhs(a, ut, k4, au, w, n, r)
            for i in range(n):
                for j in range(r):
                    u[i, j] += (h / 6.0) * (
                        k1[i, j] + 2.0 * k2[i, j] + 2.0 * k3[i, j] + k4[i, j])
            if _mgs(u, n, r) != 0:
                status = 2
            k += 1
            if status == 0:
                res = _oja_rhs(a, u, k1, au, w, n, r)
                if not isfinite(res):
                    status = 2
                elif res < tol_conv:
                    status = 1
            if status != 0 or k % record_every == 0 or k == max_steps:
                frames[m, :, :] = u
                residuals[m] = res
                steps[m] = k
                m += 1
    return frames_arr[:m], res_arr[:m], steps_arr[:m], status, k


cdef double _ric_rhs(double[:, ::1] a, double[:, ::1] q, double[:, ::1] s,
                     double[:, ::1] p, double[:, ::1] f,
                     double[:, ::1] ap, double[:, ::1] sp,
                     Py_ssize_t kd) noexcept nogil:
    # f = a p + p a^T + q - p s p; returns ||f||_F
    cdef Py_ssize_t i, j, l
    cdef double acc
    _mm(a, p, ap, kd, kd, kd)
    _mm(s, p, sp, kd, kd, kd)
    for i in range(kd):
        for j in range(kd):
            acc = ap[i, j] + ap[j, i] + q[i, j]
            for l in range(kd):
                acc -= p[i, l] * sp[l, j]
            f[i, j] = acc
    return _fro(f, kd, kd)


def riccati_rk4(cnp.ndarray a_in, cnp.ndarray q_in, cnp.ndarray s_in,
                cnp.ndarray p0, double dt, long max_steps, double stop_tol,
                long record_every):
    cdef double[:, ::1] a = np.ascontiguousarray(a_in, dtype=np.float64)
    cdef double[:, ::1] q = np.ascontiguousarray(q_in, dtype=np.float64)
    cdef double[:, ::1] s = np.ascontiguousarray(s_in, dtype=np.float64)
    cdef Py_ssize_t kd = p0.shape[0]
    cdef cnp.ndarray p_arr = np.ascontiguousarray(p0, dtype=np.float64).copy()
    cdef double[:, ::1] p = p_arr

    cdef long cap = max_steps // record_every + 2
    cdef cnp.ndarray mats_arr = np.empty((cap, kd, kd), dtype=np.float64)
    cdef cnp.ndarray res_arr = np.empty(cap, dtype=np.float64)
    cdef cnp.ndarray steps_arr = np.empty(cap, dtype=np.int64)
    cdef double[:, :, ::1] mats = mats_arr
    cdef double[::1] residuals = res_arr
    cdef long[::1] steps = steps_arr

    cdef double[:, ::1] k1 = np.empty((kd, kd))
    cdef double[:, ::1] k2 = np.empty((kd, kd))
    cdef double[:, ::1] k3 = np.empty((kd, kd))
    cdef double[:, ::1] k4 = np.empty((kd, kd))
    cdef double[:, ::1] pt = np.empty((kd, kd))
    cdef double[:, ::1] ap = np.empty((kd, kd))
    cdef double[:, ::1] sp = np.empty((kd, kd))

    cdef Py_ssize_t i, j
    cdef long k = 0, m = 0
    cdef int status = 0
    cdef double res, pnorm2, tmp

    with nogil:
        res = _ric_rhs(a, q, s, p, k1, ap, sp, kd)
        mats[m, :, :] = p
        residuals[m] = res
        steps[m] = 0
        m += 1
        pnorm2 = _fro(p, kd, kd)
        if stop_tol > 0 and res < stop_tol * (1.0 + pnorm2 * pnorm2):
            status = 1
        while status == 0 and k < max_steps:
            _ric_rhs(a, q, s, p, k1, ap, sp, kd)
            for i in range(kd):
                for j in range(kd):
                    pt[i, j] = p[i, j] + 0.5 * dt * k1[i, j]
            _ric_rhs(a, q, s, pt, k2, ap, sp, kd)
            for i in range(kd):
                for j in range(kd):
                    pt[i, j] = p[i, j] + 0.5 * dt * k2[i, j]
            _ric_rhs(a, q, s, pt, k3, ap, sp, kd)
            for i in range(kd):
                for j in range(kd):
                    pt[i, j] = p[i, j] + dt * k3[i, j]
            _ric_rhs(a, q, s, pt, k4, ap, sp, kd)
            for i in range(kd):
                for j in range(kd):
                    p[i, j] += (dt / 6.0) * (
                        k1[i, j] + 2.0 * k2[i, j] + 2.0 * k3[i, j] + k4[i, j])
            for i in range(kd):
                for j in range(i + 1, kd):
                    tmp = 0.5 * (p[i, j] + p[j, i])
                    p[i, j] = tmp
                    p[j, i] = tmp
            k += 1
            res = _ric_rhs(a, q, s, p, k1, ap, sp, kd)
            if not isfinite(res):
                status = 2
            else:
                pnorm2 = _fro(p, kd, kd)
                if stop_tol > 0 and res < stop_tol * (1.0 + pnorm2 * pnorm2):
                    status = 1
            if status != 0 or k % record_every == 0 or k == max_steps:
                mats[m, :, :] = p
                residuals[m] = res
                steps[m] = k
                m += 1
    return mats_arr[:m], res_arr[:m], steps_arr[:m], status, k
