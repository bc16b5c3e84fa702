# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels for excess demand, its Jacobian, damped Newton and continuation.

Mirror of ``_pykernels``; see that module for the parametrization.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, fabs, sqrt, isfinite
from libc.stdlib cimport malloc, free

cnp.import_array()

DEF ARMIJO = 1e-4
DEF MAX_BACKTRACKS = 60

OK = 0
NO_CONVERGENCE = 1
LEFT_DOMAIN = 2
BRANCH_LOST = 3


cdef struct Work:
    int n
    int l
    double* x      # l
    double* z      # l
    double* jac    # (l-1)^2
    double* rhs    # l-1
    double* cand   # l
    double* zc     # l
    double* W      # n
    double* mrow   # n*(l-1), income derivatives


cdef int work_alloc(Work* w, int n, int l):
    w.n = n
    w.l = l
    w.x = <double*> malloc(l * sizeof(double))
    w.z = <double*> malloc(l * sizeof(double))
    w.jac = <double*> malloc(l * l * sizeof(double))
    w.rhs = <double*> malloc(l * sizeof(double))
    w.cand = <double*> malloc(l * sizeof(double))
    w.zc = <double*> malloc(l * sizeof(double))
    w.W = <double*> malloc(n * sizeof(double))
    w.mrow = <double*> malloc(n * l * sizeof(double))
    if (w.x == NULL or w.z == NULL or w.jac == NULL or w.rhs == NULL or
            w.cand == NULL or w.zc == NULL or w.W == NULL or w.mrow == NULL):
        return -1
    return 0


cdef void work_free(Work* w):
    free(w.x); free(w.z); free(w.jac); free(w.rhs)
    free(w.cand); free(w.zc); free(w.W); free(w.mrow)


cdef void evaluate(const double[:, ::1] coef, const double[::1] sigma, const double[:, ::1] omega,
                   const double* p, Work* w, double* z, bint with_jac) noexcept nogil:
    """z <- excess demand; optionally w.jac <- truncated Jacobian, w.mrow <- dx/dW."""
    cdef int n = w.n, l = w.l, m = l - 1
    cdef int i, j, k
    cdef double Wi, den, s, mij
    cdef double* x = w.x
    for j in range(l):
        z[j] = 0.0
        for i in range(n):
            z[j] -= omega[i, j]
    if with_jac:
        for j in range(m * m):
            w.jac[j] = 0.0
    for i in range(n):
        s = sigma[i]
        Wi = 0.0
        for j in range(l):
            Wi += omega[i, j] * p[j]
        den = 0.0
        for j in range(l):
            x[j] = coef[i, j] * exp(-s * log(p[j]))
            den += x[j] * p[j]
        for j in range(l):
            x[j] *= Wi / den
            z[j] += x[j]
        w.W[i] = Wi
        if with_jac:
            for j in range(m):
                mij = x[j] / Wi
                w.mrow[i * m + j] = mij
                w.jac[j * m + j] -= s * x[j] / p[j]
                for k in range(m):
                    w.jac[j * m + k] += mij * (omega[i, k] - (1.0 - s) * x[k])


cdef int lu_solve(double* A, double* b, int m) noexcept nogil:
    """Solve A y = b in place (b <- y) by Gaussian elimination with partial pivoting."""
    cdef int i, j, k, piv
    cdef double best, t, f
    for k in range(m):
        piv = k
        best = fabs(A[k * m + k])
        for i in range(k + 1, m):
            if fabs(A[i * m + k]) > best:
                best = fabs(A[i * m + k])
                piv = i
        if best == 0.0 or not isfinite(best):
            return -1
        if piv != k:
            for j in range(m):
                t = A[k * m + j]; A[k * m + j] = A[piv * m + j]; A[piv * m + j] = t
            t = b[k]; b[k] = b[piv]; b[piv] = t
        for i in range(k + 1, m):
            f = A[i * m + k] / A[k * m + k]
            for j in range(k, m):
                A[i * m + j] -= f * A[k * m + j]
            b[i] -= f * b[k]
    for i in range(m - 1, -1, -1):
        t = b[i]
        for j in range(i + 1, m):
            t -= A[i * m + j] * b[j]
        b[i] = t / A[i * m + i]
        if not isfinite(b[i]):
            return -1
    return 0


cdef double norm_inf(double* v, int m) noexcept nogil:
    cdef double r = 0.0
    cdef int j
    for j in range(m):
        if not isfinite(v[j]):
            return v[j] if v[j] != v[j] else 1e308
        if fabs(v[j]) > r:
            r = fabs(v[j])
    return r


cdef double sq(double* v, int m) noexcept nogil:
    cdef double r = 0.0
    cdef int j
    for j in range(m):
        r += v[j] * v[j]
    return r


cdef int newton_core(const double[:, ::1] coef, const double[::1] sigma, const double[:, ::1] omega,
                     double* p, Work* w, double tol, int max_iter, double backtrack,
                     double floor, double* res_out, int* it_out) noexcept nogil:
    cdef int l = w.l, m = l - 1
    cdef int it = 0, h, j, status
    cdef double res, f2, t, rc
    cdef bint seen_positive, ok, accepted
    evaluate(coef, sigma, omega, p, w, w.z, True)
    res = norm_inf(w.z, m)
    while True:
        if not isfinite(res):
            status = 1
            break
        if res < tol:
            # polishing step, kept only if it does not hurt
            for j in range(m):
                w.rhs[j] = -w.z[j]
            if lu_solve(w.jac, w.rhs, m) == 0:
                ok = True
                for j in range(l):
                    w.cand[j] = p[j]
                for j in range(m):
                    w.cand[j] += w.rhs[j]
                    if w.cand[j] < floor:
                        ok = False
                if ok:
                    evaluate(coef, sigma, omega, w.cand, w, w.zc, False)
                    rc = norm_inf(w.zc, m)
                    if rc <= res:
                        for j in range(m):
                            p[j] = w.cand[j]
                        res = rc
            status = 0
            break
        if it >= max_iter:
            status = 1
            break
        it += 1
        for j in range(m):
            w.rhs[j] = -w.z[j]
        if lu_solve(w.jac, w.rhs, m) != 0:
            status = 1
            break
        f2 = sq(w.z, m)
        t = 1.0
        seen_positive = False
        accepted = False
        for h in range(MAX_BACKTRACKS):
            ok = True
            for j in range(l):
                w.cand[j] = p[j]
            for j in range(m):
                w.cand[j] += t * w.rhs[j]
                if not (w.cand[j] >= floor):
                    ok = False
            if ok:
                seen_positive = True
                evaluate(coef, sigma, omega, w.cand, w, w.zc, False)
                rc = sq(w.zc, m)
                if isfinite(rc) and rc <= (1.0 - ARMIJO * t) * (1.0 - ARMIJO * t) * f2:
                    accepted = True
                    break
            t *= backtrack
        if not accepted:
            status = 1 if seen_positive else 2
            break
        for j in range(m):
            p[j] = w.cand[j]
        evaluate(coef, sigma, omega, p, w, w.z, True)
        res = norm_inf(w.z, m)
    res_out[0] = res
    it_out[0] = it
    return status


def excess_demand(const double[:, ::1] coef, const double[::1] sigma, const double[:, ::1] omega, const double[::1] p):
    cdef Work w
    cdef int n = omega.shape[0], l = omega.shape[1]
    out = np.empty(l)
    cdef double[::1] z = out
    if work_alloc(&w, n, l) != 0:
        work_free(&w)
        raise MemoryError()
    evaluate(coef, sigma, omega, &p[0], &w, &z[0], False)
    work_free(&w)
    return out


def excess_jacobian(const double[:, ::1] coef, const double[::1] sigma, const double[:, ::1] omega, const double[::1] p):
    cdef Work w
    cdef int n = omega.shape[0], l = omega.shape[1], m = l - 1, j
    out = np.empty((m, m))
    cdef double[:, ::1] J = out
    if work_alloc(&w, n, l) != 0:
        work_free(&w)
        raise MemoryError()
    evaluate(coef, sigma, omega, &p[0], &w, w.z, True)
    for j in range(m * m):
        J[j // m, j % m] = w.jac[j]
    work_free(&w)
    return out


def newton(const double[:, ::1] coef, const double[::1] sigma, const double[:, ::1] omega, p0,
           double tol, int max_iter, double backtrack, double floor):
    cdef Work w
    cdef int n = omega.shape[0], l = omega.shape[1], it = 0, status
    cdef double res = 0.0
    out = np.array(p0, dtype=np.float64)
    cdef double[::1] p = out
    if work_alloc(&w, n, l) != 0:
        work_free(&w)
        raise MemoryError()
    with nogil:
        status = newton_core(coef, sigma, omega, &p[0], &w, tol, max_iter, backtrack,
                             floor, &res, &it)
    work_free(&w)
    return out, res, it, status


def continuation(const double[:, ::1] coef, const double[::1] sigma, const double[:, ::1] omega0,
                 const double[:, ::1] omega1, p_star, int steps, double tol, int max_iter,
                 double backtrack, double floor, double trust):
    cdef Work w
    cdef int n = omega0.shape[0], l = omega0.shape[1], m = l - 1
    cdef int i, j, k, it = 0, status = 0, failed = 0
    cdef double res = 0.0, dpmax, pmax, corr, a, vi, dsum
    out = np.array(p_star, dtype=np.float64)
    cdef double[::1] p = out
    om_arr = np.array(omega0, dtype=np.float64)
    cdef double[:, ::1] om = om_arr
    dom_arr = np.empty((n, l))
    cdef double[:, ::1] dom = dom_arr
    pred_arr = np.empty(l)
    cdef double[::1] pred = pred_arr
    start_arr = np.empty(l)
    cdef double[::1] start = start_arr
    if work_alloc(&w, n, l) != 0:
        work_free(&w)
        raise MemoryError()
    with nogil:
        for i in range(n):
            for j in range(l):
                dom[i, j] = (omega1[i, j] - omega0[i, j]) / steps
        for k in range(1, steps + 1):
            # predictor at the previous endowment
            evaluate(coef, sigma, om, &p[0], &w, w.z, True)
            for j in range(m):
                w.rhs[j] = 0.0
            for i in range(n):
                vi = 0.0
                for j in range(l):
                    vi += dom[i, j] * p[j]
                for j in range(m):
                    w.rhs[j] -= w.mrow[i * m + j] * vi - dom[i, j]
            if lu_solve(w.jac, w.rhs, m) != 0:
                status = 3
                failed = k
                break
            dpmax = 0.0
            pmax = 0.0
            for j in range(l):
                pred[j] = p[j]
                if fabs(p[j]) > pmax:
                    pmax = fabs(p[j])
            status = 0
            for j in range(m):
                pred[j] += w.rhs[j]
                if fabs(w.rhs[j]) > dpmax:
                    dpmax = fabs(w.rhs[j])
                if not (pred[j] >= floor):
                    status = 3
            if status != 0:
                failed = k
                break
            # advance the endowment
            for i in range(n):
                for j in range(l):
                    if k == steps:
                        om[i, j] = omega1[i, j]
                    else:
                        om[i, j] = omega0[i, j] + k * dom[i, j]
            for j in range(l):
                start[j] = pred[j]
            status = newton_core(coef, sigma, om, &pred[0], &w, tol, max_iter, backtrack,
                                 floor, &res, &it)
            if status != 0:
                status = 3
                failed = k
                break
            corr = 0.0
            for j in range(m):
                a = fabs(pred[j] - start[j])
                if a > corr:
                    corr = a
            if corr > trust * dpmax + 1e-8 * (1.0 + pmax):
                status = 3
                failed = k
                break
            for j in range(l):
                p[j] = pred[j]
    work_free(&w)
    return out, res, failed, status
