# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels; see ``_kernels_py`` for the reference semantics."""
import numpy as np
cimport numpy as cnp
from libc.math cimport ceil, fabs

cnp.import_array()

cdef double GENERIC_BASE = 0.6180339887498949
cdef double GENERIC_STEP = 0.2718281828459045


def queue_admit(arrivals, double last_departure, double service_time, long capacity):
    cdef double[::1] arr = np.ascontiguousarray(arrivals, dtype=np.float64)
    cdef Py_ssize_t k, count = arr.shape[0]
    out = np.zeros(count, dtype=np.uint8)
    cdef unsigned char[::1] admitted = out
    cdef double last = last_departure
    cdef double s = service_time
    cdef double t
    cdef long n
    for k in range(count):
        t = arr[k]
        n = 0
        if last > t and s > 0.0:
            n = <long>ceil((last - t) / s - 1e-9)
        if n < capacity:
            admitted[k] = 1
            if last > t:
                last = last + s
            else:
                last = t + s
    return out, last


def cfb_throughput(potential, edge_u, edge_v, conductance):
    cdef double[:, ::1] P = np.ascontiguousarray(potential, dtype=np.float64)
    cdef long long[::1] eu = np.ascontiguousarray(edge_u, dtype=np.int64)
    cdef long long[::1] ev = np.ascontiguousarray(edge_v, dtype=np.int64)
    cdef double[::1] g = np.ascontiguousarray(conductance, dtype=np.float64)
    cdef Py_ssize_t n = P.shape[0], m = eu.shape[0]
    total_arr = np.zeros(n)
    through_arr = np.zeros(n)
    cdef double[::1] total = total_arr
    cdef double[::1] through = through_arr
    cdef Py_ssize_t s, t, e, v
    cdef double cur
    for s in range(n):
        for t in range(s + 1, n):
            for v in range(n):
                through[v] = 0.0
            for e in range(m):
                cur = fabs(g[e] * ((P[eu[e], s] - P[eu[e], t]) - (P[ev[e], s] - P[ev[e], t])))
                through[eu[e]] += cur
                through[ev[e]] += cur
            for v in range(n):
                if v != s and v != t:
                    total[v] += 2.0 * (0.5 * through[v])
    return total_arr


cdef int _solve_small(double[:, ::1] M, Py_ssize_t k, Py_ssize_t s, double eps,
                      double* c, int* pivots) nogil:
    """Row-reduce M[:k, :s+1] in place; write a generic solution into c.

    Returns 0 when inconsistent, 1 otherwise.
    """
    cdef Py_ssize_t i, j, p, col, r = 0
    cdef double scale, best, piv, f, val, tmp
    cdef int nfree
    cdef int is_pivot[3]
    for i in range(k):
        scale = 0.0
        for j in range(s):
            if fabs(M[i, j]) > scale:
                scale = fabs(M[i, j])
        if scale > 0.0:
            for j in range(s + 1):
                M[i, j] /= scale
    for col in range(s):
        if r >= k:
            break
        p = r
        best = fabs(M[r, col])
        for i in range(r + 1, k):
            if fabs(M[i, col]) > best:
                best = fabs(M[i, col])
                p = i
        if best <= eps:
            continue
        if p != r:
            for j in range(s + 1):
                tmp = M[r, j]
                M[r, j] = M[p, j]
                M[p, j] = tmp
        piv = M[r, col]
        for j in range(s + 1):
            M[r, j] /= piv
        for i in range(k):
            if i != r and M[i, col] != 0.0:
                f = M[i, col]
                for j in range(s + 1):
                    M[i, j] -= f * M[r, j]
        pivots[r] = <int>col
        r += 1
    for i in range(r, k):
        if fabs(M[i, s]) > eps:
            return 0
    for j in range(s):
        is_pivot[j] = 0
        c[j] = 0.0
    for i in range(r):
        is_pivot[pivots[i]] = 1
    nfree = 0
    for j in range(s):
        if not is_pivot[j]:
            c[j] = GENERIC_BASE + GENERIC_STEP * nfree
            nfree += 1
    for i in range(r):
        val = M[i, s]
        for j in range(s):
            if not is_pivot[j]:
                val -= M[i, j] * c[j]
        c[pivots[i]] = val
    return 1


def fdi_support_search(H, long target, double delta, protected, supports, double tol):
    cdef double[:, ::1] Hm = np.ascontiguousarray(H, dtype=np.float64)
    cdef unsigned char[::1] prot = np.ascontiguousarray(protected, dtype=np.uint8)
    cdef long long[:, ::1] sup = np.ascontiguousarray(supports, dtype=np.int64)
    cdef Py_ssize_t m = Hm.shape[0], n = Hm.shape[1]
    cdef Py_ssize_t K = sup.shape[0], width = sup.shape[1]
    cdef double hscale = 0.0
    cdef Py_ssize_t i, j, r, q, a, b, kk, nrows, neq, nfree, nsys, ncand, ci
    for i in range(m):
        for j in range(n):
            if fabs(Hm[i, j]) > hscale:
                hscale = fabs(Hm[i, j])
    cdef double hz = 1e-12 * (hscale if hscale > 1.0 else 1.0)
    cdef double vtol = tol * (fabs(delta) if fabs(delta) > 1.0 else 1.0)

    rows_arr = np.empty(m, dtype=np.int64)
    eq_arr = np.empty(m, dtype=np.int64)
    free_arr = np.empty(m, dtype=np.int64)
    M_arr = np.empty((m + 3, 4), dtype=np.float64)
    cdef long long[::1] rows = rows_arr
    cdef long long[::1] eq = eq_arr
    cdef long long[::1] free = free_arr
    cdef double[:, ::1] M = M_arr
    cdef int cols[3]
    cdef int pivots[3]
    cdef double c[3]
    cdef int s, found, alpha, best_alpha = -1
    cdef double norm, best_norm = 0.0
    cdef long best_k = -1
    cdef double v
    cdef long e1, e2
    best_c = np.zeros(n)
    cdef double best_local[3]
    cdef int best_cols[3]
    cdef int best_s = 0

    for kk in range(K):
        s = 0
        for j in range(width):
            if sup[kk, j] >= 0 and s < 3:
                cols[s] = <int>sup[kk, j]
                s += 1
        if s == 0:
            continue
        nrows = 0
        found = 0
        for r in range(m):
            for j in range(s):
                if fabs(Hm[r, cols[j]]) > hz:
                    rows[nrows] = r
                    nrows += 1
                    if r == target:
                        found = 1
                    break
        if not found:
            continue
        neq = 1
        eq[0] = target
        nfree = 0
        for q in range(nrows):
            r = rows[q]
            if r == target:
                continue
            if prot[r]:
                eq[neq] = r
                neq += 1
            else:
                free[nfree] = r
                nfree += 1
        # candidate 0: no extra rows; then singles (s >= 2); then pairs (s >= 3)
        ncand = 1
        if s >= 2:
            ncand += nfree
        if s >= 3:
            ncand += nfree * (nfree - 1) // 2
        a = 0
        b = 1
        for ci in range(ncand):
            e1 = -1
            e2 = -1
            if ci == 0:
                pass
            elif ci <= nfree and s >= 2:
                e1 = free[ci - 1]
            else:
                e1 = free[a]
                e2 = free[b]
                b += 1
                if b >= nfree:
                    a += 1
                    b = a + 1
            nsys = 0
            for q in range(neq):
                for j in range(s):
                    M[nsys, j] = Hm[eq[q], cols[j]]
                M[nsys, s] = delta if q == 0 else 0.0
                nsys += 1
            if e1 >= 0:
                for j in range(s):
                    M[nsys, j] = Hm[e1, cols[j]]
                M[nsys, s] = 0.0
                nsys += 1
            if e2 >= 0:
                for j in range(s):
                    M[nsys, j] = Hm[e2, cols[j]]
                M[nsys, s] = 0.0
                nsys += 1
            if not _solve_small(M, nsys, s, 1e-10, c, pivots):
                continue
            alpha = 0
            norm = 0.0
            for q in range(nrows):
                r = rows[q]
                v = 0.0
                for j in range(s):
                    v += Hm[r, cols[j]] * c[j]
                if fabs(v) > vtol:
                    alpha += 1
                    norm += v * v
            # fewest altered meters first, then the smallest total manipulation
            if best_alpha < 0 or alpha < best_alpha or (alpha == best_alpha and norm < best_norm * (1.0 - 1e-9)):
                best_alpha = alpha
                best_norm = norm
                best_k = kk
                best_s = s
                for j in range(s):
                    best_cols[j] = cols[j]
                    best_local[j] = c[j]
    if best_k >= 0:
        for j in range(best_s):
            best_c[best_cols[j]] = best_local[j]
    return best_alpha, best_k, best_c
