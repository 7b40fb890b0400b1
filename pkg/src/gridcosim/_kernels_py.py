"""Pure-Python reference implementations of the hot kernels.

Every function here has a compiled twin in ``_kernels.pyx`` with the same
signature and the same floating-point decisions; ``gridcosim.kernels``
picks one at import time.
"""
from __future__ import annotations

import math

import numpy as np

GENERIC_BASE = 0.6180339887498949
GENERIC_STEP = 0.2718281828459045


def queue_admit(arrivals, last_departure, service_time, capacity):
    """Drop-tail admission for a FIFO single server with deterministic service.

    Returns ``(admitted, last_departure)`` where ``admitted`` is a uint8 mask
    over ``arrivals`` (which must be sorted ascending).
    """
    arrivals = np.asarray(arrivals, dtype=np.float64)
    admitted = np.zeros(arrivals.shape[0], dtype=np.uint8)
    last = float(last_departure)
    s = float(service_time)
    for k in range(arrivals.shape[0]):
        t = arrivals[k]
        if last > t:
            if s > 0.0:
                n = int(math.ceil((last - t) / s - 1e-9))
            else:
                n = 0
        else:
            n = 0
        if n < capacity:
            admitted[k] = 1
            last = (last if last > t else t) + s
    return admitted, last


def cfb_throughput(potential, edge_u, edge_v, conductance):
    """Sum of current-flow throughput over all ordered (s, t) pairs.

    ``potential`` is the pseudo-inverse of the weighted Laplacian.  The
    result is unnormalized; divide by ``(n-1)(n-2)`` for the centrality.
    """
    P = np.asarray(potential, dtype=np.float64)
    eu = np.asarray(edge_u, dtype=np.int64)
    ev = np.asarray(edge_v, dtype=np.int64)
    g = np.asarray(conductance, dtype=np.float64)
    n = P.shape[0]
    total = np.zeros(n)
    for s in range(n):
        for t in range(s + 1, n):
            phi = P[:, s] - P[:, t]
            current = np.abs(g * (phi[eu] - phi[ev]))
            through = np.zeros(n)
            np.add.at(through, eu, current)
            np.add.at(through, ev, current)
            through *= 0.5
            through[s] = 0.0
            through[t] = 0.0
            total += 2.0 * through
    return total


def _solve_small(A, b, eps):
    """Row-reduce ``[A | b]``; return a generic solution or ``None``."""
    k, s = A.shape
    M = np.empty((k, s + 1))
    M[:, :s] = A
    M[:, s] = b
    for i in range(k):
        scale = 0.0
        for j in range(s):
            if abs(M[i, j]) > scale:
                scale = abs(M[i, j])
        if scale > 0.0:
            for j in range(s + 1):
                M[i, j] /= scale
    pivots = []
    r = 0
    for col in range(s):
        if r >= k:
            break
        p = r
        best = abs(M[r, col])
        for i in range(r + 1, k):
            if abs(M[i, col]) > best:
                best = abs(M[i, col])
                p = i
        if best <= eps:
            continue
        if p != r:
            for j in range(s + 1):
                M[r, j], M[p, j] = M[p, j], M[r, j]
        piv = M[r, col]
        for j in range(s + 1):
            M[r, j] /= piv
        for i in range(k):
            if i != r and M[i, col] != 0.0:
                f = M[i, col]
                for j in range(s + 1):
                    M[i, j] -= f * M[r, j]
        pivots.append(col)
        r += 1
    for i in range(r, k):
        if abs(M[i, s]) > eps:
            return None
    c = np.zeros(s)
    is_pivot = [False] * s
    for col in pivots:
        is_pivot[col] = True
    nfree = 0
    for j in range(s):
        if not is_pivot[j]:
            c[j] = GENERIC_BASE + GENERIC_STEP * nfree
            nfree += 1
    for i, col in enumerate(pivots):
        val = M[i, s]
        for j in range(s):
            if not is_pivot[j]:
                val -= M[i, j] * c[j]
        c[col] = val
    return c


def fdi_support_search(H, target, delta, protected, supports, tol):
    """Exact minimum-cardinality attack search over candidate state supports.

    For each candidate support (row of ``supports``; unused slots are -1)
    the attainable zero patterns are enumerated by forcing up to ``s - 1``
    extra measurement rows to zero.  Returns ``(alpha, index, c)`` for the
    best candidate, or ``(-1, -1, zeros)`` when nothing is feasible. Ties in
    the support size go to the smaller squared norm of the attack.
    """
    H = np.asarray(H, dtype=np.float64)
    protected = np.asarray(protected, dtype=np.uint8)
    supports = np.asarray(supports, dtype=np.int64)
    m, n = H.shape
    hscale = float(np.max(np.abs(H))) if H.size else 1.0
    hz = 1e-12 * max(hscale, 1.0)
    vtol = tol * max(1.0, abs(delta))
    best_alpha = -1
    best_norm = 0.0
    best_k = -1
    best_c = np.zeros(n)
    for k in range(supports.shape[0]):
        cols = [int(j) for j in supports[k] if j >= 0]
        s = len(cols)
        if s == 0:
            continue
        rows = []
        for r in range(m):
            for j in cols:
                if abs(H[r, j]) > hz:
                    rows.append(r)
                    break
        if target not in rows:
            continue
        eq_rows = [target] + [r for r in rows if r != target and protected[r]]
        free = [r for r in rows if r != target and not protected[r]]
        local = H[np.ix_(rows, cols)]
        candidates = [()]
        if s >= 2:
            candidates += [(a,) for a in free]
        if s >= 3:
            candidates += [(free[a], free[b]) for a in range(len(free)) for b in range(a + 1, len(free))]
        for extra in candidates:
            sys_rows = eq_rows + list(extra)
            A = H[np.ix_(sys_rows, cols)]
            b = np.zeros(len(sys_rows))
            b[0] = delta
            c = _solve_small(A, b, 1e-10)
            if c is None:
                continue
            alpha = 0
            norm = 0.0
            for q in range(len(rows)):
                val = 0.0
                for j in range(s):
                    val += local[q, j] * c[j]
                if abs(val) > vtol:
                    alpha += 1
                    norm += val * val
            # fewest altered meters first, then the smallest total manipulation
            if best_alpha < 0 or alpha < best_alpha or (alpha == best_alpha and norm < best_norm * (1.0 - 1e-9)):
                best_alpha = alpha
                best_norm = norm
                best_k = k
                best_c = np.zeros(n)
                best_c[cols] = c
    return best_alpha, best_k, best_c
