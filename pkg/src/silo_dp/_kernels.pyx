# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops: one pass of projected mini-batch SGD and level-wise
exact-greedy regression-tree growth. ``silo_dp._fallback`` mirrors both.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, fabs, sqrt

cnp.import_array()

cdef double _TINY = np.nextafter(0.0, 1.0)
cdef double _ONE_MINUS = np.nextafter(1.0, 0.0)


cdef inline double _sigmoid(double z) nogil:
    cdef double e = exp(-fabs(z))
    cdef double out
    if z >= 0:
        out = 1.0 / (1.0 + e)
    else:
        out = e / (1.0 + e)
    if out < _TINY:
        return _TINY
    if out > _ONE_MINUS:
        return _ONE_MINUS
    return out


def psgd_epoch(double[::1] w, const double[:, ::1] X, const double[::1] y,
               const cnp.int64_t[::1] perm, Py_ssize_t b, double C, double lam,
               double beta, double gamma, double R, cnp.int64_t t):
    """Run one pass over ``perm`` in batches of ``b``; updates ``w`` in place.

    ``t`` is the number of updates already made; the new count is returned.
    """
    cdef Py_ssize_t m = perm.shape[0]
    cdef Py_ssize_t D = w.shape[0]
    cdef Py_ssize_t start, stop, k, i, j
    cdef double z, r, eta, norm, scale, inv_n
    cdef double[::1] g = np.empty(D, dtype=np.float64)

    with nogil:
        start = 0
        while start < m:
            stop = start + b
            if stop > m:
                stop = m
            for j in range(D):
                g[j] = 0.0
            for k in range(start, stop):
                i = perm[k]
                z = 0.0
                for j in range(D):
                    z = z + X[i, j] * w[j]
                r = _sigmoid(z) - y[i]
                for j in range(D):
                    g[j] = g[j] + r * X[i, j]
            t += 1
            eta = 1.0 / beta
            if 1.0 / (gamma * t) < eta:
                eta = 1.0 / (gamma * t)
            inv_n = C / (stop - start)
            for j in range(D):
                w[j] = w[j] - eta * (g[j] * inv_n + lam * w[j])
            norm = 0.0
            for j in range(D):
                norm = norm + w[j] * w[j]
            norm = sqrt(norm)
            if norm > R:
                scale = R / norm
                for j in range(D):
                    w[j] = w[j] * scale
                while True:
                    norm = 0.0
                    for j in range(D):
                        norm = norm + w[j] * w[j]
                    if sqrt(norm) <= R:
                        break
                    for j in range(D):
                        w[j] = w[j] * _ONE_MINUS
            start = stop
    return t


def grow_tree(const double[:, ::1] X, const double[::1] g, const double[::1] h,
              const cnp.int64_t[:, ::1] orders, int max_depth,
              double min_child_weight, double reg_lambda):
    """Grow one regression tree level by level with exact greedy splits.

    ``orders[f]`` lists the rows sorted by feature ``f`` (ties in a canonical
    order). Split gain is the second-order structure score
    ``GL^2/(HL+lam) + GR^2/(HR+lam) - G^2/(H+lam)``; ties go to the lowest
    feature, then the lowest threshold. Returns the node arrays
    ``(feature, threshold, left, right, value)`` and each row's leaf id.
    """
    cdef Py_ssize_t m = X.shape[0]
    cdef Py_ssize_t nf = X.shape[1]
    cdef Py_ssize_t cap = (1 << (max_depth + 1)) - 1
    cdef Py_ssize_t k, i, f, n, depth, n_nodes, fi
    cdef double x, gain, GL, HL, GR, HR, G, H, thr

    feature_arr = np.full(cap, -1, dtype=np.int64)
    threshold_arr = np.zeros(cap, dtype=np.float64)
    left_arr = np.full(cap, -1, dtype=np.int64)
    right_arr = np.full(cap, -1, dtype=np.int64)
    value_arr = np.zeros(cap, dtype=np.float64)
    node_of_arr = np.zeros(m, dtype=np.int64)
    cdef cnp.int64_t[::1] feature = feature_arr
    cdef double[::1] threshold = threshold_arr
    cdef cnp.int64_t[::1] left = left_arr
    cdef cnp.int64_t[::1] right = right_arr
    cdef double[::1] value = value_arr
    cdef cnp.int64_t[::1] node_of = node_of_arr

    cdef double[::1] Gs = np.zeros(cap, dtype=np.float64)
    cdef double[::1] Hs = np.zeros(cap, dtype=np.float64)
    cdef double[::1] acc_g = np.zeros(cap, dtype=np.float64)
    cdef double[::1] acc_h = np.zeros(cap, dtype=np.float64)
    cdef double[::1] prev = np.zeros(cap, dtype=np.float64)
    cdef cnp.int8_t[::1] seen = np.zeros(cap, dtype=np.int8)
    cdef cnp.int8_t[::1] active = np.zeros(cap, dtype=np.int8)
    cdef double[::1] best_gain = np.zeros(cap, dtype=np.float64)
    cdef cnp.int64_t[::1] best_feat = np.full(cap, -1, dtype=np.int64)
    cdef double[::1] best_thr = np.zeros(cap, dtype=np.float64)

    n_nodes = 1
    active[0] = 1
    with nogil:
        for k in range(m):
            i = orders[0, k]
            Gs[0] = Gs[0] + g[i]
            Hs[0] = Hs[0] + h[i]

        for depth in range(max_depth):
            for n in range(n_nodes):
                best_gain[n] = 0.0
                best_feat[n] = -1
            for f in range(nf):
                for n in range(n_nodes):
                    acc_g[n] = 0.0
                    acc_h[n] = 0.0
                    seen[n] = 0
                for k in range(m):
                    i = orders[f, k]
                    n = node_of[i]
                    if not active[n]:
                        continue
                    x = X[i, f]
                    if seen[n] and x > prev[n]:
                        HL = acc_h[n]
                        HR = Hs[n] - HL
                        if HL >= min_child_weight and HR >= min_child_weight:
                            GL = acc_g[n]
                            GR = Gs[n] - GL
                            G = Gs[n]
                            H = Hs[n]
                            gain = GL * GL / (HL + reg_lambda) + GR * GR / (HR + reg_lambda) - G * G / (H + reg_lambda)
                            if gain > best_gain[n]:
                                best_gain[n] = gain
                                best_feat[n] = f
                                thr = 0.5 * (prev[n] + x)
                                if not thr > prev[n]:
                                    thr = x
                                best_thr[n] = thr
                    acc_g[n] = acc_g[n] + g[i]
                    acc_h[n] = acc_h[n] + h[i]
                    prev[n] = x
                    seen[n] = 1

            # turn winning frontier nodes into internal nodes
            fi = n_nodes
            for n in range(n_nodes):
                if active[n] and best_feat[n] >= 0:
                    feature[n] = best_feat[n]
                    threshold[n] = best_thr[n]
                    left[n] = fi
                    right[n] = fi + 1
                    fi = fi + 2
            if fi == n_nodes:
                break
            for n in range(n_nodes):
                active[n] = 0
            for n in range(n_nodes, fi):
                active[n] = 1
                Gs[n] = 0.0
                Hs[n] = 0.0
            for i in range(m):
                n = node_of[i]
                if feature[n] >= 0 and left[n] >= n_nodes:
                    if X[i, feature[n]] < threshold[n]:
                        node_of[i] = left[n]
                    else:
                        node_of[i] = right[n]
            for k in range(m):
                i = orders[0, k]
                n = node_of[i]
                if active[n]:
                    Gs[n] = Gs[n] + g[i]
                    Hs[n] = Hs[n] + h[i]
            n_nodes = fi

        for n in range(n_nodes):
            if feature[n] < 0:
                value[n] = -Gs[n] / (Hs[n] + reg_lambda)

    return (feature_arr[:n_nodes], threshold_arr[:n_nodes], left_arr[:n_nodes],
            right_arr[:n_nodes], value_arr[:n_nodes], node_of_arr)
