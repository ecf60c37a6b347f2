"""Pure numpy versions of the compiled kernels in ``_kernels.pyx``.

Same signatures and the same floating-point operation order wherever that is
cheap to keep; ``grow_tree`` produces bit-identical trees, ``psgd_epoch``
agrees to rounding (numpy's dot products sum in a different order).
"""

import numpy as np

from .core_math import project_to_ball, sigmoid


def psgd_epoch(w, X, y, perm, b, C, lam, beta, gamma, R, t):
    m = perm.shape[0]
    for start in range(0, m, b):
        idx = perm[start:start + b]
        Xb = X[idx]
        resid = sigmoid(Xb @ w) - y[idx]
        t += 1
        eta = min(1.0 / beta, 1.0 / (gamma * t))
        grad = (resid @ Xb) * (C / idx.shape[0]) + lam * w
        w[:] = project_to_ball(w - eta * grad, R)
    return t


def _seq_sum(a):
    # np.cumsum accumulates left to right, matching the compiled loop
    return float(np.cumsum(a)[-1]) if a.shape[0] else 0.0


def grow_tree(X, g, h, orders, max_depth, min_child_weight, reg_lambda):
    m, nf = X.shape
    cap = 2 ** (max_depth + 1) - 1
    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    value = np.zeros(cap)
    node_of = np.zeros(m, dtype=np.int64)
    Gs = np.zeros(cap)
    Hs = np.zeros(cap)
    Gs[0] = _seq_sum(g[orders[0]])
    Hs[0] = _seq_sum(h[orders[0]])

    frontier = [0]
    n_nodes = 1
    for _ in range(max_depth):
        splits = {}
        for n in frontier:
            best_gain, best = 0.0, None
            G, H = Gs[n], Hs[n]
            parent = G * G / (H + reg_lambda)
            for f in range(nf):
                order = orders[f]
                rows = order[node_of[order] == n]
                if rows.shape[0] < 2:
                    continue
                xs = X[rows, f]
                cg = np.cumsum(g[rows])[:-1]
                ch = np.cumsum(h[rows])[:-1]
                cand = xs[1:] > xs[:-1]
                HR = H - ch
                cand &= (ch >= min_child_weight) & (HR >= min_child_weight)
                if not cand.any():
                    continue
                GR = G - cg
                gain = cg * cg / (ch + reg_lambda) + GR * GR / (HR + reg_lambda) - parent
                gain = np.where(cand, gain, -np.inf)
                k = int(np.argmax(gain))
                if gain[k] > best_gain:
                    best_gain = float(gain[k])
                    lo, hi = float(xs[k]), float(xs[k + 1])
                    thr = 0.5 * (lo + hi)
                    if not thr > lo:
                        thr = hi
                    best = (f, thr)
            if best is not None:
                splits[n] = best

        if not splits:
            break
        new_frontier = []
        for n in frontier:
            if n not in splits:
                continue
            f, thr = splits[n]
            feature[n], threshold[n] = f, thr
            left[n], right[n] = n_nodes, n_nodes + 1
            in_node = node_of == n
            go_left = X[:, f] < thr
            node_of[in_node & go_left] = n_nodes
            node_of[in_node & ~go_left] = n_nodes + 1
            new_frontier += [n_nodes, n_nodes + 1]
            n_nodes += 2
        order0 = orders[0]
        owner = node_of[order0]
        for n in new_frontier:
            rows = order0[owner == n]
            Gs[n] = _seq_sum(g[rows])
            Hs[n] = _seq_sum(h[rows])
        frontier = new_frontier

    leaves = feature[:n_nodes] < 0
    value[:n_nodes][leaves] = -Gs[:n_nodes][leaves] / (Hs[:n_nodes][leaves] + reg_lambda)
    return (feature[:n_nodes], threshold[:n_nodes], left[:n_nodes], right[:n_nodes],
            value[:n_nodes], node_of)

