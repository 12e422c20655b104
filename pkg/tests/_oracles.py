"""Independent reference computations used by the tests.

Nothing here imports the code under test except to build inputs.
"""

from __future__ import annotations

import itertools
import math

import numpy as np


def numerical_grad(f, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central finite differences of scalar ``f`` w.r.t. array ``x`` (modified in place, restored)."""
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        orig = x[idx]
        x[idx] = orig + h
        fp = f()
        x[idx] = orig - h
        fm = f()
        x[idx] = orig
        g[idx] = (fp - fm) / (2 * h)
    return g


def max_rel_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-6) -> float:
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / denom))


def levenshtein(a, b) -> int:
    """Plain full-matrix unit-cost edit distance."""
    d = np.zeros((len(a) + 1, len(b) + 1), dtype=int)
    d[:, 0] = np.arange(len(a) + 1)
    d[0, :] = np.arange(len(b) + 1)
    for i in range(1, len(a) + 1):
        for j in range(1, len(b) + 1):
            d[i, j] = min(d[i - 1, j] + 1, d[i, j - 1] + 1, d[i - 1, j - 1] + (a[i - 1] != b[j - 1]))
    return int(d[-1, -1])


def enumerate_min_cost(hyp, ref) -> int:
    """Exhaustive minimum over all alignments (exponential; tiny inputs only)."""
    @_memo
    def go(i, j):
        if i == len(hyp):
            return len(ref) - j
        if j == len(ref):
            return len(hyp) - i
        return min(go(i + 1, j + 1) + (hyp[i] != ref[j]), go(i + 1, j) + 1, go(i, j + 1) + 1)
    return go(0, 0)


def _memo(fn):
    cache = {}

    def wrapped(*args):
        if args not in cache:
            cache[args] = fn(*args)
        return cache[args]
    return wrapped


def auc_pair_count(scores, labels) -> float:
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    total = 0.0
    for p, n in itertools.product(pos, neg):
        total += 1.0 if p > n else 0.5 if p == n else 0.0
    return total / (len(pos) * len(neg))


def ap_threshold_sweep(scores, labels) -> float:
    """Step-wise PR area by explicit counting at every distinct threshold."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=int)
    n_pos = int(labels.sum())
    area, prev_recall = 0.0, 0.0
    for t in sorted(set(scores.tolist()), reverse=True):
        sel = scores >= t
        tp = int((labels[sel] == 1).sum())
        precision = tp / int(sel.sum())
        recall = tp / n_pos
        area += (recall - prev_recall) * precision
        prev_recall = recall
    return area


def nce_straight_line(scores, labels) -> float:
    n = len(labels)
    n1 = sum(labels)
    p = n1 / n
    h_base = -(n1 * math.log(p) + (n - n1) * math.log(1 - p))
    h = 0.0
    for s, y in zip(scores, labels):
        s = min(max(s, 1e-12), 1 - 1e-12)
        h -= math.log(s) if y == 1 else math.log(1 - s)
    return (h_base - h) / h_base


def attention_straight_line(q, k, v) -> np.ndarray:
    """softmax(Q K^T / sqrt(d)) V one row at a time with python loops."""
    d = q.shape[1]
    out = np.zeros((q.shape[0], v.shape[1]))
    for i in range(q.shape[0]):
        scores = [sum(q[i, t] * k[j, t] for t in range(d)) / math.sqrt(d) for j in range(k.shape[0])]
        m = max(scores)
        w = [math.exp(s - m) for s in scores]
        z = sum(w)
        for j in range(k.shape[0]):
            out[i] += (w[j] / z) * v[j]
    return out
