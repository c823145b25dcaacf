"""Independent reference computations used by the tests.

Plain loops over Python floats (or mpmath), deliberately sharing no code
with the package.
"""
from __future__ import annotations

import itertools
import math

import mpmath


def softmax_row(row):
    m = max(row)
    exps = [math.exp(v - m) for v in row]
    s = 0.0
    for e in exps:
        s += e
    return [e / s for e in exps]


def softmax_row_mp(row, dps=50):
    with mpmath.workdps(dps):
        exps = [mpmath.e ** mpmath.mpf(v) for v in row]
        s = mpmath.fsum(exps)
        return [float(e / s) for e in exps]


def column_max(matrix):
    out = list(matrix[0])
    for row in matrix[1:]:
        for j, v in enumerate(row):
            if v > out[j]:
                out[j] = v
    return out


def entropy(scores):
    total = sum(scores)
    h = 0.0
    for s in scores:
        q = s / total
        if q > 0:
            h -= q * math.log(q)
    return h


def top_by_entropy(ids, sc_rows, count):
    """Full sort by (entropy desc, id asc)."""
    keyed = sorted(zip(ids, sc_rows), key=lambda t: (-entropy(t[1]), t[0]))
    return [i for i, _ in keyed[:count]]


def sqdist(a, b):
    return sum((x - y) ** 2 for x, y in zip(a, b))


def best_partition(points, k):
    """Exhaustive minimum-inertia partition of a small point set into k groups."""
    n = len(points)
    best = (math.inf, None)
    for labels in itertools.product(range(k), repeat=n):
        if len(set(labels)) != k or labels[0] != 0:
            continue
        inertia = 0.0
        cents = []
        for c in range(k):
            members = [points[i] for i in range(n) if labels[i] == c]
            cent = [sum(col) / len(members) for col in zip(*members)]
            cents.append(cent)
            inertia += sum(sqdist(p, cent) for p in members)
        if inertia < best[0] - 1e-12:
            best = (inertia, (labels, cents))
    return best[0], best[1][0], best[1][1]


def confusion(gold, pred, num_labels):
    tp = [0] * num_labels
    fp = [0] * num_labels
    fn = [0] * num_labels
    for g, p in zip(gold, pred):
        for lab in range(num_labels):
            if lab in g and lab in p:
                tp[lab] += 1
            elif lab in p:
                fp[lab] += 1
            elif lab in g:
                fn[lab] += 1
    return tp, fp, fn


def mean_std_two_pass(values):
    n = len(values)
    mean = 0.0
    for v in values:
        mean += v
    mean /= n
    if n == 1:
        return mean, 0.0
    ss = 0.0
    for v in values:
        ss += (v - mean) * (v - mean)
    return mean, math.sqrt(ss / (n - 1))
