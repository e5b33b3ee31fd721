"""Independent reference computations.

Plain loops over dicts and tuples; nothing here calls into the package's
numerics, so agreement is a genuine cross-check.
"""
import itertools
import math

import numpy as np


def pushforward(weights, labels, phi):
    out = {}
    for lab, w in zip(labels, weights):
        z = phi(lab)
        out[z] = out.get(z, 0.0) + w
    return out


def cond_expect(weights, zs, f):
    """E(f | z) by summing over each fiber; only charged fibers appear."""
    num, den = {}, {}
    for w, z, v in zip(weights, zs, f):
        num[z] = num.get(z, 0.0) + w * v
        den[z] = den.get(z, 0.0) + w
    return {z: num[z] / den[z] for z in den if den[z] > 0}


def weighted_projection(weights, zs, f):
    """Weighted least squares of f onto indicator functions of the charged fibers."""
    keys = sorted({z for w, z in zip(weights, zs) if w > 0})
    on = [i for i, w in enumerate(weights) if w > 0]
    X = np.array([[1.0 if zs[i] == k else 0.0 for k in keys] for i in on])
    sw = np.sqrt(np.array([weights[i] for i in on]))
    y = np.array([f[i] for i in on])
    coef, *_ = np.linalg.lstsq(X * sw[:, None], y * sw, rcond=None)
    return dict(zip(keys, coef))


def all_paths(S, N):
    return list(itertools.product(range(S), repeat=N + 1))


def path_weights(initial, kernels):
    S, N = len(initial), len(kernels)
    out = []
    for p in all_paths(S, N):
        w = initial[p[0]]
        for i in range(N):
            w *= kernels[i][p[i]][p[i + 1]]
        out.append(w)
    return out


def ext_prod(*xs):
    if any(x == 0.0 for x in xs):
        return 0.0
    return math.prod(xs)


def nonneg_given(paths, weights, f, key):
    """E(f | key(path)) in [0, inf]; charged keys only."""
    num, den = {}, {}
    for p, w, v in zip(paths, weights, f):
        k = key(p)
        num[k] = num.get(k, 0.0) + ext_prod(v, w)
        den[k] = den.get(k, 0.0) + w
    return {k: num[k] / den[k] for k in den if den[k] > 0}


def kl(p, r):
    s = 0.0
    for a, b in zip(p, r):
        if a > 0:
            if b == 0:
                return math.inf
            s += a * math.log(a / b)
    return s


def ternary_coupling_2x2(K, a, b, iters=300):
    """Minimize H(pi | K) over 2x2 couplings of a and b.

    The transport polytope is the segment pi00 = t; the objective is convex in t.
    """
    lo, hi = max(0.0, a[0] + b[0] - 1.0), min(a[0], b[0])

    def pi_of(t):
        return [[t, a[0] - t], [b[0] - t, 1.0 - a[0] - b[0] + t]]

    def h(t):
        p = pi_of(t)
        return kl([x for row in p for x in row], [x for row in K for x in row])

    for _ in range(iters):
        m1, m2 = lo + (hi - lo) / 3, hi - (hi - lo) / 3
        if h(m1) <= h(m2):
            hi = m2
        else:
            lo = m1
    t = 0.5 * (lo + hi)
    return np.array(pi_of(t)), h(t)


def cycle_perturbation(pi, rng):
    """Shift mass around a random 2x2 cycle, keeping marginals and nonnegativity."""
    n, m = pi.shape
    for _ in range(1000):
        i, k = rng.choice(n, 2, replace=False)
        j, l = rng.choice(m, 2, replace=False)
        lo, hi = -min(pi[i, j], pi[k, l]), min(pi[i, l], pi[k, j])
        if hi > lo:
            e = rng.uniform(lo, hi)
            out = pi.copy()
            out[i, j] += e
            out[k, l] += e
            out[i, l] -= e
            out[k, j] -= e
            return np.maximum(out, 0.0)
    return None
