"""Pure numpy kernels; same contracts as the compiled ``_ckernels`` module."""
import numpy as np

CONVERGED, INFEASIBLE, MAX_ITERATIONS = 0, 1, 2


def path_weights(initial, kernels):
    """Weight of every path, lexicographic in ``(x_0, ..., x_N)``."""
    initial = np.ascontiguousarray(initial, dtype=float)
    kernels = np.ascontiguousarray(kernels, dtype=float)
    s = initial.shape[0]
    w = initial
    for k in kernels:
        last = np.arange(w.shape[0]) % s
        w = (w[:, None] * k[last, :]).ravel()
    return w


def _lse(a, axis):
    m = np.max(a, axis=axis, keepdims=True)
    safe = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(a - safe), axis=axis)) + np.squeeze(safe, axis=axis)
    return out


def _scale(log_target, lse):
    with np.errstate(invalid="ignore"):
        out = log_target - lse
    return np.where(np.isneginf(log_target), -np.inf, out)


def sinkhorn_log(log_k, log_mu0, log_mu1, log_g, tol, max_iters, window, min_decrease):
    """Alternating log-domain scaling.

    Returns ``(log_f, log_g, iterations, error, status)`` where ``error`` is the
    larger of the two marginal total-variation errors after the last sweep.
    Supports must have been checked by the caller (no empty rows/columns
    under positive target mass).
    """
    log_k = np.ascontiguousarray(log_k, dtype=float)
    mu0 = np.exp(log_mu0)
    mu1 = np.exp(log_mu1)
    log_g = np.array(log_g, dtype=float)
    log_f = np.full(log_k.shape[0], -np.inf)
    prev = np.inf
    stall = 0
    err = np.inf
    for it in range(1, max_iters + 1):
        log_f = _scale(log_mu0, _lse(log_k + log_g[None, :], axis=1))
        col_lse = _lse(log_k + log_f[:, None], axis=0)
        log_g = _scale(log_mu1, col_lse)
        row = np.exp(log_f + _lse(log_k + log_g[None, :], axis=1))
        col = np.exp(log_g + _lse(log_k + log_f[:, None], axis=0))
        row = np.nan_to_num(row, nan=0.0)
        col = np.nan_to_num(col, nan=0.0)
        err = max(0.5 * np.abs(row - mu0).sum(), 0.5 * np.abs(col - mu1).sum())
        if err <= tol:
            return log_f, log_g, it, err, CONVERGED
        if prev - err < min_decrease:
            stall += 1
            if stall >= window:
                return log_f, log_g, it, err, INFEASIBLE
        else:
            stall = 0
        prev = err
    return log_f, log_g, max_iters, err, MAX_ITERATIONS
