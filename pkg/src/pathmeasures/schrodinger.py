"""Entropic bridges between two marginals via (f, g)-transforms.

The path problem reduces to the endpoint coupling: the optimal path measure
keeps the reference bridges and its endpoint law minimizes ``H(. | R01)``
under the marginal constraints. That static problem is solved by
log-domain iterative proportional fitting.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .conditioning import Kernel, cond_expect_nonneg, disintegrate
from .entropy import EntropyDecomposition, entropy_decompose, rel_entropy
from .errors import (DegenerateTransform, Infeasible, InfiniteMass, MaxIterations,
                     NotAbsolutelyContinuous, NotMarkov, NotProbability)
from .extreal import ext_mul
from .measure import FiniteMeasure, FiniteSpace, pushforward
from .pathspace import SEP, PathMeasure, check_markov

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITERS = 100_000
PLATEAU_WINDOW = 50
PLATEAU_DECREASE = 1e-14


@dataclass(frozen=True)
class FGTransform:
    states: FiniteSpace
    f: np.ndarray
    g: np.ndarray
    normalized: bool = False


def _state_function(states: FiniteSpace, h) -> np.ndarray:
    if isinstance(h, FiniteMeasure):
        h = h.weights
    if isinstance(h, dict):
        h = [h.get(lab, 0.0) for lab in states.labels]
    arr = np.asarray(h, dtype=float)
    if arr.shape != (states.size,):
        raise ValueError(f"state function needs {states.size} values")
    if np.any(np.isnan(arr)) or np.any(arr < 0):
        raise ValueError("f and g must take values in [0, inf]")
    return arr


def _endpoint_factor(R: PathMeasure, f, g) -> np.ndarray:
    fx = _state_function(R.states, f)
    gy = _state_function(R.states, g)
    return ext_mul(fx[R.paths[:, 0]], gy[R.paths[:, -1]])


def fg_transform(R: PathMeasure, f, g) -> PathMeasure:
    """``f(X_0) g(X_N) R`` normalized to a probability."""
    dens = _endpoint_factor(R, f, g)
    w = ext_mul(dens, R.weights.weights)
    z = float(w.sum())
    if not (z > 0 and math.isfinite(z)):
        raise DegenerateTransform(f"E_R[f(X_0) g(X_N)] = {z!r}")
    return R.with_weights(w / z)


def fg_marginals(R: PathMeasure, f, g) -> tuple[FiniteMeasure, FiniteMeasure]:
    """Endpoint marginals of ``f(X_0) g(X_N) R`` written through conditional expectations.

    ``mu0(x) = f(x) E_R(g(X_N) | X_0 = x) R_0(x)`` and symmetrically for
    ``mu1``; neither is normalized.
    """
    fx = _state_function(R.states, f)
    gy = _state_function(R.states, g)
    N = R.N
    e_g = cond_expect_nonneg(R.weights, R.time_map(0), gy[R.paths[:, -1]]).values
    e_f = cond_expect_nonneg(R.weights, R.time_map(N), fx[R.paths[:, 0]]).values
    out = []
    for h, e, r in ((fx, e_g, R.marginal(0)), (gy, e_f, R.marginal(N))):
        e = np.where(r.support, e, 0.0)
        m = ext_mul(ext_mul(h, e), r.weights)
        if np.any(np.isinf(m)):
            bad = [R.states.labels[i] for i in np.flatnonzero(np.isinf(m))]
            raise InfiniteMass(f"infinite marginal mass at {bad}")
        out.append(FiniteMeasure(R.states, m))
    return out[0], out[1]


def static_reduce(R: PathMeasure) -> tuple[FiniteMeasure, Kernel]:
    """Endpoint law ``R01`` and the bridges ``R(. | X_0 = x, X_N = y)``."""
    return disintegrate(R.weights, R.endpoint_map())


@dataclass(frozen=True)
class SinkhornResult:
    f: np.ndarray
    g: np.ndarray
    pi: np.ndarray
    iterations: int
    error: float


def _as_matrix(R01) -> np.ndarray:
    if isinstance(R01, FiniteMeasure):
        n = math.isqrt(R01.space.size)
        if n * n != R01.space.size:
            raise ValueError("R01 must live on a square product space")
        return R01.weights.reshape(n, n)
    return np.asarray(R01, dtype=float)


def _as_prob(mu, n: int, name: str) -> np.ndarray:
    w = mu.weights if isinstance(mu, FiniteMeasure) else np.asarray(mu, dtype=float)
    if w.shape != (n,) or np.any(w < 0):
        raise ValueError(f"{name} must be {n} nonnegative weights")
    if abs(w.sum() - 1.0) > 1e-12:
        raise NotProbability(f"{name} has mass {w.sum()!r}")
    return w


def sinkhorn(R01, mu0, mu1, tol: float = DEFAULT_TOL, max_iters: int = DEFAULT_MAX_ITERS,
             init_g=None) -> SinkhornResult:
    """Minimize ``H(pi | R01)`` over couplings of ``mu0`` and ``mu1``.

    Returns ``pi = diag(f) R01 diag(g)``; the gauge is fixed by ``max f = 1``.
    Raises ``Infeasible`` when the support pattern admits no coupling or the
    marginal error stalls above ``tol``, ``MaxIterations`` when it is still
    decreasing after ``max_iters`` sweeps.
    """
    K = _as_matrix(R01)
    n, m = K.shape
    a = _as_prob(mu0, n, "mu0")
    b = _as_prob(mu1, m, "mu1")
    on = K > 0
    if np.any((a > 0) & ~(on & (b > 0)[None, :]).any(axis=1)) or \
            np.any((b > 0) & ~(on & (a > 0)[:, None]).any(axis=0)):
        raise Infeasible("a charged marginal atom has no admissible partner")
    with np.errstate(divide="ignore"):
        log_k, log_a, log_b = np.log(K), np.log(a), np.log(b)
        log_g0 = np.zeros(m) if init_g is None else np.log(np.asarray(init_g, dtype=float))
    log_f, log_g, it, err, status = _kernels.sinkhorn_log(
        log_k, log_a, log_b, log_g0, tol, max_iters, PLATEAU_WINDOW, PLATEAU_DECREASE)
    if status == _kernels.INFEASIBLE:
        raise Infeasible(f"marginal error stalled at {err:.3e} after {it} iterations")
    if status == _kernels.MAX_ITERATIONS:
        raise MaxIterations(f"marginal error {err:.3e} after {it} iterations")
    shift = np.max(log_f[np.isfinite(log_f)])
    log_f = log_f - shift
    log_g = log_g + shift
    with np.errstate(invalid="ignore"):
        pi = np.exp(log_f[:, None] + log_k + log_g[None, :])
    pi = np.nan_to_num(pi, nan=0.0)
    return SinkhornResult(np.exp(log_f), np.exp(log_g), pi, int(it), float(err))


def tv(p: np.ndarray, q: np.ndarray) -> float:
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())


@dataclass(frozen=True)
class SchrodingerSolution:
    fg: FGTransform
    coupling: FiniteMeasure
    path_measure: PathMeasure
    entropy: float
    decomposition: EntropyDecomposition
    diagnostics: dict = field(default_factory=dict)


def solve_bridge(R: PathMeasure, mu0, mu1, tol: float = DEFAULT_TOL,
                 max_iters: int = DEFAULT_MAX_ITERS, init_g=None) -> SchrodingerSolution:
    """Minimize ``H(P|R)`` over path probabilities with ``P_0 = mu0``, ``P_N = mu1``."""
    for t in range(R.N + 1):
        chk = check_markov(R, t)
        if not chk.is_markov:
            raise NotMarkov(f"reference is not Markov at t_index={t} (deviation {chk.max_deviation:.3e})")
    S = R.states.size
    a = _as_prob(_state_function(R.states, mu0), S, "mu0")
    b = _as_prob(_state_function(R.states, mu1), S, "mu1")
    if np.any((a > 0) & ~R.marginal(0).support) or np.any((b > 0) & ~R.marginal(R.N).support):
        raise NotAbsolutelyContinuous("target marginals must be absolutely continuous w.r.t. R_0, R_N")
    r01, bridges = static_reduce(R)
    sol = sinkhorn(r01, a, b, tol, max_iters, init_g)
    coupling = FiniteMeasure(r01.space, sol.pi.reshape(-1))
    p_hat = R.with_weights(bridges.mix(coupling).weights)

    endpoints = R.endpoint_map()
    dec = entropy_decompose(p_hat.weights.normalized(), R.weights, endpoints)
    _, hat_bridges = disintegrate(p_hat.weights, endpoints)
    dev = 0.0
    for z in np.flatnonzero(coupling.support):
        dev = max(dev, tv(hat_bridges.matrix[z], bridges.matrix[z]))
    diagnostics = {
        "marginal_errors": [tv(p_hat.marginal(0).weights, a), tv(p_hat.marginal(R.N).weights, b)],
        "bridge_deviation": dev,
        "iterations": sol.iterations,
        "sinkhorn_error": sol.error,
        "mass": p_hat.mass,
        "static_entropy": rel_entropy(coupling.normalized(), r01),
    }
    fg = FGTransform(R.states, sol.f, sol.g, normalized=True)
    return SchrodingerSolution(fg, coupling, p_hat, dec.total, dec, diagnostics)


def basis_move(pi: np.ndarray, support: np.ndarray, rng: np.random.Generator,
               max_tries: int = 1000) -> np.ndarray | None:
    """Random feasible coupling with the marginals of ``pi``, staying on ``support``.

    Adds ``eps`` at ``(i, j), (k, l)`` and removes it at ``(i, l), (k, j)``,
    with ``eps`` drawn inside the range that keeps every entry nonnegative.
    Returns ``None`` when no such cycle is found.
    """
    n, m = pi.shape
    if n < 2 or m < 2:
        return None
    for _ in range(max_tries):
        i, k = rng.choice(n, 2, replace=False)
        j, l = rng.choice(m, 2, replace=False)
        if not (support[i, j] and support[k, l] and support[i, l] and support[k, j]):
            continue
        lo, hi = -min(pi[i, j], pi[k, l]), min(pi[i, l], pi[k, j])
        if hi - lo <= 0:
            continue
        eps = rng.uniform(lo, hi)
        if eps == 0.0:
            continue
        out = pi.copy()
        out[i, j] += eps
        out[k, l] += eps
        out[i, l] -= eps
        out[k, j] -= eps
        return np.maximum(out, 0.0)
    return None


def endpoint_labels(states: FiniteSpace) -> list[str]:
    return [x + SEP + y for x in states.labels for y in states.labels]
