"""Relative entropy with respect to bounded and unbounded references."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np
from scipy.special import logsumexp

from .errors import (DualInadmissible, NonIntegrableW, NotAbsolutelyContinuous, NotProbability,
                     WNotAdmissible)
from .measure import BlockMeasure, FiniteMeasure, FiniteSpace, Map, pushforward

PROB_TOL = 1e-12
DIVERGENCE = 1e12


def _check_probability(P: FiniteMeasure) -> None:
    if abs(P.mass - 1.0) > PROB_TOL:
        raise NotProbability(f"P has mass {P.mass!r}, expected 1")


def _xlogratio(p: np.ndarray, r: np.ndarray) -> float:
    """``sum p log(p/r)`` over ``p > 0``; assumes ``r > 0`` there."""
    on = p > 0
    return math.fsum(p[on] * np.log(p[on] / r[on]))


def rel_entropy(P: FiniteMeasure, R: FiniteMeasure) -> float:
    """``H(P|R)`` in ``(-inf, inf]`` for a probability ``P`` and any finite ``R``."""
    if P.space != R.space:
        raise ValueError("measures live on different spaces")
    _check_probability(P)
    if np.any(P.support & ~R.support):
        return math.inf
    return _xlogratio(P.weights, R.weights)


# -- W-regularization -------------------------------------------------------------------


@dataclass(frozen=True)
class WFunction:
    """Nonnegative ``W`` with ``z_W = sum exp(-W) dR`` finite and positive, on ``space``."""

    space: FiniteSpace
    values: np.ndarray
    z: float

    def __post_init__(self):
        if not (math.isfinite(self.z) and self.z > 0):
            raise WNotAdmissible(f"z_W = {self.z!r} is not finite and positive")


WSpec = Union[np.ndarray, Callable[[str], float], None]


def _w_values(space: FiniteSpace, W: WSpec, default: Callable[[str], float]) -> np.ndarray:
    if W is None:
        W = default
    if callable(W):
        vals = np.array([float(W(lab)) for lab in space.labels])
    else:
        vals = np.asarray(W, dtype=float)
        if vals.shape != (space.size,):
            raise ValueError(f"W needs {space.size} values")
    if np.any(np.isnan(vals)) or np.any(vals < 0):
        raise ValueError("W must be nonnegative")
    return vals


def w_function(R: FiniteMeasure | BlockMeasure, W: WSpec = None, *, depth: int | None = None,
               threshold: float = DIVERGENCE) -> tuple[FiniteMeasure, WFunction]:
    """Evaluate ``W`` and ``z_W`` against ``R`` (truncated if ``R`` is a block measure).

    Defaults: ``W = 0`` for finite ``R``; ``W = n`` on block ``n`` otherwise.
    ``WNotAdmissible`` is raised when the partial sums of ``z_W`` pass
    ``threshold`` while the last block still contributes.
    """
    if isinstance(R, BlockMeasure):
        tr = R.truncate(depth)
        blocks = dict(zip(tr.measure.space.labels, tr.block))
        vals = _w_values(tr.measure.space, W, lambda lab: float(blocks[lab]))
        terms = np.exp(-vals) * tr.measure.weights
        z = math.fsum(terms)
        if z > threshold and terms[tr.block == tr.depth].sum() > 0:
            raise WNotAdmissible(f"z_W exceeds {threshold:g} at depth {tr.depth}")
        return tr.measure, WFunction(tr.measure.space, vals, z)
    vals = _w_values(R.space, W, lambda lab: 0.0)
    z = math.fsum(np.exp(-vals) * R.weights)
    return R, WFunction(R.space, vals, z)


def _onto(P: FiniteMeasure, space: FiniteSpace) -> FiniteMeasure:
    if P.space == space:
        return P
    w = np.zeros(space.size)
    for lab, p in zip(P.space.labels, P.weights):
        if p == 0:
            continue
        if lab not in space:
            raise ValueError(f"P charges {lab!r}, which is not an atom of the (truncated) reference")
        w[space.index(lab)] = p
    return FiniteMeasure(space, w)


def rel_entropy_W(P: FiniteMeasure, R: FiniteMeasure | BlockMeasure, W: WSpec = None, *,
                  depth: int | None = None, threshold: float = DIVERGENCE) -> float:
    """``H(P | R_W) - sum W dP - log z_W`` with ``R_W = exp(-W) R / z_W``.

    Independent of the admissible ``W`` chosen.
    """
    ref, wf = w_function(R, W, depth=depth, threshold=threshold)
    P = _onto(P, ref.space)
    _check_probability(P)
    on = P.support
    if not np.all(np.isfinite(wf.values[on])):
        raise NonIntegrableW("W is infinite on the support of P")
    w_dp = math.fsum(wf.values[on] * P.weights[on])
    if w_dp > threshold:
        raise NonIntegrableW(f"sum W dP = {w_dp:g} exceeds {threshold:g}")
    r_w = FiniteMeasure(ref.space, np.exp(-wf.values) * ref.weights / wf.z)
    h = rel_entropy(P, r_w)
    return h - w_dp - math.log(wf.z)


# -- duality ---------------------------------------------------------------------------------


def dual_value(P: FiniteMeasure, R: FiniteMeasure, u) -> float:
    """``sum u dP - log sum exp(u) dR`` for an admissible test function ``u``."""
    u = np.asarray(u, dtype=float)
    if u.shape != (P.space.size,) or np.any(np.isnan(u)):
        raise ValueError("u must be a real (or -inf) value per atom")
    r_on, p_on = R.support, P.support
    if np.any(np.isposinf(u[r_on])):
        raise DualInadmissible("sum exp(u) dR is infinite")
    if np.any(np.isneginf(u[p_on])):
        raise DualInadmissible("sum u_- dP is infinite")
    log_z = logsumexp(u[r_on] + np.log(R.weights[r_on])) if r_on.any() else -math.inf
    if not np.isfinite(log_z):
        raise DualInadmissible("sum exp(u) dR must be positive")
    return math.fsum(u[p_on] * P.weights[p_on]) - float(log_z)


def dual_maximize(P: FiniteMeasure, R: FiniteMeasure, iters: int = 10_000, step: float = 1.0,
                  floor: float = 60.0) -> tuple[np.ndarray, float, float]:
    """Cyclic coordinate ascent on ``u -> sum u dP - log sum exp(u) dR``.

    Each coordinate move is the exact maximizer along that coordinate, damped by
    ``step``; ``u`` is then shifted so that ``sum exp(u) dR = 1``, which leaves
    the objective unchanged. Atoms of ``R`` not charged by ``P`` are pushed
    down to ``max(u) - floor``. Returns ``(u, value, gap)`` with
    ``gap = H(P|R) - value``.
    """
    _check_probability(P)
    if np.any(P.support & ~R.support):
        raise NotAbsolutelyContinuous("P must be absolutely continuous w.r.t. R")
    on = np.flatnonzero(R.support)
    p = P.weights[on]
    log_r = np.log(R.weights[on])
    u = np.zeros(on.size)
    h = rel_entropy(P, R)
    prev = -math.inf
    for _ in range(iters):
        for i in range(on.size):
            others = np.delete(u + log_r, i)
            log_a = logsumexp(others) if others.size else -math.inf
            if p[i] <= 0.0:
                target = u.max() - floor if on.size > 1 else u[i]
            elif p[i] >= 1.0 or not np.isfinite(log_a):
                target = (np.max(np.delete(u, i)) + floor) if on.size > 1 else u[i]
            else:
                target = math.log(p[i]) - math.log1p(-p[i]) + log_a - log_r[i]
            u[i] += step * (target - u[i])
        u -= logsumexp(u + log_r)
        value = math.fsum(u[p > 0] * p[p > 0])
        if value - prev <= 1e-16 * max(1.0, abs(value)):
            break
        prev = value
    full = np.zeros(P.space.size)
    full[on] = u
    value = dual_value(P, R, full)
    return full, value, h - value


# -- decomposition and convexity ---------------------------------------------------------------


@dataclass(frozen=True)
class EntropyDecomposition:
    marginal_term: float
    conditional_term: float
    total: float
    summands: dict

    @property
    def min_summand(self) -> float:
        return min(self.summands.values(), default=0.0)


def entropy_decompose(P: FiniteMeasure, R: FiniteMeasure, phi: Map) -> EntropyDecomposition:
    """``H(P|R) = H(P_phi|R_phi) + sum_z P_phi(z) H(P(.|z) | R(.|z))``."""
    _check_probability(P)
    if np.any(P.support & ~R.support):
        raise NotAbsolutelyContinuous("P must be absolutely continuous w.r.t. R")
    p_phi = pushforward(P, phi).weights
    r_phi = pushforward(R, phi).weights
    marginal = _xlogratio(p_phi, r_phi)
    summands = {}
    for z in np.flatnonzero(p_phi > 0):
        fib = phi.index == z
        summands[phi.target.labels[z]] = _xlogratio(P.weights[fib] / p_phi[z], R.weights[fib] / r_phi[z])
    conditional = math.fsum(p_phi[phi.target.index(lab)] * h for lab, h in summands.items())
    return EntropyDecomposition(marginal, conditional, marginal + conditional, summands)


@dataclass(frozen=True)
class ConvexityProbe:
    lhs: float
    rhs: float
    ok: bool

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs


def convexity_probe(P1: FiniteMeasure, P2: FiniteMeasure, R: FiniteMeasure, lam: float) -> ConvexityProbe:
    """Compare ``H(lam P1 + (1-lam) P2 | R)`` with the mixture of entropies."""
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lambda must lie in [0, 1]")
    mix = FiniteMeasure(P1.space, lam * P1.weights + (1 - lam) * P2.weights)
    lhs = rel_entropy(mix, R)
    rhs = _mix(lam, rel_entropy(P1, R), rel_entropy(P2, R))
    return ConvexityProbe(lhs, rhs, lhs <= rhs + 1e-12)


def joint_convexity_probe(P1: FiniteMeasure, R1: FiniteMeasure, P2: FiniteMeasure,
                          R2: FiniteMeasure, lam: float) -> ConvexityProbe:
    mp = FiniteMeasure(P1.space, lam * P1.weights + (1 - lam) * P2.weights)
    mr = FiniteMeasure(R1.space, lam * R1.weights + (1 - lam) * R2.weights)
    lhs = rel_entropy(mp, mr)
    rhs = _mix(lam, rel_entropy(P1, R1), rel_entropy(P2, R2))
    return ConvexityProbe(lhs, rhs, lhs <= rhs + 1e-12)


def _mix(lam, a, b):
    # a zero weight must not turn an infinite entropy into nan
    terms = [w * h for w, h in ((lam, a), (1 - lam, b)) if w > 0]
    return math.fsum(terms) if all(math.isfinite(t) for t in terms) else math.inf
