"""Regular conditional kernels and conditional expectations.

Finite measures are conditioned directly. A :class:`BlockMeasure` is
conditioned on its truncation after reweighting by a block-constant
``gamma(phi)``, which makes it bounded without changing the conditional laws.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .errors import DomainError, NonIntegrable, NotAbsolutelyContinuous
from .extreal import ext_mul
from .measure import BlockMeasure, FiniteMeasure, FiniteSpace, Map, density, pushforward

DEFAULT_DIVERGENCE = 1e12

Function = Union[np.ndarray, Callable[[str], float]]


@dataclass(frozen=True)
class Conditional:
    """Function on ``space``; ``nan`` where it is undefined (outside the conditioning support)."""

    space: FiniteSpace
    values: np.ndarray

    @property
    def defined(self) -> np.ndarray:
        return ~np.isnan(self.values)

    def __getitem__(self, label: str) -> float:
        return float(self.values[self.space.index(label)])

    def as_dict(self) -> dict[str, float]:
        return {lab: float(v) for lab, v, ok in zip(self.space.labels, self.values, self.defined) if ok}


@dataclass(frozen=True)
class Kernel:
    """``z -> R(. | phi = z)``; rows exist only on the support of ``R_phi``."""

    base: FiniteSpace
    target: FiniteSpace
    matrix: np.ndarray
    defined: np.ndarray

    def row(self, z: str) -> FiniteMeasure:
        i = self.base.index(z)
        if not self.defined[i]:
            raise KeyError(f"kernel row {z!r} is undefined (R_phi-null)")
        return FiniteMeasure(self.target, self.matrix[i])

    def rows(self):
        for i in np.flatnonzero(self.defined):
            yield self.base.labels[i], FiniteMeasure(self.target, self.matrix[i])

    def mix(self, weights: FiniteMeasure) -> FiniteMeasure:
        """``sum_z row(z) * weights(z)`` over defined rows."""
        w = np.where(self.defined, weights.weights, 0.0)
        return FiniteMeasure(self.target, w @ self.matrix)


def as_function(space: FiniteSpace, f: Function) -> np.ndarray:
    if callable(f):
        return np.array([float(f(lab)) for lab in space.labels])
    arr = np.asarray(f, dtype=float)
    if arr.shape != (space.size,):
        raise ValueError(f"function needs {space.size} values, got shape {arr.shape}")
    return arr


def disintegrate(R: FiniteMeasure, phi: Map) -> tuple[FiniteMeasure, Kernel]:
    """Split ``R`` into its image ``R_phi`` and the conditional kernel given ``phi``."""
    if not R.support.any():
        raise DomainError("cannot disintegrate the zero measure")
    r_phi = pushforward(R, phi)
    defined = r_phi.support
    mat = np.zeros((phi.target.size, R.space.size))
    cols = np.arange(R.space.size)
    on = defined[phi.index]
    mat[phi.index[on], cols[on]] = R.weights[on] / r_phi.weights[phi.index[on]]
    return r_phi, Kernel(phi.target, R.space, mat, defined)


def _finite_cond(R: FiniteMeasure, phi: Map, f: np.ndarray) -> np.ndarray:
    r_phi = np.bincount(phi.index, weights=R.weights, minlength=phi.target.size)
    num = np.bincount(phi.index, weights=R.weights * f, minlength=phi.target.size)
    out = np.full(phi.target.size, np.nan)
    on = r_phi > 0
    out[on] = num[on] / r_phi[on]
    return out


@dataclass(frozen=True)
class _BlockView:
    """Truncated block measure with its map to the observable's values."""

    measure: FiniteMeasure
    block: np.ndarray
    phi: Map
    depth: int


def _block_view(R: BlockMeasure, phi: Callable[[str], str], depth: int | None) -> _BlockView:
    tr = R.truncate(depth)
    return _BlockView(tr.measure, tr.block, Map.from_callable(tr.measure.space, phi), tr.depth)


def block_gamma(view: _BlockView) -> np.ndarray:
    """Gamma on the values of ``phi``: the value set is partitioned by the first
    block whose atoms reach each value; ``gamma_n = 2**-n / max(1, R_phi(X_n))``."""
    nz = view.phi.target.size
    zblock = np.full(nz, view.depth + 1, dtype=np.intp)
    np.minimum.at(zblock, view.phi.index, view.block)
    r_phi = np.bincount(view.phi.index, weights=view.measure.weights, minlength=nz)
    masses = np.bincount(zblock - 1, weights=r_phi, minlength=view.depth + 1)
    n = zblock.astype(float)
    return np.exp2(-n) / np.maximum(1.0, masses[zblock - 1])


def cond_expect(R: FiniteMeasure | BlockMeasure, phi, f: Function, *,
                depth: int | None = None, threshold: float = DEFAULT_DIVERGENCE) -> Conditional:
    """``E_R(f | phi = z)`` on the support of ``R_phi``.

    For a finite ``R``, ``phi`` is a :class:`Map` and ``f`` an array or label
    function. For a :class:`BlockMeasure`, ``phi`` and ``f`` are label
    functions and the expectation is taken under ``gamma(phi) R`` truncated at
    ``depth``; ``NonIntegrable`` is raised when ``sum |f| d(gamma(phi) R)``
    exceeds ``threshold``.
    """
    if isinstance(R, BlockMeasure):
        view = _block_view(R, phi, depth)
        fv = as_function(view.measure.space, f)
        g = block_gamma(view)[view.phi.index]
        weighted = view.measure.scale(g)
        if np.dot(np.abs(fv), weighted.weights) > threshold:
            raise NonIntegrable(f"sum |f| d(gamma R) exceeds {threshold:g} at depth {view.depth}")
        return Conditional(view.phi.target, _finite_cond(weighted, view.phi, fv))
    return Conditional(phi.target, _finite_cond(R, phi, as_function(R.space, f)))


def cond_expect_nonneg(R: FiniteMeasure | BlockMeasure, phi, f: Function, *,
                       depth: int | None = None,
                       threshold: float = DEFAULT_DIVERGENCE) -> Conditional:
    """Conditional expectation of a ``[0, inf]``-valued ``f``; may be ``inf``.

    On a block measure the value at ``z`` is the ratio of partial sums over the
    first ``depth`` blocks; it is declared ``inf`` once it exceeds
    ``threshold`` while the last block still adds to the numerator.
    """
    if isinstance(R, BlockMeasure):
        view = _block_view(R, phi, depth)
        meas, pmap = view.measure, view.phi
    else:
        view, meas, pmap = None, R, phi
    fv = as_function(meas.space, f)
    if np.any(fv < 0) or np.any(np.isnan(fv)):
        raise ValueError("f must take values in [0, inf]")
    nz = pmap.target.size
    contrib = ext_mul(fv, meas.weights)
    num = np.bincount(pmap.index, weights=contrib, minlength=nz)
    den = np.bincount(pmap.index, weights=meas.weights, minlength=nz)
    out = np.full(nz, np.nan)
    on = den > 0
    with np.errstate(invalid="ignore"):
        out[on] = num[on] / den[on]
    if view is not None:
        last = np.where(view.block == view.depth, contrib, 0.0)
        still = np.bincount(pmap.index, weights=last, minlength=nz) > 0
        out[on & still & (out > threshold)] = np.inf
    return Conditional(pmap.target, out)


def expect_nonneg(R: FiniteMeasure | BlockMeasure, f: Function, *,
                  depth: int | None = None, threshold: float = DEFAULT_DIVERGENCE) -> float:
    """``E_R f`` in ``[0, inf]`` as a monotone limit over blocks."""
    if isinstance(R, BlockMeasure):
        tr = R.truncate(depth)
        fv = as_function(tr.measure.space, f)
        contrib = ext_mul(fv, tr.measure.weights)
        total = float(contrib.sum())
        growing = contrib[tr.block == tr.depth].sum() > 0
        return np.inf if (total > threshold and growing) else total
    fv = as_function(R.space, f)
    return float(ext_mul(fv, R.weights).sum())


def marginal_density(Q: FiniteMeasure, R: FiniteMeasure, phi: Map) -> Conditional:
    """``dQ_phi / dR_phi`` computed as ``E_R(dQ/dR | phi)``."""
    theta = density(Q, R)
    return cond_expect(R, phi, theta)


@dataclass(frozen=True)
class DensityFactorization:
    """Atomwise ``dQ/dR = marginal * bridge``; only ``included`` (Q-charged) atoms are asserted."""

    space: FiniteSpace
    lhs: np.ndarray
    marginal_factor: np.ndarray
    bridge_factor: np.ndarray
    included: np.ndarray

    @property
    def max_error(self) -> float:
        if not self.included.any():
            return 0.0
        i = self.included
        return float(np.max(np.abs(self.lhs[i] - self.marginal_factor[i] * self.bridge_factor[i])))


def density_factorize(Q: FiniteMeasure, R: FiniteMeasure, phi: Map) -> DensityFactorization:
    theta = density(Q, R)
    marg = marginal_density(Q, R, phi).values[phi.index]
    included = Q.support
    q_phi = np.bincount(phi.index, weights=Q.weights, minlength=phi.target.size)
    r_phi = np.bincount(phi.index, weights=R.weights, minlength=phi.target.size)
    bridge = np.full(Q.space.size, np.nan)
    i = included
    q_cond = Q.weights[i] / q_phi[phi.index[i]]
    r_cond = R.weights[i] / r_phi[phi.index[i]]
    bridge[i] = q_cond / r_cond
    return DensityFactorization(Q.space, theta, marg, bridge, included)


def cond_density_formula(Q: FiniteMeasure, R: FiniteMeasure, phi: Map, f: Function) -> Conditional:
    """``E_Q(f | phi)`` as ``E_R(theta f | phi) / E_R(theta | phi)`` on the support of ``Q_phi``."""
    theta = density(Q, R)
    fv = as_function(Q.space, f)
    num = cond_expect(R, phi, theta * fv).values
    den = cond_expect(R, phi, theta).values
    q_on = pushforward(Q, phi).support
    bad = q_on & ~(den > 0)
    if bad.any():
        raise DomainError("E_R(dQ/dR | phi) vanishes on the support of Q_phi")
    out = np.full(phi.target.size, np.nan)
    out[q_on] = num[q_on] / den[q_on]
    return Conditional(phi.target, out)


def vanishing_denominator(Q: FiniteMeasure, R: FiniteMeasure, phi: Map) -> list[str]:
    """Values ``z`` charged by ``R_phi`` where ``E_R(dQ/dR | phi = z) = 0``."""
    den = marginal_density(Q, R, phi)
    return [lab for lab, v in zip(phi.target.labels, den.values) if v == 0.0]


__all__ = [
    "Conditional", "Kernel", "NotAbsolutelyContinuous", "as_function", "block_gamma",
    "cond_density_formula", "cond_expect", "cond_expect_nonneg", "density_factorize",
    "disintegrate", "expect_nonneg", "marginal_density", "vanishing_denominator",
]
