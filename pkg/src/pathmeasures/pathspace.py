"""Discrete path spaces, Markov measures and positive factorization.

Paths over ``N`` steps are tuples ``(x_0, ..., x_N)`` enumerated
lexicographically in the state order; a path's label joins its state labels
with commas. Unbounded path measures are :class:`BlockMeasure` objects whose
atom labels are such comma-joined paths.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from . import _kernels
from .conditioning import cond_expect_nonneg
from .errors import MeasurabilityViolation
from .extreal import ext_mul
from .measure import (DEFAULT_ATOM_THRESHOLD, DEFAULT_DEPTH, BlockMeasure, DivergentAtomReport,
                      FiniteMeasure, FiniteSpace, Map, SigmaFinite, pushforward, sigma_finite_probe)

SEP = ","
EXHAUSTIVE_LIMIT = 10_000
SAMPLED_PERTURBATIONS = 1000
ROW_TOL = 1e-12

PathFunction = Union[np.ndarray, Callable[[tuple], float]]


@dataclass(frozen=True)
class TimeGrid:
    """``N`` equal steps on ``[0, 1]``."""

    N: int

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("a time grid needs N >= 1 steps")

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.N + 1) / self.N

    def __len__(self):
        return self.N + 1


@dataclass(frozen=True)
class PathMeasure:
    states: FiniteSpace
    grid: TimeGrid
    weights: FiniteMeasure
    paths: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        n = self.states.size ** (self.grid.N + 1)
        if self.weights.space.size != n:
            raise ValueError(f"expected {n} path weights, got {self.weights.space.size}")
        paths = np.array(list(itertools.product(range(self.states.size), repeat=self.grid.N + 1)),
                         dtype=np.intp).reshape(n, self.grid.N + 1)
        paths.flags.writeable = False
        object.__setattr__(self, "paths", paths)

    @classmethod
    def from_weights(cls, states, N: int, weights) -> "PathMeasure":
        states = states if isinstance(states, FiniteSpace) else FiniteSpace(tuple(states))
        space = path_space(states, N)
        return cls(states, TimeGrid(N), FiniteMeasure(space, weights))

    @property
    def N(self) -> int:
        return self.grid.N

    @property
    def space(self) -> FiniteSpace:
        return self.weights.space

    @property
    def mass(self) -> float:
        return self.weights.mass

    def path_labels(self, i: int) -> tuple[str, ...]:
        return tuple(self.states.labels[s] for s in self.paths[i])

    def time_map(self, t: int) -> Map:
        return Map(self.space, self.states, self.paths[:, t])

    def window_map(self, s: int, t: int) -> Map:
        if not 0 <= s <= t <= self.N:
            raise ValueError("window needs 0 <= s <= t <= N")
        k = t - s + 1
        target = FiniteSpace.product(*([self.states] * k), sep=SEP)
        idx = np.zeros(self.paths.shape[0], dtype=np.intp)
        for j in range(s, t + 1):
            idx = idx * self.states.size + self.paths[:, j]
        return Map(self.space, target, idx)

    def endpoint_map(self) -> Map:
        target = FiniteSpace.product(self.states, self.states, sep=SEP)
        return Map(self.space, target, self.paths[:, 0] * self.states.size + self.paths[:, -1])

    def marginal(self, t: int) -> FiniteMeasure:
        return pushforward(self.weights, self.time_map(t))

    def with_weights(self, weights) -> "PathMeasure":
        return PathMeasure(self.states, self.grid, FiniteMeasure(self.space, weights))


def path_space(states: FiniteSpace, N: int) -> FiniteSpace:
    return FiniteSpace.product(*([states] * (N + 1)), sep=SEP)


@dataclass(frozen=True)
class MarkovSpec:
    """Initial measure (not necessarily normalized) and one stochastic matrix per step."""

    states: FiniteSpace
    grid: TimeGrid
    initial: FiniteMeasure
    kernels: np.ndarray

    def __post_init__(self):
        k = np.array(self.kernels, dtype=float)
        s = self.states.size
        if k.shape != (self.grid.N, s, s):
            raise ValueError(f"kernels must have shape {(self.grid.N, s, s)}, got {k.shape}")
        if np.any(k < 0) or not np.all(np.isfinite(k)):
            raise ValueError("kernel entries must be finite and nonnegative")
        sums = k.sum(axis=2)
        bad = np.argwhere(np.abs(sums - 1.0) > ROW_TOL)
        if bad.size:
            step, row = bad[0]
            raise ValueError(f"kernel {step} row {self.states.labels[row]!r} sums to {sums[step, row]!r}")
        if self.initial.space != self.states:
            raise ValueError("initial measure must live on the state space")
        k.flags.writeable = False
        object.__setattr__(self, "kernels", k)


def paths_of(spec: MarkovSpec) -> PathMeasure:
    """Expand a Markov description into one weight per path."""
    w = _kernels.path_weights(spec.initial.weights, spec.kernels)
    return PathMeasure.from_weights(spec.states, spec.grid.N, w)


# -- generic path tables (finite measures and block truncations) ----------------------


@dataclass(frozen=True)
class _PathTable:
    states: tuple[str, ...]
    paths: np.ndarray
    weights: np.ndarray
    labels: tuple[str, ...]
    block: np.ndarray | None = None
    depth: int | None = None


def _table(R: PathMeasure | BlockMeasure, depth: int | None = None) -> _PathTable:
    if isinstance(R, PathMeasure):
        return _PathTable(R.states.labels, R.paths, R.weights.weights, R.space.labels)
    tr = R.truncate(depth)
    split = [lab.split(SEP) for lab in tr.measure.space.labels]
    if len({len(p) for p in split}) != 1:
        raise ValueError("all path labels of a block measure must have the same length")
    states = tuple(dict.fromkeys(s for p in split for s in p))
    code = {s: i for i, s in enumerate(states)}
    paths = np.array([[code[s] for s in p] for p in split], dtype=np.intp)
    return _PathTable(states, paths, tr.measure.weights, tr.measure.space.labels, tr.block, tr.depth)


def _keys(paths: np.ndarray, cols) -> np.ndarray:
    """Dense integer id for each distinct row of ``paths[:, cols]``."""
    sub = paths[:, list(cols)]
    if sub.shape[1] == 0:
        return np.zeros(paths.shape[0], dtype=np.intp)
    _, inv = np.unique(sub, axis=0, return_inverse=True)
    return inv.reshape(-1).astype(np.intp)


def _evaluate(table: _PathTable, f: PathFunction) -> np.ndarray:
    if callable(f):
        return np.array([float(f(tuple(table.states[s] for s in row))) for row in table.paths])
    arr = np.asarray(f, dtype=float)
    if arr.shape != (table.paths.shape[0],):
        raise ValueError(f"path function needs {table.paths.shape[0]} values, got {arr.shape}")
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise ValueError("path functions must take values in [0, inf]")
    return arr


def check_measurable(table: _PathTable, values: np.ndarray, cols, name: str,
                     seed: int = 0) -> None:
    """Raise unless ``values`` depends only on the coordinates in ``cols``.

    Exhaustive (constant on every group of paths sharing ``cols``) up to
    ``EXHAUSTIVE_LIMIT`` paths; above that, ``SAMPLED_PERTURBATIONS`` random
    perturbations of the other coordinates.
    """
    cols = list(cols)
    n = table.paths.shape[0]
    if n <= EXHAUSTIVE_LIMIT:
        key = _keys(table.paths, cols)
        first = np.full(key.max() + 1, -1, dtype=np.intp)
        for i in range(n):
            j = first[key[i]]
            if j < 0:
                first[key[i]] = i
            elif values[i] != values[j]:
                raise MeasurabilityViolation(
                    f"{name} differs on {table.labels[i]!r} and {table.labels[j]!r}, "
                    f"which agree on coordinates {cols}")
        return
    rng = np.random.default_rng(seed)
    lookup = {tuple(row): i for i, row in enumerate(table.paths)}
    free = [c for c in range(table.paths.shape[1]) if c not in cols]
    n_states = len(table.states)
    for _ in range(SAMPLED_PERTURBATIONS):
        i = int(rng.integers(n))
        row = table.paths[i].copy()
        row[free] = rng.integers(n_states, size=len(free))
        j = lookup.get(tuple(row))
        if j is not None and values[i] != values[j]:
            raise MeasurabilityViolation(
                f"{name} differs on {table.labels[i]!r} and {table.labels[j]!r}, "
                f"which agree on coordinates {cols}")


def _nonneg_given(table: _PathTable, f: np.ndarray, key: np.ndarray, threshold: float) -> np.ndarray:
    """``E(f | key)`` per key id in ``[0, inf]`` (nan on null keys), with block divergence detection."""
    nk = int(key.max()) + 1
    contrib = ext_mul(f, table.weights)
    num = np.bincount(key, weights=contrib, minlength=nk)
    den = np.bincount(key, weights=table.weights, minlength=nk)
    out = np.full(nk, np.nan)
    on = den > 0
    with np.errstate(invalid="ignore"):
        out[on] = num[on] / den[on]
    if table.block is not None:
        last = np.where(table.block == table.depth, contrib, 0.0)
        still = np.bincount(key, weights=last, minlength=nk) > 0
        out[on & still & (out > threshold)] = np.inf
    return out


# -- conditionability and the Markov property ------------------------------------------


@dataclass(frozen=True)
class ConditionabilityReport:
    per_time: tuple  # (t_index, time, SigmaFinite | DivergentAtomReport)
    conditionable: bool
    sigma_finite_witness: int | None  # a passing time index: Q_T is sigma-finite for any T containing it

    def passes(self, t_index: int) -> bool:
        return isinstance(self.per_time[t_index][2], SigmaFinite)


def time_marginal_blocks(Q: BlockMeasure, t: int) -> BlockMeasure:
    return Q.pushforward(lambda lab: lab.split(SEP)[t])


def _n_steps(Q: PathMeasure | BlockMeasure) -> int:
    if isinstance(Q, PathMeasure):
        return Q.N
    return len(Q.block(1).space.labels[0].split(SEP)) - 1


def is_conditionable(Q: PathMeasure | BlockMeasure, depth: int = DEFAULT_DEPTH,
                     threshold: float = DEFAULT_ATOM_THRESHOLD) -> ConditionabilityReport:
    """Probe every time marginal for sigma-finiteness."""
    N = _n_steps(Q)
    rows = []
    for t in range(N + 1):
        if isinstance(Q, PathMeasure):
            res = sigma_finite_probe(Q.marginal(t), threshold, depth)
        else:
            res = sigma_finite_probe(time_marginal_blocks(Q, t), threshold, depth)
        rows.append((t, t / N, res))
    passing = [t for t, _, r in rows if isinstance(r, SigmaFinite)]
    return ConditionabilityReport(tuple(rows), len(passing) == N + 1, passing[0] if passing else None)


@dataclass(frozen=True)
class MarkovCheck:
    is_markov: bool
    max_deviation: float


MARKOV_TOL = 1e-10


def check_markov(Q: PathMeasure | BlockMeasure, t_index: int, depth: int | None = None) -> MarkovCheck:
    """Total-variation gap between the law of the future given the past and given the present.

    Maximized over past atoms of positive mass; block measures are checked on
    their truncation.
    """
    table = _table(Q, depth)
    N = table.paths.shape[1] - 1
    if not 0 <= t_index <= N:
        raise ValueError(f"t_index must lie in 0..{N}")
    past = _keys(table.paths, range(t_index + 1))
    fut = _keys(table.paths, range(t_index + 1, N + 1))
    now = table.paths[:, t_index]
    w = table.weights
    n_past, n_fut, n_now = past.max() + 1, fut.max() + 1, now.max() + 1
    joint_past = np.zeros((n_past, n_fut))
    np.add.at(joint_past, (past, fut), w)
    joint_now = np.zeros((n_now, n_fut))
    np.add.at(joint_now, (now, fut), w)
    m_past = joint_past.sum(axis=1)
    m_now = joint_now.sum(axis=1)
    now_of_past = np.zeros(n_past, dtype=np.intp)
    now_of_past[past] = now
    dev = 0.0
    for p in np.flatnonzero(m_past > 0):
        x = now_of_past[p]
        tv = 0.5 * np.abs(joint_past[p] / m_past[p] - joint_now[x] / m_now[x]).sum()
        dev = max(dev, float(tv))
    return MarkovCheck(dev <= MARKOV_TOL, dev)


# -- positive factorization -------------------------------------------------------------


def _close(a: float, b: float, tol: float) -> bool:
    if np.isinf(a) or np.isinf(b):
        return a == b
    return abs(a - b) <= tol * max(1.0, abs(a), abs(b))


@dataclass(frozen=True)
class FactorizationRow:
    state: str
    e_ab: float
    e_a: float
    e_b: float
    product: float
    guarded: float
    case: str
    case_ok: bool
    guarded_ok: bool | None  # None where E(ab | X_t) is infinite: the guarded identity does not apply


@dataclass(frozen=True)
class FactorizationReport:
    t_index: int
    rows: tuple[FactorizationRow, ...]

    @property
    def ok(self) -> bool:
        return all(r.case_ok and r.guarded_ok is not False for r in self.rows)

    def row(self, state: str) -> FactorizationRow:
        for r in self.rows:
            if r.state == state:
                return r
        raise KeyError(state)


def _factor_row(label, e_ab, e_a, e_b, tol) -> FactorizationRow:
    product = float(ext_mul(e_a, e_b))
    finite = np.isfinite(e_a) and np.isfinite(e_b)
    guarded = product if finite else 0.0
    if e_ab == 0.0:
        case, case_ok = "zero", (e_a == 0.0 or e_b == 0.0)
    else:
        case = "positive"
        case_ok = e_a > 0 and e_b > 0 and _close(e_ab, product, tol)
    guarded_ok = bool(_close(e_ab, guarded, tol)) if np.isfinite(e_ab) else None
    return FactorizationRow(label, float(e_ab), float(e_a), float(e_b), product, guarded,
                            case, bool(case_ok), guarded_ok)


def markov_factorization(R: PathMeasure | BlockMeasure, alpha: PathFunction, beta: PathFunction,
                         t_index: int, *, depth: int | None = None, threshold: float = 1e12,
                         tol: float = 1e-12) -> FactorizationReport:
    """Check ``E(ab | X_t) = E(a | X_t) E(b | X_t)`` state by state in ``[0, inf]``.

    ``alpha`` must depend on ``x_0..x_t`` and ``beta`` on ``x_t..x_N``; both
    are verified. Each row also carries the guarded product
    ``1{E(a|X_t) < inf, E(b|X_t) < inf} E(a|X_t) E(b|X_t)``.
    """
    table = _table(R, depth)
    N = table.paths.shape[1] - 1
    a = _evaluate(table, alpha)
    b = _evaluate(table, beta)
    check_measurable(table, a, range(t_index + 1), "alpha")
    check_measurable(table, b, range(t_index, N + 1), "beta")
    now = table.paths[:, t_index]
    e_ab = _nonneg_given(table, ext_mul(a, b), now, threshold)
    e_a = _nonneg_given(table, a, now, threshold)
    e_b = _nonneg_given(table, b, now, threshold)
    rows = tuple(_factor_row(table.states[x], e_ab[x], e_a[x], e_b[x], tol)
                 for x in range(len(e_ab)) if not np.isnan(e_ab[x]))
    return FactorizationReport(t_index, rows)


@dataclass(frozen=True)
class IntervalRow:
    window: str
    lhs: float
    e_a: float
    zeta: float
    e_b: float
    rhs: float
    e_ab: float
    ok: bool | None  # None where the left side is infinite


@dataclass(frozen=True)
class IntervalReport:
    s_index: int
    t_index: int
    rows: tuple[IntervalRow, ...]

    @property
    def ok(self) -> bool:
        return all(r.ok is not False for r in self.rows)


def markov_factorization_interval(R: PathMeasure | BlockMeasure, alpha: PathFunction,
                                  zeta: PathFunction, beta: PathFunction, s_index: int,
                                  t_index: int, *, depth: int | None = None,
                                  threshold: float = 1e12, tol: float = 1e-12) -> IntervalReport:
    """Check ``E(a z b | X_[s,t]) = 1{...<inf} E(a | X_s) z E(b | X_t)`` on window atoms."""
    table = _table(R, depth)
    N = table.paths.shape[1] - 1
    if not 0 <= s_index <= t_index <= N:
        raise ValueError("need 0 <= s <= t <= N")
    a = _evaluate(table, alpha)
    z = _evaluate(table, zeta)
    b = _evaluate(table, beta)
    check_measurable(table, a, range(s_index + 1), "alpha")
    check_measurable(table, z, range(s_index, t_index + 1), "zeta")
    check_measurable(table, b, range(t_index, N + 1), "beta")
    win = _keys(table.paths, range(s_index, t_index + 1))
    xs, xt = table.paths[:, s_index], table.paths[:, t_index]
    lhs = _nonneg_given(table, ext_mul(ext_mul(a, z), b), win, threshold)
    e_ab = _nonneg_given(table, ext_mul(a, b), win, threshold)
    e_a = _nonneg_given(table, a, xs, threshold)
    e_b = _nonneg_given(table, b, xt, threshold)
    rep = {}
    for i in range(table.paths.shape[0]):
        rep.setdefault(int(win[i]), i)
    rows = []
    for w, i in sorted(rep.items()):
        if np.isnan(lhs[w]):
            continue
        ea, eb = e_a[xs[i]], e_b[xt[i]]
        zeta_w = z[i]
        finite = np.isfinite(ea) and np.isfinite(eb)
        rhs = float(ext_mul(ext_mul(ea, zeta_w), eb)) if finite else 0.0
        ok = bool(_close(lhs[w], rhs, tol)) if np.isfinite(lhs[w]) else None
        label = SEP.join(table.states[c] for c in table.paths[i, s_index:t_index + 1])
        rows.append(IntervalRow(label, float(lhs[w]), float(ea), float(zeta_w), float(eb), rhs,
                                float(e_ab[w]), ok))
    return IntervalReport(s_index, t_index, tuple(rows))


def cond_expect_given_time(R: PathMeasure, f: PathFunction, t: int):
    """``E_R(f | X_t)`` for nonnegative ``f`` on a finite path measure."""
    table = _table(R)
    return cond_expect_nonneg(R.weights, R.time_map(t), _evaluate(table, f))


__all__ = [
    "ConditionabilityReport", "DivergentAtomReport", "FactorizationReport", "IntervalReport",
    "MarkovCheck", "MarkovSpec", "PathMeasure", "TimeGrid", "check_markov", "check_measurable",
    "is_conditionable", "markov_factorization", "markov_factorization_interval", "path_space",
    "paths_of", "time_marginal_blocks",
]
