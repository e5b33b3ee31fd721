"""Finite and block (sigma-finite) measures on labeled spaces."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterator, Mapping

import numpy as np

from .errors import NotAbsolutelyContinuous

DEFAULT_ATOM_THRESHOLD = 1e6
DEFAULT_DEPTH = 64


@dataclass(frozen=True)
class FiniteSpace:
    """Ordered, duplicate-free list of point labels."""

    labels: tuple[str, ...]
    _index: dict = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        labels = tuple(str(x) for x in self.labels)
        if not labels:
            raise ValueError("a FiniteSpace needs at least one point")
        index = {lab: i for i, lab in enumerate(labels)}
        if len(index) != len(labels):
            dup = sorted({lab for lab in labels if labels.count(lab) > 1})
            raise ValueError(f"duplicate labels: {dup}")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "_index", index)

    def __len__(self):
        return len(self.labels)

    def __iter__(self):
        return iter(self.labels)

    def __contains__(self, label):
        return label in self._index

    def index(self, label: str) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise KeyError(f"label {label!r} not in space") from None

    @property
    def size(self) -> int:
        return len(self.labels)

    @classmethod
    def product(cls, *spaces: "FiniteSpace", sep: str = ",") -> "FiniteSpace":
        """Cartesian product in lexicographic order; labels joined by ``sep``."""
        labels = [""]
        for k, sp in enumerate(spaces):
            labels = [(a + sep + b) if k else b for a in labels for b in sp.labels]
        return cls(tuple(labels))


@dataclass(frozen=True)
class Map:
    """A total map between finite spaces, stored as an index array."""

    source: FiniteSpace
    target: FiniteSpace
    index: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.index, dtype=np.intp)
        if idx.shape != (self.source.size,):
            raise ValueError("map index must have one entry per source point")
        if idx.size and (idx.min() < 0 or idx.max() >= self.target.size):
            raise ValueError("map index out of range of target space")
        idx = idx.copy()
        idx.flags.writeable = False
        object.__setattr__(self, "index", idx)

    @classmethod
    def from_callable(cls, source: FiniteSpace, fn: Callable[[str], str],
                      target: FiniteSpace | None = None) -> "Map":
        """Build from a label function; the target defaults to the image in first-seen order."""
        images = [str(fn(lab)) for lab in source.labels]
        if target is None:
            target = FiniteSpace(tuple(dict.fromkeys(images)))
        return cls(source, target, np.array([target.index(z) for z in images], dtype=np.intp))

    @classmethod
    def from_dict(cls, source: FiniteSpace, mapping: Mapping[str, str],
                  target: FiniteSpace | None = None) -> "Map":
        missing = [lab for lab in source.labels if lab not in mapping]
        if missing:
            raise ValueError(f"map is not total; missing {missing[:5]}")
        return cls.from_callable(source, lambda lab: mapping[lab], target)

    @classmethod
    def identity(cls, space: FiniteSpace) -> "Map":
        return cls(space, space, np.arange(space.size))

    @classmethod
    def constant(cls, space: FiniteSpace, value: str = "*") -> "Map":
        return cls(space, FiniteSpace((value,)), np.zeros(space.size, dtype=np.intp))

    def __call__(self, label: str) -> str:
        return self.target.labels[self.index[self.source.index(label)]]

    def fiber(self, z: int) -> np.ndarray:
        return np.flatnonzero(self.index == z)


@dataclass(frozen=True)
class FiniteMeasure:
    """Nonnegative finite weights on a :class:`FiniteSpace`."""

    space: FiniteSpace
    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.shape != (self.space.size,):
            raise ValueError(f"expected {self.space.size} weights, got shape {w.shape}")
        if not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_dict(cls, space: FiniteSpace, weights: Mapping[str, float]) -> "FiniteMeasure":
        w = np.zeros(space.size)
        for lab, val in weights.items():
            w[space.index(lab)] = val
        return cls(space, w)

    @classmethod
    def point_mass(cls, space: FiniteSpace, label: str, mass: float = 1.0) -> "FiniteMeasure":
        w = np.zeros(space.size)
        w[space.index(label)] = mass
        return cls(space, w)

    @classmethod
    def zero(cls, space: FiniteSpace) -> "FiniteMeasure":
        return cls(space, np.zeros(space.size))

    @property
    def mass(self) -> float:
        return math.fsum(self.weights)

    @property
    def support(self) -> np.ndarray:
        return self.weights > 0

    def as_dict(self) -> dict[str, float]:
        return {lab: float(w) for lab, w in zip(self.space.labels, self.weights)}

    def __getitem__(self, label: str) -> float:
        return float(self.weights[self.space.index(label)])

    def __add__(self, other: "FiniteMeasure") -> "FiniteMeasure":
        _same_space(self, other)
        return FiniteMeasure(self.space, self.weights + other.weights)

    def scale(self, c) -> "FiniteMeasure":
        """Multiply by a scalar or by a nonnegative function given as an array."""
        return FiniteMeasure(self.space, self.weights * np.asarray(c, dtype=float))

    def normalized(self) -> "FiniteMeasure":
        m = self.mass
        if m <= 0:
            raise ValueError("cannot normalize the zero measure")
        return FiniteMeasure(self.space, self.weights / m)

    def integrate(self, f) -> float:
        return float(np.dot(np.asarray(f, dtype=float), self.weights))

    def is_probability(self, tol: float = 1e-12) -> bool:
        return abs(self.mass - 1.0) <= tol


def _same_space(a: FiniteMeasure, b: FiniteMeasure) -> None:
    if a.space != b.space:
        raise ValueError("measures live on different spaces")


# -- block (sigma-finite) measures ---------------------------------------------------


@dataclass(frozen=True)
class BlockMeasure:
    """Countable union of finite blocks, generated lazily.

    ``generator(n)`` returns the :class:`FiniteMeasure` of block ``n >= 1``.
    With ``disjoint=True`` (a genuine measure given by a sigma-finite
    partition) an atom label never occurs in two blocks. Pushforwards of a
    block measure set ``disjoint=False``: the image of distinct blocks may
    charge the same atom, which is how non-sigma-finite images show up.
    """

    generator: Callable[[int], FiniteMeasure]
    truncation_depth: int = DEFAULT_DEPTH
    disjoint: bool = True
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.truncation_depth < 1:
            raise ValueError("truncation_depth must be >= 1")

    @classmethod
    def from_finite(cls, mu: FiniteMeasure) -> "BlockMeasure":
        """Wrap a bounded measure as a single block."""
        return cls(lambda n: mu if n == 1 else FiniteMeasure.zero(mu.space), 1)

    def block(self, n: int) -> FiniteMeasure:
        if n < 1:
            raise ValueError("blocks are indexed from 1")
        if n not in self._cache:
            blk = self.generator(n)
            if not isinstance(blk, FiniteMeasure):
                raise TypeError("block generator must return a FiniteMeasure")
            self._cache[n] = blk
        return self._cache[n]

    def blocks(self, depth: int | None = None) -> Iterator[tuple[int, FiniteMeasure]]:
        depth = self.truncation_depth if depth is None else depth
        for n in range(1, depth + 1):
            yield n, self.block(n)

    def truncate(self, depth: int | None = None) -> "Truncation":
        """Materialize blocks ``1..depth`` as one finite measure.

        Atoms are merged by label (first-seen order); ``block[i]`` is the first
        block charging atom ``i``.
        """
        depth = self.truncation_depth if depth is None else depth
        order: dict[str, int] = {}
        first_block: list[int] = []
        mass: list[float] = []
        for n, blk in self.blocks(depth):
            for lab, w in zip(blk.space.labels, blk.weights):
                i = order.get(lab)
                if i is None:
                    order[lab] = len(first_block)
                    first_block.append(n)
                    mass.append(float(w))
                elif w > 0:
                    if mass[i] == 0.0:
                        first_block[i] = n
                    elif self.disjoint:
                        raise ValueError(f"atom {lab!r} repeats across blocks of a disjoint BlockMeasure")
                    mass[i] += float(w)
        space = FiniteSpace(tuple(order))
        return Truncation(FiniteMeasure(space, np.array(mass)), np.array(first_block, dtype=np.intp), depth)

    def pushforward(self, fn: Callable[[str], str]) -> "BlockMeasure":
        """Lazy image measure; block ``n`` is the image of source block ``n``."""
        def gen(n: int) -> FiniteMeasure:
            return pushforward(self.block(n), Map.from_callable(self.block(n).space, fn))
        return BlockMeasure(gen, self.truncation_depth, disjoint=False)


@dataclass(frozen=True)
class Truncation:
    measure: FiniteMeasure
    block: np.ndarray
    depth: int


@dataclass(frozen=True)
class SigmaFinitePartition:
    """``(block index, mass)`` pairs witnessing sigma-finiteness up to a depth."""

    blocks: tuple[tuple[int, float], ...]

    def __post_init__(self):
        for n, m in self.blocks:
            if not (math.isfinite(m) and m >= 0):
                raise ValueError(f"block {n} has invalid mass {m}")


@dataclass(frozen=True)
class SigmaFinite:
    partition: SigmaFinitePartition


@dataclass(frozen=True)
class DivergentAtomReport:
    """Heuristic flag: ``atom`` kept gaining mass from several blocks past the threshold.

    ``depth`` is the first block at which the accumulated mass exceeded the
    threshold; ``probe_depth`` is how far the probe looked.
    """

    atom: str
    partial_mass: float
    depth: int
    probe_depth: int


# -- operations ------------------------------------------------------------------------


def pushforward(mu: FiniteMeasure, phi: Map) -> FiniteMeasure:
    """Image measure ``phi # mu``; summation runs in source label order."""
    if phi.source != mu.space:
        raise ValueError("map source differs from the measure's space")
    w = np.bincount(phi.index, weights=mu.weights, minlength=phi.target.size)
    return FiniteMeasure(phi.target, w)


def density(Q: FiniteMeasure, R: FiniteMeasure) -> np.ndarray:
    """Radon-Nikodym derivative dQ/dR, set to 0 off the support of R."""
    _same_space(Q, R)
    bad = Q.support & ~R.support
    if bad.any():
        labels = [Q.space.labels[i] for i in np.flatnonzero(bad)[:5]]
        raise NotAbsolutelyContinuous(f"Q charges R-null atoms {labels}")
    theta = np.zeros(Q.space.size)
    s = R.support
    theta[s] = Q.weights[s] / R.weights[s]
    return theta


def lebesgue_decompose(P: FiniteMeasure, R: FiniteMeasure) -> tuple[FiniteMeasure, FiniteMeasure]:
    """Split ``P = P_a + P_s`` with ``P_a << R`` and ``P_s`` singular to ``R``."""
    _same_space(P, R)
    on = R.support
    return (FiniteMeasure(P.space, np.where(on, P.weights, 0.0)),
            FiniteMeasure(P.space, np.where(on, 0.0, P.weights)))


def partition(mu: BlockMeasure, depth: int | None = None) -> SigmaFinitePartition:
    """Group atoms by the first block charging them, with the accumulated masses."""
    tr = mu.truncate(depth)
    masses = np.bincount(tr.block - 1, weights=tr.measure.weights, minlength=tr.depth)
    return SigmaFinitePartition(tuple((n + 1, float(m)) for n, m in enumerate(masses)))


def gamma(mu: BlockMeasure, depth: int | None = None) -> np.ndarray:
    """Per-block weights ``2**-n / max(1, mass_n)``, ``n = 1..depth``.

    ``gamma * mu`` has total mass at most 1 and ``gamma`` is positive on every
    block, so multiplying by it turns ``mu`` into an equivalent bounded measure.
    """
    part = partition(mu, depth)
    return np.array([2.0 ** -n / max(1.0, m) for n, m in part.blocks])


def gamma_on_atoms(mu: BlockMeasure, depth: int | None = None) -> tuple[Truncation, np.ndarray]:
    tr = mu.truncate(depth)
    g = gamma(mu, tr.depth)
    return tr, g[tr.block - 1]


def sigma_finite_probe(mu: BlockMeasure | FiniteMeasure,
                       atom_threshold: float = DEFAULT_ATOM_THRESHOLD,
                       depth: int = DEFAULT_DEPTH) -> SigmaFinite | DivergentAtomReport:
    """Look for an atom that accumulates unbounded mass across blocks.

    This is a heuristic, never a proof. An atom is flagged when its
    accumulated mass exceeds ``atom_threshold``, it was charged by at least
    two blocks, and it is still gaining mass at the last block inspected.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    if isinstance(mu, FiniteMeasure):
        mu = BlockMeasure.from_finite(mu)
    acc: dict[str, float] = {}
    hits: dict[str, int] = {}
    last: dict[str, int] = {}
    crossed: dict[str, int] = {}
    for n, blk in mu.blocks(depth):
        for lab, w in zip(blk.space.labels, blk.weights):
            if w <= 0:
                continue
            acc[lab] = acc.get(lab, 0.0) + float(w)
            hits[lab] = hits.get(lab, 0) + 1
            last[lab] = n
            if lab not in crossed and acc[lab] > atom_threshold:
                crossed[lab] = n
    flagged = [lab for lab in crossed if hits[lab] >= 2 and last[lab] == depth]
    if flagged:
        lab = min(flagged, key=lambda a: crossed[a])
        return DivergentAtomReport(lab, acc[lab], crossed[lab], depth)
    return SigmaFinite(partition(mu, depth))
