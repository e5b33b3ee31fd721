"""Extended nonnegative reals, ``[0, +inf]``.

IEEE floats already carry ``inf`` but evaluate ``0 * inf`` to ``nan``.
Measure theory needs ``0 * inf = 0``, so products go through :func:`ext_mul`
(arrays) or :class:`ExtNonNeg` (scalars).
"""
from __future__ import annotations

import functools
import math

import numpy as np

INF = math.inf


@functools.total_ordering
class ExtNonNeg:
    """A value in ``[0, +inf]`` with the conventions ``0*inf = 0``, ``a + inf = inf``."""

    __slots__ = ("_v",)

    def __init__(self, value=0.0):
        if isinstance(value, ExtNonNeg):
            value = value._v
        v = float(value)
        if math.isnan(v) or v < 0.0:
            raise ValueError(f"ExtNonNeg requires a value in [0, inf], got {value!r}")
        self._v = v

    @classmethod
    def infinity(cls) -> "ExtNonNeg":
        return cls(INF)

    @property
    def value(self) -> float:
        return self._v

    def is_finite(self) -> bool:
        return self._v != INF

    def __float__(self):
        return self._v

    def __add__(self, other):
        other = ExtNonNeg(other)
        return ExtNonNeg(self._v + other._v)

    __radd__ = __add__

    def __mul__(self, other):
        other = ExtNonNeg(other)
        if self._v == 0.0 or other._v == 0.0:
            return ExtNonNeg(0.0)
        return ExtNonNeg(self._v * other._v)

    __rmul__ = __mul__

    def __eq__(self, other):
        try:
            return self._v == ExtNonNeg(other)._v
        except (TypeError, ValueError):
            return NotImplemented

    def __lt__(self, other):
        return self._v < ExtNonNeg(other)._v

    def __hash__(self):
        return hash(self._v)

    def __repr__(self):
        return "ExtNonNeg(inf)" if self._v == INF else f"ExtNonNeg({self._v!r})"


def ext_mul(a, b):
    """Elementwise product on ``[0, inf]`` arrays with ``0*inf = 0``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    with np.errstate(invalid="ignore"):
        out = a * b
    return np.where((a == 0.0) | (b == 0.0), 0.0, out)


def ext_sum(values, weights):
    """``sum(values * weights)`` in ``[0, inf]``; a zero weight annihilates ``inf``."""
    return float(np.sum(ext_mul(values, weights)))
