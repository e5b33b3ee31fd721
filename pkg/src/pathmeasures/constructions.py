"""Countable, truncated models of the unbounded examples.

Every model here is a :class:`BlockMeasure` with finite blocks; the
pathologies appear only through how mass accumulates across blocks.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

from .measure import DEFAULT_DEPTH, BlockMeasure, FiniteMeasure, FiniteSpace

X_MAX = 20


@lru_cache(maxsize=None)
def _grid_space(n: int, x_max: int) -> FiniteSpace:
    return FiniteSpace(tuple(f"x{x}|Y{n}" for x in range(1, x_max + 1)))


def dyadic_columns(x_max: int = X_MAX, depth: int = DEFAULT_DEPTH) -> tuple[BlockMeasure, BlockMeasure]:
    """``R(x, y) = 2**-x 2**-y`` and ``Q = 2**y R`` on pairs of positive integers.

    Block ``n`` lumps the columns ``2**(n-1) <= y < 2**n`` into one atom per
    ``x <= x_max``, so ``Q`` gives each lumped atom ``2**(n-1) 2**-x``. Both
    measures are sigma-finite, yet the image of ``Q`` under ``(x, y) -> x``
    charges every ``x`` with infinite mass: after ``d`` blocks the atom ``x``
    holds ``(2**d - 1) 2**-x``.
    """
    xs = np.arange(1, x_max + 1, dtype=float)

    def r_block(n: int) -> FiniteMeasure:
        lo, hi = 2.0 ** (n - 1), 2.0 ** n
        col = 2.0 ** -(lo - 1) - 2.0 ** -(hi - 1)  # sum of 2**-y over the column group
        return FiniteMeasure(_grid_space(n, x_max), np.exp2(-xs) * col)

    def q_block(n: int) -> FiniteMeasure:
        return FiniteMeasure(_grid_space(n, x_max), np.exp2(-xs) * 2.0 ** (n - 1))

    return BlockMeasure(r_block, depth), BlockMeasure(q_block, depth)


def first_coordinate(label: str) -> str:
    return label.split("|")[0]


def frozen_then_collapsed(N: int = 2, depth: int = DEFAULT_DEPTH) -> BlockMeasure:
    """Paths stay at their starting state until the final time, then jump to ``"0"``.

    Block ``n`` is one starting state ``s{n}`` of mass ``2**(n-1)`` (a lumped
    dyadic stretch of a flat, unbounded initial law). Every marginal before
    the final time is sigma-finite; the final marginal piles all the mass on
    one state.
    """
    def block(n: int) -> FiniteMeasure:
        label = ",".join([f"s{n}"] * N + ["0"])
        return FiniteMeasure(FiniteSpace((label,)), [2.0 ** (n - 1)])

    return BlockMeasure(block, depth)


def hub_chain(depth: int = DEFAULT_DEPTH) -> BlockMeasure:
    """Two-step Markov measure with a shared ``hub`` state reachable from every block.

    Block ``n`` starts at ``i{n}`` with mass 1, moves to ``hub`` with
    probability ``2**-n`` (else to ``o{n}``, where it stays); from ``hub`` it
    moves to ``b`` or ``c`` with probability 1/2 each. With ``alpha = 4**n`` on
    block ``n``, ``E(alpha | X_1 = hub)`` diverges although ``R_1(hub) = 1``.
    """
    def block(n: int) -> FiniteMeasure:
        p = 2.0 ** -n
        labels = (f"i{n},hub,b", f"i{n},hub,c", f"i{n},o{n},o{n}")
        return FiniteMeasure(FiniteSpace(labels), [p / 2, p / 2, 1.0 - p])

    return BlockMeasure(block, depth)


def hub_alpha(path: tuple) -> float:
    return 4.0 ** int(path[0][1:])


def hub_beta(path: tuple) -> float:
    return 0.0 if path[1] == "hub" else 1.0
