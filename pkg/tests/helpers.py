import numpy as np

from pathmeasures import FiniteMeasure, FiniteSpace


def space(n, prefix="w"):
    return FiniteSpace(tuple(f"{prefix}{i}" for i in range(n)))


def random_measure(rng, sp, zeros=0.2, mass=None):
    w = rng.exponential(1.0, sp.size) * (rng.random(sp.size) >= zeros)
    if not w.any():
        w[rng.integers(sp.size)] = 1.0
    if mass is not None:
        w *= mass / w.sum()
    return FiniteMeasure(sp, w)
