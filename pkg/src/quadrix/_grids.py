"""Deterministic quadrature grids: sphere direction sets and radial nodes.

Direction sets are low-discrepancy and fully deterministic (no RNG):
the two-point set on S^0, uniform angles on S^1, a Fibonacci lattice on
S^2 and a Halton-Gaussian construction for higher spheres.  Interleaved
even/odd halves of every set are themselves well distributed, which is
what the paired error estimates rely on.
"""

from __future__ import annotations

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.stats import norm, qmc

DEFAULT_DIRECTIONS = {1: 2, 2: 256, 3: 4096, 4: 8192, 5: 16384, 6: 16384}

_GOLDEN = (1.0 + np.sqrt(5.0)) / 2.0


def default_direction_count(n: int) -> int:
    return DEFAULT_DIRECTIONS[n]


def sphere_directions(n: int, count: int) -> np.ndarray:
    """count unit vectors spread over S^{n-1}, shape (count, n)."""
    if n == 1:
        return np.array([[1.0], [-1.0]])
    if n == 2:
        theta = 2.0 * np.pi * (np.arange(count) + 0.5) / count
        return np.column_stack([np.cos(theta), np.sin(theta)])
    if n == 3:
        i = np.arange(count)
        z = 1.0 - (2.0 * i + 1.0) / count
        phi = 2.0 * np.pi * i / _GOLDEN
        r = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
        return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])
    sampler = qmc.Halton(d=n, scramble=False)
    u = sampler.random(count + 1)[1:]  # drop the origin-adjacent first point
    u = np.clip(u, 1e-12, 1.0 - 1e-12)
    gauss = norm.ppf(u)
    return gauss / np.linalg.norm(gauss, axis=1, keepdims=True)


def radial_nodes(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [0, 1]."""
    xg, wg = leggauss(order)
    return 0.5 * (xg + 1.0), 0.5 * wg
