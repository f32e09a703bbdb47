"""Discretized weighted compact sets (K, q, mu) for the scenario library."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np

from .errors import ConfigurationError
from .geometry import ProjectivePoint, fs_weight, point_arrays, unique_count

WeightFn = Callable[[ProjectivePoint], float]


def zero_weight(p: ProjectivePoint) -> float:
    return 0.0


def minus_fs_weight(p: ProjectivePoint) -> float:
    """q = -phi, the weight that cancels the metric on the real interval."""
    return -fs_weight(p)


@dataclass(frozen=True, eq=False)
class WeightedCompactSet:
    """Atomic measure mu = sum_k mass_k delta_{y_k} on K, with q sampled at the nodes."""

    nodes: tuple[ProjectivePoint, ...]
    masses: np.ndarray
    q_values: np.ndarray
    label: str
    max_exact_degree: int = 0
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        masses = np.asarray(self.masses, dtype=float)
        q = np.asarray(self.q_values, dtype=float)
        if len(self.nodes) < 1:
            raise ConfigurationError("a weighted compact set needs at least one node")
        if masses.shape != (len(self.nodes),) or q.shape != (len(self.nodes),):
            raise ConfigurationError("masses and q_values must have one entry per node")
        if not np.all(masses > 0):
            raise ConfigurationError("node masses must be strictly positive")
        if not np.all(np.isfinite(q)):
            raise ConfigurationError("q values must be finite")
        masses.setflags(write=False)
        q.setflags(write=False)
        object.__setattr__(self, "masses", masses)
        object.__setattr__(self, "q_values", q)

    def __len__(self):
        return len(self.nodes)

    @property
    def total_mass(self) -> float:
        return float(math.fsum(self.masses))

    @cached_property
    def distinct_node_count(self) -> int:
        return unique_count(self.nodes)

    @cached_property
    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """(chart-Infinity mask, coordinates) of the nodes."""
        return point_arrays(self.nodes)

    def permuted(self, order) -> "WeightedCompactSet":
        order = np.asarray(order)
        return WeightedCompactSet(
            nodes=tuple(self.nodes[i] for i in order),
            masses=self.masses[order],
            q_values=self.q_values[order],
            label=self.label,
            max_exact_degree=self.max_exact_degree,
            params=dict(self.params),
        )


def _ring(radius: float, count: int) -> list[ProjectivePoint]:
    theta = 2.0 * np.pi * np.arange(count) / count
    return [ProjectivePoint.affine(complex(radius * math.cos(t), radius * math.sin(t))) for t in theta]


def circle_set(radius: float, N: int, q_fn: WeightFn = zero_weight) -> WeightedCompactSet:
    """N equally spaced nodes on |z| = radius with normalized arclength masses.

    The trapezoid rule integrates trigonometric polynomials of degree <= N-1
    exactly, which makes Gram integrals exact up to degree (N-2)//2.
    """
    if not radius > 0:
        raise ConfigurationError(f"circle radius must be positive, got {radius}")
    if N < 4:
        raise ConfigurationError(f"circle needs N >= 4 nodes, got {N}")
    nodes = _ring(radius, N)
    return WeightedCompactSet(
        nodes=tuple(nodes),
        masses=np.full(N, 1.0 / N),
        q_values=np.array([q_fn(p) for p in nodes], dtype=float),
        label="circle",
        max_exact_degree=(N - 2) // 2,
        params={"radius": radius, "N": N},
    )


def interval_set(N: int, q_fn: WeightFn = minus_fs_weight) -> WeightedCompactSet:
    """K = [-1, 1] with Chebyshev nodes cos((2k-1) pi / 2N) and masses 1/N.

    This is Gauss-Chebyshev quadrature for the arcsine (equilibrium) measure.
    No exactness is claimed since q is arbitrary.
    """
    if N < 4:
        raise ConfigurationError(f"interval needs N >= 4 nodes, got {N}")
    k = np.arange(1, N + 1)
    x = np.cos((2 * k - 1) * np.pi / (2 * N))
    nodes = [ProjectivePoint.affine(complex(v, 0.0)) for v in x]
    return WeightedCompactSet(
        nodes=tuple(nodes),
        masses=np.full(N, 1.0 / N),
        q_values=np.array([q_fn(p) for p in nodes], dtype=float),
        label="interval",
        max_exact_degree=0,
        params={"N": N},
    )


def annulus_pair_set(r1: float, r2: float, N: int, q_fn: WeightFn = zero_weight) -> WeightedCompactSet:
    """K = {|z| = r1} U {|z| = r2}, N/2 equally spaced nodes on each circle."""
    if not 0 < r1 < r2 <= 1:
        raise ConfigurationError(f"annulus pair needs 0 < r1 < r2 <= 1, got r1={r1}, r2={r2}")
    if N < 8 or N % 2:
        raise ConfigurationError(f"annulus pair needs an even N >= 8, got {N}")
    half = N // 2
    nodes = _ring(r1, half) + _ring(r2, half)
    return WeightedCompactSet(
        nodes=tuple(nodes),
        masses=np.full(N, 1.0 / N),
        q_values=np.array([q_fn(p) for p in nodes], dtype=float),
        label="annulus_pair",
        max_exact_degree=(half - 2) // 2,
        params={"r1": r1, "r2": r2, "N": N},
    )


def default_circle_nodes(n: int) -> int:
    return max(4 * n + 8, 256)


def default_interval_nodes(n: int) -> int:
    return max(8 * n, 512)


def default_annulus_nodes(n: int) -> int:
    return max(8 * n + 16, 512)
