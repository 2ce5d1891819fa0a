"""Geometry of the torus (Z/NZ)^2 and the long-edge probability law."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np


class ParameterError(ValueError):
    """Raised when model parameters violate a documented constraint."""


class Vertex(NamedTuple):
    x: int
    y: int


@dataclass(frozen=True)
class TorusParams:
    """Side length ``N``, edge-density constant ``c`` and the (fixed) exponent ``alpha``.

    ``c = 0`` is accepted and yields the bare torus with no long edges.
    """

    N: int
    c: float
    alpha: float = 1.0

    def __post_init__(self):
        if isinstance(self.N, bool) or int(self.N) != self.N:
            raise ParameterError(f"N must be an integer, got {self.N!r}")
        object.__setattr__(self, "N", int(self.N))
        if self.N < 3:
            raise ParameterError(f"N ≥ 3 required (got N={self.N})")
        if not np.isfinite(self.c) or self.c < 0:
            raise ParameterError(f"c ≥ 0 required (got c={self.c})")
        if self.c / (2 * self.N) >= 1:
            raise ParameterError(
                f"c/(2N) < 1 required so that every p_d < 1 (got c={self.c}, N={self.N})"
            )
        if self.alpha != 1:
            raise ParameterError(f"alpha = 1 required (got alpha={self.alpha})")

    @property
    def num_vertices(self) -> int:
        return self.N * self.N


def torus_distance(u, v, N: int) -> int:
    """Wrapped Manhattan distance, i.e. the graph distance on the torus grid."""
    dx = abs(u[0] - v[0]) % N
    dy = abs(u[1] - v[1]) % N
    return min(dx, N - dx) + min(dy, N - dy)


def torus_distance_array(dx, dy, N: int):
    """Vectorized distance for coordinate differences ``dx``, ``dy`` (any integers)."""
    dx = np.abs(np.asarray(dx)) % N
    dy = np.abs(np.asarray(dy)) % N
    return np.minimum(dx, N - dx) + np.minimum(dy, N - dy)


def _check_d(N: int, d: int) -> None:
    if N < 1:
        raise ParameterError(f"N must be positive (got {N})")
    if not 1 <= d <= N:
        raise ParameterError(f"distance d must lie in [1, N] (got d={d}, N={N})")


def lambda_size(N: int, d: int) -> int:
    """Number of vertices at distance exactly ``d`` from a fixed vertex."""
    _check_d(N, d)
    if N % 2:
        return 4 * d if d <= N // 2 else 4 * (N - d)
    half = N // 2
    if d < half:
        return 4 * d
    if d == half:
        return 4 * d - 2
    if d < N:
        return 4 * (N - d)
    return 1


def lambda_sizes(N: int) -> np.ndarray:
    """``|Λ_d|`` for d = 0..N as an array (index 0 holds the vertex itself)."""
    out = np.zeros(N + 1, dtype=np.int64)
    out[0] = 1
    for d in range(1, N + 1):
        out[d] = lambda_size(N, d)
    return out


@lru_cache(maxsize=256)
def _offsets_by_distance(N: int) -> tuple[np.ndarray, ...]:
    dx, dy = np.meshgrid(np.arange(N), np.arange(N), indexing="ij")
    dist = torus_distance_array(dx, dy, N)
    offs = np.stack([dx.ravel(), dy.ravel()], axis=1)
    flat = dist.ravel()
    classes = []
    for d in range(N + 1):
        sel = offs[flat == d]
        sel.setflags(write=False)
        classes.append(sel)
    return tuple(classes)


def offsets_at_distance(N: int, d: int) -> np.ndarray:
    """All offsets ``(dx, dy)`` (reduced mod N) at torus distance ``d``, shape (|Λ_d|, 2)."""
    _check_d(N, d)
    return _offsets_by_distance(N)[d]


def long_edge_prob(params: TorusParams, d: int) -> float:
    """Probability ``c / (N d)`` that a pair at distance ``d`` carries a long edge."""
    if d < 2:
        raise ParameterError(f"long edges need distance d ≥ 2 (got d={d})")
    return params.c / (params.N * d ** params.alpha)
