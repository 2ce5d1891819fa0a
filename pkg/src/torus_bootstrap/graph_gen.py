"""Sampling and (de)serialization of the torus graph with random long edges.

Short (lattice) edges are never stored. Long edges are kept as a sorted
``(E, 2)`` array of vertex ids ``x * N + y`` with ``u < v``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .torus_model import (
    ParameterError,
    TorusParams,
    lambda_size,
    long_edge_prob,
    offsets_at_distance,
    torus_distance_array,
)


@dataclass(frozen=True)
class RngSeed:
    """A master seed plus a stream id; each pair maps to an independent generator."""

    seed: int
    stream: int = 0

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2**64:
            raise ParameterError(f"seed must be a 64-bit unsigned integer (got {self.seed})")
        if int(self.stream) < 0:
            raise ParameterError(f"stream id must be nonnegative (got {self.stream})")

    def generator(self) -> np.random.Generator:
        return stream_generator(self.seed, self.stream)


def stream_generator(seed: int, *keys: int) -> np.random.Generator:
    """Generator for the stream ``keys`` under master ``seed``; streams never overlap."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.PCG64(ss))


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngSeed):
        return rng.generator()
    if rng is None or isinstance(rng, (int, np.integer)):
        return np.random.default_rng(rng)
    raise TypeError(f"cannot build a generator from {type(rng).__name__}")


@dataclass(eq=False)
class Graph:
    params: TorusParams
    long_edges: np.ndarray
    seed: int = 0
    _adj: sp.csr_matrix | None = field(default=None, repr=False)
    _full: sp.csr_matrix | None = field(default=None, repr=False)

    def __post_init__(self):
        e = np.asarray(self.long_edges, dtype=np.int64).reshape(-1, 2)
        e = np.sort(e, axis=1)
        order = np.lexsort((e[:, 1], e[:, 0]))
        self.long_edges = e[order]
        self.long_edges.setflags(write=False)

    @property
    def N(self) -> int:
        return self.params.N

    @property
    def num_vertices(self) -> int:
        return self.params.N ** 2

    @property
    def num_long_edges(self) -> int:
        return len(self.long_edges)

    def long_edge_set(self) -> set[tuple[int, int]]:
        return {(int(u), int(v)) for u, v in self.long_edges}

    @property
    def long_adjacency(self) -> sp.csr_matrix:
        """Symmetric 0/1 matrix of long edges only."""
        if self._adj is None:
            n = self.num_vertices
            u, v = self.long_edges[:, 0], self.long_edges[:, 1]
            data = np.ones(2 * len(u), dtype=np.int32)
            self._adj = sp.csr_matrix(
                (data, (np.concatenate([u, v]), np.concatenate([v, u]))), shape=(n, n)
            )
        return self._adj

    @property
    def full_adjacency(self) -> sp.csr_matrix:
        """Symmetric 0/1 matrix of short and long edges (no self loops)."""
        if self._full is None:
            self._full = (short_adjacency(self.N) + self.long_adjacency).tocsr()
        return self._full

    def long_neighbors(self, v: int) -> np.ndarray:
        a = self.long_adjacency
        return a.indices[a.indptr[v]:a.indptr[v + 1]]

    def short_neighbors(self, v: int) -> np.ndarray:
        N = self.N
        x, y = divmod(int(v), N)
        return np.array(
            [((x + 1) % N) * N + y, ((x - 1) % N) * N + y, x * N + (y + 1) % N, x * N + (y - 1) % N]
        )

    def neighbors(self, v: int) -> np.ndarray:
        """Open neighborhood: the 4 lattice neighbors followed by long neighbors."""
        return np.concatenate([self.short_neighbors(v), self.long_neighbors(v)])

    def long_degrees(self) -> np.ndarray:
        return np.bincount(self.long_edges.ravel(), minlength=self.num_vertices)

    def check_invariants(self) -> None:
        e = self.long_edges
        n = self.num_vertices
        if len(e) == 0:
            return
        if e.min() < 0 or e.max() >= n:
            raise ValueError("vertex id out of range")
        if np.any(e[:, 0] == e[:, 1]):
            raise ValueError("self loop")
        if len(np.unique(e[:, 0] * n + e[:, 1])) != len(e):
            raise ValueError("duplicate long edge")
        N = self.N
        d = torus_distance_array(e[:, 0] // N - e[:, 1] // N, e[:, 0] % N - e[:, 1] % N, N)
        if np.any(d < 2):
            raise ValueError("long edge between vertices at distance < 2")


def short_adjacency(N: int) -> sp.csr_matrix:
    ids = np.arange(N * N).reshape(N, N)
    rows, cols = [], []
    for axis in (0, 1):
        for shift in (1, -1):
            rows.append(ids.ravel())
            cols.append(np.roll(ids, shift, axis=axis).ravel())
    r, c = np.concatenate(rows), np.concatenate(cols)
    return sp.csr_matrix((np.ones(len(r), dtype=np.int32), (r, c)), shape=(N * N, N * N))


def class_pair_count(N: int, d: int) -> int:
    """Number of unordered vertex pairs at distance ``d``."""
    return N * N * lambda_size(N, d) // 2


def expected_long_edge_count(params: TorusParams) -> float:
    """Exact finite-N expectation of |E_ℓ|; asymptotically 2 c ln2 N^2 + O(N)."""
    N = params.N
    return float(sum(class_pair_count(N, d) * long_edge_prob(params, d) for d in range(2, N + 1)))


def _sample_class(N: int, d: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` distinct uniform pairs at distance ``d``, as canonical keys ``u * N^2 + v``."""
    n = N * N
    offs = offsets_at_distance(N, d)
    chosen = np.empty(0, dtype=np.int64)
    while len(chosen) < count:
        need = count - len(chosen)
        m = need + need // 4 + 8
        u = rng.integers(0, n, size=m)
        o = offs[rng.integers(0, len(offs), size=m)]
        ux, uy = np.divmod(u, N)
        v = ((ux + o[:, 0]) % N) * N + (uy + o[:, 1]) % N
        keys = np.minimum(u, v) * n + np.maximum(u, v)
        # drop repeats while keeping first-draw order: sequential rejection
        allk = np.concatenate([chosen, keys])
        _, first = np.unique(allk, return_index=True)
        chosen = allk[np.sort(first)][:count]
    return chosen


def sample_long_edges(params: TorusParams, rng) -> np.ndarray:
    """Long edges as an ``(E, 2)`` array; per-pair Bernoulli(p_d) in distribution."""
    gen = as_generator(rng)
    N = params.N
    n = N * N
    parts = []
    if params.c > 0:
        for d in range(2, N + 1):
            m_d = class_pair_count(N, d)
            if m_d == 0:
                continue
            cnt = int(gen.binomial(m_d, long_edge_prob(params, d)))
            if cnt:
                parts.append(_sample_class(N, d, cnt, gen))
    if not parts:
        return np.empty((0, 2), dtype=np.int64)
    keys = np.concatenate(parts)
    return np.stack(np.divmod(keys, n), axis=1)


def build_graph(params: TorusParams, rng=0) -> Graph:
    """Sample a graph. ``rng`` may be an int seed, an :class:`RngSeed` or a Generator."""
    seed = rng.seed if isinstance(rng, RngSeed) else (int(rng) if isinstance(rng, (int, np.integer)) else 0)
    return Graph(params, sample_long_edges(params, rng), seed=seed)


# --- text format -----------------------------------------------------------


class GraphFormatError(ValueError):
    """Base class for graph-file parse failures."""


class MalformedHeaderError(GraphFormatError):
    pass


class MalformedEdgeLineError(GraphFormatError):
    pass


class CoordinateOutOfRangeError(GraphFormatError):
    pass


class DuplicateEdgeError(GraphFormatError):
    pass


class ShortDistanceEdgeError(GraphFormatError):
    pass


def serialize(graph: Graph) -> bytes:
    """Header ``N c seed`` then one ``x1 y1 x2 y2`` line per long edge, sorted."""
    N = graph.N
    lines = [f"{N} {graph.params.c!r} {graph.seed}"]
    for u, v in graph.long_edges:
        x1, y1 = divmod(int(u), N)
        x2, y2 = divmod(int(v), N)
        lines.append(f"{x1} {y1} {x2} {y2}")
    return ("\n".join(lines) + "\n").encode("utf-8")


def parse(data: bytes | str) -> Graph:
    text = data.decode("utf-8") if isinstance(data, (bytes, bytearray)) else data
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise MalformedHeaderError("empty graph file")
    head = lines[0].split()
    if len(head) != 3:
        raise MalformedHeaderError(f"header must be 'N c seed', got {lines[0]!r}")
    try:
        N, c, seed = int(head[0]), float(head[1]), int(head[2])
        params = TorusParams(N, c)
    except (ValueError, ParameterError) as exc:
        raise MalformedHeaderError(f"bad header {lines[0]!r}: {exc}") from None
    seen = set()
    edges = []
    for lineno, line in enumerate(lines[1:], start=2):
        tok = line.split()
        if len(tok) != 4:
            raise MalformedEdgeLineError(f"line {lineno}: expected 4 integers, got {line!r}")
        try:
            x1, y1, x2, y2 = map(int, tok)
        except ValueError:
            raise MalformedEdgeLineError(f"line {lineno}: non-integer token in {line!r}") from None
        if not all(0 <= t < N for t in (x1, y1, x2, y2)):
            raise CoordinateOutOfRangeError(f"line {lineno}: coordinate out of range in {line!r}")
        u, v = x1 * N + y1, x2 * N + y2
        if torus_distance_array(x1 - x2, y1 - y2, N) < 2:
            raise ShortDistanceEdgeError(f"line {lineno}: long edge at distance < 2 in {line!r}")
        key = (min(u, v), max(u, v))
        if key in seen:
            raise DuplicateEdgeError(f"line {lineno}: duplicate edge {line!r}")
        seen.add(key)
        edges.append(key)
    return Graph(params, np.array(edges, dtype=np.int64).reshape(-1, 2), seed=seed)
