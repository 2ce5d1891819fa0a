"""Degree statistics, Poisson approximation quality and diameter of sampled graphs."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats
from scipy.sparse.csgraph import shortest_path

from .graph_gen import Graph, as_generator
from .torus_model import ParameterError, TorusParams, lambda_size, long_edge_prob

TAIL_TOL = 1e-12


@dataclass
class DegreeDistribution:
    pmf: np.ndarray
    kind: str
    lambda_param: float | None = None

    def __post_init__(self):
        self.pmf = np.asarray(self.pmf, dtype=float)
        if np.any(self.pmf < -1e-15):
            raise ValueError("pmf has negative entries")
        if self.kind not in ("empirical", "exact_convolution", "poisson"):
            raise ValueError(f"unknown distribution kind {self.kind!r}")

    @property
    def k_max(self) -> int:
        return len(self.pmf) - 1

    def mean(self) -> float:
        return float(np.dot(np.arange(len(self.pmf)), self.pmf))

    def to_csv(self) -> str:
        rows = ["degree,probability"]
        rows += [f"{k},{p!r}" for k, p in enumerate(self.pmf)]
        return "\n".join(rows) + "\n"


@dataclass
class DiameterReport:
    value: int
    method: str
    sources_used: int

    def record(self, params: TorusParams, seed: int) -> dict:
        return {"N": params.N, "c": params.c, "seed": seed, "method": self.method, "value": self.value}


def long_degree_histogram(graph: Graph) -> DegreeDistribution:
    deg = graph.long_degrees()
    counts = np.bincount(deg)
    return DegreeDistribution(counts / graph.num_vertices, "empirical")


def exact_long_degree_distribution(N: int, c: float, k_max: int | None = None) -> DegreeDistribution:
    """Law of W = sum over d of Binomial(|Λ_d|, p_d), built by convolution.

    With ``k_max=None`` the support is grown until the dropped tail is below 1e-12.
    """
    params = TorusParams(N, c)
    grow = k_max is None
    kmax = 40 if grow else int(k_max)
    if kmax < 0:
        raise ParameterError("k_max must be nonnegative")
    while True:
        pmf = np.zeros(kmax + 1)
        pmf[0] = 1.0
        for d in range(2, N + 1):
            n = lambda_size(N, d)
            if n == 0:
                continue
            p = long_edge_prob(params, d)
            b = stats.binom.pmf(np.arange(min(n, kmax) + 1), n, p)
            pmf = np.convolve(pmf, b)[: kmax + 1]
        tail = 1.0 - pmf.sum()
        if tail < TAIL_TOL:
            return DegreeDistribution(pmf, "exact_convolution")
        if not grow:
            raise ParameterError(
                f"k_max={kmax} leaves tail mass {tail:.3g} above {TAIL_TOL:g}; increase k_max"
            )
        kmax *= 2


def exact_mean_long_degree(N: int, c: float) -> float:
    params = TorusParams(N, c)
    return float(sum(lambda_size(N, d) * long_edge_prob(params, d) for d in range(2, N + 1)))


def poisson_pmf(lambda_param: float, k_max: int | None = None) -> DegreeDistribution:
    if not lambda_param > 0:
        raise ParameterError(f"lambda must be positive (got {lambda_param})")
    if k_max is None:
        k_max = int(stats.poisson.isf(TAIL_TOL, lambda_param)) + 1
    pmf = stats.poisson.pmf(np.arange(k_max + 1), lambda_param)
    return DegreeDistribution(pmf, "poisson", lambda_param)


def tv_distance(a: DegreeDistribution, b: DegreeDistribution) -> float:
    n = max(len(a.pmf), len(b.pmf))
    pa = np.pad(a.pmf, (0, n - len(a.pmf)))
    pb = np.pad(b.pmf, (0, n - len(b.pmf)))
    return float(0.5 * np.abs(pa - pb).sum())


def max_pointwise_gap(a: DegreeDistribution, b: DegreeDistribution) -> float:
    n = max(len(a.pmf), len(b.pmf))
    return float(np.max(np.abs(np.pad(a.pmf, (0, n - len(a.pmf))) - np.pad(b.pmf, (0, n - len(b.pmf))))))


# --- distances -------------------------------------------------------------


def bfs_distances(graph: Graph, sources) -> np.ndarray:
    """Hop distances from each source (rows) to every vertex."""
    d = shortest_path(graph.full_adjacency, method="D", unweighted=True, directed=False, indices=sources)
    return d.astype(np.int64)


def bfs_eccentricity(graph: Graph, v: int) -> int:
    return int(bfs_distances(graph, [int(v)])[0].max())


def all_eccentricities(graph: Graph) -> np.ndarray:
    """Eccentricity of every vertex by bit-parallel BFS from all sources at once.

    Row ``v`` of the reach matrix holds, packed into uint64 words, the set of
    vertices within ``t`` hops of ``v``; one level ORs each row with the rows
    of its neighbors.
    """
    n = graph.num_vertices
    words = (n + 63) // 64
    reach = np.zeros((n, words), dtype=np.uint64)
    ids = np.arange(n)
    reach[ids, ids // 64] = np.left_shift(np.uint64(1), (ids % 64).astype(np.uint64))
    full = np.full(words, np.iinfo(np.uint64).max, dtype=np.uint64)
    if n % 64:
        full[-1] = np.uint64((1 << (n % 64)) - 1)
    adj = graph.full_adjacency
    starts = adj.indptr[:-1]
    ecc = np.full(n, -1, dtype=np.int64)
    ecc[(reach == full).all(axis=1)] = 0
    t = 0
    while (ecc < 0).any():
        t += 1
        gathered = np.bitwise_or.reduceat(reach[adj.indices], starts, axis=0)
        reach |= gathered
        done = (ecc < 0) & (reach == full).all(axis=1)
        ecc[done] = t
        if t > n:
            raise RuntimeError("graph is not connected")
    return ecc


def exact_diameter(graph: Graph, max_n: int = 64) -> DiameterReport:
    """All-pairs diameter; limited to ``N <= max_n``."""
    if graph.N > max_n:
        raise ParameterError(f"all-pairs diameter limited to N ≤ {max_n}; use estimate_diameter")
    return DiameterReport(int(all_eccentricities(graph).max()), "all_pairs", graph.num_vertices)


def estimate_diameter(graph: Graph, num_sources: int, rng=None) -> DiameterReport:
    """Double-sweep lower bound repeated from ``num_sources`` random start vertices."""
    if num_sources < 1:
        raise ParameterError("num_sources must be ≥ 1")
    gen = as_generator(rng)
    best = 0
    for _ in range(num_sources):
        s = int(gen.integers(graph.num_vertices))
        d0 = bfs_distances(graph, [s])[0]
        far = int(np.argmax(d0))
        d1 = bfs_distances(graph, [far])[0]
        best = max(best, int(d0.max()), int(d1.max()))
    return DiameterReport(best, "double_sweep", num_sources)


def torus_diameter(N: int) -> int:
    return 2 * (N // 2)


def diameter_scaling(c: float, exact_ns, estimate_ns, seeds: int, num_sources: int = 4, seed: int = 0):
    """Diameter records for a log-scaling experiment, one dict per (N, seed)."""
    from .graph_gen import RngSeed, build_graph

    out = []
    for N in list(exact_ns) + list(estimate_ns):
        for s in range(seeds):
            rs = RngSeed(seed, N * 1000 + s)
            g = build_graph(TorusParams(N, c), rs)
            if N in exact_ns:
                rep = exact_diameter(g)
            else:
                rep = estimate_diameter(g, num_sources, RngSeed(seed, 10**6 + N * 1000 + s))
            rec = rep.record(g.params, seed)
            rec["stream"] = N * 1000 + s
            rec["ratio_to_log"] = rep.value / math.log(N)
            out.append(rec)
    return out
