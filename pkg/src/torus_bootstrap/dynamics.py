"""Threshold activation dynamics on a sampled graph and the mean-field density chain."""

from __future__ import annotations

import hashlib
import json
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from .graph_gen import Graph, as_generator
from .meanfield import MeanFieldModel, f_minus, f_plus
from .torus_model import ParameterError

FINGERPRINT_WINDOW = 1024
EXACT_BINOMIAL_LIMIT = 10**6

ALL_ACTIVE = "all_active"
ALL_INACTIVE = "all_inactive"
CYCLE = "cycle_detected"
BUDGET = "budget_exhausted"


@dataclass(frozen=True)
class ActivationConfig:
    k: int
    p_init: float
    excitatory_fraction: float = 1.0
    max_steps: int = 1000

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 0:
            raise ParameterError(f"k must be a nonnegative integer (got {self.k})")
        for name in ("p_init", "excitatory_fraction"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ParameterError(f"{name} must lie in [0, 1] (got {v})")
        if int(self.max_steps) != self.max_steps or self.max_steps < 1:
            raise ParameterError(f"max_steps must be a positive integer (got {self.max_steps})")


@dataclass
class ActivationState:
    """Activity bits and vertex types (True = excitatory), flat over vertex ids."""

    active: np.ndarray
    excitatory: np.ndarray
    t: int = 0

    @property
    def rho(self) -> float:
        return int(np.count_nonzero(self.active)) / self.active.size

    def fingerprint(self) -> bytes:
        return hashlib.blake2b(np.packbits(self.active).tobytes(), digest_size=16).digest()


@dataclass
class RunOutcome:
    status: str
    steps_taken: int
    trajectory: list = field(default_factory=list)
    cycle_length: int | None = None

    def to_dict(self) -> dict:
        out = {"status": self.status, "steps": self.steps_taken}
        if self.cycle_length is not None:
            out["cycle_length"] = self.cycle_length
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def trajectory_csv(self) -> str:
        return "t,rho\n" + "".join(f"{t},{r!r}\n" for t, r in enumerate(self.trajectory))


def init_state(graph: Graph, config: ActivationConfig, rng=None) -> ActivationState:
    gen = as_generator(rng)
    n = graph.num_vertices
    active = gen.random(n) < config.p_init
    excitatory = gen.random(n) < config.excitatory_fraction
    return ActivationState(active, excitatory, 0)


def closed_sums(graph: Graph, values: np.ndarray) -> np.ndarray:
    """Sum of ``values`` over each closed neighborhood (self + 4 lattice + long)."""
    N = graph.N
    grid = values.reshape(N, N)
    tot = grid + np.roll(grid, 1, 0) + np.roll(grid, -1, 0) + np.roll(grid, 1, 1) + np.roll(grid, -1, 1)
    return tot.ravel() + graph.long_adjacency @ values


def step(graph: Graph, state: ActivationState, k: int) -> ActivationState:
    """One synchronous update.

    Excitatory vertices count active excitatory minus active inhibitory
    vertices of their closed neighborhood; inhibitory ones count every active
    vertex. A vertex is active next iff its count is at least ``k``.
    """
    a = state.active.astype(np.int64)
    plain = closed_sums(graph, a)
    if state.excitatory.all():
        nxt = plain >= k
    else:
        signed = closed_sums(graph, np.where(state.excitatory, a, -a))
        nxt = np.where(state.excitatory, signed >= k, plain >= k)
    return ActivationState(nxt, state.excitatory, state.t + 1)


def _uniform_status(state: ActivationState) -> str | None:
    if state.active.all():
        return ALL_ACTIVE
    if not state.active.any():
        return ALL_INACTIVE
    return None


def run(graph: Graph, config: ActivationConfig, rng=None, initial: ActivationState | None = None) -> RunOutcome:
    """Iterate :func:`step` until an absorbing uniform state, a repeated state, or the budget.

    All-active / all-inactive count as terminal only when ``step`` maps them to
    themselves (e.g. all-inactive is not absorbing for k = 0).
    """
    state = initial if initial is not None else init_state(graph, config, rng)
    traj = [state.rho]
    seen: OrderedDict[bytes, tuple[int, bytes]] = OrderedDict()
    seen[state.fingerprint()] = (state.t, np.packbits(state.active).tobytes())
    for i in range(1, config.max_steps + 1):
        nxt = step(graph, state, config.k)
        traj.append(nxt.rho)
        uni = _uniform_status(nxt)
        if uni is not None and np.array_equal(step(graph, nxt, config.k).active, nxt.active):
            return RunOutcome(uni, i, traj)
        fp = nxt.fingerprint()
        packed = np.packbits(nxt.active).tobytes()
        hit = seen.get(fp)
        if hit is not None and hit[1] == packed:
            return RunOutcome(CYCLE, i, traj, cycle_length=nxt.t - hit[0])
        seen[fp] = (nxt.t, packed)
        if len(seen) > FINGERPRINT_WINDOW:
            seen.popitem(last=False)
        state = nxt
    return RunOutcome(BUDGET, config.max_steps, traj)


# --- mean-field chain ------------------------------------------------------


def _binomial(gen: np.random.Generator, n: int, p: float, exact: bool) -> int:
    if exact or n == 0 or p <= 0.0 or p >= 1.0:
        return int(gen.binomial(n, p))
    mean = n * p
    sd = np.sqrt(mean * (1.0 - p))
    # rounding to the nearest integer is the continuity correction
    return int(min(n, max(0, np.floor(gen.normal(mean, sd) + 0.5))))


def uses_exact_binomial(N: int) -> bool:
    """Exact binomial draws up to N^2 = 10^6 vertices, normal approximation above."""
    return N * N <= EXACT_BINOMIAL_LIMIT


def mf_chain_count_step(N: int, active: int, model: MeanFieldModel, rng, exact: bool | None = None) -> int:
    """Next active count: Bin(m, f+(m/N^2)) + Bin(N^2 - m, f-(m/N^2))."""
    gen = as_generator(rng)
    n = N * N
    if not 0 <= active <= n:
        raise ParameterError(f"active count must lie in [0, N^2] (got {active})")
    if exact is None:
        exact = uses_exact_binomial(N)
    x = active / n
    return _binomial(gen, active, f_plus(x, model), exact) + _binomial(gen, n - active, f_minus(x, model), exact)


def mf_chain_step(N: int, rho: float, model: MeanFieldModel, rng, exact: bool | None = None) -> float:
    n = N * N
    m = round(rho * n)
    if abs(m - rho * n) > 1e-6:
        raise ParameterError(f"N^2 * rho must be an integer (got {rho * n})")
    return mf_chain_count_step(N, m, model, rng, exact) / n


def mf_chain_run(N: int, config: ActivationConfig, model: MeanFieldModel, rng=None) -> RunOutcome:
    """Iterate the density chain from round(N^2 p) / N^2 until it hits 0 or 1."""
    if config.k != model.k:
        raise ParameterError(f"config k={config.k} does not match model k={model.k}")
    gen = as_generator(rng)
    n = N * N
    m = int(round(n * config.p_init))
    traj = [m / n]
    for i in range(1, config.max_steps + 1):
        m = mf_chain_count_step(N, m, model, gen)
        traj.append(m / n)
        # 0 is absorbing for k >= 1 (f-(0) = 0); n is absorbing for k <= 3 (f+(1) = 1)
        if m == n and model.k <= 3:
            return RunOutcome(ALL_ACTIVE, i, traj)
        if m == 0 and model.k >= 1:
            return RunOutcome(ALL_INACTIVE, i, traj)
    return RunOutcome(BUDGET, config.max_steps, traj)
