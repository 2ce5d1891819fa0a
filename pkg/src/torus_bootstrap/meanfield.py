"""Mean-field activation maps, their fixed points and the critical probability.

A vertex with long degree ``w`` has a closed neighborhood of ``w + 5``
vertices (itself, 4 lattice neighbors, ``w`` long neighbors). Under the
mean-field assumption each of them is active independently with probability
``x``, and the vertex is active next step iff at least ``k`` of them are.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import optimize, stats

from .graph_analysis import DegreeDistribution, exact_long_degree_distribution, poisson_pmf
from .torus_model import ParameterError

LN2 = math.log(2.0)
STABILITY_BAND = 1e-8
ROOT_TOL = 1e-12
GRID_STEP = 1e-3


class BracketingError(RuntimeError):
    """The fixed-point equation did not show exactly one interior sign change."""


def lambda_from_c(c: float) -> float:
    return 4.0 * c * LN2


@dataclass(frozen=True)
class MeanFieldModel:
    """Threshold ``k`` together with the law of the long degree.

    ``backend`` is ``"poisson"`` (degree ~ Po(lambda_param)) or ``"exact"``
    (the finite-N law for ``N``, ``c``; ``lambda_param`` is then 4 c ln 2).
    """

    k: int
    lambda_param: float
    backend: str = "poisson"
    N: int | None = None
    c: float | None = None
    tol: float = 1e-12

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 0:
            raise ParameterError(f"k must be a nonnegative integer (got {self.k})")
        if self.backend not in ("poisson", "exact"):
            raise ParameterError(f"unknown degree backend {self.backend!r}")
        if self.backend == "exact" and (self.N is None or self.c is None):
            raise ParameterError("exact backend needs N and c")
        if not self.lambda_param > 0:
            raise ParameterError(f"lambda must be positive (got {self.lambda_param})")

    @classmethod
    def poisson(cls, lambda_param: float, k: int) -> "MeanFieldModel":
        return cls(k=k, lambda_param=lambda_param)

    @classmethod
    def exact(cls, N: int, c: float, k: int) -> "MeanFieldModel":
        return cls(k=k, lambda_param=lambda_from_c(c), backend="exact", N=N, c=c)

    def degree_distribution(self) -> DegreeDistribution:
        return _degree_law(self.backend, self.lambda_param, self.N, self.c, self.tol)


_LAW_CACHE: dict = {}


def _degree_law(backend, lam, N, c, tol) -> DegreeDistribution:
    key = (backend, lam, N, c, tol)
    law = _LAW_CACHE.get(key)
    if law is None:
        if backend == "poisson":
            kmax = int(stats.poisson.isf(tol, lam)) + 1
            law = poisson_pmf(lam, kmax)
        else:
            law = exact_long_degree_distribution(N, c)
        if len(_LAW_CACHE) > 256:
            _LAW_CACHE.clear()
        _LAW_CACHE[key] = law
    return law


def _tail(x, n, m):
    """P(Bin(n, x) >= m) for arrays ``n`` (sizes) and scalar ``x``; m may be <= 0."""
    return stats.binom.sf(m - 1, n, x)


@lru_cache(maxsize=4096)
def _mixed_tail(x: float, model: MeanFieldModel, m: int) -> float:
    law = model.degree_distribution()
    n = np.arange(len(law.pmf)) + 4
    return float(np.dot(law.pmf, _tail(x, n, m)))


def f_plus(x: float, model: MeanFieldModel) -> float:
    """Probability that an active vertex stays active: P(1 + Bin(w + 4, x) >= k)."""
    return _mixed_tail(float(x), model, model.k - 1)


def f_minus(x: float, model: MeanFieldModel) -> float:
    """Probability that an inactive vertex becomes active: P(Bin(w + 4, x) >= k)."""
    return _mixed_tail(float(x), model, model.k)


def f_mean(x: float, model: MeanFieldModel) -> float:
    return x * f_plus(x, model) + (1 - x) * f_minus(x, model)


def g_var(x: float, model: MeanFieldModel, printed_form: bool = False) -> float:
    """N^2 times the one-step variance of the density.

    ``printed_form=True`` evaluates the variant with ``(1 - f+)`` in the second
    term instead of ``(1 - f-)``; it is kept only for comparison.
    """
    fp, fm = f_plus(x, model), f_minus(x, model)
    second = (1 - fp) if printed_form else (1 - fm)
    return x * fp * (1 - fp) + (1 - x) * fm * second


# --- Poissonized map -------------------------------------------------------


def _q_poly(x, lam, k):
    """Q_k with fbar_k(x) = 1 - exp(-lam x) Q_k(x), and its x-derivative."""
    u = 1.0 - x
    q = u**5
    dq = -5 * u**4
    if k >= 2:
        q = q + 5 * x * u**4 + lam * x * u**5
        dq = dq + 5 * u**4 - 20 * x * u**3 + lam * (u**5 - 5 * x * u**4)
    if k >= 3:
        q = q + 0.5 * lam**2 * x**2 * u**5 + 5 * lam * x**2 * u**4 + 10 * x**2 * u**3
        dq = (
            dq
            + lam**2 * (x * u**5 - 2.5 * x**2 * u**4)
            + 5 * lam * (2 * x * u**4 - 4 * x**2 * u**3)
            + 10 * (2 * x * u**3 - 3 * x**2 * u**2)
        )
    return q, dq


def _check_closed(k, lam):
    if k not in (0, 1, 2, 3):
        raise ParameterError(f"closed forms exist for k in 0..3 only (got k={k}); use fbar_generic")
    if lam < 0:
        raise ParameterError(f"lambda must be nonnegative (got {lam})")


def fbar_closed(x, lambda_param: float, k: int):
    """Closed-form Poissonized map for k = 0..3 (``lambda_param = 0`` allowed as a limit)."""
    _check_closed(k, lambda_param)
    x = np.asarray(x, dtype=float)
    if k == 0:
        out = np.ones_like(x)
    else:
        q, _ = _q_poly(x, lambda_param, k)
        out = 1.0 - np.exp(-lambda_param * x) * q
    return float(out) if out.ndim == 0 else out


def fbar_closed_prime(x, lambda_param: float, k: int):
    """Derivative in x of :func:`fbar_closed`."""
    _check_closed(k, lambda_param)
    x = np.asarray(x, dtype=float)
    if k == 0:
        out = np.zeros_like(x)
    else:
        q, dq = _q_poly(x, lambda_param, k)
        out = np.exp(-lambda_param * x) * (lambda_param * q - dq)
    return float(out) if out.ndim == 0 else out


def fbar_generic(x: float, lambda_param: float, k: int, tol: float = 1e-12) -> float:
    """Poisson-weighted tail sum P(Bin(w + 5, x) >= k), w ~ Po(lambda), any k >= 0."""
    if tol < 1e-14:
        raise ParameterError("tol must be ≥ 1e-14")
    if k < 0:
        raise ParameterError("k must be nonnegative")
    if k == 0:
        return 1.0
    wmax = int(stats.poisson.isf(tol, lambda_param)) + 1
    w = np.arange(wmax + 1)
    log_pmf = stats.poisson.logpmf(w, lambda_param)
    return float(np.dot(np.exp(log_pmf), _tail(x, w + 5, k)))


@dataclass(frozen=True)
class GeneralizedRule:
    """Activation probabilities indexed by the number ``i`` of active vertices
    in the closed neighborhood (the vertex itself included).

    ``p_plus[i]`` applies to an active vertex (so i >= 1), ``p_minus[i]`` to an
    inactive one.
    """

    p_plus: np.ndarray
    p_minus: np.ndarray

    def __post_init__(self):
        for name in ("p_plus", "p_minus"):
            v = np.asarray(getattr(self, name), dtype=float)
            if np.any((v < 0) | (v > 1)):
                raise ParameterError(f"{name} entries must lie in [0, 1]")
            object.__setattr__(self, name, v)

    @classmethod
    def threshold(cls, k: int, length: int) -> "GeneralizedRule":
        ind = (np.arange(length) >= k).astype(float)
        return cls(ind, ind.copy())


def fbar_generalized(x: float, lambda_param: float, rule: GeneralizedRule, tol: float = 1e-12):
    """(f+, f-) for a probabilistic activation rule, Poisson degree law."""
    wmax = int(stats.poisson.isf(tol, lambda_param)) + 1
    need = wmax + 4 + 2
    if len(rule.p_plus) < need or len(rule.p_minus) < need:
        raise ParameterError(f"rule vectors must have length ≥ {need} for lambda={lambda_param}")
    pw = stats.poisson.pmf(np.arange(wmax + 1), lambda_param)
    fp = fm = 0.0
    for w, weight in enumerate(pw):
        n = w + 4
        j = np.arange(n + 1)
        b = stats.binom.pmf(j, n, x)
        # active vertex: i = j + 1 active in closed neighborhood
        fp += weight * np.dot(rule.p_plus[1 : n + 2], b)
        fm += weight * np.dot(rule.p_minus[: n + 1], b)
    return float(fp), float(fm)


# --- fixed points ----------------------------------------------------------


@dataclass(frozen=True)
class FixedPoint:
    x: float
    stability: str
    derivative: float

    def as_dict(self) -> dict:
        return {"x": self.x, "stability": self.stability, "derivative": self.derivative}


def classify(derivative: float) -> str:
    a = abs(derivative)
    if a < 1 - STABILITY_BAND:
        return "stable"
    if a > 1 + STABILITY_BAND:
        return "unstable"
    return "marginal"


def _scaled_residual(x, lam, k):
    """(fbar(x) - x) / x, continued to -1 at x = 0 (fbar(0) = 0, fbar'(0) = 0 for k >= 2)."""
    x = np.asarray(x, dtype=float)
    out = np.full(x.shape, -1.0)
    pos = x > 0
    out[pos] = fbar_closed(x[pos], lam, k) / x[pos] - 1.0
    return out


def interior_root(lambda_param: float, k: int) -> float:
    """The unique root of fbar_k(x) = x in (0, 1) for k = 2, 3."""
    if k not in (2, 3):
        raise ParameterError(f"interior fixed point exists for k = 2, 3 only (got {k})")
    grid = np.linspace(0.0, 1.0, int(round(1 / GRID_STEP)) + 1)[:-1]
    r = _scaled_residual(grid, lambda_param, k)
    zeros = np.flatnonzero(r[1:] == 0) + 1
    s = np.sign(r)
    changes = np.flatnonzero((s[:-1] < 0) & (s[1:] > 0) | (s[:-1] > 0) & (s[1:] < 0))
    n_roots = len(zeros) + len(changes)
    if n_roots != 1:
        raise BracketingError(
            f"expected one interior sign change of fbar_{k}(x) - x for lambda={lambda_param}, found {n_roots}"
        )
    if len(zeros):
        return float(grid[zeros[0]])
    i = int(changes[0])
    a, b = grid[i], grid[i + 1]
    f = lambda t: fbar_closed(t, lambda_param, k) - t
    if a == 0.0:
        # the raw residual is 0 at the origin; move the left end onto its negative side
        a = b
        while f(a) >= 0 and a > 1e-300:
            a *= 0.5
    root = optimize.brentq(f, a, b, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
    if abs(f(root)) >= ROOT_TOL:
        raise BracketingError(f"root refinement did not converge: residual {f(root):.3g}")
    return float(root)


def find_fixed_points(lambda_param: float, k: int) -> list[FixedPoint]:
    if k not in (0, 1, 2, 3):
        raise ParameterError(f"fixed-point analysis covers k = 0..3 (got {k})")
    if lambda_param < 0:
        raise ParameterError(f"lambda must be nonnegative (got {lambda_param})")
    xs = [1.0] if k == 0 else [0.0, 1.0]
    if k >= 2:
        xs.insert(1, interior_root(lambda_param, k))
    pts = []
    for x in xs:
        d = fbar_closed_prime(x, lambda_param, k)
        pts.append(FixedPoint(x, classify(d), d))
    return pts


def p_c(lambda_param: float, k: int) -> float:
    """Critical initial density of the mean-field chain."""
    if lambda_param < 0:
        raise ParameterError(f"lambda must be nonnegative (got {lambda_param})")
    if k in (0, 1):
        return 0.0
    return interior_root(lambda_param, k)


def x2_at_zero() -> float:
    """Closed radical value of the k = 2 interior root in the lambda -> 0 limit."""
    s = 235 + 6 * math.sqrt(1473)
    return 11 / 12 - s ** (1 / 3) / 12 - 13 / 12 * s ** (-1 / 3)


# --- sensitivity in lambda -------------------------------------------------


def _h(x, lam, k):
    """Right-hand side h_k after dividing the fixed-point equation by (1 - x).

    Returns (h, dh/dx, dh/dlambda).
    """
    u = 1.0 - x
    if k == 2:
        p = 1 + 4 * x + lam * x - lam * x**2
        return (
            u**3 * p,
            -3 * u**2 * p + u**3 * (4 + lam - 2 * lam * x),
            x * u**4,
        )
    if k == 3:
        q = 2 + (6 + 2 * lam) * x + (12 + 6 * lam + lam**2) * x**2 - (8 * lam + 2 * lam**2) * x**3 + lam**2 * x**4
        dq = (6 + 2 * lam) + 2 * (12 + 6 * lam + lam**2) * x - 3 * (8 * lam + 2 * lam**2) * x**2 + 4 * lam**2 * x**3
        dql = 2 * x + (6 + 2 * lam) * x**2 - (8 + 4 * lam) * x**3 + 2 * lam * x**4
        return 0.5 * u**2 * q, -u * q + 0.5 * u**2 * dq, 0.5 * u**2 * dql
    raise ParameterError(f"k must be 2 or 3 (got {k})")


def fixed_point_residual(lambda_param: float, x: float, k: int):
    """F_k = exp(lambda x) - h_k(x) and its partial derivatives (F, dF/dx, dF/dlambda)."""
    h, hx, hl = _h(x, lambda_param, k)
    e = math.exp(lambda_param * x)
    return e - h, lambda_param * e - hx, x * e - hl


def dpc_dlambda(lambda_param: float, k: int) -> float:
    """Implicit derivative of the interior root with respect to lambda."""
    if k not in (2, 3):
        raise ParameterError(f"k must be 2 or 3 (got {k})")
    x = p_c(lambda_param, k)
    _, fx, fl = fixed_point_residual(lambda_param, x, k)
    return -fl / fx


def pc_curve(lambda_grid, k: int) -> np.ndarray:
    """Rows ``(lambda, p_c)`` over the grid."""
    lam = np.asarray(lambda_grid, dtype=float)
    if lam.ndim != 1 or np.any(~np.isfinite(lam)) or np.any(lam < 0):
        raise ParameterError("lambda grid must be a 1-d array of nonnegative finite values")
    return np.column_stack([lam, [p_c(v, k) for v in lam]])


def pc_curve_csv(lambda_grid, k: int) -> str:
    rows = ["lambda,p_c,k"]
    rows += [f"{float(lam)!r},{float(pc)!r},{k}" for lam, pc in pc_curve(lambda_grid, k)]
    return "\n".join(rows) + "\n"


def fixed_point_report(lambda_param: float, k: int) -> dict:
    return {
        "lambda": lambda_param,
        "k": k,
        "points": [p.as_dict() for p in find_fixed_points(lambda_param, k)],
    }
