"""Continuous side: the gamma-function extension of the multinomial, its
Stirling form, the two determinant identities behind the Gaussian limit
constant, and a quadrature of ``f(z) = integral of M(x) over S(z)``.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.special import gammaln

from .errors import BudgetExceeded, DomainError, InvalidDistribution, SingularMatrix
from .model import SUM_TOL, Alphabet


@dataclass(frozen=True)
class ContinuousPoint:
    x: tuple[float, ...]

    @property
    def x_total(self) -> float:
        return math.fsum(self.x)

    @property
    def q(self) -> tuple[float, ...]:
        t = self.x_total
        return tuple(xi / t for xi in self.x)


@dataclass(frozen=True)
class DeterminantSpec:
    """Inputs of the rank-one-update determinant.

    ``B_1`` has unit off-diagonal entries and diagonal ``1 - 1/p_i``;
    ``B_2 = a^T a``.
    """

    p: tuple[float, ...]
    a: tuple[float, ...]
    s: float = 1.0


def log_multinomial_continuous(x: Sequence[float]) -> float:
    """``ln Gamma(sum x + 1) - sum ln Gamma(x_i + 1)`` for ``x_i >= 0``."""
    if any(xi < 0 for xi in x):
        raise DomainError("coordinates must be nonnegative")
    if sum(1 for xi in x if xi > 0) <= 1:
        return 0.0
    return math.lgamma(math.fsum(x) + 1.0) - math.fsum(math.lgamma(xi + 1.0) for xi in x)


def stirling_approx(x: Sequence[float]) -> float:
    """``ln M~(x)``: the Stirling form of the log multinomial."""
    if any(not xi > 0 for xi in x):
        raise DomainError("Stirling form needs strictly positive coordinates")
    n = len(x)
    total = math.fsum(x)
    h = -math.fsum(xi / total * math.log(xi / total) for xi in x)
    return (
        -(n - 1) / 2 * math.log(2 * math.pi)
        + total * h
        + math.log(total) / 2
        - math.fsum(math.log(xi) for xi in x) / 2
    )


def lemma1_matrix(k: Sequence[float]) -> np.ndarray:
    k = np.asarray(k, dtype=float)
    return np.ones((len(k), len(k))) + np.diag(k)


def lemma1_determinant(k: Sequence[float]) -> tuple[float, Callable[[int, int], float]]:
    """Closed-form determinant and cofactors of ``ones + diag(k)``.

    ``det = prod(k) * (1 + sum(1/k))``, written without division. Cofactor
    ``(i, j)`` (0-based) is ``-prod_{l not in {i, j}} k_l`` off the diagonal and
    the same determinant formula on the remaining ``n - 1`` entries on it.
    """
    k = [float(x) for x in k]
    if len(k) < 2:
        raise DomainError("need n >= 2")
    if any(x == 0 for x in k):
        raise DomainError("diagonal offsets must be nonzero")

    def det_of(values: list[float]) -> float:
        total = math.prod(values)
        for j in range(len(values)):
            total += math.prod(values[:j] + values[j + 1:])
        return total

    def cofactor(i: int, j: int) -> float:
        if i == j:
            return det_of(k[:i] + k[i + 1:])
        return -math.prod(v for l, v in enumerate(k) if l != i and l != j)

    return det_of(k), cofactor


def lemma2_matrix(spec: DeterminantSpec) -> np.ndarray:
    p = np.asarray(spec.p, dtype=float)
    a = np.asarray(spec.a, dtype=float)
    b1 = lemma1_matrix(-1.0 / p)
    return spec.s * np.outer(a, a) - b1


def lemma2_determinant(spec: DeterminantSpec) -> float:
    """``det(s B_2 - B_1)``, linear in ``s``.

    Slope ``((sum a_i p_i)^2 - (sum p - 1) sum a_i^2 p_i) / prod p``,
    intercept ``det(-B_1) = (1 - sum p) / prod p``.
    """
    p = [float(x) for x in spec.p]
    a = [float(x) for x in spec.a]
    if len(p) < 2 or len(a) != len(p):
        raise DomainError("need matching p and a with n >= 2")
    if any(x == 0 for x in p):
        raise DomainError("p entries must be nonzero")
    prod_p = math.prod(p)
    sum_p = math.fsum(p)
    ap = math.fsum(ai * pi for ai, pi in zip(a, p))
    a2p = math.fsum(ai * ai * pi for ai, pi in zip(a, p))
    slope = (ap * ap - (sum_p - 1.0) * a2p) / prod_p
    intercept = (1.0 - sum_p) / prod_p
    return spec.s * slope + intercept


def _check_simplex_point(p: Sequence[float]) -> list[float]:
    p = [float(x) for x in p]
    if len(p) < 2 or any(not 0 < x < 1 for x in p):
        raise InvalidDistribution("p must have n >= 2 entries in (0, 1)")
    if abs(math.fsum(p) - 1.0) > SUM_TOL * len(p):
        raise InvalidDistribution("p must sum to 1")
    return p


def gaussian_constant(p: Sequence[float]) -> float:
    """Value of the degenerate Gaussian integral, ``1 / H(p)``.

    Computed through the determinant identity: with ``sum p = 1`` and
    ``a_i = -ln p_i``, ``s det(B_2 / s - B_1) = H(p)^2 / prod p`` for every
    ``s``, so ``s = 1`` suffices.
    """
    p = _check_simplex_point(p)
    a = [-math.log(x) for x in p]
    det = lemma2_determinant(DeterminantSpec(tuple(p), tuple(a), 1.0))
    return 1.0 / math.sqrt(math.prod(p) * det)


def _gaussian_term(p: Sequence[float], sigma: float) -> float:
    p_arr = np.asarray(p, dtype=float)
    a = -np.log(p_arr)
    b = np.diag(1.0 / p_arr) - np.ones((len(p_arr), len(p_arr)))
    m = np.outer(a, a) / sigma**2 + b
    sign, logdet = np.linalg.slogdet(m)
    if sign <= 0 or np.linalg.cond(m) > 1e12:
        raise SingularMatrix(f"matrix numerically singular at sigma={sigma!r}")
    return math.exp(-math.log(sigma) - 0.5 * (float(np.sum(np.log(p_arr))) + logdet))


def _neville_at_zero(h: Sequence[float], values: Sequence[float]) -> float:
    t = list(values)
    for level in range(1, len(t)):
        for i in range(len(t) - level):
            t[i] = (h[i + level] * t[i] - h[i] * t[i + 1]) / (h[i + level] - h[i])
    return t[0]


def gaussian_constant_numeric(p: Sequence[float], sigma_grid: Sequence[float]) -> float:
    """Extrapolate ``1 / (sigma sqrt(prod p det(B_2 / sigma^2 + B)))`` to ``sigma -> 0``.

    Determinants come from a numeric LU factorization; the extrapolation is
    polynomial in ``sigma**2``.
    """
    p = _check_simplex_point(p)
    sig = [float(s) for s in sigma_grid]
    if not sig or any(s <= 0 for s in sig) or any(b >= a for a, b in zip(sig, sig[1:])):
        raise ValueError("sigma_grid must be positive and strictly decreasing")
    values = [_gaussian_term(p, s) for s in sig]
    return _neville_at_zero([s * s for s in sig], values)


# quadrature -----------------------------------------------------------------

_NODES, _WEIGHTS = np.polynomial.legendre.leggauss(15)


class _Budget:
    def __init__(self, limit: int):
        self.limit = limit
        self.used = 0

    def spend(self, n: int) -> None:
        self.used += n
        if self.used > self.limit:
            raise BudgetExceeded(f"more than {self.limit} integrand evaluations")


def _gl(f, lo: float, hi: float, budget: _Budget) -> float:
    half = 0.5 * (hi - lo)
    x = lo + half * (_NODES + 1.0)
    budget.spend(len(x))
    return half * float(np.dot(_WEIGHTS, f(x)))


def _adaptive(f, lo: float, hi: float, rtol: float, budget: _Budget, atol: float = 0.0,
              progress: list | None = None):
    """Globally adaptive Gauss-Legendre: split the worst panel until the summed
    error estimate meets the tolerance. Returns ``(value, error)``.

    ``progress``, if given, receives the running estimate after every split.
    """
    if hi <= lo:
        return 0.0, 0.0

    def panel(a, b):
        m = 0.5 * (a + b)
        coarse = _gl(f, a, b, budget)
        fine = _gl(f, a, m, budget) + _gl(f, m, b, budget)
        return fine, abs(fine - coarse)

    v, e = panel(lo, hi)
    heap = [(-e, lo, hi, v)]
    total_v, total_e = v, e
    if progress is not None:
        progress.append(total_v)
    for _ in range(2000):
        if total_e <= max(rtol * abs(total_v), atol):
            break
        neg_e, a, b, v = heapq.heappop(heap)
        m = 0.5 * (a + b)
        v1, e1 = panel(a, m)
        v2, e2 = panel(m, b)
        total_v += v1 + v2 - v
        total_e += e1 + e2 + neg_e
        heapq.heappush(heap, (-e1, a, m, v1))
        heapq.heappush(heap, (-e2, m, b, v2))
        if progress is not None:
            progress.append(total_v)
    total_v = math.fsum(item[3] for item in heap)
    total_e = math.fsum(-item[0] for item in heap)
    return total_v, total_e


def _log_m(*xs: np.ndarray) -> np.ndarray:
    xs = [np.maximum(x, 0.0) for x in xs]
    total = sum(xs)
    return gammaln(total + 1.0) - sum(gammaln(x + 1.0) for x in xs)


@dataclass(frozen=True)
class QuadratureResult:
    z: float
    scaled: float  # f(z) * exp(-z)
    error: float  # estimated absolute error of ``scaled``
    evaluations: int

    @property
    def value(self) -> float:
        return self.scaled * math.exp(self.z)

    @property
    def rel_error(self) -> float:
        return self.error / self.scaled if self.scaled else 0.0


def _slice_integral(a: Sequence[float], t: float, rtol: float, budget: _Budget) -> float:
    """``exp(-t)`` times the integral of M over the hyperplane slice ``<a, x> = t``."""
    n = len(a)
    if t <= 0:
        return 0.0
    if n == 2:
        a1, a2 = a

        def g(u):
            return np.exp(_log_m(u, (t - a1 * u) / a2) - t) / a2

        return _adaptive(g, 0.0, t / a1, rtol, budget)[0]

    a1, a2, a3 = a

    def h_scalar(u: float) -> float:
        rest = t - a1 * u

        def g(w):
            return np.exp(_log_m(np.full_like(w, u), w, (rest - a2 * w) / a3) - t) / a3

        return _adaptive(g, 0.0, max(rest, 0.0) / a2, rtol, budget)[0]

    def h(us):
        return np.array([h_scalar(float(u)) for u in us])

    return _adaptive(h, 0.0, t / a1, rtol, budget)[0]


def integral_f(
    alphabet: Alphabet, z: float, rtol: float = 1e-6, budget: int = 10_000_000
) -> QuadratureResult:
    """Quadrature of ``f(z)``, the integral of the continuous multinomial over
    the simplex ``<a, x> <= z``, for two or three letters.

    Integrates slice by slice in ``t = <a, x>`` so that the scaled value
    ``f(z) e^{-z} = int_0^z (slice(t) e^{-t}) e^{t - z} dt`` stays O(1).
    Raises ``BudgetExceeded`` carrying a partial estimate.
    """
    if alphabet.stop is not None:
        raise ValueError("integral_f expects a stop-free alphabet")
    a = alphabet.weights
    if len(a) not in (2, 3):
        raise ValueError("integral_f supports n = 2 or 3")
    if z <= 0:
        return QuadratureResult(float(z), 0.0, 0.0, 0)
    bud = _Budget(budget)
    inner_rtol = rtol * 1e-2
    progress: list[float] = []

    def outer(ts):
        return np.array([_slice_integral(a, float(t), inner_rtol, bud) * math.exp(t - z) for t in ts])

    try:
        value, err = _adaptive(outer, 0.0, float(z), rtol, bud, progress=progress)
    except BudgetExceeded as exc:
        partial = progress[-1] if progress else 0.0
        exc.partial = QuadratureResult(float(z), partial, math.inf, bud.used)
        raise
    return QuadratureResult(float(z), value, err + inner_rtol * abs(value), bud.used)
