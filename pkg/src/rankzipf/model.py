"""The memoryless word source: alphabet validation, the power exponent,
entropy functionals, lattice detection and the predicted limit constants.

Probabilities are never renormalized. An alphabet whose probabilities miss 1
by more than ``SUM_TOL`` is rejected so that every run is reproducible from
its literal input.
"""

from __future__ import annotations

import math
import string
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .errors import (
    InvalidDistribution,
    LengthMismatch,
    NonPositiveProbability,
    SumNotOne,
    TooFewLetters,
)

SUM_TOL = 1e-12


@dataclass(frozen=True)
class Alphabet:
    """Letter probabilities ``p_1..p_n`` and an optional stop probability ``p_0``."""

    letters: tuple[float, ...]
    stop: float | None = None
    names: tuple[str, ...] | None = None

    @property
    def n(self) -> int:
        return len(self.letters)

    @property
    def weights(self) -> tuple[float, ...]:
        """Letter weights ``a_i = -ln p_i`` in nats."""
        return tuple(-math.log(p) for p in self.letters)

    @property
    def letter_names(self) -> tuple[str, ...]:
        if self.names is not None:
            return self.names
        if self.n <= 26:
            return tuple(string.ascii_lowercase[: self.n])
        return tuple(str(i + 1) for i in range(self.n))

    def format_word(self, letters: Sequence[int]) -> str:
        names = self.letter_names
        sep = "" if all(len(s) == 1 for s in names) else " "
        return sep.join(names[i] for i in letters)


@dataclass(frozen=True)
class GammaSolution:
    gamma: float
    residual: float
    tilted: tuple[float, ...]


@dataclass(frozen=True)
class LatticeReport:
    is_lattice: bool
    v: float | None = None
    m: tuple[int, ...] | None = None
    # (i, j) letter indices (0-based) whose weight ratio has no small-denominator
    # rational match, and how many continued-fraction terms were expanded
    witness: tuple[int, int] | None = None
    depth: int = 0
    max_denominator: int = 10**6
    tol: float = 1e-9


@dataclass(frozen=True)
class PredictedLimits:
    entropy_tilted: float
    q_limit: float
    rank_limit: float


def build_alphabet(
    probs: Sequence[float],
    stop: float | None = None,
    names: Sequence[str] | None = None,
) -> Alphabet:
    """Validate letter probabilities (and optional stop probability).

    With a stop symbol ``p_0 + sum(p_i)`` must equal 1; without one the
    letters alone must sum to 1. Violations raise, nothing is rescaled.
    """
    letters = tuple(float(p) for p in probs)
    if len(letters) < 2:
        raise TooFewLetters(f"need at least 2 letters, got {len(letters)}")
    for i, p in enumerate(letters):
        if not p > 0:
            raise NonPositiveProbability(f"letter {i + 1} has probability {p!r}")
        if not p < 1:
            raise NonPositiveProbability(f"letter {i + 1} has probability {p!r} >= 1")
    if stop is not None:
        stop = float(stop)
        if not 0 < stop < 1:
            raise NonPositiveProbability(f"stop probability {stop!r} outside (0, 1)")
    total = math.fsum(letters + ((stop,) if stop is not None else ()))
    if abs(total - 1.0) > SUM_TOL:
        raise SumNotOne(total - 1.0)
    if names is not None:
        names = tuple(str(s) for s in names)
        if len(names) != len(letters):
            raise LengthMismatch(f"{len(names)} names for {len(letters)} letters")
        if len(set(names)) != len(names):
            raise ValueError("letter names must be distinct")
    return Alphabet(letters, stop, names)


def _power_sum(letters: Sequence[float], g: float) -> float:
    return math.fsum(p**g for p in letters)


def solve_gamma(alphabet: Alphabet) -> GammaSolution:
    """Root of ``sum(p_i ** gamma) = 1`` on ``(0, 1]``.

    The power sum is strictly decreasing in gamma, equals n >= 2 at 0 and
    ``1 - p_0`` at 1, so the root exists and is unique. Bisection narrows the
    bracket, Newton polishes inside it.
    """
    letters = alphabet.letters
    if alphabet.stop is None:
        return GammaSolution(1.0, abs(_power_sum(letters, 1.0) - 1.0), letters)

    logs = [math.log(p) for p in letters]
    lo, hi = 0.0, 1.0
    for _ in range(200):
        if hi - lo < 1e-6:
            break
        mid = 0.5 * (lo + hi)
        if _power_sum(letters, mid) > 1.0:
            lo = mid
        else:
            hi = mid
    g = 0.5 * (lo + hi)
    for _ in range(10):
        powers = [p**g for p in letters]
        f = math.fsum(powers) - 1.0
        if f == 0.0:
            break
        if f > 0:
            lo = g
        else:
            hi = g
        df = math.fsum(q * l for q, l in zip(powers, logs))
        g_new = g - f / df
        if not lo < g_new < hi:
            g_new = 0.5 * (lo + hi)
        if abs(g_new - g) <= 1e-16 * g:
            g = g_new
            break
        g = g_new
    tilted = tuple(p**g for p in letters)
    return GammaSolution(g, abs(math.fsum(tilted) - 1.0), tilted)


def _check_distribution(dist: Sequence[float], name: str = "distribution") -> tuple[float, ...]:
    d = tuple(float(x) for x in dist)
    if not d:
        raise InvalidDistribution(f"{name} is empty")
    if any(not (0.0 <= x <= 1.0) for x in d):
        raise InvalidDistribution(f"{name} has entries outside [0, 1]")
    dev = math.fsum(d) - 1.0
    if abs(dev) > SUM_TOL * max(1, len(d)):
        raise InvalidDistribution(f"{name} sums to 1{dev:+.3e}")
    return d


def entropy(dist: Sequence[float]) -> float:
    """Shannon entropy in nats, with ``0 ln 0 = 0``."""
    d = _check_distribution(dist)
    return max(0.0, -math.fsum(x * math.log(x) for x in d if x > 0))


def cross_entropy(q: Sequence[float], p: Sequence[float]) -> float:
    """``-sum q_i ln p_i``: a convex combination of the weights ``-ln p_i``."""
    if len(q) != len(p):
        raise LengthMismatch(f"lengths {len(q)} and {len(p)} differ")
    q = _check_distribution(q, "q")
    if any(not 0 < x <= 1 for x in p):
        raise InvalidDistribution("p must have entries in (0, 1]")
    return -math.fsum(qi * math.log(pi) for qi, pi in zip(q, p) if qi > 0)


def kl_divergence(q: Sequence[float], p: Sequence[float]) -> float:
    """Kullback-Leibler divergence ``D(q|p) = H(q; p) - H(q)``, in nats."""
    if len(q) != len(p):
        raise LengthMismatch(f"lengths {len(q)} and {len(p)} differ")
    q = _check_distribution(q, "q")
    if any(not 0 < x <= 1 for x in p):
        raise InvalidDistribution("p must have entries in (0, 1]")
    # one fsum over q_i ln(q_i / p_i) is the same quantity without cancellation
    return max(0.0, math.fsum(qi * (math.log(qi) - math.log(pi)) for qi, pi in zip(q, p) if qi > 0))


def _rational_match(x: Fraction, max_denominator: int, tol: float) -> tuple[Fraction | None, int]:
    """Walk the continued-fraction convergents of ``x``.

    Returns the first convergent ``h/k`` with ``|x - h/k| <= tol * x / k**2``
    and the number of terms expanded, or ``None`` once denominators pass
    ``max_denominator``. The ``1/k**2`` scaling keeps genuine rationals (float
    error only) apart from the ordinary ``~1/k**2`` approach of an irrational.
    """
    h1, h2 = 1, 0
    k1, k2 = 0, 1
    y = x
    depth = 0
    while True:
        a = math.floor(y)
        h, k = a * h1 + h2, a * k1 + k2
        if k > max_denominator:
            return None, depth
        depth += 1
        approx = Fraction(h, k)
        if abs(x - approx) <= Fraction(tol) * x / (k * k):
            return approx, depth
        frac = y - a
        if frac == 0:
            return approx, depth
        y = 1 / frac
        h1, h2 = h, h1
        k1, k2 = k, k1


def detect_lattice(
    weights: Sequence[float], max_denominator: int = 10**6, tol: float = 1e-9
) -> LatticeReport:
    """Decide whether every weight is an integer multiple of a common step ``v``.

    This is evidence, not proof: a finite expansion cannot certify
    irrationality, so the report carries the denominator bound it used.
    """
    if max_denominator < 2:
        raise ValueError("max_denominator must be >= 2")
    a = [float(w) for w in weights]
    if any(not w > 0 for w in a):
        raise ValueError("weights must be positive")
    base = Fraction(a[0])
    ratios = []
    depth_total = 0
    for i in range(1, len(a)):
        r, depth = _rational_match(Fraction(a[i]) / base, max_denominator, tol)
        depth_total += depth
        if r is None:
            return LatticeReport(
                False, witness=(0, i), depth=depth, max_denominator=max_denominator, tol=tol
            )
        ratios.append(r)
    lcm = 1
    for r in ratios:
        lcm = lcm * r.denominator // math.gcd(lcm, r.denominator)
    m = [lcm] + [int(r * lcm) for r in ratios]
    g = 0
    for mi in m:
        g = math.gcd(g, mi)
    m = tuple(mi // g for mi in m)
    v = a[0] / m[0]
    if any(abs(ai - mi * v) >= 1e-9 * ai for ai, mi in zip(a, m)):
        return LatticeReport(False, witness=(0, 0), depth=depth_total,
                             max_denominator=max_denominator, tol=tol)
    return LatticeReport(True, v=v, m=m, depth=depth_total,
                         max_denominator=max_denominator, tol=tol)


def predicted_limits(alphabet: Alphabet, gamma: GammaSolution | None = None) -> PredictedLimits:
    """Limit constants of ``Q~(z)/e^z`` and of ``p(r) * r**(1/gamma)``."""
    if gamma is None:
        gamma = solve_gamma(alphabet)
    g = gamma.gamma
    h = -g * math.fsum(t * math.log(p) for t, p in zip(gamma.tilted, alphabet.letters))
    p0 = alphabet.stop if alphabet.stop is not None else 1.0
    return PredictedLimits(entropy_tilted=h, q_limit=1.0 / h, rank_limit=p0 * h ** (-1.0 / g))
