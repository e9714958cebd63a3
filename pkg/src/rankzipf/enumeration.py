"""Exact combinatorics of the sorted word list.

Words sharing a letter multiset ``k`` (a composition class) have the same
probability ``exp(-<a, k>)`` and occupy a block of consecutive ranks of size
``M(k)``, the multinomial coefficient. Everything here counts with Python
integers; floats appear only in weights.

Classes whose weights agree to within ``TIE_RTOL * (1 + s)`` are treated as
ties and emitted in descending lexicographic order of ``k``, so the first
letter's class comes first. Within a class, words are listed in
lexicographic order of letter indices. Both orders are conventions; p(r)
does not depend on them.
"""

from __future__ import annotations

import heapq
import math
from bisect import bisect_left
from collections import deque
from dataclasses import dataclass
from typing import Iterator, Sequence, Union

from .errors import DomainError
from .model import Alphabet, GammaSolution, build_alphabet, solve_gamma

TIE_RTOL = 1e-12


def _tie_eps(s: float) -> float:
    return TIE_RTOL * (1.0 + abs(s))


def multinomial(k: Sequence[int]) -> int:
    """``(k_1 + ... + k_n)! / (k_1! ... k_n!)`` as an exact integer."""
    result = 1
    total = 0
    for ki in k:
        if ki < 0:
            raise ValueError("multinomial needs nonnegative entries")
        # running product of binomials C(total + j, j) built one factor at a time
        for j in range(1, ki + 1):
            total += 1
            result = result * total // j
    return result


def class_weight(weights: Sequence[float], k: Sequence[int]) -> float:
    """``<a, k>`` recomputed from scratch with compensated summation."""
    return math.fsum(ki * ai for ki, ai in zip(k, weights) if ki)


@dataclass(frozen=True)
class NormalizedModel:
    """Stop-free model with letter probabilities ``p_i ** gamma``.

    Ranks are the same as in the original model because ``x -> x**gamma``
    is monotone. ``weights`` are ``gamma * a_i`` computed from the original
    weights rather than from the rounded tilted probabilities.
    """

    alphabet: Alphabet
    original: Alphabet
    gamma: float
    stop: float
    weights: tuple[float, ...]

    def to_original(self, probability: float) -> float:
        return self.stop * probability ** (1.0 / self.gamma)


def normalize_model(alphabet: Alphabet, gamma: GammaSolution | None = None) -> NormalizedModel:
    if alphabet.stop is None:
        return NormalizedModel(alphabet, alphabet, 1.0, 1.0, alphabet.weights)
    if gamma is None:
        gamma = solve_gamma(alphabet)
    g = gamma.gamma
    tilted = build_alphabet(gamma.tilted, None, alphabet.names)
    return NormalizedModel(tilted, alphabet, g, alphabet.stop, tuple(g * a for a in alphabet.weights))


ModelLike = Union[Alphabet, NormalizedModel, Sequence[float]]


def stop_free_weights(model: ModelLike) -> tuple[float, ...]:
    """Weights of the stop-free model; alphabets with a stop are normalized first."""
    if isinstance(model, NormalizedModel):
        return model.weights
    if isinstance(model, Alphabet):
        return normalize_model(model).weights
    return tuple(float(a) for a in model)


@dataclass(frozen=True)
class CompositionClass:
    k: tuple[int, ...]
    weight: float
    count: int
    first_rank: int
    last_rank: int


class EnumeratorState:
    """Infinite stream of composition classes by non-decreasing weight.

    Each ``k`` has exactly one parent, ``k - e_f`` with ``f`` the first
    nonzero coordinate, so a class pushes ``k + e_i`` only for ``i <= f``
    (all ``i`` for the zero vector). No visited set is needed and the
    frontier stays on the surface of the explored simplex.
    """

    def __init__(self, weights: Sequence[float]):
        self.weights = tuple(float(a) for a in weights)
        if not self.weights or any(not a > 0 for a in self.weights):
            raise ValueError("weights must be positive")
        n = len(self.weights)
        zero = (0,) * n
        self.frontier: list = [(0.0, zero, zero, 1)]
        self.emitted_rank_total = 0
        self.last_weight = 0.0
        self._pending: deque = deque()

    @classmethod
    def for_model(cls, model: ModelLike) -> "EnumeratorState":
        return cls(stop_free_weights(model))

    def _push_children(self, k: tuple[int, ...], count: int) -> None:
        n = len(k)
        first = next((i for i, ki in enumerate(k) if ki), n - 1)
        total = sum(k)
        for i in range(first + 1):
            child = k[:i] + (k[i] + 1,) + k[i + 1:]
            child_count = count * (total + 1) // (k[i] + 1)
            w = class_weight(self.weights, child)
            heapq.heappush(self.frontier, (w, tuple(-c for c in child), child, child_count))

    def _refill(self) -> None:
        w0, _, k, count = heapq.heappop(self.frontier)
        group = [(k, count, w0)]
        limit = w0 + _tie_eps(w0)
        while self.frontier and self.frontier[0][0] <= limit:
            w, _, k, count = heapq.heappop(self.frontier)
            group.append((k, count, w))
        # children weigh at least min(a) more than their parent, so none can
        # join this tie group
        for k, count, _ in group:
            self._push_children(k, count)
        group.sort(key=lambda item: tuple(-c for c in item[0]))
        self._pending.extend(group)

    def __iter__(self) -> "EnumeratorState":
        return self

    def __next__(self) -> CompositionClass:
        if not self._pending:
            self._refill()
        k, count, w = self._pending.popleft()
        first = self.emitted_rank_total + 1
        self.emitted_rank_total += count
        self.last_weight = w
        return CompositionClass(k, w, count, first, self.emitted_rank_total)


def next_class(state: EnumeratorState) -> CompositionClass:
    return next(state)


@dataclass(frozen=True)
class RankAnswer:
    rank: int
    probability: float
    log_probability: float
    cls: CompositionClass
    word: str | None = None


def _class_at_rank(model: ModelLike, r: int) -> CompositionClass:
    if r < 1:
        raise DomainError(f"rank must be >= 1, got {r}")
    for c in EnumeratorState.for_model(model):
        if c.last_rank >= r:
            return c
    raise AssertionError("unreachable: the class stream is infinite")


def _original_log_probability(model: ModelLike, c: CompositionClass) -> float:
    if isinstance(model, Alphabet) and model.stop is not None:
        return math.log(model.stop) - class_weight(model.weights, c.k)
    if isinstance(model, NormalizedModel):
        return math.log(model.stop) - class_weight(model.original.weights, c.k)
    return -c.weight


def rank_to_probability(model: ModelLike, r: int, with_word: bool = False) -> RankAnswer:
    """Probability ``p(r)`` of the word of rank ``r``.

    For an alphabet with a stop symbol the ranking runs on the tilted model
    and the probability is reported in the original model,
    ``p_0 * exp(-<a, k>)``.
    """
    c = _class_at_rank(model, r)
    logp = _original_log_probability(model, c)
    word = None
    if with_word:
        letters = unrank_class_word(c.k, r - c.first_rank)
        alphabet = _alphabet_of(model)
        if alphabet is not None:
            word = alphabet.format_word(letters)
        else:
            word = "".join(str(i + 1) for i in letters)
    return RankAnswer(r, math.exp(logp), logp, c, word)


def _alphabet_of(model: ModelLike) -> Alphabet | None:
    if isinstance(model, Alphabet):
        return model
    if isinstance(model, NormalizedModel):
        return model.original
    return None


def iter_simplex(weights: Sequence[float], z: float) -> Iterator[tuple[tuple[int, ...], float, int]]:
    """Depth-first walk over lattice points ``k >= 0`` with ``<a, k> <= z``.

    Yields ``(k, weight, M(k))``. The multinomial is carried along
    incrementally, ``M(k + e_i) = M(k) * (|k| + 1) / (k_i + 1)``, and branches
    are pruned as soon as the partial weight exceeds ``z``. The boundary is
    inclusive up to the tie tolerance.
    """
    a = tuple(float(x) for x in weights)
    n = len(a)
    limit = z + _tie_eps(z)
    if limit < 0:
        return
    k = [0] * n

    def walk(i: int, partial: float, total: int, count: int):
        if i == n - 1:
            ki = 0
            c = count
            while True:
                k[i] = ki
                w = math.fsum(kj * aj for kj, aj in zip(k, a) if kj)
                if w > limit:
                    break
                yield tuple(k), w, c
                ki += 1
                c = c * (total + ki) // ki
            k[i] = 0
            return
        ki = 0
        c = count
        while partial + ki * a[i] <= limit + 1e-9:
            k[i] = ki
            yield from walk(i + 1, partial + ki * a[i], total + ki, c)
            ki += 1
            c = c * (total + ki) // ki
        k[i] = 0

    yield from walk(0, 0.0, 0, 1)


def q_tilde(model: ModelLike, z: float) -> int:
    """Number of words with ``-ln(probability) <= z`` in the stop-free model."""
    if z < 0:
        return 0
    return sum(c for _, _, c in iter_simplex(stop_free_weights(model), z))


def q_tilde_grid(model: ModelLike, zs: Sequence[float]) -> list[int]:
    """``Q~`` at every point of a non-decreasing grid, from a single walk."""
    zs = [float(z) for z in zs]
    if any(b < a for a, b in zip(zs, zs[1:])):
        raise ValueError("grid must be non-decreasing")
    if not zs:
        return []
    # bucket each class at the first grid point that includes it
    lifted = [z + _tie_eps(z) for z in zs]
    buckets = [0] * (len(zs) + 1)
    for _, w, c in iter_simplex(stop_free_weights(model), zs[-1]):
        buckets[bisect_left(lifted, w)] += c
    out = []
    running = 0
    for b in buckets[:-1]:
        running += b
        out.append(running)
    return out


def probability_to_rank(model: ModelLike, q: float) -> int:
    """``Q(q)``: rank of the last word whose probability is at least ``q``.

    For a stop-free model this is ``Q~(-ln q)``. With a stop symbol ``q`` is a
    probability in the original model and the threshold becomes
    ``gamma * ln(p_0 / q)`` in the tilted one.
    """
    if not 0 < q <= 1:
        raise DomainError(f"probability must lie in (0, 1], got {q!r}")
    if isinstance(model, Alphabet) and model.stop is not None:
        model = normalize_model(model)
    if isinstance(model, NormalizedModel):
        z = model.gamma * (math.log(model.stop) - math.log(q))
    else:
        z = -math.log(q)
    return q_tilde(model, z)


@dataclass(frozen=True)
class FunctionalEquationCheck:
    z: float
    lhs: int
    rhs: int
    status: str  # "pass", "fail" or "boundary"

    @property
    def passed(self) -> bool:
        return self.status != "fail"


def _near_attainable(weights: Sequence[float], z: float, band: float) -> bool:
    return any(abs(w - z) < band for _, w, _ in iter_simplex(weights, z + band))


def verify_functional_equation(
    model: ModelLike, z_samples: Sequence[float], band: float = 1e-9
) -> list[FunctionalEquationCheck]:
    """Check ``Q~(z) = sum_i Q~(z - a_i) + [z >= 0]`` exactly at each sample.

    Samples within ``band`` of an attainable weight are reported as
    ``"boundary"`` and not judged: the step function and the shifted terms
    jump together there, so the comparison is decided by float rounding.
    """
    a = stop_free_weights(model)
    out = []
    for z in z_samples:
        z = float(z)
        if z >= -band and _near_attainable(a, z, band):
            out.append(FunctionalEquationCheck(z, 0, 0, "boundary"))
            continue
        lhs = q_tilde(a, z)
        rhs = sum(q_tilde(a, z - ai) for ai in a) + (1 if z >= 0 else 0)
        out.append(FunctionalEquationCheck(z, lhs, rhs, "pass" if lhs == rhs else "fail"))
    return out


def unrank_class_word(k: Sequence[int], index: int) -> tuple[int, ...]:
    """The ``index``-th (0-based) arrangement of multiset ``k`` in lexicographic order.

    Letters are returned as 0-based indices.
    """
    remaining = list(k)
    total = sum(remaining)
    count = multinomial(remaining)
    if not 0 <= index < count:
        raise DomainError(f"index {index} outside class of size {count}")
    word = []
    for _ in range(total):
        for i, ki in enumerate(remaining):
            if ki == 0:
                continue
            # arrangements starting with letter i
            block = count * ki // total
            if index < block:
                word.append(i)
                remaining[i] -= 1
                count = block
                break
            index -= block
        total -= 1
    return tuple(word)


def word_at_rank(model: ModelLike, r: int) -> str:
    return rank_to_probability(model, r, with_word=True).word
