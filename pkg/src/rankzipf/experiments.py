"""Desk-scale experiments: convergence of the counting function and of
``p(r) r^(1/gamma)`` to their predicted constants, a brute-force word-list
oracle, and the persistent oscillation of the lattice case.
"""

from __future__ import annotations

import csv
import io
import math
import statistics
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .asymptotics import (
    DeterminantSpec,
    gaussian_constant,
    lemma1_determinant,
    lemma1_matrix,
    lemma2_determinant,
    lemma2_matrix,
)
from .enumeration import (
    EnumeratorState,
    class_weight,
    iter_simplex,
    normalize_model,
    q_tilde_grid,
    stop_free_weights,
    verify_functional_equation,
)
from .errors import BudgetExceeded, NotLattice
from .model import (
    Alphabet,
    detect_lattice,
    entropy,
    kl_divergence,
    predicted_limits,
    solve_gamma,
)

SCHEMA = "rankzipf-report/1"
CLASS_BUDGET = 5_000_000


@dataclass(frozen=True)
class Row:
    abscissa: float | int
    empirical: float
    predicted: float
    ratio: float


@dataclass(frozen=True)
class WindowStats:
    lo: float
    hi: float
    count: int
    max_deviation: float
    median_ratio: float


@dataclass
class ConvergenceReport:
    """Rows of (abscissa, empirical, predicted, ratio) plus window statistics.

    ``kind`` is ``"qtilde"`` (abscissa z) or ``"rank"`` (abscissa r, windows
    taken on ln r).
    """

    kind: str
    rows: list[Row]
    lattice: bool
    early: WindowStats | None = None
    late: WindowStats | None = None
    meta: dict[str, Any] = field(default_factory=dict)

    def _scale(self, x) -> float:
        return math.log(x) if self.kind == "rank" else float(x)

    def window(self, lo: float, hi: float) -> WindowStats:
        """Statistics over rows whose (log-)abscissa lies in ``[lo, hi]``."""
        ratios = [row.ratio for row in self.rows if lo <= self._scale(row.abscissa) <= hi]
        if not ratios:
            return WindowStats(lo, hi, 0, math.nan, math.nan)
        return WindowStats(
            lo, hi, len(ratios), max(abs(x - 1.0) for x in ratios), statistics.median(ratios)
        )

    def bounds(self) -> tuple[float, float]:
        return min(r.ratio for r in self.rows), max(r.ratio for r in self.rows)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\r\n")
        writer.writerow(["abscissa", "empirical", "predicted", "ratio"])
        for row in self.rows:
            writer.writerow([_fmt(row.abscissa), _fmt(row.empirical), _fmt(row.predicted), _fmt(row.ratio)])
        return buf.getvalue()

    def to_json_dict(self) -> dict[str, Any]:
        def stats(w: WindowStats | None):
            if w is None:
                return None
            return {"lo": w.lo, "hi": w.hi, "count": w.count,
                    "max_deviation": _finite_or_none(w.max_deviation),
                    "median_ratio": _finite_or_none(w.median_ratio)}

        return {
            "kind": self.kind,
            "lattice": self.lattice,
            "rows": [
                {
                    "abscissa": str(r.abscissa) if isinstance(r.abscissa, int) else r.abscissa,
                    "empirical": r.empirical,
                    "predicted": r.predicted,
                    "ratio": r.ratio,
                }
                for r in self.rows
            ],
            "trend": {"early": stats(self.early), "late": stats(self.late)},
            "meta": self.meta,
        }

    @classmethod
    def from_json_dict(cls, data: dict[str, Any]) -> "ConvergenceReport":
        def stats(d):
            if d is None:
                return None
            d = {k: (math.nan if v is None else v) for k, v in d.items()}
            return WindowStats(**d)

        rows = [
            Row(
                int(r["abscissa"]) if isinstance(r["abscissa"], str) else r["abscissa"],
                r["empirical"], r["predicted"], r["ratio"],
            )
            for r in data["rows"]
        ]
        return cls(data["kind"], rows, data["lattice"], stats(data["trend"]["early"]),
                   stats(data["trend"]["late"]), dict(data.get("meta", {})))


def _finite_or_none(x: float) -> float | None:
    return None if math.isnan(x) else x


def _fmt(x) -> str:
    if isinstance(x, int):
        return str(x)
    return repr(float(x))


def estimate_classes(weights: Sequence[float], z: float) -> float:
    """Volume of the simplex ``<a, x> <= z``, about the number of classes in it."""
    n = len(weights)
    return z**n / (math.factorial(n) * math.prod(weights))


def _log_ratio(count: int, z: float, h: float) -> float:
    return math.exp(math.log(count) + math.log(h) - z) if count else 0.0


def converge_qtilde(
    alphabet: Alphabet, z_max: float, step: float = 0.5, budget: int = CLASS_BUDGET
) -> ConvergenceReport:
    """``Q~(z) H / e^z`` on the grid ``step, 2 step, ..., z_max``.

    An alphabet with a stop symbol is normalized first. Trend windows are
    ``[z_max/4, z_max/2]`` (early) and ``[3 z_max/4, z_max]`` (late).
    """
    if step <= 0 or z_max <= 0:
        raise ValueError("z_max and step must be positive")
    model = normalize_model(alphabet)
    a = model.weights
    if estimate_classes(a, z_max) > budget:
        raise BudgetExceeded(
            f"about {estimate_classes(a, z_max):.3g} lattice classes exceeds budget {budget}"
        )
    h = predicted_limits(model.alphabet).entropy_tilted
    zs = [step * i for i in range(1, int(math.floor(z_max / step + 1e-9)) + 1)]
    counts = q_tilde_grid(a, zs)
    rows = [Row(z, _log_ratio(q, z, 1.0), 1.0 / h, _log_ratio(q, z, h)) for z, q in zip(zs, counts)]
    rep = ConvergenceReport("qtilde", rows, detect_lattice(a).is_lattice,
                            meta={"z_max": z_max, "step": step, "entropy": h})
    rep.early = rep.window(z_max / 4, z_max / 2)
    rep.late = rep.window(3 * z_max / 4, z_max)
    return rep


def first_period_bracket(alphabet: Alphabet) -> tuple[float, float]:
    """Constants ``c1 < (Q~(z) + 1/(n-1)) e^{-z} < c2`` measured on ``[0, max a_i]``.

    ``Q~`` is constant between consecutive attainable weights, so the
    extremes on each piece sit at its ends. The bracket then propagates to
    all ``z >= 0`` through the shift recurrence.
    """
    a = stop_free_weights(alphabet)
    n = len(a)
    top = max(a)
    shift = 1.0 / (n - 1)
    levels = Counter()
    for _, w, c in iter_simplex(a, top):
        levels[w] += c
    ws = sorted(levels)
    c1, c2 = math.inf, 0.0
    running = 0
    for i, w in enumerate(ws):
        running += levels[w]
        end = ws[i + 1] if i + 1 < len(ws) else top
        c2 = max(c2, (running + shift) * math.exp(-w))
        c1 = min(c1, (running + shift) * math.exp(-end))
    return c1, c2


def geometric_ranks(r_max: int, samples: int) -> list[int]:
    if r_max < 1 or samples < 1:
        raise ValueError("r_max and samples must be positive")
    if samples == 1:
        return [int(r_max)]
    top = math.log(r_max)
    return sorted({max(1, int(round(math.exp(top * i / (samples - 1))))) for i in range(samples)})


def converge_rank(
    alphabet: Alphabet, r_max: int, samples: int = 100, form: str = "power"
) -> ConvergenceReport:
    """``p(r)`` against its power law at geometrically spaced ranks up to ``r_max``.

    ``form="power"`` reports ``p(r) r^(1/gamma)`` against ``p_0 H(p^gamma)^(-1/gamma)``;
    ``form="entropy"`` reports ``(p(r)/p_0)^(-gamma) / r`` against ``H(p^gamma)``.
    Windows are taken on ``ln r`` with the same quarters as ``converge_qtilde``.
    """
    if form not in ("power", "entropy"):
        raise ValueError("form must be 'power' or 'entropy'")
    if r_max > 10**9:
        raise ValueError("r_max is limited to 1e9")
    gamma = solve_gamma(alphabet)
    limits = predicted_limits(alphabet, gamma)
    model = normalize_model(alphabet, gamma)
    g = gamma.gamma
    log_p0 = math.log(alphabet.stop) if alphabet.stop is not None else 0.0
    stream = EnumeratorState(model.weights)
    cls = next(stream)
    rows = []
    for r in geometric_ranks(int(r_max), samples):
        while cls.last_rank < r:
            cls = next(stream)
        log_p = log_p0 - class_weight(alphabet.weights, cls.k)
        if form == "power":
            emp = math.exp(log_p + math.log(r) / g)
            pred = limits.rank_limit
        else:
            emp = math.exp(-g * (log_p - log_p0) - math.log(r))
            pred = limits.entropy_tilted
        rows.append(Row(r, emp, pred, emp / pred))
    rep = ConvergenceReport("rank", rows, detect_lattice(alphabet.weights).is_lattice,
                            meta={"r_max": int(r_max), "samples": samples, "form": form,
                                  "gamma": g, "entropy_tilted": limits.entropy_tilted})
    top = math.log(r_max) if r_max > 1 else 1.0
    rep.early = rep.window(top / 4, top / 2)
    rep.late = rep.window(3 * top / 4, top)
    return rep


@dataclass(frozen=True)
class OracleResult:
    compared_ranks: int
    mismatches: list
    cutoff: float = 0.0

    @property
    def passed(self) -> bool:
        return not self.mismatches


def _oracle_words(alphabet: Alphabet, max_len: int, max_weight: float | None):
    """Every word of length <= max_len (optionally pruned by weight), with its
    probability multiplied out letter by letter and its composition."""
    letters = alphabet.letters
    n = len(letters)
    p0 = alphabet.stop if alphabet.stop is not None else 1.0
    a = alphabet.weights
    out = []
    stack = [((), p0, 0.0)]
    while stack:
        word, prob, w = stack.pop()
        out.append((word, prob))
        if len(word) == max_len:
            continue
        for i in range(n):
            nw = w + a[i]
            if max_weight is not None and nw > max_weight + 1e-9:
                continue
            stack.append((word + (i,), prob * letters[i], nw))
    out.sort(key=lambda item: item[0])
    return out


def brute_force_oracle(
    alphabet: Alphabet, max_len: int, max_weight: float | None = None, max_ranks: int | None = None
) -> OracleResult:
    """Compare the enumerator with an explicit sorted list of words.

    Words are generated one by one, sorted by probability (stable, from
    lexicographic order) and cut into runs of equal probability. Only the
    prefix whose weight is at most ``min(a) * max_len - max(a)`` (and
    ``max_weight`` when pruning) is compared: no longer or pruned word can
    enter it. Each run must match the enumerator's classes of that weight in
    size and composition multiset, and every rank's probability must agree to
    1e-12 relative.
    """
    a = alphabet.weights
    if max_weight is None and len(a) ** max_len > 10**7:
        raise ValueError("n ** max_len exceeds 1e7 words")
    cutoff = min(a) * max_len - max(a)
    if max_weight is not None:
        cutoff = min(cutoff, max_weight)
    words = _oracle_words(alphabet, max_len, max_weight)
    words.sort(key=lambda item: -item[1])
    log_p0 = math.log(alphabet.stop) if alphabet.stop is not None else 0.0
    limit_prob = math.exp(log_p0 - cutoff) * (1 - 1e-9)

    runs = []  # (probability, [words])
    for word, prob in words:
        if prob < limit_prob:
            break
        if runs and runs[-1][0] - prob <= 1e-12 * runs[-1][0]:
            runs[-1][1].append((word, prob))
        else:
            runs.append((prob, [(word, prob)]))
    if max_ranks is not None:
        kept, total = [], 0
        for run in runs:
            if total >= max_ranks:
                break
            kept.append(run)
            total += len(run[1])
        runs = kept

    mismatches: list = []
    stream = EnumeratorState.for_model(alphabet)
    cls = next(stream)
    compared = 0
    n = alphabet.n
    for prob, members in runs:
        target = compared + len(members)
        expected = Counter(tuple(word.count(i) for i in range(n)) for word, _ in members)
        seen: Counter = Counter()
        class_prob = {}
        while cls.last_rank <= target:
            seen[cls.k] += cls.count
            class_prob[cls.k] = math.exp(log_p0 - class_weight(a, cls.k))
            cls = next(stream)
        if cls.first_rank != target + 1:
            mismatches.append(("boundary", target, cls.k, cls.first_rank))
            break
        if seen != expected:
            mismatches.append(("block", compared + 1, dict(expected), dict(seen)))
            break
        for offset, (word, wp) in enumerate(members):
            ep = class_prob[tuple(word.count(i) for i in range(n))]
            if abs(ep - wp) > 1e-12 * wp:
                mismatches.append(("probability", compared + 1 + offset, ep, wp))
        compared = target
    return OracleResult(compared, mismatches, cutoff)


@dataclass(frozen=True)
class OscillationRow:
    m: int
    on_grid: float
    midpoint: float

    @property
    def gap(self) -> float:
        return self.on_grid / self.midpoint


@dataclass(frozen=True)
class OscillationReport:
    v: float
    m: tuple[int, ...]
    rows: list[OscillationRow]
    liminf: float
    limsup: float

    @property
    def min_gap(self) -> float:
        return min(r.gap for r in self.rows)


def lattice_counts(m: Sequence[int], periods: int) -> list[int]:
    """``Q~(j v)`` for ``j = 0..periods`` from the grid recurrence
    ``Q(j) = sum_i Q(j - m_i) + 1`` with ``Q(j) = 0`` for ``j < 0``."""
    q: list[int] = []
    for j in range(periods + 1):
        q.append(sum(q[j - mi] for mi in m if j - mi >= 0) + 1)
    return q


def lattice_oscillation(alphabet: Alphabet, periods: int) -> OscillationReport:
    """Sample ``Q~(z) e^{-z}`` on the grid ``z = j v`` and at the midpoints ``(j + 1/2) v``.

    All weights are multiples of ``v`` so ``Q~`` is constant on each cell
    ``[j v, (j+1) v)``; the midpoint value is the grid value damped by
    ``e^{-v/2}`` and never catches up.
    """
    a = stop_free_weights(alphabet)
    rep = detect_lattice(a)
    if not rep.is_lattice:
        raise NotLattice(f"weights are not commensurate (witness {rep.witness})")
    v, m = rep.v, rep.m
    counts = lattice_counts(m, periods)
    rows = []
    for j in range(1, periods + 1):
        log_q = math.log(counts[j])
        rows.append(OscillationRow(j, math.exp(log_q - j * v), math.exp(log_q - (j + 0.5) * v)))
    tail = rows[len(rows) // 2:]
    return OscillationReport(
        v, m, rows,
        liminf=min(r.midpoint for r in tail),
        limsup=max(r.on_grid for r in tail),
    )


# verification suites used by the ``verify`` subcommand ------------------------

def functional_equation_suite(
    alphabet: Alphabet, samples: int = 100, seed: int = 0, z_max: float = 30.0
) -> dict[str, int]:
    """Draw random ``z`` in ``[0, z_max]`` until ``samples`` non-boundary points
    have been checked against the shift identity."""
    rng = np.random.default_rng(seed)
    checked = failed = skipped = 0
    while checked < samples:
        z = float(rng.uniform(0.0, z_max))
        (res,) = verify_functional_equation(alphabet, [z])
        if res.status == "boundary":
            skipped += 1
            continue
        checked += 1
        failed += res.status == "fail"
    return {"checked": checked, "failed": failed, "boundary_skipped": skipped}


def determinant_suite(instances: int = 1000, seed: int = 0, max_n: int = 8) -> dict[str, Any]:
    """Closed-form determinants against LU factorization on random instances."""
    rng = np.random.default_rng(seed)
    e1 = e2 = ec = 0.0
    for _ in range(instances):
        n = int(rng.integers(2, max_n + 1))
        k = rng.uniform(0.1, 3.0, n) * rng.choice([-1.0, 1.0], n)
        det, _ = lemma1_determinant(k)
        ref = float(np.linalg.det(lemma1_matrix(k)))
        e1 = max(e1, abs(det - ref) / abs(ref))
        spec = DeterminantSpec(tuple(rng.uniform(0.05, 1.0, n)), tuple(rng.uniform(-2, 2, n)),
                               float(rng.uniform(-3, 3)))
        ref = float(np.linalg.det(lemma2_matrix(spec)))
        e2 = max(e2, abs(lemma2_determinant(spec) - ref) / abs(ref))
        p = rng.dirichlet(np.ones(n))
        p = p / p.sum()
        if np.all(p > 1e-12):
            ec = max(ec, abs(gaussian_constant(p) * entropy(p) - 1.0))
    return {"instances": instances, "max_rel_error_lemma1": e1,
            "max_rel_error_lemma2": e2, "max_constant_entropy_error": ec}


def kl_bound_suite(pairs: int = 10_000, seed: int = 0, max_n: int = 8) -> dict[str, Any]:
    """Count violations of ``D(q|p) >= (sum |p_i - q_i|)^2 / 4`` on random pairs."""
    rng = np.random.default_rng(seed)
    violations = 0
    min_slack = math.inf
    for _ in range(pairs):
        n = int(rng.integers(2, max_n + 1))
        p = rng.dirichlet(np.ones(n))
        q = rng.dirichlet(np.ones(n))
        p, q = p / p.sum(), q / q.sum()
        if np.any(p <= 0):
            continue
        d = kl_divergence(q, p)
        bound = 0.25 * float(np.abs(p - q).sum()) ** 2
        min_slack = min(min_slack, d - bound)
        violations += d < bound
    return {"pairs": pairs, "violations": violations, "min_slack": min_slack}
