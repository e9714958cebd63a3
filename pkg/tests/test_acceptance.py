"""Acceptance suite: one check per criterion, each printing a PASS/FAIL line.

Run directly for a plain report, or under pytest:

    python tests/test_acceptance.py
    python tests/test_acceptance.py --write-golden   # refresh calibration.json
    pytest tests/test_acceptance.py -v

Criteria 5 to 7 carry provisional tolerances; the statistics measured on the
calibration run are frozen in ``golden/calibration.json`` and later runs are
also checked against them.
"""

from __future__ import annotations

import functools
import json
import math
import sys
import time
import timeit
from pathlib import Path

import numpy as np
import pytest

import rankzipf.experiments as ex
from rankzipf.asymptotics import integral_f
from rankzipf.model import build_alphabet, solve_gamma

GOLDEN = Path(__file__).parent / "golden" / "calibration.json"


@functools.lru_cache(maxsize=None)
def criterion(n: int) -> tuple[bool, str, dict]:
    """Run criterion ``n`` once per process; returns (passed, detail, statistics)."""
    return CHECKS[n]()


def _monkey_gamma():
    a = build_alphabet([1 / 27] * 26, stop=1 / 27)
    g = solve_gamma(a).gamma
    err = abs(g - math.log(26) / math.log(27))
    best = min(timeit.repeat(lambda: solve_gamma(a), number=20, repeat=5)) / 20
    ok = err < 1e-12 and best < 1e-3
    return ok, f"|gamma - ln26/ln27| = {err:.2e}, {best * 1e6:.0f} us per solve", {
        "gamma": g, "abs_error": err,
    }


def _random_alphabets(count: int, seed: int):
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        n = int(rng.integers(2, 5))
        with_stop = i % 2 == 1
        mass = float(rng.uniform(0.05, 0.3)) if with_stop else 0.0
        x = 0.1 + rng.dirichlet(np.ones(n))
        x = [(1 - mass) * float(v) for v in x / x.sum()]
        x[-1] = (1 - mass) - math.fsum(x[:-1])
        out.append(build_alphabet(x, mass if with_stop else None))
    return out


def _oracle_first_ranks(alphabet, ranks: int):
    """Grow the pruning weight until the certified prefix holds ``ranks`` ranks."""
    a = alphabet.weights
    weight = 4.0 * max(a)
    while True:
        max_len = int(math.ceil((weight + max(a)) / min(a))) + 1
        res = ex.brute_force_oracle(alphabet, max_len, max_weight=weight, max_ranks=ranks)
        if res.compared_ranks >= ranks or not res.passed:
            return res
        weight *= 1.25


def _oracle_equivalence():
    t0 = time.perf_counter()
    results = [_oracle_first_ranks(a, 10_000) for a in _random_alphabets(10, seed=2024)]
    elapsed = time.perf_counter() - t0
    ok = all(r.passed and r.compared_ranks >= 10_000 for r in results) and elapsed < 60
    worst = min(r.compared_ranks for r in results)
    bad = sum(not r.passed for r in results)
    return ok, f"10 alphabets, >= {worst} ranks each, {bad} mismatching, {elapsed:.1f} s", {
        "compared_ranks": [r.compared_ranks for r in results],
    }


FE_ALPHABETS = [(0.5, 0.3, 0.2), (0.6, 0.4), (0.5, 0.5), (0.5, 0.25, 0.25), (0.4, 0.3, 0.2, 0.1)]


def _functional_equation():
    stats = [ex.functional_equation_suite(build_alphabet(p), samples=100, seed=i, z_max=30.0)
             for i, p in enumerate(FE_ALPHABETS)]
    checked = sum(s["checked"] for s in stats)
    failed = sum(s["failed"] for s in stats)
    skipped = sum(s["boundary_skipped"] for s in stats)
    ok = failed == 0 and all(s["checked"] == 100 for s in stats)
    return ok, f"{checked} checks, {failed} failures, {skipped} boundary samples skipped", {
        "checked": checked, "failed": failed,
    }


def _determinants():
    res = ex.determinant_suite(instances=1000, seed=0, max_n=8)
    ok = (res["max_rel_error_lemma1"] < 1e-9 and res["max_rel_error_lemma2"] < 1e-9
          and res["max_constant_entropy_error"] < 1e-12)
    detail = (f"max rel err {res['max_rel_error_lemma1']:.1e} / {res['max_rel_error_lemma2']:.1e}, "
              f"constant*entropy - 1 up to {res['max_constant_entropy_error']:.1e}")
    return ok, detail, res


def _quadrature():
    t0 = time.perf_counter()
    q = integral_f(build_alphabet([0.5, 0.5]), 20.0)
    elapsed = time.perf_counter() - t0
    target = 1 / math.log(2)
    rel = abs(q.scaled - target) / target
    ok = rel < 0.10 and elapsed < 300
    return ok, f"f(20)/e^20 = {q.scaled:.10f}, rel dev {rel:.1e} (tol 0.10), {elapsed:.2f} s", {
        "scaled": q.scaled, "rel_deviation": rel,
    }


def _qtilde_trend():
    t0 = time.perf_counter()
    rep = ex.converge_qtilde(build_alphabet([0.5, 0.3, 0.2]), 150.0, step=0.5)
    elapsed = time.perf_counter() - t0
    early, late = rep.window(20, 40), rep.window(110, 150)
    ok = (late.max_deviation < early.max_deviation and abs(late.median_ratio - 1) < 0.05
          and elapsed < 600)
    detail = (f"early max dev {early.max_deviation:.4f}, late max dev {late.max_deviation:.4f}, "
              f"late median {late.median_ratio:.5f}, {elapsed:.1f} s")
    return ok, detail, {
        "early_max_deviation": early.max_deviation, "late_max_deviation": late.max_deviation,
        "late_median": late.median_ratio,
    }


def _rank_trend():
    rep = ex.converge_rank(build_alphabet([0.55, 0.35], stop=0.1), 10**7, samples=100)
    early, late = rep.early, rep.late
    ok = late.max_deviation < early.max_deviation and abs(late.median_ratio - 1) < 0.10
    detail = (f"ln r windows: early max dev {early.max_deviation:.4f}, late max dev "
              f"{late.max_deviation:.4f}, late median {late.median_ratio:.4f}")
    return ok, detail, {
        "early_max_deviation": early.max_deviation, "late_max_deviation": late.max_deviation,
        "late_median": late.median_ratio,
    }


def _lattice_gap():
    rep = ex.lattice_oscillation(build_alphabet([0.5, 0.25, 0.25]), 200)
    gaps = [r.gap for r in rep.rows if 50 <= r.m <= 200]
    ok = len(gaps) == 151 and min(gaps) >= 1.3
    return ok, f"min on-grid/midpoint ratio over periods 50..200 = {min(gaps):.5f} (need >= 1.3)", {
        "min_gap": min(gaps),
    }


def _kl_bound():
    res = ex.kl_bound_suite(pairs=10_000, seed=0)
    ok = res["violations"] == 0
    return ok, f"{res['pairs']} pairs, {res['violations']} violations, min slack {res['min_slack']:.2e}", res


CHECKS = {
    1: _monkey_gamma,
    2: _oracle_equivalence,
    3: _functional_equation,
    4: _determinants,
    5: _quadrature,
    6: _qtilde_trend,
    7: _rank_trend,
    8: _lattice_gap,
    9: _kl_bound,
}

# statistics frozen at calibration; deterministic, so held to a tight tolerance
FROZEN = {5: ["scaled"], 6: ["early_max_deviation", "late_max_deviation", "late_median"],
          7: ["early_max_deviation", "late_max_deviation", "late_median"], 8: ["min_gap"]}


def _report(n: int) -> bool:
    ok, detail, _ = criterion(n)
    print(f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}")
    return ok


@pytest.mark.parametrize("n", sorted(CHECKS))
def test_criterion(n, capsys):
    with capsys.disabled():
        print()
        ok = _report(n)
    assert ok, criterion(n)[1]


@pytest.mark.parametrize("n", sorted(FROZEN))
def test_matches_calibration(n):
    golden = json.loads(GOLDEN.read_text())[str(n)]
    stats = criterion(n)[2]
    for key in FROZEN[n]:
        assert stats[key] == pytest.approx(golden[key], rel=1e-9), key


def write_golden() -> None:
    data = {str(n): {k: criterion(n)[2][k] for k in keys} for n, keys in FROZEN.items()}
    GOLDEN.parent.mkdir(exist_ok=True)
    GOLDEN.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


if __name__ == "__main__":
    results = [_report(n) for n in sorted(CHECKS)]
    if "--write-golden" in sys.argv:
        write_golden()
    print(f"{sum(results)}/{len(results)} criteria passed")
    sys.exit(0 if all(results) else 1)
