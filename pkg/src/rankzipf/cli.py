"""Command-line front end.

    rankzipf --letters 0.5,0.3,0.2 gamma
    rankzipf --model monkey.txt rank 1000000 --json
    rankzipf --letters 0.5,0.3,0.2 converge-q --zmax 150 --format svg -o plot.svg

Exit status: 0 on success, 1 when the input is rejected, 2 when a work
budget is exceeded.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import re
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Sequence

from . import experiments as ex
from .enumeration import probability_to_rank, q_tilde, rank_to_probability
from .errors import BudgetExceeded, ParseError, RankZipfError
from .model import Alphabet, build_alphabet, detect_lattice, predicted_limits, solve_gamma
from .svg import convergence_svg

_NUMBER = re.compile(r"^(?:[0-9]+(?:\.[0-9]*)?|\.[0-9]+)(?:[eE][+-]?[0-9]+)?$")
_RATIO = re.compile(r"^[0-9]+/[0-9]+$")

COMMANDS = ("gamma", "rank", "prob", "word", "qtilde", "verify",
            "converge-q", "converge-rank", "oscillate", "oracle")


@dataclass
class RunConfig:
    command: str
    letters: str | None = None
    model_path: Path | None = None
    stop: str | None = None
    params: dict[str, Any] = field(default_factory=dict)
    output: Path | None = None
    fmt: str = "text"
    threads: int = 1


def parse_probability(text: str, line: int | None = None) -> float:
    """Decimal literal or ``num/den``; fractions are rounded once, exactly."""
    t = text.strip()
    if _NUMBER.match(t):
        return float(Fraction(t))
    if _RATIO.match(t):
        num, den = t.split("/")
        if int(den) == 0:
            raise ParseError(f"zero denominator in {t!r}", line)
        return float(Fraction(int(num), int(den)))
    raise ParseError(f"malformed probability {t!r}", line)


def parse_model_text(text: str) -> tuple[list[str], list[float], float | None]:
    """``name probability`` per line, optional ``stop probability``, ``#`` comments."""
    names, probs, stop = [], [], None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ParseError(f"expected 'name probability', got {raw.strip()!r}", lineno)
        name, value = parts
        prob = parse_probability(value, lineno)
        if name == "stop":
            if stop is not None:
                raise ParseError("stop probability given twice", lineno)
            stop = prob
        else:
            if name in names:
                raise ParseError(f"duplicate letter {name!r}", lineno)
            names.append(name)
            probs.append(prob)
    return names, probs, stop


def load_alphabet(config: RunConfig) -> Alphabet:
    if config.model_path is not None:
        names, probs, stop = parse_model_text(config.model_path.read_text(encoding="utf-8"))
        if config.stop is not None:
            stop = parse_probability(config.stop)
        return build_alphabet(probs, stop, names)
    items = [s for s in config.letters.split(",") if s.strip()]
    probs = []
    for i, item in enumerate(items, start=1):
        try:
            probs.append(parse_probability(item))
        except ParseError as exc:
            raise ParseError(f"letter {i}: {exc}") from None
    stop = parse_probability(config.stop) if config.stop is not None else None
    return build_alphabet(probs, stop)


def _positive_int(text: str) -> int:
    value = int(float(text)) if re.match(r"^[0-9.]+[eE][0-9]+$", text) else int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def _positive_float(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return value


class _Parser(argparse.ArgumentParser):
    """Usage errors are input errors: exit 1, keeping 2 for budget overruns."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _common_options(suppress: bool) -> argparse.ArgumentParser:
    # Subcommands repeat the global options so they may follow the command;
    # their copies default to SUPPRESS so they never clobber earlier values.
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    common = _Parser(add_help=False)
    src = common.add_mutually_exclusive_group()
    src.add_argument("--letters", default=d(None),
                     help="comma-separated letter probabilities (decimals or num/den)")
    src.add_argument("--model", type=Path, default=d(None),
                     help="model file: 'name probability' per line, optional 'stop p'")
    common.add_argument("--stop", default=d(None), help="stop-symbol probability")
    common.add_argument("--format", dest="fmt", choices=("text", "csv", "json", "svg"), default=d(None))
    common.add_argument("--json", action="store_true", default=d(False), help="shorthand for --format json")
    common.add_argument("-o", "--output", type=Path, default=d(None),
                        help="write to this file instead of stdout")
    common.add_argument("--threads", type=_positive_int, default=d(None),
                        help="cap on worker threads (default: $RANKZIPF_THREADS or 1)")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_options(suppress=True)
    parser = _Parser(prog="rankzipf", description=__doc__.splitlines()[0],
                     parents=[_common_options(suppress=False)])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gamma", parents=[common], help="power exponent, limit constants, lattice test")
    p.add_argument("--max-denominator", type=_positive_int, default=10**6)
    p.add_argument("--tol", type=_positive_float, default=1e-9)

    p = sub.add_parser("rank", parents=[common], help="probability of the word of rank R")
    p.add_argument("r", type=_positive_int)
    p = sub.add_parser("prob", parents=[common], help="rank of the last word with probability >= Q")
    p.add_argument("q", type=_positive_float)
    p = sub.add_parser("word", parents=[common], help="representative word of rank R")
    p.add_argument("r", type=_positive_int)
    p = sub.add_parser("qtilde", parents=[common], help="number of words with -ln p <= Z")
    p.add_argument("z", type=float)

    p = sub.add_parser("verify", parents=[common], help="identity and inequality suites")
    p.add_argument("--samples", type=_positive_int, default=100)
    p.add_argument("--zmax", type=_positive_float, default=30.0)
    p.add_argument("--instances", type=_positive_int, default=1000)
    p.add_argument("--pairs", type=_positive_int, default=10_000)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("converge-q", parents=[common], help="Q~(z) H / e^z on a grid")
    p.add_argument("--zmax", type=_positive_float, default=60.0)
    p.add_argument("--step", type=_positive_float, default=0.5)

    p = sub.add_parser("converge-rank", parents=[common], help="p(r) r^(1/gamma) at geometric ranks")
    p.add_argument("--rmax", type=_positive_int, default=10**7)
    p.add_argument("--samples", type=_positive_int, default=100)
    p.add_argument("--form", choices=("power", "entropy"), default="power")

    p = sub.add_parser("oscillate", parents=[common], help="grid vs midpoint ratios, lattice case")
    p.add_argument("--periods", type=_positive_int, default=200)

    p = sub.add_parser("oracle", parents=[common], help="compare with a brute-force word list")
    p.add_argument("--max-len", type=_positive_int, default=10)
    p.add_argument("--max-weight", type=_positive_float, default=None)
    return parser


_GLOBAL_KEYS = {"letters", "model", "stop", "fmt", "json", "output", "threads", "command"}


def parse_config(argv: Sequence[str] | None = None) -> RunConfig:
    parser = build_parser()
    ns = parser.parse_args(argv)
    if ns.letters is None and ns.model is None:
        parser.error("one of --letters or --model is required")
    fmt = "json" if ns.json else (ns.fmt or "text")
    threads = ns.threads
    if threads is None:
        env = os.environ.get("RANKZIPF_THREADS")
        threads = int(env) if env and env.isdigit() and int(env) > 0 else 1
    params = {k: v for k, v in vars(ns).items() if k not in _GLOBAL_KEYS}
    return RunConfig(ns.command, ns.letters, ns.model, ns.stop, params, ns.output, fmt, threads)


# result builders -------------------------------------------------------------

def _class_dict(c) -> dict[str, Any]:
    return {"k": list(c.k), "weight": c.weight, "count": str(c.count),
            "first_rank": str(c.first_rank), "last_rank": str(c.last_rank)}


def _run(config: RunConfig, alphabet: Alphabet):
    """Returns ``(result dict, report or None)``."""
    cmd, prm = config.command, config.params
    if cmd == "gamma":
        g = solve_gamma(alphabet)
        lim = predicted_limits(alphabet, g)
        lat = detect_lattice(alphabet.weights, prm["max_denominator"], prm["tol"])
        return {
            "gamma": g.gamma, "residual": g.residual, "tilted": list(g.tilted),
            "entropy_tilted": lim.entropy_tilted, "q_limit": lim.q_limit, "rank_limit": lim.rank_limit,
            "lattice": {"is_lattice": lat.is_lattice, "v": lat.v,
                        "m": list(lat.m) if lat.m else None,
                        "witness": list(lat.witness) if lat.witness else None,
                        "depth": lat.depth, "max_denominator": lat.max_denominator, "tol": lat.tol},
        }, None
    if cmd == "rank":
        ans = rank_to_probability(alphabet, prm["r"], with_word=True)
        return {"rank": str(ans.rank), "probability": ans.probability,
                "log_probability": ans.log_probability, "class": _class_dict(ans.cls),
                "word": ans.word}, None
    if cmd == "word":
        ans = rank_to_probability(alphabet, prm["r"], with_word=True)
        return {"rank": str(ans.rank), "word": ans.word}, None
    if cmd == "prob":
        return {"probability": prm["q"], "rank": str(probability_to_rank(alphabet, prm["q"]))}, None
    if cmd == "qtilde":
        return {"z": prm["z"], "count": str(q_tilde(alphabet, prm["z"]))}, None
    if cmd == "verify":
        fe = ex.functional_equation_suite(alphabet, prm["samples"], prm["seed"], prm["zmax"])
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            det_f = pool.submit(ex.determinant_suite, prm["instances"], prm["seed"])
            kl_f = pool.submit(ex.kl_bound_suite, prm["pairs"], prm["seed"])
            det, kl = det_f.result(), kl_f.result()
        ok = (fe["failed"] == 0 and det["max_rel_error_lemma1"] < 1e-9
              and det["max_rel_error_lemma2"] < 1e-9 and det["max_constant_entropy_error"] < 1e-12
              and kl["violations"] == 0)
        return {"ok": ok, "functional_equation": fe, "determinants": det, "kl_bound": kl}, None
    if cmd == "converge-q":
        rep = ex.converge_qtilde(alphabet, prm["zmax"], prm["step"])
        return rep.to_json_dict(), rep
    if cmd == "converge-rank":
        rep = ex.converge_rank(alphabet, prm["rmax"], prm["samples"], prm["form"])
        return rep.to_json_dict(), rep
    if cmd == "oscillate":
        osc = ex.lattice_oscillation(alphabet, prm["periods"])
        return {"v": osc.v, "m": list(osc.m), "liminf": osc.liminf, "limsup": osc.limsup,
                "min_gap": osc.min_gap,
                "rows": [{"m": r.m, "on_grid": r.on_grid, "midpoint": r.midpoint, "gap": r.gap}
                         for r in osc.rows]}, None
    if cmd == "oracle":
        res = ex.brute_force_oracle(alphabet, prm["max_len"], prm["max_weight"])
        return {"compared_ranks": str(res.compared_ranks), "passed": res.passed,
                "mismatches": [repr(m) for m in res.mismatches], "cutoff": res.cutoff}, None
    raise ValueError(f"unknown command {cmd!r}")


def _json_params(params: dict[str, Any]) -> dict[str, Any]:
    out = {}
    for k, v in sorted(params.items()):
        if isinstance(v, int) and not isinstance(v, bool) and abs(v) > 2**53:
            v = str(v)
        out[k] = v
    return out


def render(config: RunConfig, alphabet: Alphabet, result: dict[str, Any], report) -> str:
    fmt = config.fmt
    if fmt == "json":
        doc = {
            "schema": ex.SCHEMA,
            "command": config.command,
            "model": {"letters": list(alphabet.letters), "stop": alphabet.stop,
                      "names": list(alphabet.letter_names)},
            "params": _json_params(config.params),
            "result": result,
        }
        return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"
    if fmt == "svg":
        if report is None:
            raise ValueError("--format svg is only available for converge-q and converge-rank")
        if report.kind == "rank":
            xs = [float(r.abscissa) for r in report.rows]
            return convergence_svg(xs, [r.ratio for r in report.rows],
                                   "p(r) against its power-law limit", "rank r", log_x=True)
        return convergence_svg([r.abscissa for r in report.rows], [r.ratio for r in report.rows],
                               "Q~(z) H / exp(z)", "z", log_x=False)
    if report is not None:
        return report.to_csv()
    if config.command == "oscillate":
        lines = ["m,on_grid,midpoint,gap"]
        lines += [f"{r['m']},{r['on_grid']!r},{r['midpoint']!r},{r['gap']!r}" for r in result["rows"]]
        return "\r\n".join(lines) + "\r\n"
    flat = _flatten(result)
    if fmt == "csv":
        return "key,value\r\n" + "".join(f"{k},{_csv_cell(v)}\r\n" for k, v in flat)
    return "".join(f"{k}={v}\n" for k, v in flat)


def _csv_cell(v) -> str:
    s = str(v)
    return '"' + s.replace('"', '""') + '"' if any(c in s for c in ',"\n') else s


def _flatten(d: dict[str, Any], prefix: str = "") -> list[tuple[str, Any]]:
    out = []
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.extend(_flatten(v, key + "."))
        elif isinstance(v, list):
            out.append((key, " ".join(str(x) for x in v)))
        elif isinstance(v, bool):
            out.append((key, "true" if v else "false"))
        elif v is None:
            out.append((key, ""))
        else:
            out.append((key, v))
    return out


def dispatch(config: RunConfig) -> int:
    try:
        alphabet = load_alphabet(config)
        result, report = _run(config, alphabet)
        text = render(config, alphabet, result, report)
    except BudgetExceeded as exc:
        print(f"rankzipf: budget exceeded: {exc}", file=sys.stderr)
        return 2
    except (RankZipfError, ValueError, OSError) as exc:
        print(f"rankzipf: {exc}", file=sys.stderr)
        return 1
    if config.output is not None:
        config.output.write_text(text, encoding="utf-8", newline="")
    else:
        sys.stdout.write(text)
    if config.command == "verify" and not result["ok"]:
        return 1
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    return dispatch(parse_config(argv))


if __name__ == "__main__":
    sys.exit(main())
