import json
import math
import subprocess
import sys
from importlib import resources

import jsonschema
import pytest

from rankzipf.cli import main, parse_config, parse_model_text, parse_probability
from rankzipf.errors import ParseError

SCHEMA = json.loads(resources.files("rankzipf").joinpath("report.schema.json").read_text())
MONKEY_ARGS = ["--letters", ",".join(["1/27"] * 26), "--stop", "1/27"]
TRIPLE_ARGS = ["--letters", "0.5,0.3,0.2"]


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


# parsing --------------------------------------------------------------------------

def test_parse_probability_forms():
    assert parse_probability("0.25") == 0.25
    assert parse_probability("1/27") == 1 / 27
    assert parse_probability("2.5e-1") == 0.25
    for bad in ("0.5.3", "abc", "1/0", "-0.2", ""):
        with pytest.raises(ParseError):
            parse_probability(bad)


def test_model_file_format():
    text = "# three letters\na 0.5\nb 0.3  # trailing comment\n\nc 1/5\n"
    names, probs, stop = parse_model_text(text)
    assert names == ["a", "b", "c"] and probs == [0.5, 0.3, 0.2] and stop is None
    names, probs, stop = parse_model_text("x 0.45\ny 0.45\nstop 0.1\n")
    assert stop == 0.1 and names == ["x", "y"]


def test_model_file_errors_carry_line_numbers():
    with pytest.raises(ParseError) as info:
        parse_model_text("a 0.5\n# note\nb 0.5.3\n")
    assert info.value.line == 3
    with pytest.raises(ParseError) as info:
        parse_model_text("a 0.5 extra\n")
    assert info.value.line == 1
    with pytest.raises(ParseError):
        parse_model_text("a 0.5\na 0.5\n")


def test_monkey_model_file(tmp_path, capsys):
    body = "".join(f"{chr(97 + i)} 0.037037037037037037037\n" for i in range(26))
    path = tmp_path / "monkey.txt"
    path.write_text("# typewriter\n" + body + "stop 0.037037037037037037037\n", encoding="utf-8")
    code, out, _ = run(["--model", str(path), "--json", "gamma"], capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["result"]["gamma"] == pytest.approx(math.log(26) / math.log(27), abs=1e-12)
    assert doc["result"]["lattice"]["is_lattice"] is True


def test_model_file_parse_error_exit(tmp_path, capsys):
    path = tmp_path / "bad.txt"
    path.write_text("a 0.5\nb 0.5.3\n", encoding="utf-8")
    code, _, err = run(["--model", str(path), "gamma"], capsys)
    assert code == 1 and "line 2" in err


def test_config_threads_from_environment(monkeypatch):
    monkeypatch.setenv("RANKZIPF_THREADS", "3")
    assert parse_config(TRIPLE_ARGS + ["gamma"]).threads == 3
    assert parse_config(TRIPLE_ARGS + ["--threads", "2", "gamma"]).threads == 2
    monkeypatch.delenv("RANKZIPF_THREADS")
    assert parse_config(TRIPLE_ARGS + ["gamma"]).threads == 1


def test_options_may_follow_subcommand():
    cfg = parse_config(["rank", "5", "--letters", "0.6,0.4", "--json"])
    assert cfg.letters == "0.6,0.4" and cfg.fmt == "json" and cfg.params == {"r": 5}


# subcommands ----------------------------------------------------------------------

def test_gamma_stop_free_is_one(capsys):
    code, out, _ = run(TRIPLE_ARGS + ["gamma"], capsys)
    assert code == 0
    assert "gamma=1.0\n" in out
    assert "lattice.is_lattice=false" in out


def test_gamma_monkey(capsys):
    code, out, _ = run(MONKEY_ARGS + ["gamma"], capsys)
    fields = dict(line.split("=", 1) for line in out.splitlines())
    assert abs(float(fields["gamma"]) - math.log(26) / math.log(27)) < 1e-12
    assert fields["lattice.is_lattice"] == "true"


def test_qtilde_zero_is_one(capsys):
    for args in (TRIPLE_ARGS, MONKEY_ARGS, ["--letters", "0.6,0.4"]):
        code, out, _ = run(args + ["qtilde", "0"], capsys)
        assert code == 0 and "count=1\n" in out


def test_rank_word_prob(capsys):
    _, out, _ = run(MONKEY_ARGS + ["word", "28"], capsys)
    assert "word=aa" in out
    _, out, _ = run(["--letters", "0.6,0.4", "prob", "0.36"], capsys)
    assert "rank=4" in out
    _, out, _ = run(["--letters", "0.6,0.4", "rank", "4", "--format", "csv"], capsys)
    assert out.startswith("key,value\r\n") and "probability,0.36" in out


def test_converge_q_csv(capsys):
    code, out, _ = run(TRIPLE_ARGS + ["converge-q", "--zmax", "30", "--step", "1"], capsys)
    assert code == 0
    lines = out.strip().split("\r\n")
    assert lines[0] == "abscissa,empirical,predicted,ratio" and len(lines) == 31
    assert abs(float(lines[-1].split(",")[3]) - 1) < 0.05


def test_svg_output(tmp_path, capsys):
    path = tmp_path / "plot.svg"
    code, _, _ = run(TRIPLE_ARGS + ["converge-q", "--zmax", "20", "--format", "svg", "-o", str(path)], capsys)
    text = path.read_text()
    assert code == 0 and text.startswith("<?xml") and "<polyline" in text and text.rstrip().endswith("</svg>")
    code, _, err = run(TRIPLE_ARGS + ["gamma", "--format", "svg"], capsys)
    assert code == 1 and "svg" in err


def test_oscillate_requires_lattice(capsys):
    code, _, err = run(TRIPLE_ARGS + ["oscillate"], capsys)
    assert code == 1 and "commensurate" in err


def test_validation_failure_exit_code(capsys):
    code, _, err = run(["--letters", "0.5,0.3", "gamma"], capsys)
    assert code == 1 and "sum" in err
    code, _, err = run(["--letters", "0.5,0.5.3", "gamma"], capsys)
    assert code == 1 and "0.5.3" in err


def test_usage_error_exit_code(capsys):
    with pytest.raises(SystemExit) as info:
        main(["gamma"])
    assert info.value.code == 1
    capsys.readouterr()


def test_budget_exit_code(capsys):
    code, _, err = run(TRIPLE_ARGS + ["converge-q", "--zmax", "2000"], capsys)
    assert code == 2 and "budget" in err


# JSON schema ---------------------------------------------------------------------

JSON_CASES = [
    MONKEY_ARGS + ["gamma"],
    TRIPLE_ARGS + ["gamma"],
    MONKEY_ARGS + ["rank", "20000"],
    TRIPLE_ARGS + ["prob", "0.001"],
    MONKEY_ARGS + ["word", "28"],
    TRIPLE_ARGS + ["qtilde", "60"],
    TRIPLE_ARGS + ["verify", "--samples", "20", "--instances", "50", "--pairs", "200"],
    TRIPLE_ARGS + ["converge-q", "--zmax", "30"],
    ["--letters", "0.55,0.35", "--stop", "0.1", "converge-rank", "--rmax", "100000", "--samples", "30"],
    ["--letters", "0.5,0.25,0.25", "oscillate", "--periods", "60"],
    ["--letters", "0.6,0.4", "oracle", "--max-len", "10"],
]


@pytest.mark.parametrize("argv", JSON_CASES, ids=lambda a: a[-1] if len(a) < 5 else " ".join(a[-4:]))
def test_json_validates_and_round_trips(argv, capsys):
    code, out, _ = run(argv + ["--json"], capsys)
    assert code == 0
    doc = json.loads(out)
    jsonschema.validate(doc, SCHEMA)
    assert json.dumps(doc, indent=2, sort_keys=True) + "\n" == out
    code, again, _ = run(argv + ["--json"], capsys)
    assert again == out


def test_big_integers_are_strings(capsys):
    _, out, _ = run(TRIPLE_ARGS + ["qtilde", "60", "--json"], capsys)
    assert json.loads(out)["result"]["count"] == "111648576326155460384572756"


def test_schema_rejects_tampered_report(capsys):
    _, out, _ = run(TRIPLE_ARGS + ["rank", "10", "--json"], capsys)
    doc = json.loads(out)
    doc["result"]["rank"] = 10
    with pytest.raises(jsonschema.ValidationError):
        jsonschema.validate(doc, SCHEMA)


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "rankzipf", "--letters", "0.6,0.4", "word", "4"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0 and proc.stdout == "rank=4\nword=aa\n"
