import csv
import shlex

import pytest

from superexp.cli import EXIT_ERROR, EXIT_FAIL, EXIT_PASS, run
from superexp.output import csv_body

SMALL = ["--steps", "64", "--paths", "3000", "--pilot-paths", "500", "--chunk-size", "512"]


def invoke(tmp_path, argv, name="out.csv"):
    out = tmp_path / name
    code = run(argv + ["--out", str(out)])
    return code, (out.read_text() if out.exists() else None)


def rows(text):
    return list(csv.reader(line for line in text.splitlines() if not line.startswith("#")))


@pytest.mark.parametrize(
    "argv",
    [
        ["identity", "--process", "1", "--t", "1", "--G", "capped:10"],
        ["curve", "--process", "2", "--t", "0.25,0.5,1"],
        ["cdf", "--process", "1", "--t", "1", "--a", "0.5,1,2,4,8"],
        ["martingale", "--process", "cos(w1)", "--t", "1"],
        ["martingale", "--process", "1", "--t", "1", "--N", "2"],
        ["driftshift", "--process", "cos(w1)", "--t", "1"],
        ["driftshift", "--process", "cos(w1)", "--t", "1", "--variant", "z_x"],
        ["gk", "--t", "1", "--a", "1,2"],
        ["probe", "--t", "1", "--sizes", "100,1000"],
    ],
)
def test_subcommands_write_csv(tmp_path, argv):
    code, text = invoke(tmp_path, argv + SMALL)
    assert code in (EXIT_PASS, EXIT_FAIL)
    lines = text.splitlines()
    assert lines[0].startswith("# superexp ")
    assert any(line.startswith("# command: superexp " + argv[0]) for line in lines)
    table = rows(text)
    assert len(table) >= 2 and all(len(r) == len(table[0]) for r in table)


def test_passing_identity_exit_code(tmp_path):
    code, text = invoke(tmp_path, ["identity", "--process", "0", "--t", "1"] + SMALL)
    assert code == EXIT_PASS
    header, row = rows(text)
    rec = dict(zip(header, row))
    assert rec["lhs_mean"] == "1" and rec["pass"] == "true"


def test_failing_check_exit_code(tmp_path):
    # for a constant sigma = 2, exp(Y - y) is a strict supermartingale with
    # E[exp(Y(1) - 1)] = P{A(1) < 2} well below 1
    code, text = invoke(tmp_path, ["martingale", "--process", "2", "--t", "1"] + SMALL)
    assert code == EXIT_FAIL
    assert rows(text)[1][-1] == "false"


def test_reals_use_17_digits(tmp_path):
    _, text = invoke(tmp_path, ["paths", "--process", "1", "--trace", "exponent",
                                "--steps", "4", "--paths", "2"])
    header, *body = rows(text)
    assert header == ["path_index", "i", "t_i", "logZ", "A", "Y", "Y_euler"]
    assert len(body) == 2 * 5
    y = body[3][header.index("Y")]
    assert float(repr(float(y))) == float(y) and len(y.replace("-", "").replace(".", "")) >= 15


@pytest.mark.parametrize("trace, cols", [
    ("driver", ["path_index", "i", "t_i", "W_1", "W_2"]),
    ("driftshift", ["path_index", "i", "t_i", "Xp_1", "Xp_2", "B_1", "B_2", "M", "exploded"]),
])
def test_trace_headers(tmp_path, trace, cols):
    code, text = invoke(tmp_path, ["paths", "--process", "cos(w1), sin(w2)", "--d", "2",
                                   "--trace", trace, "--steps", "4", "--paths", "3"])
    assert code == EXIT_PASS
    assert rows(text)[0] == cols


def test_bodies_identical_across_workers(tmp_path):
    argv = ["driftshift", "--process", "cos(w1)", "--t", "1"] + SMALL
    texts = [invoke(tmp_path, argv + ["--workers", str(w)], f"w{w}.csv")[1] for w in (1, 2, 8)]
    assert texts[0] == texts[1] == texts[2]


def test_comment_line_reproduces_run(tmp_path):
    _, text = invoke(tmp_path, ["cdf", "--process", "1", "--t", "1", "--a", "1,2"] + SMALL)
    command = next(l for l in text.splitlines() if l.startswith("# command: "))[len("# command: "):]
    argv = shlex.split(command)
    assert argv[0] == "superexp"
    _, again = invoke(tmp_path, argv[1:], "again.csv")
    assert again == text
    assert csv_body(again) == csv_body(text)


@pytest.mark.parametrize(
    "argv",
    [
        ["identity", "--process", "cos(w1)", "--t", "1"],
        ["identity", "--process", "cos(", "--t", "1"],
        ["identity", "--process", "1", "--t", "2"],
        ["identity", "--process", "1", "--t", "1", "--G", "expr:u-5"],
        ["identity", "--process", "1", "--t", "1", "--bogus"],
        ["identity", "--t", "1"],
        ["curve", "--process", "0", "--t", "1"],
        ["martingale", "--process", "w2", "--t", "1"],
        ["nonsense"],
        [],
        ["martingale", "--process", "1", "--t", "1", "--paths", "-3"],
    ],
)
def test_errors_exit_one(tmp_path, argv, capsys):
    code = run(argv + (SMALL if argv and argv[0] != "nonsense" and "--paths" not in argv else []))
    assert code == EXIT_ERROR
    assert capsys.readouterr().err.strip()


def test_identity_usage_error_message(capsys):
    run(["identity", "--process", "cos(w1)", "--t", "1"] + SMALL)
    assert "requires a deterministic process" in capsys.readouterr().err


def test_parse_error_shows_caret(capsys):
    run(["martingale", "--process", "cos(", "--t", "1"] + SMALL)
    err = capsys.readouterr().err
    assert "cos(\n" in err and "\n      ^" in err


def test_help_exits_zero(capsys):
    assert run(["--help"]) == 0
    assert "identity" in capsys.readouterr().out
