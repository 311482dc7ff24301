import json
import subprocess
import sys

import pytest

from nctraces import __version__
from nctraces.cli import main, parse_number, parse_point_pair, parse_range


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def body(out):
    return [line for line in out.splitlines() if not line.startswith("#")]


def test_parsers():
    assert parse_range("0..3") == [0, 1, 2, 3]
    assert parse_range("1,4") == [1, 4]
    assert parse_point_pair("0,0..4,0") == ((0, 0), (4, 0))
    assert parse_number("3/4") == pytest.approx(0.75) and str(parse_number("3/4")) == "3/4"
    assert isinstance(parse_number("0.1"), float)
    assert str(parse_number("1")) == "1"


def test_count_golden(capsys):
    code, out, _ = run(capsys, "count", "--ballot", "0,0..4,0")
    assert code == 0
    assert out == (
        f"# nctraces {__version__}\n"
        '# config: {"ballot": [[0, 0], [4, 0]], "command": "count"}\n'
        "quantity,from,to,value\n"
        'ballot,"0,0","4,0",2\n'
    )


def test_count_tables(capsys):
    _, out, _ = run(capsys, "count", "--motzkin-numbers", "0..10")
    values = [int(line.split(",")[-1]) for line in body(out)[1:]]
    assert values == [1, 1, 2, 4, 9, 21, 51, 127, 323, 835, 2188]
    _, out, _ = run(capsys, "count", "--bracket", "s=2", "n=0..6", "w=∅")
    assert [int(line.split(",")[-1]) for line in body(out)[1:]] == [1, 1, 3, 12, 55, 273, 1428]
    _, out, _ = run(capsys, "count", "--bracket-derooted", "s=2", "n=3", "w=2")
    assert body(out)[1].endswith(",30")


def test_graph_outputs(capsys):
    code, out, _ = run(capsys, "graph", "--fc-tree", "s=2", "--levels", "5")
    assert code == 0
    assert [line.split(",")[1] for line in body(out)[1:]] == ["1", "1", "2", "3", "5"]
    _, out, _ = run(capsys, "graph", "--semi-pascal", "--levels", "5", "--dot")
    assert out.startswith(f"// nctraces {__version__}")
    assert out.count("subgraph level_") == 5
    _, out, _ = run(capsys, "graph", "--motzkin", "--levels", "3", "--json")
    data = json.loads(out)
    assert data["levels"] == [["0"], ["0", "1"], ["0", "1", "2"]]
    assert data["meta"]["config"]["graph"] == "motzkin"


def test_graph_isomorphism_check(capsys):
    code, out, _ = run(capsys, "graph", "--bsharp", "--verify-iso", "12")
    assert code == 0
    assert [line.split(",")[1] for line in body(out)[1:6]] == ["1", "2", "4", "7", "12"]


def test_chain_verification(capsys):
    code, out, _ = run(capsys, "chain", "ballot", "--lambda", "3/4", "--levels", "8", "--verify-centrality", "8", "0")
    assert code == 0
    assert '"mode": "exact"' in out
    assert body(out)[1].endswith(",PASS")


def test_chain_crossing(capsys):
    code, out, _ = run(capsys, "chain", "fib", "--end", "2", "--eta", "4/27", "--depth", "15")
    assert code == 0
    rows = body(out)[1:]
    assert rows and all(r.split(",")[2] == "4/27" for r in rows)


def test_chain_motzkin_off_curve(capsys):
    code, out, err = run(capsys, "chain", "motzkin", "--l1", "3/10", "--l2", "1/5", "--levels", "12")
    assert code == 1 and out == ""
    assert err.startswith("error: kind=invalid_config message=") and err.count("\n") == 1
    code, out, _ = run(
        capsys, "chain", "motzkin", "--l1", "3/10", "--l2", "1/5", "--levels", "12", "--allow-signed", "--table", "marginals"
    )
    assert code == 0
    sums = [r.split(",")[2] for r in body(out)[1:] if r.split(",")[1] == "sum"]
    assert sums == ["1"] * 13


def test_chain_tables(capsys):
    _, out, _ = run(capsys, "chain", "ballot", "--lambda", "3/4", "--levels", "2")
    assert body(out) == [
        "level,from,to,p_num,p_den,p_exact,p_float",
        "0,0,1,1,1,,1.0",
        "1,1,2,13,16,,0.8125",
        "1,1,0,3,16,,0.1875",
    ]
    _, out, _ = run(capsys, "chain", "ballot", "--lambda", "0.75", "--levels", "3", "--table", "weights")
    assert '"mode": "float"' in out


def test_simulate(capsys):
    code, out, _ = run(capsys, "simulate", "su2", "--l1", "0.5", "--l2", "0.5", "--n", "2")
    assert code == 0
    row = body(out)[1].split(",")
    assert float(row[1]) == pytest.approx(0.25, abs=1e-12) and row[3] == "0.25"
    _, out, _ = run(capsys, "simulate", "returns", "--eta", "0", "--n", "3", "--count", "100")
    assert body(out)[1] == "n=3,0.0,0.0,0.0"
    _, out, _ = run(capsys, "simulate", "lln", "--eta", "0.1", "--k", "50", "--count", "200", "--seed", "7")
    assert body(out)[1].endswith(",0.8857305958406948")


def test_simulate_is_deterministic_and_writes_files(capsys, tmp_path, monkeypatch):
    argv = ["simulate", "exit-times", "--eta", "0.1", "--k", "10", "--count", "20", "--seed", "3"]
    _, first, _ = run(capsys, *argv, "--out", str(tmp_path / "a"))
    monkeypatch.setenv("NCTRACES_OUTDIR", str(tmp_path / "b"))
    _, second, _ = run(capsys, *argv)
    assert first == second
    a = (tmp_path / "a" / "exit_records.csv").read_bytes()
    assert a == (tmp_path / "b" / "exit_records.csv").read_bytes()
    assert (tmp_path / "a" / "exit_times.csv").exists()


def test_exit_codes(capsys):
    assert run(capsys, "count")[0] == 1
    assert run(capsys, "count", "--ballot", "4,0..0,0")[0] == 1
    assert run(capsys, "chain", "ballot", "--lambda", "3/2")[0] == 1
    assert run(capsys, "bogus")[0] == 1
    code, _, err = run(capsys, "chain", "ballot", "--lambda", "3/4", "--verify-centrality", "4", "abc")
    assert code == 1 and err.startswith("error: kind=invalid_config")


def test_verification_failure_exit_code(capsys, monkeypatch):
    import nctraces.cli as cli
    from nctraces.chains import constant_up_chain

    monkeypatch.setattr(cli, "ballot_chain", lambda lam: constant_up_chain(lam))
    code, _, err = run(capsys, "chain", "ballot", "--lambda", "3/10", "--verify-centrality", "5", "0")
    assert code == 2 and "kind=verification_failure" in err


def test_internal_error_exit_code(capsys, monkeypatch):
    import nctraces.cli as cli
    from nctraces.fusscat import InconsistencyError

    def broken(*args):
        raise InconsistencyError("closed form and convolution disagree")

    monkeypatch.setattr(cli, "power_coeff", broken)
    code, _, err = run(capsys, "count", "--power", "s=2", "l=2", "n=3")
    assert code == 3 and "kind=internal" in err


def test_module_entry_point():
    res = subprocess.run(
        [sys.executable, "-m", "nctraces", "count", "--ballot", "0,0..4,2"],
        capture_output=True, text=True, check=False,
    )
    assert res.returncode == 0
    assert res.stdout.splitlines()[-1].endswith(",3")
