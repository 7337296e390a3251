import csv
import io
import json
import subprocess
import sys

import pytest

from lculab import __version__
from lculab.cli import LEDGER_COLUMNS, parse_vector, run
from lculab.errors import InputParseError


def invoke(capsys, *argv):
    code = run(list(argv))
    out = capsys.readouterr().out
    return code, out


def records(text):
    return [json.loads(line) for line in text.splitlines()]


@pytest.fixture
def vec_file(tmp_path):
    def write(text, name="v.txt"):
        p = tmp_path / name
        p.write_text(text, encoding="utf-8")
        return str(p)

    return write


class TestParseVector:
    def test_json(self, vec_file):
        assert parse_vector(vec_file("[3, -1, 2]", "v.json")).entries.tolist() == [3, -1, 2]

    def test_plain_text(self, vec_file):
        assert parse_vector(vec_file("1 2\n3")).entries.tolist() == [1, 2, 3]

    def test_nan_rejected(self, vec_file):
        with pytest.raises(InputParseError) as info:
            parse_vector(vec_file("1 2\n  NaN"))
        assert (info.value.line, info.value.position) == (2, 3)

    def test_json_nan_rejected(self, vec_file):
        with pytest.raises(InputParseError):
            parse_vector(vec_file("[1, NaN]"))

    def test_garbage_position(self, vec_file):
        with pytest.raises(InputParseError) as info:
            parse_vector(vec_file("1 x2"))
        assert (info.value.line, info.value.position) == (1, 3)

    def test_malformed_json(self, vec_file):
        with pytest.raises(InputParseError) as info:
            parse_vector(vec_file("[1, 2,\n"))
        assert info.value.line is not None

    def test_nested_json(self, vec_file):
        with pytest.raises(InputParseError):
            parse_vector(vec_file("[[1], 2]"))

    def test_empty_and_zero(self, vec_file):
        with pytest.raises(InputParseError):
            parse_vector(vec_file("   \n"))
        with pytest.raises(InputParseError):
            parse_vector(vec_file("0 0"))

    def test_missing(self, tmp_path):
        with pytest.raises(InputParseError):
            parse_vector(str(tmp_path / "nope"))


class TestExamples:
    def test_grover_standard(self, capsys):
        code, out = invoke(capsys, "grover", "--n", "1024", "--method", "standard", "--seed", "7")
        assert code == 0
        (rec,) = records(out)
        assert rec["metrics"]["queries"] == 25
        assert rec["metrics"]["success_probability"] >= 0.996
        assert rec["ledger"]["oracle_queries"] == 25

    def test_lcu_multi_v2(self, capsys):
        code, out = invoke(capsys, "lcu", "--method", "multi-v2", "--m", "2", "--coeffs", "1,1", "--orthonormal")
        assert code == 0
        assert records(out)[0]["metrics"]["success_prob"] == pytest.approx(0.5)

    def test_prep_thm2(self, capsys, vec_file):
        path = vec_file("[3, -1, 2]", "vec.json")
        code, out = invoke(capsys, "prep", "--file", path, "--method", "thm2", "--eps", "0.01")
        assert code == 0
        m = records(out)[0]["metrics"]
        assert m["fidelity"] >= 0.99 and m["bound_check"] == "pass"

    def test_record_fields(self, capsys):
        _, out = invoke(capsys, "grover", "--n", "64")
        rec = records(out)[0]
        assert set(rec) == {"command", "config", "ledger", "metrics", "version", "wall_time_s"}
        assert rec["version"] == __version__
        assert rec["config"]["seed"] == 0 and rec["config"]["n"] == 64
        assert set(rec["ledger"]) == set(LEDGER_COLUMNS)
        assert rec["wall_time_s"] is None

    def test_timing(self, capsys):
        _, out = invoke(capsys, "grover", "--n", "64", "--timing")
        assert records(out)[0]["wall_time_s"] >= 0

    @pytest.mark.parametrize(
        "argv",
        [
            ["lcu", "--method", "hadamard", "--amplify"],
            ["lcu", "--method", "rotation-pe", "--coeffs", "2,-1"],
            ["lcu", "--method", "recursive", "--m", "5", "--variant", "eig", "--shots", "50"],
            ["lcu", "--method", "multi-v1", "--m", "3", "--coeffs", "1,-2,0.5"],
            ["fracpow", "--method", "eig", "--t", "0.25"],
            ["fracpow", "--method", "pe", "--bits", "6"],
            ["fracpow", "--method", "iterate", "--eps", "0.05"],
            ["grover", "--n", "256", "--method", "pe"],
            ["grover", "--n", "64", "--method", "classical"],
            ["prep", "--n", "32", "--kappa", "100", "--method", "thm1"],
            ["prep", "--n", "32", "--method", "prop2", "--amplify"],
            ["bench", "prep", "--n", "64", "--kappas", "2,32"],
            ["bench", "table1", "--m", "2,4", "--profiles", "uniform,random", "--dim", "8"],
            ["bench", "grover", "--method", "standard", "--ns", "16,64,256,1024", "--seeds", "1"],
        ],
    )
    def test_commands_run(self, capsys, argv):
        code, out = invoke(capsys, *argv)
        assert code == 0, out
        assert all(r["command"] == argv[0] for r in records(out))

    def test_fracpow_roundtrip(self, capsys):
        _, out = invoke(capsys, "fracpow", "--method", "eig", "--t", "0.25")
        assert records(out)[0]["metrics"]["roundtrip_error"] < 1e-9


class TestErrors:
    @pytest.mark.parametrize(
        "argv,code",
        [
            (["grover", "--eps", "2"], 2),
            (["grover", "--n", "1"], 2),
            (["grover", "--method", "nope"], 2),
            (["lcu", "--method", "hadamard", "--m", "3"], 2),
            (["lcu", "--coeffs", "1,2,3"], 2),
            (["lcu", "--m", "2", "--coeffs", "1,-1", "--orthonormal", "--method", "rotation-eig", "--dim", "2"], 0),
            (["fracpow", "--t", "1.5"], 2),
            (["bench", "grover", "--ns", "16,64,100,256"], 2),
            (["bench", "table1", "--profiles", "ratio:x"], 2),
            (["nonsense"], 2),
            (["grover", "--seed", "-1"], 2),
            (["grover", "--n", "16", "--marked", "1,2", "--method", "eig"], 22),
        ],
    )
    def test_exit_codes(self, capsys, argv, code):
        got, out = invoke(capsys, *argv)
        assert got == code
        if code:
            err = records(out)[0]
            assert err["exit_code"] == code and err["error"] and err["version"] == __version__

    def test_parse_error_record(self, capsys, vec_file):
        code, out = invoke(capsys, "prep", "--file", vec_file("1\nNaN"))
        assert code == 3
        err = records(out)[0]
        assert err["error"] == "InputParseError" and err["line"] == 2 and err["position"] == 1

    def test_bad_thread_env(self, capsys, monkeypatch):
        monkeypatch.setenv("LCULAB_THREADS", "zero")
        code, _ = invoke(capsys, "bench", "prep", "--n", "16", "--kappas", "2")
        assert code == 2


class TestOutput:
    def test_csv_columns(self, capsys):
        code, out = invoke(capsys, "bench", "prep", "--n", "64", "--kappas", "2,32", "--format", "csv")
        assert code == 0
        rows = list(csv.reader(io.StringIO(out)))
        header = rows[0]
        assert header[:7] == ["command", "cell", "method", *LEDGER_COLUMNS]
        assert header[-2:] == ["wall_time_s", "version"]
        assert len(set(header)) == len(header)
        assert len(rows) == 1 + 2 * 4

    def test_csv_table1_no_duplicates(self, capsys):
        _, out = invoke(capsys, "bench", "table1", "--m", "2", "--profiles", "uniform", "--format", "csv")
        header = next(csv.reader(io.StringIO(out)))
        assert len(set(header)) == len(header) and "instance" in header

    def test_out_file(self, capsys, tmp_path):
        path = tmp_path / "o.jsonl"
        code, out = invoke(capsys, "grover", "--n", "64", "--out", str(path))
        assert code == 0 and out == ""
        assert records(path.read_text())[0]["command"] == "grover"

    def test_bench_sorted(self, capsys):
        _, out = invoke(capsys, "bench", "prep", "--n", "32", "--kappas", "1024,2")
        cells = [r["cell"] for r in records(out)]
        assert cells == sorted(cells)


class TestDeterminism:
    @pytest.mark.parametrize(
        "argv",
        [
            ["lcu", "--method", "recursive", "--m", "4", "--angles", "estimated", "--shots", "20", "--seed", "5"],
            ["grover", "--n", "256", "--method", "iterate", "--seed", "3"],
            ["prep", "--n", "50", "--kappa", "1000", "--method", "thm1", "--seed", "9"],
            ["bench", "table1", "--m", "2,3", "--profiles", "random", "--format", "csv", "--seed", "2"],
        ],
    )
    def test_repeat(self, capsys, argv):
        assert invoke(capsys, *argv) == invoke(capsys, *argv)

    def test_seed_changes_output(self, capsys):
        a = invoke(capsys, "prep", "--n", "50", "--seed", "1")[1]
        b = invoke(capsys, "prep", "--n", "50", "--seed", "2")[1]
        assert a != b

    def test_thread_count_invariant(self, capsys, monkeypatch):
        argv = ["bench", "prep", "--n", "64", "--profile", "random", "--kappas", "2,32,1024"]
        serial = invoke(capsys, *argv)
        monkeypatch.setenv("LCULAB_THREADS", "4")
        assert invoke(capsys, *argv) == serial

    def test_module_entry_point(self):
        cmd = [sys.executable, "-m", "lculab", "grover", "--n", "64", "--seed", "4"]
        first = subprocess.run(cmd, capture_output=True, check=True).stdout
        assert first == subprocess.run(cmd, capture_output=True, check=True).stdout
        assert json.loads(first)["metrics"]["success"] is True
