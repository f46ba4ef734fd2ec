import csv
import io

import pytest

from rsbf import cli, hashing


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def _table(text):
    data = [ln for ln in text.splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(data))))


def _header(text):
    return dict(ln[2:].split("=", 1) for ln in text.splitlines() if ln.startswith("# "))


@pytest.mark.parametrize("memory, s", [(16384, 5461), (4194304, 1398101)])
def test_plan(capsys, memory, s):
    code, out, _ = run(capsys, "plan", "--memory-bits", str(memory), "--fpr", "0.1")
    assert code == 0
    assert "k             3" in out and f"s             {s}" in out
    assert "k_raw         5.020078" in out
    assert "low-fnr       k=1" in out and "low-fpr       k=5" in out


def test_plan_rejects_large_fpr(capsys):
    code, _, err = run(capsys, "plan", "--memory-bits", "100", "--fpr", "0.9")
    assert code == 2 and "1 - 1/e" in err


def test_bad_flag_is_validation_error(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["plan", "--memory-bits", "x", "--fpr", "0.1"])
    assert exc.value.code == 2


def test_gen(tmp_path, capsys):
    out = tmp_path / "t2.bin"
    assert run(capsys, "gen", "--length", "100000", "--distinct", "0.76", "--seed", "1", "--out", str(out))[0] == 0
    assert out.stat().st_size == 800_000
    meta = dict(ln.split("=", 1) for ln in (tmp_path / "t2.bin.meta").read_text().splitlines())
    assert meta["universe"] == "173462" and meta["seed"] == "1" and meta["length"] == "100000"
    assert float(meta["expected_distinct_fraction"]) >= 0.76
    again = tmp_path / "again.bin"
    run(capsys, "gen", "--length", "100000", "--distinct", "0.76", "--seed", "1", "--out", str(again))
    assert again.read_bytes() == out.read_bytes()


def test_gen_single_value(tmp_path, capsys):
    out = tmp_path / "u1.bin"
    run(capsys, "gen", "--length", "10", "--universe", "1", "--out", str(out))
    raw = out.read_bytes()
    assert len(raw) == 80 and len({raw[i : i + 8] for i in range(0, 80, 8)}) == 1


def test_gen_needs_one_source(capsys, tmp_path):
    assert run(capsys, "gen", "--length", "10", "--out", str(tmp_path / "x"))[0] == 2


def test_run_report(tmp_path, capsys):
    report = tmp_path / "r.csv"
    code, out, _ = run(
        capsys, "run", "--algo", "rsbf", "--memory-bits", "16384", "--fpr", "0.1",
        "--length", "5500", "--distinct", "0.76", "--seed", "1", "--report", str(report),
    )
    assert code == 0 and "summary" in out
    text = report.read_text()
    head = _header(text)
    assert head["hash_family"] == hashing.HASH_FAMILY
    assert head["num_filters"] == "3" and head["filter_bits"] == "5461"
    assert head["seed"] == "1" and head["p_star"] == "0.03"
    rows = _table(text)
    assert list(rows[0]) == list(cli.harness.MetricsWindow.FIELDS)
    assert len(rows) == 6 + 1
    assert rows[-1]["summary"] == "1" and rows[-1]["end_index"] == "5500"


def test_run_from_file_matches_generated(tmp_path, capsys):
    data = tmp_path / "d.bin"
    run(capsys, "gen", "--length", "3000", "--universe", "1000", "--seed", "4", "--out", str(data))
    _, from_file, _ = run(capsys, "run", "--memory-bits", "4096", "--input", str(data), "--seed", "4")
    _, generated, _ = run(capsys, "run", "--memory-bits", "4096", "--length", "3000", "--universe", "1000", "--seed", "4")
    assert _table(from_file) == _table(generated)


def test_run_bloom_all_distinct(capsys):
    _, out, _ = run(capsys, "run", "--algo", "bloom", "--memory-bits", "1000000", "--length", "20000", "--distinct", "1")
    assert float(_table(out)[-1]["cum_fnr"]) == 0.0


def test_run_lines_input(tmp_path, capsys):
    p = tmp_path / "s.txt"
    p.write_bytes(b"a\nb\na\n")
    _, out, _ = run(capsys, "run", "--memory-bits", "64", "--input", str(p), "--input-mode", "lines", "--window", "2")
    rows = _table(out)
    assert [r["end_index"] for r in rows] == ["2", "3", "3"]
    assert rows[-1]["window_true_duplicate"] == "1" and rows[-1]["cum_fnr"] == "0.0"


def test_run_is_deterministic(capsys):
    argv = ["run", "--algo", "sbf", "--memory-bits", "8192", "--length", "20000", "--distinct", "0.5", "--seed", "3"]
    assert run(capsys, *argv)[1] == run(capsys, *argv)[1]


def test_run_io_errors(tmp_path, capsys):
    assert run(capsys, "run", "--memory-bits", "64", "--input", str(tmp_path / "missing"))[0] == 3
    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"\0" * 9)
    assert run(capsys, "run", "--memory-bits", "64", "--input", str(bad))[0] == 3


def test_run_validation_errors(capsys):
    assert run(capsys, "run", "--memory-bits", "64", "--length", "10")[0] == 2
    assert run(capsys, "run", "--memory-bits", "64", "--length", "10", "--universe", "3", "--window", "0")[0] == 2
    assert run(capsys, "run", "--memory-bits", "3", "--length", "10", "--universe", "3")[0] == 2


def test_seed_from_environment(monkeypatch, capsys):
    monkeypatch.setenv(cli.SEED_ENV, "17")
    _, out, _ = run(capsys, "run", "--memory-bits", "256", "--length", "100", "--universe", "50")
    assert _header(out)["seed"] == "17"
    monkeypatch.setenv(cli.SEED_ENV, "nope")
    assert run(capsys, "run", "--memory-bits", "256", "--length", "100", "--universe", "50")[0] == 2


def _predict(capsys, *argv):
    code, out, _ = run(capsys, "predict", *argv)
    assert code == 0
    return {ln.split()[0]: (float(ln.split()[1]), ln.split()[2]) for ln in out.splitlines()[2:]}


def test_predict(capsys):
    t = _predict(capsys, "--m", "1000000", "--s", "5461", "--k", "3", "--universe", "1000000")
    assert t["fpr_bound"][0] == pytest.approx(0.361852, rel=1e-5)
    assert t["fnr_bound"][0] == pytest.approx(2.98362e-06, rel=1e-5)
    assert _predict(capsys, "--m", "5461", "--s", "5461", "--k", "3", "--universe", "99")["fnr_bound"][0] == 0.0
    assert _predict(capsys, "--m", "100000", "--s", "10", "--k", "3", "--universe", "2")["fpr_bound"][0] == 0.0


def test_predict_flags_invalid_regime(capsys):
    t = _predict(capsys, "--m", "5461", "--s", "5461", "--k", "3", "--universe", "10000000")
    assert t["fpr_bound"] == (0.0, "no")


def test_compare(tmp_path, capsys):
    argv = [
        "compare", "--memory-bits", "16384", "65536", "4194304",
        "--length", "100000", "--distinct", "0.76", "--seeds", "1",
    ]
    code, out, _ = run(capsys, *argv)
    assert code == 0
    rows = _table(out)
    assert len(rows) == 9
    assert {(r["algorithm"], r["memory_bits"]) for r in rows} == {
        (a, m) for a in ("rsbf", "sbf", "bloom") for m in ("16384", "65536", "4194304")
    }
    assert run(capsys, *argv)[1] == out
