import io
import subprocess
import sys

import pytest

from helpers import NATION_QUERY, golden
from treemed.cli import main


@pytest.fixture
def query_file(tmp_path):
    p = tmp_path / "nation.xq"
    p.write_text(NATION_QUERY)
    return str(p)


def test_canonical_needs_no_catalog(query_file, capsys):
    assert main(["query", "--emit-canonical", query_file]) == 0
    assert capsys.readouterr().out == golden("nation_canonical.txt")


def test_atomic_mode(query_file, dataset_dir, capsys):
    assert main(["query", "--config", dataset_dir, "--emit-atomic", query_file]) == 0
    out = capsys.readouterr().out
    assert out.endswith("t1\tA6\nt2\tA4,A6\nt3\tA1\n")
    assert out.startswith(golden("nation_atomic.txt"))


def test_plan_modes(query_file, dataset_dir, capsys):
    assert main(["query", "--config", dataset_dir, "--emit-plan", query_file]) == 0
    assert capsys.readouterr().out == golden("nation_m0_plan.txt")
    assert main(["query", "--config", dataset_dir, "--emit-plan", "--unoptimized", query_file]) == 0
    assert "Restrict" in capsys.readouterr().out


def test_run_from_stdin(dataset_dir, data, monkeypatch, capsys):
    from helpers import nation_documents

    monkeypatch.setattr(sys, "stdin", io.StringIO(NATION_QUERY))
    assert main(["query", "--config", dataset_dir, "--topology", "M1", "--run", "-"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert sorted(lines) == nation_documents(data, member_order=list)


def test_errors_exit_nonzero(tmp_path, dataset_dir, capsys):
    bad = tmp_path / "bad.xq"
    bad.write_text("for $x in")
    assert main(["query", "--emit-canonical", str(bad)]) == 1
    assert capsys.readouterr().err.startswith("error: QuerySyntaxError:")
    assert main(["query", "--emit-canonical", str(tmp_path / "missing.xq")]) == 1
    assert main(["query", "--run", str(bad)]) == 2
    with pytest.raises(SystemExit):
        main(["bench", "--experiment", "xjoin", "--sweep", "1,x", "--report", "r.tsv"])


def test_gen_and_bench(tmp_path, capsys):
    out = tmp_path / "d"
    assert main(["gen", "--scale", "0.1", "--seed", "3", "--out", str(out)]) == 0
    assert (out / "A3" / "ORDERS.tbl").exists()
    report, series = tmp_path / "r.tsv", tmp_path / "s.tsv"
    assert main(["bench", "--experiment", "xjoin", "--sweep", "1,10", "--reps", "1", "--config", str(out),
                 "--report", str(report), "--series", str(series)]) == 0
    printed = capsys.readouterr().out.splitlines()
    assert [p.split("\t")[0] for p in printed if "\t" in p] == ["M2", "M4"]
    assert report.read_text().startswith("experiment\ttopology\tn\tphase\tmedian_ms\tresults\n")
    assert series.read_text().startswith("n\tM2:total\tM4:total\n")


def test_console_script_module_entry(query_file):
    r = subprocess.run([sys.executable, "-m", "treemed.cli", "query", "--emit-canonical", query_file],
                       capture_output=True, text=True, check=True)
    assert r.stdout.startswith("let t1 ::=")
