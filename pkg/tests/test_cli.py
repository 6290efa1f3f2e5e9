import json

from poisson_city.cli import build_parser, run


def _run(tmp_path, *args):
    code = run([*args, "--out-dir", str(tmp_path)])
    return code, json.loads((tmp_path / "summary.json").read_text()) if (tmp_path / "summary.json").exists() else None


def test_help_lists_csv_columns(capsys):
    assert run(["lateral", "--help"]) == 0
    assert "replicate,u,v" in capsys.readouterr().out


def test_sample_lines(tmp_path):
    code, summary = _run(tmp_path, "sample-lines", "--n", "30", "--seed", "4")
    assert code in (0, 2)
    assert summary["subcommand"] == "sample-lines" and summary["seed"] == 4
    assert set(summary) >= {"params", "metrics", "timestamp"}
    assert (tmp_path / "sample-lines.csv").read_text().startswith("kind,r,theta")


def test_cell_svg(tmp_path):
    code, _ = _run(tmp_path, "cell", "--n", "100", "--emit-svg", "--y-scale", "auto")
    assert code == 0
    assert (tmp_path / "cell.svg").read_text().startswith("<svg")
    assert "ray_back" in (tmp_path / "cell.csv").read_text()


def test_seed_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("CITY_SEED", "99")
    _, summary = _run(tmp_path, "sample-lines")
    assert summary["seed"] == 99


def test_same_seed_same_bytes(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        run(["growth", "--n", "64", "--replicates", "100", "--seed", "3", "--out-dir", str(d)])
    assert (a / "growth.csv").read_bytes() == (b / "growth.csv").read_bytes()
    assert (a / "growth_path.csv").read_bytes() == (b / "growth_path.csv").read_bytes()


def test_threads_do_not_change_output(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    run(["excess", "--n", "50", "--replicates", "8", "--seed", "1", "--out-dir", str(a)])
    run(["excess", "--n", "50", "--replicates", "8", "--seed", "1", "--threads", "3", "--out-dir", str(b)])
    assert (a / "excess.csv").read_bytes() == (b / "excess.csv").read_bytes()


def test_manhattan_exact(tmp_path):
    code, summary = _run(tmp_path, "manhattan", "--n", "4", "--exact-rational", "--extreme-n", "300")
    assert code == 0
    assert any("exact rational" in m["name"] and m["pass"] for m in summary["metrics"])


def test_exit_codes(tmp_path):
    assert run(["growth", "--replicates", "0", "--out-dir", str(tmp_path)]) == 1
    assert run(["nonsense"]) == 1
    assert run(["manhattan", "--n", "9", "--exact-rational", "--out-dir", str(tmp_path)]) == 1
    # tiny samples miss the asymptotic slope tolerance
    assert run(["growth", "--n", "16", "32", "--replicates", "20", "--out-dir", str(tmp_path)]) == 2
    assert run(["growth", "--n", "16", "32", "--replicates", "20", "--no-check", "--out-dir", str(tmp_path)]) == 0


def test_checks(tmp_path, capsys):
    code, summary = _run(tmp_path, "checks")
    assert code == 0
    assert all(m["pass"] for m in summary["metrics"])
    assert "[pass]" in capsys.readouterr().out


def test_accept_subset(tmp_path, capsys):
    code, summary = _run(tmp_path, "accept", "--only", "14", "16")
    assert code == 0
    out = capsys.readouterr().out
    assert "criterion 14 [PASS]" in out and "criterion 16 [PASS]" in out


def test_parser_has_all_subcommands():
    p = build_parser()
    for sub in ("sample-lines", "cell", "excess", "lateral", "growth", "subordinator", "flow-center", "flow-limit", "manhattan", "checks", "accept"):
        assert p.parse_args([sub]).subcommand == sub
