from clshare.acceptance import corpus
from clshare.cli import EXIT_FAIL, EXIT_OK, EXIT_USAGE, main


def _scn(tmp_path, text, name="x.scn"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_run_ok_writes_sections(tmp_path, capsys):
    text = dict(corpus())["segds_honest.scn"]
    out = tmp_path / "out.txt"
    assert main(["run", _scn(tmp_path, text), "--out", str(out)]) == EXIT_OK
    body = out.read_text()
    for section in ("# transcript", "# report", "# assertions", "[values]"):
        assert section in body
    assert "PASS" in capsys.readouterr().out


def test_run_failing_expectation(tmp_path, capsys):
    path = _scn(tmp_path, "protocol segds\nmembers 2\nfile 64\nexpect aborted")
    assert main(["run", path]) == EXIT_FAIL
    assert "FAIL aborted" in capsys.readouterr().out


def test_usage_errors(tmp_path, capsys):
    assert main([]) == EXIT_USAGE
    assert main(["run", _scn(tmp_path, "members zero")]) == EXIT_USAGE
    assert main(["run", str(tmp_path / "missing.scn")]) == EXIT_USAGE
    assert main(["run", _scn(tmp_path, "file 10"), "--seed", "-1"]) == EXIT_USAGE
    assert main(["bench", "--protocol", "segds", "--n", "1"]) == EXIT_USAGE
    assert main(["bench", "--protocol", "sedds", "--trials", "0"]) == EXIT_USAGE
    assert main(["bench", "--protocol", "quic"]) == EXIT_USAGE
    assert "line 1" in capsys.readouterr().err


def test_help_exits_zero(capsys):
    assert main(["--help"]) == EXIT_OK


def test_bench_sedds(tmp_path):
    out = tmp_path / "b.txt"
    assert main(["bench", "--protocol", "sedds", "--trials", "2", "--out", str(out)]) == EXIT_OK
    text = out.read_text()
    assert "deterministic=yes" in text and "measured.T_m=20" in text
