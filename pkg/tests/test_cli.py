import json

import pytest

from detrank import decomp
from detrank.cli import main
from detrank.field import make_field


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, json.loads(out)


def test_identity(capsys):
    code, rec = run(capsys, "identity")
    assert code == 0 and rec["passed"] == 256
    assert (rec["permutations"], rec["degenerate"]) == (24, 232)
    code, rec = run(capsys, "identity", "--inject-fault")
    assert code == 1 and rec["status"] == "violation"


def test_verify(capsys):
    code, rec = run(capsys, "verify", "--expansion", "det4-quadratic", "--field", "int")
    assert code == 0 and rec["terms"] == 3
    code, rec = run(capsys, "verify", "--expansion", "laplace", "--n", "5", "--row", "2", "--field", "7")
    assert code == 0 and rec["terms"] == 5
    code, rec = run(capsys, "verify", "--expansion", "two-row", "--rows", "1", "3")
    assert code == 0 and rec["terms"] == 6


def test_verify_broken_file(tmp_path, capsys):
    text = decomp.dumps(decomp.det4_quadratic())
    broken = text.replace("1,2 : 1", "1,2 : -1", 1)
    path = tmp_path / "broken.dec"
    path.write_text(broken)
    code, rec = run(capsys, "verify", "--expansion", "file", "--path", str(path))
    assert code == 1 and len(rec["witness"]) == 4


def test_verify_rejections(tmp_path, capsys):
    assert run(capsys, "verify", "--expansion", "laplace")[0] == 2
    assert run(capsys, "verify", "--expansion", "laplace", "--n", "3", "--field", "4")[0] == 2
    (tmp_path / "junk.dec").write_text("not a decomposition\n")
    assert run(capsys, "verify", "--expansion", "file", "--path", str(tmp_path / "junk.dec"))[0] == 2
    with pytest.raises(SystemExit) as exc:
        main(["verify", "--expansion", "bogus"])
    assert exc.value.code == 2


def test_ark(tmp_path, capsys):
    code, rec = run(capsys, "ark", "--det", "3", "--field", "2", "--method", "closed-form")
    assert code == 0 and rec["bias"] == "11/32" and rec["ark_ceiling"] == 2
    code, rec = run(capsys, "ark", "--det", "2", "--field", "2", "--method", "exact")
    assert rec["bias"] == "1/4" and rec["ark"] == "2"
    path = tmp_path / "T.mlf"
    path.write_text("3 3 2\n1,2,3 : 1\n2,2,1 : 1\n")
    args = ["ark", "--form", str(path), "--field", "2", "--method", "mc", "--samples", "100000", "--seed", "7"]
    assert run(capsys, *args) == run(capsys, *args)


def test_ark_budget(monkeypatch, capsys):
    monkeypatch.setenv("DETRANK_BUDGET", "100")
    code, rec = run(capsys, "ark", "--det", "4", "--field", "2", "--method", "exact")
    assert code == 2 and "mc" in rec["error"]


def test_search(capsys):
    code, rec = run(capsys, "search", "--det", "2", "--field", "2", "--max-rank", "1")
    assert code == 0 and rec["verdict"] == "exhausted-none"
    code, rec = run(capsys, "search", "--det", "2", "--field", "2", "--max-rank", "2")
    assert rec["verdict"] == "found"
    code, rec = run(capsys, "search", "--det", "3", "--field", "2", "--max-rank", "2")
    assert rec["verdict"] == "exhausted-none"
    code, rec = run(capsys, "search", "--det", "3", "--field", "2", "--max-rank", "2", "--budget", "100")
    assert code == 2 and rec["estimate"] > 100


def test_restrict(tmp_path, capsys):
    F2 = make_field(2)
    (tmp_path / "l3.dec").write_text(decomp.dumps(decomp.laplace(3, 1, F2)))
    code, rec = run(capsys, "restrict", "--decomposition", str(tmp_path / "l3.dec"))
    assert code == 0 and (rec["branch"], rec["k"], rec["r"]) == ("certificate", 1, 3)
    (tmp_path / "q4.dec").write_text(decomp.dumps(decomp.det4_quadratic()))
    code, rec = run(capsys, "restrict", "--decomposition", str(tmp_path / "q4.dec"), "--field", "2")
    assert (rec["branch"], rec["k"], rec["r"]) == ("certificate", 2, 3)
    code, rec = run(capsys, "restrict", "--decomposition", str(tmp_path / "q4.dec"))
    assert code == 2


def test_restrict_synthetic(tmp_path, capsys):
    dec, target = tmp_path / "s.dec", tmp_path / "s.mlf"
    code, _ = run(capsys, "emit", "--expansion", "synthetic", "--field", "2", "--out", str(dec), "--target-out", str(target))
    assert code == 0
    code, rec = run(capsys, "restrict", "--decomposition", str(dec), "--target", str(target))
    assert code == 0 and rec["branch"] == "reduced" and rec["reduced_terms"] == 1
    code, rec = run(capsys, "restrict", "--decomposition", str(dec))
    assert code == 1


def test_experiment(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n": 4, "d": 3, "r": 1, "q": 2, "samples": 10, "seed": 3}))
    code, rec = run(capsys, "experiment", "--config", str(cfg), "--out", str(tmp_path / "a"))
    assert code == 0 and rec["target"] == "1/2"
    run(capsys, "experiment", "--config", str(cfg), "--out", str(tmp_path / "b"))
    for name in ("report.json", "samples.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    cfg.write_text(json.dumps({"n": 4, "d": 3, "r": 0, "q": 2, "samples": 3}))
    code, rec = run(capsys, "experiment", "--config", str(cfg))
    assert rec["mean_bias_exact"] == "1/1"


def test_experiment_bad_config(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n": 4, "d": 3, "r": 1, "q": 6}))
    code, rec = run(capsys, "experiment", "--config", str(cfg))
    assert code == 2 and "q" in rec["error"]
    cfg.write_text("{")
    assert run(capsys, "experiment", "--config", str(cfg))[0] == 2


def test_script_minors_separation(capsys):
    code, rec = run(capsys, "script", "--builtin", "transpose")
    assert code == 0 and rec["satisfied"]
    code, rec = run(capsys, "minors", "--rows", "1", "3")
    assert code == 0 and rec["rank"] == 6
    code, rec = run(capsys, "minors", "--replace")
    assert code == 0 and rec["rank"] == 5
    code, rec = run(capsys, "separation", "--d", "4")
    assert rec["certified_ratio"] == "3/2"


def test_help_lists_defaults(capsys):
    for cmd in ("verify", "ark", "search", "restrict", "experiment"):
        with pytest.raises(SystemExit):
            main([cmd, "--help"])
        out = capsys.readouterr().out
        assert "--" in out and ("default" in out or cmd == "restrict")
