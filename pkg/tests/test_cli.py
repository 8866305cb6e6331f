import csv
import io
import subprocess
import sys
from pathlib import Path

import pytest

from weighted_hardy.cli import COLUMNS, ConfigError, main, parse_config, read_corpus


def write(tmp_path: Path, text: str) -> str:
    p = tmp_path / "cfg.toml"
    p.write_text(text)
    return str(p)


def rows(path: Path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_classify_prints_summary(tmp_path, capsys):
    cfg = write(tmp_path, '[weight]\npreset = "exp_neg_inv"\n')
    assert main(["classify", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    assert capsys.readouterr().out.strip() == "P, non-admissible, s = -1"
    manifest = (tmp_path / "o" / "manifest.txt").read_text()
    assert "exit_code = 0" in manifest and "seed = 0" in manifest
    assert 'preset = "exp_neg_inv"' in manifest


def test_all_violations_reported_at_once(tmp_path, capsys):
    cfg = write(tmp_path, '[params]\np = 1.0\neta = -1\nmu = 0\nR = 2\n[run]\ncase = "power_critical"\n')
    assert main(["special", "--config", cfg, "--out", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err
    for text in ("1<p<\\infty", "\\eta>0", "\\mu>0", "R>e"):
        assert text in err


def test_unknown_keys_and_sections(tmp_path, capsys):
    cfg = write(tmp_path, '[extra]\nx = 1\n[run]\nbogus = 2\n')
    assert main(["verify", "--config", cfg]) == 2
    err = capsys.readouterr().err
    assert "unknown section [extra]" in err and "unknown key run.bogus" in err


def test_bad_command_is_usage_error():
    assert main(["frobnicate"]) == 2


def test_unwritable_output_directory(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["classify", "--out", str(blocker / "sub")]) == 2
    assert "cannot write" in capsys.readouterr().err


def test_empty_corpus_is_usage_error(tmp_path, capsys):
    corpus = tmp_path / "empty.csv"
    corpus.write_text("t,u\n")
    cfg = write(tmp_path, f'[run]\ncorpus = "{corpus}"\n')
    assert main(["verify", "--config", cfg, "--out", str(tmp_path / "o")]) == 2
    assert "empty" in capsys.readouterr().err


def test_verify_with_corpus_file(tmp_path):
    corpus = tmp_path / "c.csv"
    corpus.write_text("t,u\n0.1,0\n0.5,1\n1.0,0.3\n\n0.2,0\n0.4,0.5\n1.0,1.0\n")
    cfg = write(tmp_path, f'[weight]\npreset = "t2"\n[params]\np = 3.0\n[run]\ncorpus = "{corpus}"\n')
    out = tmp_path / "o"
    assert main(["verify", "--config", cfg, "--out", str(out)]) == 0
    table = rows(out / "verify.csv")
    assert table[0] == COLUMNS["verify.csv"]
    assert {r[0] for r in table[1:]} == {"0", "1"}
    assert {r[1] for r in table[1:]} == {"sharp_hardy", "hardy_remainder"}
    assert all(r[6] == "true" for r in table[1:])
    summary = (out / "summary.txt").read_text()
    assert "sharp_hardy: 2 rows, 0 failed" in summary


def test_read_corpus_rejects_bad_rows():
    with pytest.raises(ConfigError):
        read_corpus("0.1,0,5\n", 1.0)
    with pytest.raises(ConfigError):
        read_corpus("0.1,0\n2.0,1\n", 1.0)
    funcs = read_corpus("# comment\n0.1,0\n1,1\n", 1.0)
    assert len(funcs) == 1 and funcs[0].support_floor == 0.1


def test_seeded_runs_are_identical(tmp_path):
    cfg = write(tmp_path, '[weight]\npreset = "exp_pos_inv_sqrt"\n[run]\nn_functions = 4\n')
    for d in ("a", "b"):
        assert main(["verify", "--config", cfg, "--out", str(tmp_path / d), "--seed", "9"]) == 0
    assert (tmp_path / "a" / "verify.csv").read_bytes() == (tmp_path / "b" / "verify.csv").read_bytes()
    assert "seed = 9" in (tmp_path / "a" / "manifest.txt").read_text()


def test_transforms_and_sharpness_outputs(tmp_path):
    cfg = write(tmp_path, '[weight]\nfamily = "power"\nalpha = 1.0\n[run]\nn_points = 20\neps = [0.1, 0.01, 0.0001]\n')
    out = tmp_path / "o"
    assert main(["transforms", "--config", cfg, "--out", str(out)]) == 0
    t = rows(out / "transforms.csv")
    assert t[0] == ["t", "f", "F", "G", "g", "mode"] and len(t) == 21
    assert main(["sharpness", "--config", cfg, "--out", str(out)]) == 0
    s = rows(out / "sharpness.csv")
    assert s[0][:5] == ["ε", "lhs", "rhs", "ratio", "convexity_gap"]
    assert s[-1][-1] == "analytic-only"


def test_identities_command(tmp_path):
    cfg = write(tmp_path, '[weight]\npreset = "exp_neg_inv_sqrt"\n[run]\nn_functions = 2\n')
    out = tmp_path / "o"
    assert main(["identities", "--config", cfg, "--out", str(out)]) == 0
    names = {r[1] for r in rows(out / "identities.csv")[1:]}
    assert {"profile_flux", "boundary_integral", "completed_square_full", "t_weighted_bound"} <= names


def test_minimize_command(tmp_path, capsys):
    cfg = write(tmp_path, '[run]\nnodes = 512\nt_floor = 1e-4\n')
    out = tmp_path / "o"
    assert main(["minimize", "--config", cfg, "--out", str(out)]) == 0
    value = float(capsys.readouterr().out.strip())
    assert 0.25 < value < 0.3
    hist = [float(r[1]) for r in rows(out / "history.csv")[1:]]
    assert hist[-1] == pytest.approx(value) and hist == sorted(hist, reverse=True)
    assert len(rows(out / "minimizer.csv")) == 513


def test_special_command(tmp_path):
    cfg = write(tmp_path, '[params]\np = 2.5\nalpha = 0.9\n[run]\ncase = "power_above"\nn_functions = 3\n')
    assert main(["special", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    table = rows(tmp_path / "o" / "special.csv")
    assert len(table) == 4 and all(r[1] == "power_above" for r in table[1:])


def test_parse_config_defaults():
    cfg = parse_config("", {"command": "classify"})
    assert cfg.p == 2.0 and cfg.params["eta"] == 1.0 and cfg.run["seed"] == 0


def test_console_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "weighted_hardy.cli", "classify", "--out", str(tmp_path)],
                         capture_output=True, text=True)
    assert res.returncode == 0
    assert res.stdout.strip() == "Q, admissible, s = +1"
