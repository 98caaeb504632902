import json
from pathlib import Path

import pytest

from miscost import cli
from miscost.errors import DomainError


def run(args):
    return cli.main(args)


def test_parse_grid_forms():
    assert cli.parse_grid("500:5000:x2") == [500, 1000, 2000, 4000]
    assert cli.parse_grid("10:40:+10") == [10, 20, 30, 40]
    assert cli.parse_grid("50,100,200") == [50, 100, 200]
    with pytest.raises(DomainError):
        cli.parse_grid("50,40")
    with pytest.raises(DomainError):
        cli.parse_grid("10:40:*3")


def test_exact_mean_prints_known_value(capsys):
    assert run(["exact-mean", "--p", "1/2", "--n", "3"]) == 0
    out = capsys.readouterr().out
    assert "mu_3 = 19/8" in out


def test_zeta_command(capsys):
    assert run(["zeta", "--m", "2"]) == 0
    assert "zeta_2 = 4/3" in capsys.readouterr().out


def test_closed_forms_command(capsys):
    assert run(["closed-forms", "--p", "1/3", "--max-n", "25"]) == 0
    assert "ok" in capsys.readouterr().out


def test_jn_command():
    assert run(["jn", "--p", "2/3", "--max-n", "25"]) == 0


def test_nu_command(tmp_path):
    out = tmp_path / "nu"
    assert run(["nu", "--max-n", "20", "-o", str(out)]) == 0
    text = (out.with_suffix(".csv")).read_text()
    assert text.startswith("# miscost")
    assert "n,nu,n_factorial_nu" in text


def test_decimal_p_is_usage_error(capsys):
    assert run(["exact-mean", "--p", "0.5", "--n", "3"]) == 1
    assert "num/den" in capsys.readouterr().err


def test_missing_subcommand_is_usage_error():
    assert run([]) == 1
    assert run(["no-such-command"]) == 1


def test_moments_report(tmp_path):
    out = tmp_path / "mom"
    assert run([
        "moments", "--p", "1/2", "--max-n", "30", "--m-max", "3",
        "--mode", "exact", "-o", str(out), "--no-figures",
    ]) == 0
    lines = out.with_suffix(".csv").read_text().splitlines()
    header = [ln for ln in lines if not ln.startswith("#")][0]
    assert header == "n,mu,sigma2,M3"


def test_simulate_writes_reports_and_figure(tmp_path):
    out = tmp_path / "sim"
    assert run([
        "simulate", "--kind", "Y", "--p", "1/2", "--n-grid", "10,20",
        "--reps", "300", "--seed", "11", "-o", str(out),
    ]) == 0
    assert (tmp_path / "sim-samples.csv").exists()
    assert out.with_suffix(".json").exists()
    assert (tmp_path / "sim.png").exists()
    first = (tmp_path / "sim-samples.csv").read_text().splitlines()
    assert first[0] == "kind,n,p,replicate,cost,alpha,seed"


def test_simulate_deterministic_across_threads(tmp_path):
    outs = []
    for threads, name in ((1, "a"), (4, "b"), (8, "c")):
        out = tmp_path / name
        assert run([
            "simulate", "--kind", "Y", "--p", "1/2", "--n-grid", "15,25",
            "--reps", "200", "--seed", "9", "--threads", str(threads),
            "-o", str(out), "--no-figures",
        ]) == 0
        outs.append((tmp_path / f"{name}-samples.csv").read_bytes())
    assert outs[0] == outs[1] == outs[2]


def test_alt_expansion_command(capsys):
    assert run(["alt-expansion", "--p", "1/2", "--x", "300", "--terms", "2"]) == 0
    assert "rel error" in capsys.readouterr().out


def test_asymptotic_command(tmp_path):
    out = tmp_path / "asym"
    code = run([
        "asymptotic", "--p", "1/2", "--n-grid", "300,600", "-o", str(out),
        "--cache-dir", str(tmp_path / "cache"),
    ])
    assert code == 0
    assert out.with_suffix(".csv").exists()
    assert (tmp_path / "asym.png").exists()


def test_compare_cache_hit_is_byte_identical(tmp_path):
    cache = tmp_path / "cache"
    a = tmp_path / "r1"
    b = tmp_path / "r2"
    for out in (a, b):
        assert run([
            "compare", "--p", "1/2", "--n-grid", "60,120", "-o", str(out),
            "--cache-dir", str(cache), "--no-figures",
        ]) == 0
    # cold run vs cache hit: byte-identical report
    assert a.with_suffix(".csv").read_bytes() == b.with_suffix(".csv").read_bytes()


def test_normality_command_exit_codes(tmp_path):
    ok = run([
        "normality", "--p", "1/2", "--n-grid", "20,40,80", "--reps", "1500",
        "--seed", "42", "--threads", "2", "-o", str(tmp_path / "norm"),
    ])
    assert ok == 0
    bad = run([
        "normality", "--p", "1/2", "--n-grid", "20,40,80", "--reps", "1500",
        "--seed", "42", "--ks-threshold", "1e-9", "--no-figures",
    ])
    assert bad == 2


def test_z_limit_command(tmp_path):
    # the moment-band clause is marginal at reachable n (finite-size
    # bias ~ n^-1/2), so assert the exit code tracks the verdict rather
    # than pinning the verdict itself
    code = run([
        "z-limit", "--n-grid", "25,49", "--reps", "2500", "--seed", "42",
        "-o", str(tmp_path / "zl"),
    ])
    payload = json.loads((tmp_path / "zl.json").read_text())
    verdict = payload["report"]["verdict"]
    assert code == (0 if verdict else 2)
    assert payload["report"]["nonnormal_witness"] is True
    assert (tmp_path / "zl.png").exists()


def test_cache_info_and_clear(tmp_path):
    cache = tmp_path / "cache"
    assert run([
        "exact-mean", "--p", "1/2", "--n", "3", "--cache-dir", str(cache),
    ]) == 0
    assert run(["cache", "info", "--cache-dir", str(cache)]) == 0
    assert run(["cache", "clear", "--cache-dir", str(cache)]) == 0
    assert not list(Path(cache).glob("table-*.json")) if Path(cache).exists() else True
