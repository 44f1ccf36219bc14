import pytest

from unbiot import cli, model


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_analytic_prints_probability(capsys):
    code, out, _ = run(capsys, "analytic", "--config", "table2.cfg", "--protocol", "benchmark",
                       "--scheme", "random", "--assoc", "none", "--tau-db", "5")
    assert code == 0
    assert 0.0 <= float(out) <= 1.0


def test_usage_errors(capsys):
    assert run(capsys, "frobnicate")[0] == 64
    assert run(capsys)[0] == 64
    assert run(capsys, "analytic", "--tau-db", "high")[0] == 64
    assert run(capsys, "analytic", "--jobs", "0")[0] == 64


def test_config_errors(capsys):
    assert run(capsys, "analytic", "--override", "alpha=1.5")[0] == 2
    assert run(capsys, "analytic", "--override", "nosuchkey=1")[0] == 2
    assert run(capsys, "analytic", "--config", "/nonexistent.cfg")[0] == 2
    assert run(capsys, "analytic", "--protocol", "unslotted", "--scheme", "pn")[0] == 2


def test_dump_config_roundtrip(capsys, tmp_path):
    code, out, _ = run(capsys, "analytic", "--override", "N=5", "--override", "lambda_iot=10", "--dump-config")
    assert code == 0
    p = tmp_path / "c.cfg"
    p.write_text(out)
    assert model.load_config(p) == model.table2_config(N=5, lambda_iot=10 / model.KM2)
    assert run(capsys, "analytic", "--config", str(p), "--dump-config")[1] == out


def test_simulate_and_capacity(capsys):
    code, out, _ = run(capsys, "simulate", "--protocol", "slotted", "--assoc", "nearest", "--realizations", "300")
    assert code == 0 and "+/-" in out
    code, out, _ = run(capsys, "capacity", "--protocol", "unslotted", "--gamma", "0.8")
    assert code == 0 and float(out) > 0
    code, out, _ = run(capsys, "capacity", "--protocol", "slotted", "--gamma", "0.8", "--closed-form")
    assert code == 0 and float(out) > 0


def test_reproduce_fig7(capsys, tmp_path):
    code, out, _ = run(capsys, "reproduce", "fig7", "--out", str(tmp_path))
    assert code == 0
    assert (tmp_path / "fig7.csv").is_file() and (tmp_path / "fig7.svg").is_file()


def test_out_dir_from_env(capsys, tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUT_ENV, str(tmp_path))
    code, _, _ = run(capsys, "sweep", "--param", "M", "--grid", "1,2,4", "--protocol", "unslotted")
    assert code == 0
    lines = (tmp_path / "sweep.csv").read_text().splitlines()
    assert len(lines) == 4 and (tmp_path / "sweep.svg").is_file()


def test_validate_detects_corrupted_xi(capsys, monkeypatch):
    monkeypatch.setattr(model, "xi_constant", lambda delta: 1.01 * __import__("math").sin(
        __import__("math").pi * delta) / (delta * __import__("math").pi))
    code, out, _ = run(capsys, "validate", "--quick")
    assert code == 3
    assert "FAIL pgfl_quadrature" in out


@pytest.mark.slow
def test_validate_quick_passes(capsys):
    code, out, _ = run(capsys, "validate", "--quick")
    assert code == 0, out
    assert out.count("PASS") == 11
