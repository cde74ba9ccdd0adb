import json
import os

import pytest

import main as cli
from config_manager import ConfigManager
from errors import ConfigError, SymbolError, WindowExhausted

SMALL = ["--preset", "c1-string", "--hbar-order", "1", "--xi-hi", "3", "--t-deg", "1"]


@pytest.fixture
def settings(tmp_path):
    path = tmp_path / "settings.ini"
    path.write_text(f"[logging]\nlog_directory = {tmp_path / 'logs'}\nlevel = WARNING\n"
                    f"[output]\nout_dir = {tmp_path / 'out'}\n")
    return str(path)


def run_cli(settings, *argv):
    return cli.main(list(argv) + ["--config", settings])


def test_solve_writes_the_triple(settings, tmp_path, capsys):
    assert run_cli(settings, "solve", *SMALL) == 0
    out = tmp_path / "out"
    record = json.loads((out / "triple.json").read_text())
    assert record["kind"] == "triple"
    assert record["truncation"]["n_hbar"] == 1
    assert "phi_1 = 1/2*l" in capsys.readouterr().out
    assert os.path.exists(tmp_path / "logs" / "todahbar.log")


def test_text_format(settings, tmp_path):
    target = tmp_path / "text"
    assert run_cli(settings, "solve", *SMALL, "--format", "text", "--out", str(target)) == 0
    assert (target / "triple.txt").read_text().startswith("# dressing triple 'c1-string'")
    assert not (target / "triple.json").exists()


def test_wkb_from_a_saved_triple(settings, tmp_path):
    assert run_cli(settings, "solve", *SMALL) == 0
    triple = tmp_path / "out" / "triple.json"
    later = tmp_path / "later"
    assert run_cli(settings, "wkb", "--input", str(triple), "--out", str(later)) == 0
    record = json.loads((later / "wkb.json").read_text())
    assert record["kind"] == "wkb"
    assert not (later / "triple.json").exists()


@pytest.mark.slow
def test_all_stages(settings, tmp_path, capsys):
    assert run_cli(settings, "all", *SMALL, "--oracle-pairs", "4", "--flows", "1") == 0
    out = tmp_path / "out"
    for name in ("triple.json", "wkb.json", "tau.json", "verify.txt", "cnm.txt"):
        assert (out / name).exists(), name
    printed = capsys.readouterr().out
    assert "F_0 = " in printed
    assert "FAIL" not in printed


@pytest.mark.parametrize("argv", [
    ["solve", "--xi-lo", "1"],
    ["solve", "--f", "E"],
    ["solve", "--f", "E +", "--g", "s", "--fbar", "E", "--gbar", "s"],
    ["solve", "--preset", "identity", "--f", "E", "--g", "s", "--fbar", "E", "--gbar", "s"],
    ["solve", "--seed-phi0", "0"],
    ["solve", "--window-pad", "x"],
    ["solve", "--preset", "c1-string", "--tbar-deg", "1"],
    ["wkb", "--input", "/nonexistent/triple.json"],
])
def test_configuration_errors_exit_with_2(settings, argv):
    assert run_cli(settings, *argv) == 2


def test_missing_settings_file_exits_with_2(tmp_path):
    assert cli.main(["solve", "--config", str(tmp_path / "absent.ini")]) == 2


def test_exhausted_window_exits_with_3(settings, monkeypatch):
    def exhausted(config):
        raise WindowExhausted("X_1 is only determined down to xi^-2", "increase --window-pad by at least 2")

    monkeypatch.setattr(cli, "run_pipeline", exhausted)
    assert run_cli(settings, "solve") == 3


def test_unexpected_errors_exit_with_1(settings, monkeypatch):
    def broken(config):
        raise RuntimeError("boom")

    monkeypatch.setattr(cli, "run_pipeline", broken)
    assert run_cli(settings, "solve") == 1


def test_flags_override_settings(settings, tmp_path):
    config = ConfigManager(settings, app_dir=str(tmp_path))
    args = cli.build_parser().parse_args(["verify", "--hbar-order", "3", "--window-pad", "2,5", "--flows", "1"])
    run = cli.build_run_config(args, config)
    assert run.truncation.n_hbar == 3
    assert run.truncation.xi_lo == -6
    assert run.window_pad == (2, 5)
    assert run.stages == ("solve", "verify")
    assert run.flows == 1
    assert run.out_dir == str(tmp_path / "out")


def test_input_skips_solving(settings, tmp_path):
    config = ConfigManager(settings, app_dir=str(tmp_path))
    args = cli.build_parser().parse_args(["tau", "--input", "triple.json"])
    assert cli.build_run_config(args, config).stages == ("wkb", "tau")


def test_window_pad_forms():
    assert cli._parse_pad("3") == (3, 3)
    assert cli._parse_pad("2, 5") == (2, 5)
    assert cli._parse_pad("") is None
    with pytest.raises(ConfigError):
        cli._parse_pad("-1")
    with pytest.raises(ConfigError):
        cli._parse_pad("1,2,3")


@pytest.mark.slow
def test_all_stages_with_both_time_families(settings, tmp_path, capsys):
    argv = ["all", "--preset", "identity", "--tbar-deg", "1", "--t-deg", "1", "--hbar-order", "1",
            "--xi-hi", "3", "--oracle-pairs", "2", "--flows", "1"]
    assert run_cli(settings, *argv) == 0
    printed = capsys.readouterr().out
    assert "F_0 = -3*t3*tb3 - 2*t2*tb2 - t1*tb1" in printed
    assert "FAIL" not in printed
    for name in ("triple.json", "wkb.json", "tau.json", "verify.txt"):
        assert (tmp_path / "out" / name).exists(), name


def test_artifacts_survive_a_failing_verify_stage(settings, tmp_path, monkeypatch):
    def broken(config, preset, data, triple, artifacts):
        raise SymbolError("Chart mismatch: AtZero against Band")

    monkeypatch.setattr(cli, "_verify", broken)
    assert run_cli(settings, "all", *SMALL) == 1
    for name in ("triple.json", "wkb.json", "tau.json"):
        assert (tmp_path / "out" / name).exists(), name
    assert not (tmp_path / "out" / "verify.txt").exists()


def test_verify_uses_the_preset_recorded_in_the_triple(settings, tmp_path):
    solve = ["--preset", "identity", "--hbar-order", "1", "--xi-hi", "3", "--t-deg", "1"]
    assert run_cli(settings, "solve", *solve) == 0
    triple = tmp_path / "out" / "triple.json"
    later = tmp_path / "later"
    assert run_cli(settings, "verify", "--input", str(triple), "--out", str(later),
                   "--flows", "1", "--oracle-pairs", "0") == 0
    assert "'identity'" in (later / "verify.txt").read_text()


def test_recorded_preset_resolution(settings, tmp_path):
    config = ConfigManager(settings, app_dir=str(tmp_path))
    run = cli.build_run_config(cli.build_parser().parse_args(["verify", "--input", "triple.json"]), config)
    assert run.preset == "c1-string"
    assert cli.resolve_preset(run, "identity").name == "identity"
    with pytest.raises(ConfigError, match="custom"):
        cli.resolve_preset(run, "custom")
    custom = cli.build_run_config(cli.build_parser().parse_args(
        ["verify", "--input", "triple.json", "--f", "E", "--g", "s", "--fbar", "E", "--gbar", "s"]), config)
    assert cli.resolve_preset(custom, "mine").name == "mine"
