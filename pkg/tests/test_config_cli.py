import json
import shutil
import subprocess

import pytest

from photon_sight.cli import main
from photon_sight.config import ConfigError, echo_config, parse_config, resolved_dict

SMALL = {
    "source-stats": "[source-stats]\ncount = 200000\n",
    "hecht": "[eye]\nthreshold_n = 6\npre_retinal_transmission = 0.1818\n"
             "[hecht]\nintensities = 50, 100, 200, 400\ntrials_per_intensity = 400\n"
             "rating_criteria = 1, 2, 4, 6, 8, 12\n",
    "afc": "[afc]\ntrials = 3000\n",
    "superposition": "[superposition]\ntrials = 2000\nanomaly_epsilon = 0.05\n",
    "bell": "[bell]\ntrials = 20000\nobserver_end_to_end = 0.3\n",
    "power": "[power]\np0 = 0.5\np1 = 0.53\n",
}


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


def run_cli(args, capsys):
    code = main(args)
    out, err = capsys.readouterr()
    return code, out, err


# -- parsing -----------------------------------------------------------------

def test_minimal_afc_config_applies_defaults():
    cfg = parse_config("seed = 42\n", "afc")
    assert cfg.command == "afc" and cfg.seed == 42
    assert cfg.protocol == {"trials": 10_000, "control_fraction": 0.5, "temporal": False}
    assert cfg.eye.pre_retinal_transmission == 0.10
    # source calibrated to the published g2 and herald rate
    assert cfg.source.mean_pairs_per_pulse == pytest.approx(0.0014767, rel=1e-3)
    assert "trials = 10000" in echo_config(cfg)


def test_out_of_range_transmission():
    with pytest.raises(ConfigError) as exc:
        parse_config("seed = 1\n[eye]\npre_retinal_transmission = 1.5\n", "afc")
    assert exc.value.messages == ["line 3: eye.pre_retinal_transmission must be in [0,1], got 1.5"]


def test_duplicate_key_names_both_lines():
    with pytest.raises(ConfigError) as exc:
        parse_config("seed = 1\n[afc]\ntrials = 5\n# note\ntrials = 6\n", "afc")
    assert "lines 3 and 5" in exc.value.messages[0]


@pytest.mark.parametrize("text, fragment", [
    ("seed = 1\n[afc]\ntrails = 5\n", "line 3: unknown key afc.trails"),
    ("seed = 1\n[nope]\nx = 1\n", "line 2: unknown section [nope]"),
    ("seed = 1\n[afc\n", "line 2: malformed section header"),
    ("seed = 1\njust words\n", "line 2: expected 'key = value'"),
    ("seed = 1\n[afc]\ntrials = many\n", "line 3: afc.trials: expected an integer"),
    ("seed = -4\n", "line 1: run.seed must be an unsigned 64-bit integer"),
    ("", "run.seed is required for the afc command"),
    ("seed = 1\n[source]\nmean_pairs_per_pulse = 0.01\n", "line 3: source.mean_pairs_per_pulse is set by calibration"),
])
def test_config_errors(text, fragment):
    with pytest.raises(ConfigError) as exc:
        parse_config(text, "afc")
    assert any(fragment in m for m in exc.value.messages), exc.value.messages


def test_errors_are_collected_together():
    with pytest.raises(ConfigError) as exc:
        parse_config("seed = 1\n[afc]\ntrails = 5\ncontrol_fraction = 2\n", "afc")
    assert len(exc.value.messages) == 2


def test_command_conflict_and_missing_required():
    with pytest.raises(ConfigError, match="conflicts"):
        parse_config("command = hecht\nseed = 1\n", "afc")
    with pytest.raises(ConfigError, match="missing required key fit.input"):
        parse_config("", "fit")
    with pytest.raises(ConfigError, match="rating criteria"):
        parse_config("seed = 1\n[hecht]\nrating_criteria = 3, 2, 1\n", "hecht")


def test_power_needs_no_seed():
    cfg = parse_config("[power]\np1 = 0.6\n", "power")
    assert cfg.seed is None and cfg.protocol["p1"] == 0.6


@pytest.mark.parametrize("command", sorted(SMALL))
def test_echo_is_idempotent(command):
    cfg = parse_config("seed = 7\n" + SMALL[command], command)
    echo = echo_config(cfg)
    again = parse_config(echo, command)
    assert echo_config(again) == echo
    assert resolved_dict(again) == resolved_dict(cfg)
    assert again.source == cfg.source and again.eye == cfg.eye


# -- command line ------------------------------------------------------------

@pytest.mark.parametrize("command", sorted(SMALL))
def test_commands_write_artifacts(tmp_path, capsys, command):
    cfg = write(tmp_path, "run.ini", SMALL[command])
    out = tmp_path / "out"
    code, stdout, err = run_cli([command, "--config", cfg, "--output", str(out), "--seed", "11"], capsys)
    assert code == 0, err
    assert len(stdout.strip().splitlines()) == 1
    summary = json.loads((out / "summary.json").read_text())
    assert summary["command"] == command
    assert (out / "config_echo.ini").exists()
    expected = {"source-stats": "source_stats.csv", "power": None}.get(command, "trials.csv")
    if expected:
        assert (out / expected).read_text().startswith("# photon-sight ")


def test_power_prints_required_trials(tmp_path, capsys):
    cfg = write(tmp_path, "p.ini", SMALL["power"])
    code, stdout, _ = run_cli(["power", "--config", cfg, "--output", str(tmp_path / "o")], capsys)
    assert code == 0 and stdout.strip() == "2394"


def test_fit_roundtrips_hecht_output(tmp_path, capsys):
    hecht_out = tmp_path / "hecht"
    cfg = write(tmp_path, "h.ini", SMALL["hecht"])
    assert run_cli(["hecht", "--config", cfg, "--output", str(hecht_out), "--seed", "3"], capsys)[0] == 0
    for name in ("trials.csv", "points.csv"):
        fit_cfg = write(tmp_path, f"fit-{name}.ini", f"[fit]\ninput = hecht/{name}\n")
        code, stdout, err = run_cli(["fit", "--config", fit_cfg, "--output", str(tmp_path / name)], capsys)
        assert code == 0, err
        assert stdout.startswith("fit: n = ")
    a = json.loads((tmp_path / "trials.csv" / "summary.json").read_text())["result"]
    b = json.loads((tmp_path / "points.csv" / "summary.json").read_text())["result"]
    assert a == b


def test_config_error_exit_and_json(tmp_path, capsys):
    cfg = write(tmp_path, "bad.ini", "[eye]\npre_retinal_transmission = 1.5\n")
    code, stdout, err = run_cli(["afc", "--config", cfg, "--seed", "1"], capsys)
    assert code == 2 and stdout == ""
    payload = json.loads(err)
    assert payload["error"] == "config"
    assert payload["messages"] == ["line 2: eye.pre_retinal_transmission must be in [0,1], got 1.5"]


def test_seed_override_out_of_range(tmp_path, capsys):
    cfg = write(tmp_path, "a.ini", SMALL["afc"])
    code, _, err = run_cli(["afc", "--config", cfg, "--seed", str(2**64)], capsys)
    assert code == 2 and "unsigned 64-bit" in err


def test_unreachable_stop_condition(tmp_path, capsys):
    cfg = write(tmp_path, "s.ini", "[source]\ncalibrate = false\nmean_pairs_per_pulse = 0\n"
                                   "[source-stats]\nstop = heralds\ncount = 10\nmax_pulses = 1000\n")
    code, _, err = run_cli(["source-stats", "--config", cfg, "--seed", "1",
                            "--output", str(tmp_path / "o")], capsys)
    assert code == 1
    payload = json.loads(err)
    assert payload["error"] == "unreachable"
    assert json.loads(payload["messages"][1])["herald_probability"] == 0.0


def test_missing_config_file(tmp_path, capsys):
    code, _, err = run_cli(["afc", "--config", str(tmp_path / "none.ini")], capsys)
    assert code == 1 and json.loads(err)["error"] == "io"


def test_seed_changes_results(tmp_path, capsys):
    cfg = write(tmp_path, "a.ini", SMALL["afc"])
    for seed in ("1", "2"):
        run_cli(["afc", "--config", cfg, "--seed", seed, "--output", str(tmp_path / seed)], capsys)
    a = (tmp_path / "1" / "summary.json").read_bytes()
    b = (tmp_path / "2" / "summary.json").read_bytes()
    assert a != b


@pytest.mark.skipif(shutil.which("photon-sight") is None, reason="console script not installed")
def test_console_script(tmp_path):
    cfg = write(tmp_path, "p.ini", SMALL["power"])
    proc = subprocess.run(["photon-sight", "power", "--config", cfg, "--output", str(tmp_path / "o")],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0 and proc.stdout.strip() == "2394"
