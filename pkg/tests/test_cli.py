import subprocess
import sys

import pytest

from ballsquare.cli import (
    ConfigError, DEFAULTS, SUBCOMMANDS, emit_default_config, parse_config, read_config_file, run,
)


def test_every_subcommand_has_defaults():
    assert set(SUBCOMMANDS) == set(DEFAULTS)
    for sub in SUBCOMMANDS:
        text = emit_default_config(sub)
        assert text.startswith("# ballsquare")
        assert "seed=0" in text
        # round trip: the emitted defaults parse cleanly
        parse_config(sub, {})


def test_defaults_flag(capsys):
    assert run(["l2-identity", "--defaults"]) == 0
    out = capsys.readouterr().out
    assert "N=65536" in out and "L=32" in out


def test_unknown_subcommand_for_defaults():
    with pytest.raises(ConfigError):
        emit_default_config("nope")


def test_kernel_check_writes_csv(tmp_path, capsys):
    code = run(["kernel-check", "--dim", "1", "--out-dir", str(tmp_path)])
    assert code == 0
    out = capsys.readouterr().out
    assert "PASS limit_coeff[n=1]" in out
    for name in ("kernel-check.csv", "kernel-check_config.json", "kernel-check_plot.py"):
        assert (tmp_path / name).exists()


@pytest.mark.parametrize("argv", [
    ["kernel-check", "--bogus", "1"],
    ["norm-sweep", "--N", "1000"],
    ["norm-sweep", "--alpha", "2.5"],
    ["norm-sweep", "--alpha", "0.25", "--p", "1.01"],
    ["norm-sweep", "--lambda", "1.0"],
    ["l2-identity", "--t-min", "10", "--t-max", "1"],
    ["lp-decay", "--trials", "3"],
    ["lp-decay", "--j=-2..2"],
    ["sharpness", "--j", "4..40"],
    ["sharpness", "--p", "1.2,2.5"],
    ["second-order", "--dim", "1,2"],
    ["reverse-probe", "--alpha", "second"],
])
def test_configuration_errors_exit_2(argv, tmp_path):
    assert run(argv + ["--out-dir", str(tmp_path)]) == 2


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# small run\nN = 256\np_list = 1.5, 2\nalpha=0.5\n")
    raw = read_config_file(cfg)
    assert raw == {"N": "256", "p": "1.5, 2", "alpha": "0.5"}
    parsed = parse_config("norm-sweep", raw)
    assert parsed["N"] == 256 and parsed["p"] == [1.5, 2.0]


def test_config_file_unknown_key(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("colour=blue\n")
    assert run(["kernel-check", "--config", str(cfg)]) == 2
    assert "colour" in capsys.readouterr().err


def test_config_file_missing_or_malformed(tmp_path):
    with pytest.raises(ConfigError):
        read_config_file(tmp_path / "absent.cfg")
    bad = tmp_path / "bad.cfg"
    bad.write_text("just words\n")
    with pytest.raises(ConfigError):
        read_config_file(bad)


def test_j_ranges():
    assert parse_config("lp-decay", {"j": "-4..4"})["j"] == list(range(-4, 5))
    assert parse_config("lp-decay", {"j": "1,3,5"})["j"] == [1, 3, 5]
    assert parse_config("lp-decay", {"alpha": "second"})["alpha"] is None
    with pytest.raises(ConfigError):
        parse_config("lp-decay", {"j": "4..1"})


def test_csv_byte_identical_across_worker_counts(tmp_path):
    outs = []
    for w in ("1", "4"):
        d = tmp_path / f"w{w}"
        code = run(["norm-sweep", "--N", "256", "--p", "2", "--workers", w, "--out-dir", str(d)])
        assert code in (0, 1)
        outs.append((d / "norm-sweep.csv").read_bytes())
    assert outs[0] == outs[1]


def test_lp_decay_seed_echo_and_determinism(tmp_path):
    args = ["lp-decay", "--N", "512", "--L", "64", "--j=-3..3", "--trials", "10",
            "--t-min", "0.25", "--t-max", "4", "--nodes-per-octave", "4", "--seed", "11"]
    run(args + ["--out-dir", str(tmp_path / "a"), "--workers", "1"])
    run(args + ["--out-dir", str(tmp_path / "b"), "--workers", "2"])
    a = (tmp_path / "a" / "lp-decay.csv").read_bytes()
    assert a == (tmp_path / "b" / "lp-decay.csv").read_bytes()
    assert '"seed": 11' in (tmp_path / "a" / "lp-decay_config.json").read_text()


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "ballsquare", "kernel-check", "--dim", "2",
                           "--out-dir", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert "PASS" in proc.stdout
