import numpy as np
import pytest

from coopldpc.cli import ConfigError, ExperimentConfig, load_config, main, parse_config_text, run


def data_rows(text):
    return [l for l in text.splitlines() if l and not l.startswith("#")]


def header(text):
    return dict(l[2:].split(" = ", 1) for l in text.splitlines() if l.startswith("# "))


def test_parse_config_text():
    cfg = parse_config_text("mode = outage  # comment\n\nseed = 4\nbeta = 1/2\nremove-4cycles = no\n")
    assert cfg == {"mode": "outage", "seed": 4, "beta": 0.5, "remove_4cycles": False}


@pytest.mark.parametrize("text, fragment", [
    ("mode = outage\nbogus = 1\n", ":2: unknown field 'bogus'"),
    ("mode = outage\nseed 3\n", ":2: expected 'key = value'"),
    ("seed = x\n", ":1: field 'seed'"),
    ("remove_4cycles = maybe\n", ":1: field 'remove_4cycles'"),
])
def test_parse_errors_name_line_and_field(text, fragment):
    with pytest.raises(ConfigError, match=fragment.replace("(", r"\(")):
        parse_config_text(text, "cfg")


def test_validation_errors_point_to_source(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("mode = outage\nseed = 1\nsnr_step = 0\n")
    with pytest.raises(ConfigError, match="grid is empty"):
        load_config(p)
    p.write_text("mode = outage\nseed = 1\n\nbeta = 1.5\n")
    with pytest.raises(ConfigError, match=r"run.cfg:4: field 'beta'"):
        load_config(p)
    with pytest.raises(ConfigError, match="--n-trials"):
        load_config(None, {"mode": "outage", "seed": 1, "n_trials": 0})
    with pytest.raises(ConfigError, match="seed"):
        load_config(None, {"mode": "outage"})
    with pytest.raises(ConfigError, match="mode"):
        load_config(None, {"mode": "plot", "seed": 1})


def test_snr_grid():
    cfg = ExperimentConfig(snr_start=0, snr_stop=40, snr_step=2)
    grid = cfg.snr_grid()
    assert grid.size == 21 and grid[-1] == 40.0
    assert ExperimentConfig(snr_start=1, snr_stop=1.9, snr_step=0.3).snr_grid().tolist() == [1.0, 1.3, 1.6, 1.9]


def test_outage_csv_is_deterministic(tmp_path, capsys):
    argv = ["--mode", "outage", "--seed", "5", "--snr-start", "0", "--snr-stop", "20", "--snr-step", "10",
            "--n-trials", "20000"]
    assert main(argv) == 0
    first = capsys.readouterr().out
    assert main(argv) == 0
    assert capsys.readouterr().out == first
    rows = data_rows(first)
    assert rows[0] == "snr_db,ebn0_db,p_out,ci_low,ci_high,n_trials"
    assert len(rows) == 1 + 3
    h = header(first)
    assert h["preset"] == "scenario1" and h["interuser_offset"] == "5.0" and h["rate"] == "0.3333333333333333"
    assert len(h["content_hash"]) == 64
    snr, ebn0 = map(float, rows[2].split(",")[:2])
    assert ebn0 - snr == pytest.approx(10 * np.log10(3))
    p = [float(r.split(",")[2]) for r in rows[1:]]
    assert p[0] > p[1] > p[2]


def test_config_file_and_flag_override(tmp_path):
    cfg_path = tmp_path / "o.cfg"
    out = tmp_path / "o.csv"
    cfg_path.write_text(f"mode = outage\nseed = 2\nsnr_start = 5\nsnr_stop = 5\nn_trials = 1000\noutput = {out}\n")
    assert main(["--config", str(cfg_path), "--preset", "scenario2"]) == 0
    h = header(out.read_text())
    assert h["preset"] == "scenario2" and h["interuser_offset"] == "12.0" and h["partner_offset"] == "4.0"
    assert float(h["rate"]) == pytest.approx(0.45)


def test_config_error_exit_code(tmp_path, capsys):
    assert main(["--mode", "outage"]) == 2
    assert "seed" in capsys.readouterr().err
    assert main(["--mode", "outage", "--seed", "one"]) == 2


def test_construction_failure_exit_code(capsys):
    assert main(["--mode", "build-code", "--seed", "1", "--preset", "regular3936", "--N", "6",
                 "--code-dir", "unused", "--remove-4cycles", "false"]) == 3
    assert "construction failed in block" in capsys.readouterr().err


def test_build_then_simulate(tmp_path, capsys):
    code_dir = tmp_path / "code"
    assert main(["--mode", "build-code", "--seed", "1", "--preset", "regular3936", "--N", "605",
                 "--code-dir", str(code_dir)]) == 0
    captured = capsys.readouterr()
    assert "N rounded from 605 to 600" in captured.err
    built = header(captured.out)
    assert (code_dir / "manifest.json").exists()
    text = run(load_config(None, {"mode": "simulate", "seed": 3, "code_dir": str(code_dir), "snr_start": 10.0,
                                  "snr_stop": 12.0, "snr_step": 2.0, "n_blocks": 16, "preset": "regular3936"}),
               log=lambda msg: None)
    rows = data_rows(text)
    assert len(rows) == 3
    assert rows[0].startswith("snr_db,ebn0_db,N,wer,ci_low,ci_high")
    assert header(text)["content_hash"] == built["content_hash"]


def test_de_threshold_mode():
    text = run(load_config(None, {"mode": "de-threshold", "seed": 0, "preset": "regular3936",
                                  "population": 5000, "tol_db": 0.1}), log=lambda msg: None)
    rows = data_rows(text)
    assert rows[0].startswith("subcode_rate,threshold_db")
    thr, cap = float(rows[1].split(",")[1]), float(rows[1].split(",")[3])
    assert thr > cap


def test_ensemble_file(tmp_path):
    spec = tmp_path / "ens.txt"
    spec.write_text("[lambda1]\n3 1\n[rho1]\n6 1\n[lambda2]\n3 1\n[rho2]\n6 1\n")
    text = run(load_config(None, {"mode": "outage", "seed": 1, "ensemble_file": str(spec), "snr_start": 10.0,
                                  "snr_stop": 10.0, "n_trials": 1000}), log=lambda msg: None)
    assert float(header(text)["rate"]) == pytest.approx(0.25)
