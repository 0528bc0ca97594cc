import json
import math

import pytest

from stochliouville.cli import (
    EXIT_ABORT,
    EXIT_CONFIG,
    EXIT_OK,
    RunConfig,
    main,
    parse_config,
    rate_table,
    run_preset,
    validate_config,
)
from stochliouville.exceptions import ConfigError
from stochliouville.physcore import SystemParams


def test_empty_config_gives_defaults(tmp_path):
    p = tmp_path / "empty.cfg"
    p.write_text("# nothing here\n\n")
    cfg, echo = validate_config(p)
    assert cfg == RunConfig()
    assert (echo["omega"], echo["alpha"], echo["temperature"], echo["dt"]) == (3.0e7, 1e-4, 1e-3, 0.658e-9)
    assert echo["n_trajectories"] == 1000
    assert echo["derived"]["A_fi"] == pytest.approx(6000.0)
    assert echo["derived"]["lambda"] == pytest.approx(26.2e3, rel=5e-3)
    assert echo["derived"]["sigma_eta"] == pytest.approx(1.262e7, rel=1e-3)


@pytest.mark.parametrize("text,line,key", [
    ("seed = 3\nalpha = -1\n", 2, "alpha"),
    ("dt = 0\n", 1, "dt"),
    ("\n\nbogus = 1\n", 3, "bogus"),
    ("alpha = 1e-4\nalpha = 2e-4\n", 2, "alpha"),
    ("n_trajectories = many\n", 1, "n_trajectories"),
    ("omega 3e7\n", 1, "key = value"),
])
def test_config_errors_are_line_precise(text, line, key):
    with pytest.raises(ConfigError) as exc:
        parse_config(text, "run.cfg")
    msg = str(exc.value)
    assert msg.startswith(f"run.cfg:{line}:")
    assert key in msg


def test_config_values_and_comments():
    cfg = parse_config("preset = fig2  # comment\nnoiseless = yes\nphi = 0.5\n")
    assert cfg.preset == "fig2" and cfg.noiseless and cfg.phi == 0.5
    assert cfg.resolved().record_stride == 10


def test_quick_mode_resolution():
    c = RunConfig(preset="fig1", quick=True).resolved()
    assert (c.n_trajectories, c.t_max) == (200, 0.1e-3)


def test_main_validate_exit_codes(tmp_path, capsys):
    good = tmp_path / "g.cfg"
    good.write_text("temperature = 2e-3\n")
    assert main(["validate", str(good)]) == EXIT_OK
    echo = json.loads(capsys.readouterr().out)
    assert echo["derived"]["lambda"] == pytest.approx(2 * 26.18e3, rel=1e-3)
    bad = tmp_path / "b.cfg"
    bad.write_text("alpha = -1\n")
    assert main(["validate", str(bad)]) == EXIT_CONFIG
    assert "b.cfg:1" in capsys.readouterr().err
    assert main(["validate", str(tmp_path / "missing.cfg")]) == EXIT_CONFIG


def test_rates_table_row():
    rows = rate_table(SystemParams())
    assert rows[0]["A_fi"] == pytest.approx(6000.0)
    assert rows[0]["lambda_noise"] == pytest.approx(26.2e3, rel=5e-3)
    assert rows[1]["kT_over_hbar_omega"] == pytest.approx(100.0)


def test_run_rates_preset(tmp_path, capsys):
    assert main(["run", "rates", "--out", str(tmp_path)]) == EXIT_OK
    assert "6000" in (tmp_path / "rates.txt").read_text()
    csv_lines = (tmp_path / "rates.csv").read_text().splitlines()
    assert csv_lines[0].startswith("case,omega,alpha,temperature")
    assert main(["rates", "--csv"]) == EXIT_OK
    assert capsys.readouterr().out.splitlines()[1].startswith("T,")


def test_fig3_noiseless_initial_slope(tmp_path, capsys):
    assert main(["run", "fig3", "--noiseless", "--phi", "1.5708", "--out", str(tmp_path)]) == EXIT_OK
    s = json.loads((tmp_path / "fig3_summary.json").read_text())
    assert s["noiseless"]["initial_slope"]["params"]["slope"] == pytest.approx(3e3, rel=0.05)
    assert (tmp_path / "fig3_noiseless.csv").exists()


def test_quick_fig1_within_widened_band(tmp_path, capsys):
    assert main(["run", "fig1", "--quick", "--out", str(tmp_path), "--workers", "2"]) == EXIT_OK
    s = json.loads((tmp_path / "fig1_summary.json").read_text())
    e = s["ensemble"]
    assert e["N_t"] == 200
    lam = SystemParams().lam
    assert e["decay_Px"]["params"]["rate"] == pytest.approx(2 * lam, rel=0.30)
    assert e["tau_D"] == pytest.approx(1 / (2 * lam), rel=0.40)
    assert (tmp_path / "fig1_ensemble.csv").exists()
    meta = json.loads((tmp_path / "fig1_ensemble.meta.json").read_text())
    assert "wall_time_s" in meta and meta["workers"] == 2


def test_cli_outputs_byte_identical_across_workers(tmp_path, capsys):
    outs = []
    for w in ("1", "4"):
        d = tmp_path / w
        args = ["run", "custom", "--phi", str(math.pi / 2), "--n-trajectories", "20",
                "--t-max", "3e-6", "--record-stride", "10", "--out", str(d), "--workers", w]
        assert main(args) == EXIT_OK
        outs.append(((d / "custom_ensemble.csv").read_bytes(),
                     (d / "custom_summary.json").read_bytes()))
    assert outs[0] == outs[1]


def test_numerical_abort_exit_code(tmp_path, capsys):
    args = ["run", "custom", "--temperature", "1e308", "--n-trajectories", "2",
            "--t-max", "1e-8", "--out", str(tmp_path)]
    assert main(args) == EXIT_ABORT
    assert "trajectory 0" in capsys.readouterr().err


def test_command_line_range_error(tmp_path, capsys):
    assert main(["run", "fig1", "--alpha", "-1", "--out", str(tmp_path)]) == EXIT_CONFIG


def test_run_preset_returns_summary(tmp_path):
    cfg = RunConfig(preset="custom", n_trajectories=4, t_max=2e-6, record_stride=10,
                    out=str(tmp_path))
    s = run_preset(cfg, workers=1)
    assert s["preset"] == "custom"
    assert "wall_time_s" not in json.dumps(s)
