import json
import math

import numpy as np
import pytest

from stochliouville.ensemble import (
    CSV_HEADER,
    EnsembleConfig,
    default_workers,
    entropy_track,
    run_ensemble,
)
from stochliouville.physcore import entropy_of_polarization

SHORT = dict(t_max=2e-6, record_stride=10)


def test_single_noiseless_upper_state():
    r = run_ensemble(EnsembleConfig(n_trajectories=1, noiseless=True, t_max=20e-6), workers=1)
    assert np.all(r.avg_p == [1.0, 0.0, 0.0])
    assert np.all(r.stderr_p == 0.0)


def test_entropy_and_invariants():
    r = run_ensemble(EnsembleConfig(n_trajectories=64, t_max=20e-6, record_stride=100), workers=2)
    assert r.entropy[0] == 0.0
    assert np.all(r.avg_norm <= 1 + 1e-12)
    np.testing.assert_array_equal(entropy_track(r), r.entropy)
    k = len(r.t) // 2
    assert r.entropy[k] == pytest.approx(entropy_of_polarization(r.avg_p[k]), abs=1e-15)
    assert np.all(np.diff(r.avg_pxd) >= 0)
    assert r.max_norm_deviation < 1e-9
    # decoherence only in the average: |<P>| falls while every trajectory stays pure
    assert r.avg_norm[-1] < 0.9


@pytest.mark.parametrize("phi", [0.0, math.pi / 2])
def test_worker_count_bit_identical(phi):
    cfg = EnsembleConfig(n_trajectories=37, phi=phi, **SHORT)
    ref = run_ensemble(cfg, workers=1)
    for w in (4, 16):
        r = run_ensemble(cfg, workers=w)
        for name in ("avg_p", "stderr_p", "entropy", "avg_pxd", "stderr_pxd"):
            assert np.array_equal(getattr(r, name), getattr(ref, name)), name


def test_seed_changes_result():
    a = run_ensemble(EnsembleConfig(n_trajectories=8, master_seed=1, **SHORT), workers=1)
    b = run_ensemble(EnsembleConfig(n_trajectories=8, master_seed=2, **SHORT), workers=1)
    assert not np.array_equal(a.avg_p, b.avg_p)


def test_stderr_scales_as_inverse_sqrt_n():
    se = {}
    for n in (250, 1000, 4000):
        r = run_ensemble(EnsembleConfig(n_trajectories=n, t_max=5e-6, record_stride=500))
        se[n] = r.stderr_p[-1, 0]
    assert se[250] / se[1000] == pytest.approx(2.0, rel=0.15)
    assert se[1000] / se[4000] == pytest.approx(2.0, rel=0.15)


def test_csv_and_metadata(tmp_path):
    r = run_ensemble(EnsembleConfig(n_trajectories=4, **SHORT), workers=1)
    r.to_csv(tmp_path / "e.csv")
    lines = (tmp_path / "e.csv").read_text().splitlines()
    assert lines[0] == CSV_HEADER
    data = np.loadtxt(tmp_path / "e.csv", delimiter=",", skiprows=1)
    assert np.array_equal(data[:, 1:4], r.avg_p)
    r.write_metadata(tmp_path / "m.json")
    meta = json.loads((tmp_path / "m.json").read_text())
    for key in ("seed", "params", "N_t", "dt", "wall_time_s"):
        assert key in meta


def test_config_validation():
    with pytest.raises(ValueError):
        EnsembleConfig(n_trajectories=0)
    with pytest.raises(ValueError):
        EnsembleConfig(phi=2 * math.pi)
    with pytest.raises(ValueError):
        EnsembleConfig(method="euler")


def test_sim_threads_caps_workers(monkeypatch):
    monkeypatch.setenv("SIM_THREADS", "1")
    assert default_workers() == 1
    monkeypatch.setenv("SIM_THREADS", "many")
    with pytest.raises(ValueError):
        default_workers()
