import csv
import json
import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from multikeyhole.cli import main
from multikeyhole.config import ConfigError, load_config

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def _write(tmp_path, text, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def _read_csv(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def test_outage_recipe_columns(tmp_path):
    assert main(["outage", str(CONFIGS / "outage_antennas.yaml"), "--trials", "2000", "--out", str(tmp_path)]) == 0
    header, rows = _read_csv(tmp_path / "outage.csv")
    assert header == ["rate_nats", "cdf_nt2", "cdf_nt4", "cdf_nt8", "cdf_equivalent"]
    data = np.array(rows, dtype=float)
    assert np.all(np.diff(data[:, 1:], axis=0) >= 0)
    assert rows[1][0] == "5.0000000000000003e-02"
    summary = json.loads((tmp_path / "outage.summary.json").read_text())
    assert summary["seed"] == 1 and summary["n_trials"] == 2000
    assert set(summary["empirical"]) >= {"ks_nt2", "ks_nt4", "ks_nt8"}
    assert len(summary["config_digest"]) == 16


def test_measure_summary(tmp_path):
    cfg = _write(tmp_path, "experiment: measure\ncorr: {kind: exponential, n: 8, r: 0.5}\n")
    assert main(["measure", cfg, "--out", str(tmp_path)]) == 0
    s = json.loads((tmp_path / "measure.summary.json").read_text())["analytic"]
    from multikeyhole.corr_models import make_corr
    from multikeyhole.measure import decompose

    d = decompose(make_corr("exponential", 8, 0.5))
    assert s["r_norm"] == d.r_norm and s["k_norm"] == d.k_norm and s["p_norm"] == d.p_norm
    assert s["bounds_ok"] is True
    header, rows = _read_csv(tmp_path / "measure.csv")
    assert [r[1] for r in rows] == ["r_norm", "k_norm", "p_norm"]


def test_missing_n_t_is_config_error(tmp_path, capsys):
    cfg = _write(tmp_path, "experiment: sample\nn_r: 2\nsnr: 1.0\n")
    assert main(["sample", cfg, "--out", str(tmp_path)]) == 2
    err = capsys.readouterr().err
    assert "n_t" in err and "line" in err


def test_unknown_key_reports_line(tmp_path):
    cfg = _write(tmp_path, "experiment: sample\nn_t: 2\nn_r: 2\nsnr: 1.0\nsnrr: 3\n")
    with pytest.raises(ConfigError, match="line 5"):
        load_config(cfg, "sample")


def test_nested_error_reports_line(tmp_path):
    cfg = _write(tmp_path, "experiment: sample\nn_t: 2\nn_r: 2\nsnr: 1.0\ncorr:\n  kind: banded\n")
    with pytest.raises(ConfigError, match="line 6"):
        load_config(cfg, "sample")


def test_experiment_mismatch(tmp_path):
    cfg = _write(tmp_path, "experiment: measure\ncorr: {kind: identity, n: 2}\n")
    assert main(["sample", cfg, "--out", str(tmp_path)]) == 2


def test_numeric_error_exit_one(tmp_path, capsys):
    cfg = _write(tmp_path, "experiment: sample\nn_t: 2\nn_r: 2\nsnr: 1.0\ncorr: {kind: exponential, r: 1.5}\n")
    assert main(["sample", cfg, "--out", str(tmp_path)]) == 1
    assert "r must satisfy" in capsys.readouterr().err


def test_override_and_its_validation(tmp_path):
    cfg = str(CONFIGS / "sample_keyhole.yaml")
    assert load_config(cfg, "sample", ["snr=3.5"])["snr"] == 3.5
    with pytest.raises(ConfigError, match="--set snr"):
        load_config(cfg, "sample", ["snr=-1"])
    with pytest.raises(ConfigError):
        load_config(cfg, "sample", ["novalue"])


def test_reruns_are_byte_identical_across_workers(tmp_path):
    cfg = str(CONFIGS / "sample_keyhole.yaml")
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["sample", cfg, "--trials", "3000", "--out", str(a), "--workers", "1"]) == 0
    assert main(["sample", cfg, "--trials", "3000", "--out", str(b), "--workers", "2"]) == 0
    for name in ("sample.csv", "sample.summary.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_bits_flag_converts_units(tmp_path):
    cfg = str(CONFIGS / "sample_keyhole.yaml")
    assert main(["sample", cfg, "--trials", "50", "--out", str(tmp_path / "n")]) == 0
    assert main(["sample", cfg, "--trials", "50", "--out", str(tmp_path / "b"), "--bits"]) == 0
    hn, rn = _read_csv(tmp_path / "n" / "sample.csv")
    hb, rb = _read_csv(tmp_path / "b" / "sample.csv")
    assert hn[1] == "capacity_nats" and hb[1] == "capacity_bits"
    assert np.allclose(np.array(rb, float)[:, 1], np.array(rn, float)[:, 1] / np.log(2), rtol=1e-15)
    s = json.loads((tmp_path / "b" / "sample.summary.json").read_text())
    assert s["units"] == "bits" and "mean_bits" in s["empirical"]


@pytest.mark.parametrize(
    "name,kind",
    [
        ("approx_rdmk.yaml", "approx"),
        ("approx_frmk.yaml", "approx"),
        ("converge_keyholes.yaml", "converge"),
        ("telatar.yaml", "telatar"),
        ("schedule.yaml", "schedule"),
        ("schedule_relay.yaml", "schedule"),
        ("measure_exponential.yaml", "measure"),
    ],
)
def test_shipped_configs_run(tmp_path, name, kind):
    assert main([kind, str(CONFIGS / name), "--trials", "500", "--out", str(tmp_path), "--set", "oracle_reps=200"]
                if name == "schedule.yaml" else
                [kind, str(CONFIGS / name), "--trials", "500", "--out", str(tmp_path)]) == 0
    assert any(f.endswith(".csv") for f in os.listdir(tmp_path))


def test_approx_reports_analytic_and_empirical(tmp_path):
    assert main(["approx", str(CONFIGS / "approx_frmk.yaml"), "--trials", "2000", "--out", str(tmp_path)]) == 0
    s = json.loads((tmp_path / "approx.summary.json").read_text())
    assert s["channel_class"] == "FRMK"
    assert {"frmk_mu_nats", "frmk_sigma2_nats2", "frmk_outage_capacity_nats"} <= set(s["analytic"])
    assert s["empirical"]["ks_gaussian"] < 0.1
    header, _ = _read_csv(tmp_path / "approx.csv")
    assert header == ["rate_nats", "cdf_empirical", "cdf_frmk_gaussian"]


def test_module_entry_point(tmp_path):
    cfg = _write(tmp_path, "experiment: measure\ncorr: {kind: uniform, n: 3, r: 0.2}\n")
    out = subprocess.run(
        [sys.executable, "-m", "multikeyhole", "measure", cfg, "--out", str(tmp_path)],
        capture_output=True, text=True,
    )
    assert out.returncode == 0, out.stderr
