import shutil

import numpy as np
import pytest

from euler_blowup.cli import (
    EXIT_CHECK_FAILED,
    EXIT_CONFIG,
    EXIT_IO,
    EXIT_OK,
    main,
    parse_config_file,
)
from euler_blowup.gridio import read_grid_dump, write_grid_dump

FAST_CFG = """
n_max=2
rho_bar=64
time_samples_per_epoch=4
grid_n=129
phi_measure_n=513
contraction_pairs=4
rho_ladder=8,64
monitor_quad_nodes=21
monitor_k_grid=33
residual_k=65
ode_steps_per_segment=128
"""


@pytest.fixture(scope="module")
def cfg_path(tmp_path_factory):
    d = tmp_path_factory.mktemp("cfg")
    p = d / "fast.cfg"
    p.write_text(FAST_CFG)
    return p


@pytest.fixture(scope="module")
def artifacts(cfg_path, tmp_path_factory):
    out = tmp_path_factory.mktemp("artifacts")
    assert main(["layers", "--config", str(cfg_path), "--out", str(out)]) == EXIT_OK
    assert main(["fixedpoint", "--config", str(cfg_path), "--out", str(out)]) == EXIT_OK
    return out


def test_config_parsing_roundtrip(cfg_path):
    cfg = parse_config_file(cfg_path)
    assert cfg.n_max == 2 and cfg.grid_n == 129
    assert cfg.ladder() == [8.0, 64.0]


def test_unknown_key_rejected(tmp_path):
    p = tmp_path / "bad.cfg"
    p.write_text("mystery=1\n")
    with pytest.raises(Exception):
        parse_config_file(p)
    assert main(["layers", "--config", str(p), "--out", str(tmp_path / "o")]) \
        == EXIT_CONFIG


def test_invalid_gamma_exit_code(tmp_path):
    p = tmp_path / "bad.cfg"
    p.write_text("gamma=1.5\n")
    assert main(["layers", "--config", str(p), "--out", str(tmp_path / "o")]) \
        == EXIT_CONFIG


def test_degenerate_schedule_exit_code(tmp_path):
    p = tmp_path / "bad.cfg"
    p.write_text("delta=0.05\n")  # desk C and gamma: schedule degenerates
    assert main(["layers", "--config", str(p), "--out", str(tmp_path / "o")]) \
        == EXIT_CONFIG


def test_layers_artifacts(artifacts):
    assert (artifacts / "schedule.csv").exists()
    assert (artifacts / "layer_1.csv").exists()
    assert (artifacts / "layer_2.csv").exists()
    arr, meta = read_grid_dump(artifacts / "rho_t0")
    assert meta["field_name"] == "rho"
    assert arr.shape == (int(meta["ny"]), int(meta["nx"]))
    assert (artifacts / "resolved.cfg").exists()
    assert (artifacts / "VERSION").exists()
    assert (artifacts / "manifest.txt").exists()


def test_single_layer_run(tmp_path, cfg_path):
    cfg = tmp_path / "one.cfg"
    cfg.write_text(FAST_CFG + "n_max=1\n")
    out = tmp_path / "out1"
    assert main(["layers", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    assert (out / "layer_1.csv").exists()


def test_schedule_only_preset(tmp_path):
    out = tmp_path / "sched"
    assert main(["layers", "--preset", "schedule-only", "--out", str(out)]) \
        == EXIT_OK
    lines = (out / "schedule.csv").read_text().splitlines()
    assert lines[0] == "n,t_n,log_lambda_n,log_M_n"
    assert len(lines) >= 4
    assert not list(out.glob("*.f64"))  # schedule-only writes no fields


def test_phi_command(tmp_path, cfg_path):
    out = tmp_path / "phi"
    assert main(["phi", "--config", str(cfg_path), "--out", str(out)]) == EXIT_OK
    text = (out / "phi_report.csv").read_text()
    assert "certified_lip" in text


def test_fixedpoint_artifacts(artifacts):
    for name in ("contraction.csv", "iteration.csv", "gtrace.csv",
                 "pair_ratios.csv", "fixedpoint_meta.csv",
                 "screened_diagnostics.csv"):
        assert (artifacts / name).exists(), name
    g_lines = (artifacts / "gtrace.csv").read_text().splitlines()[1:]
    for line in g_lines:
        assert float(line.split(",")[2]) == 0.0  # g2 identically zero
    assert (artifacts / "a1_s000.f64").exists()


def test_verify_roundtrip_and_ablation(artifacts, cfg_path):
    assert main(["verify", "--config", str(cfg_path), "--out",
                 str(artifacts)]) == EXIT_OK
    report = (artifacts / "verify_report.csv").read_text()
    assert "euler_assembled_order" in report
    assert main(["verify", "--config", str(cfg_path), "--out",
                 str(artifacts), "--ablate-g"]) == EXIT_CHECK_FAILED
    # restore the untainted (non-ablated) report for downstream consumers
    assert main(["verify", "--config", str(cfg_path), "--out",
                 str(artifacts)]) == EXIT_OK


def test_corruption_detected(artifacts, cfg_path, tmp_path):
    clone = tmp_path / "clone"
    shutil.copytree(artifacts, clone)
    blob = clone / "a1_s000.f64"
    raw = bytearray(blob.read_bytes())
    raw[64] ^= 0xFF
    blob.write_bytes(bytes(raw))
    assert main(["verify", "--config", str(cfg_path), "--out", str(clone)]) \
        == EXIT_IO


def test_grid_dump_roundtrip(tmp_path):
    arr = np.arange(12.0).reshape(3, 4)
    write_grid_dump(tmp_path / "f", arr, x_min=-1, x_max=1, y_min=-2,
                    y_max=2, t=0.5, field_name="demo")
    back, meta = read_grid_dump(tmp_path / "f")
    assert np.array_equal(back, arr)
    assert meta["t"] == 0.5 and meta["field_name"] == "demo"
    # truncated payload is an I/O error
    (tmp_path / "f.f64").write_bytes(b"\x00" * 16)
    with pytest.raises(IOError):
        read_grid_dump(tmp_path / "f")
