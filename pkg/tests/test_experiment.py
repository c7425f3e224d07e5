"""Config parsing, problem construction and the checkpointed pipeline."""

import os
import shutil

import numpy as np
import pytest

from insulab.experiment import (EXIT_CONFIG_ERROR, EXIT_OK,
                                EXIT_VERIFY_FAILED, ConfigError, build_problem,
                                load_report, parse_config, run_experiment)
from insulab.grids import build_grid, load_field, save_field
from insulab.geometry import rasterize_disk

BASE = """\
[grid]
bbox = -1 1 -1 1
h = 0.0625

[domain]
gamma = 0.45
omega_radius = 0.55
center = 0 0
obstacle = plateau
r0 = 0.12
height = 0.55
ramp_width = 0.22

[schedule]
sigmas = 0.01 0.002
deltas = 0.08 0.05
ps = 2 4
eps = {eps}

[solver]
max_iters = 1500
tol_grad = 0.05
polish_iters = 400

[output]
directory = {outdir}
seed = 7
"""


def _write_config(tmp_path, name="run.ini", eps="0.05", outdir=None, text=None):
    outdir = outdir or str(tmp_path / "out")
    path = tmp_path / name
    path.write_text(text if text is not None else
                    BASE.format(eps=eps, outdir=outdir))
    return str(path)


def test_parse_config_roundtrip(tmp_path):
    cfg = parse_config(_write_config(tmp_path))
    assert cfg.bbox == (-1.0, 1.0, -1.0, 1.0)
    assert cfg.h == 0.0625
    assert cfg.gamma == 0.45
    assert cfg.omega_radius == 0.55
    assert cfg.obstacle == "plateau"
    assert cfg.sigmas == (0.01, 0.002)
    assert cfg.deltas == (0.08, 0.05)
    assert cfg.ps == (2.0, 4.0)
    assert cfg.eps == 0.05
    assert cfg.solver.max_iters == 1500
    assert cfg.seed == 7
    assert len(cfg.sha256) == 64
    # the hash covers the exact bytes, so any edit changes it
    other = parse_config(_write_config(tmp_path, name="other.ini", eps="0.04"))
    assert other.sha256 != cfg.sha256


def test_parse_config_auto_eps(tmp_path):
    cfg = parse_config(_write_config(tmp_path, eps="auto"))
    assert cfg.eps == "auto"


def test_parse_config_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        parse_config(str(tmp_path / "nope.ini"))


@pytest.mark.parametrize("mangle", [
    lambda t: t.replace("bbox = -1 1 -1 1", "bbox = -1 1 -1"),
    lambda t: t.replace("bbox = -1 1 -1 1", "bbox = -1 one -1 1"),
    lambda t: t.replace("obstacle = plateau", "obstacle = wedge"),
    lambda t: t.replace("sigmas = 0.01 0.002", "sigmas = 0.002 0.01"),
    lambda t: t.replace("ps = 2 4", "ps ="),
    lambda t: t.replace("[schedule]", "[schedul]"),
    lambda t: t.replace("r0 = 0.12\n", ""),
])
def test_parse_config_rejects_malformed(tmp_path, mangle):
    text = mangle(BASE.format(eps="0.05", outdir=str(tmp_path / "out")))
    with pytest.raises(ConfigError):
        parse_config(_write_config(tmp_path, text=text))


def test_build_problem_radial_has_meta(tmp_path):
    domain = build_problem(parse_config(_write_config(tmp_path)))
    assert domain.meta is not None
    assert domain.meta.omega_radius == 0.55
    assert float(domain.phi.values.max()) == pytest.approx(0.55)


def test_build_problem_rejects_infeasible_budget(tmp_path):
    text = BASE.format(eps="0.05", outdir=str(tmp_path / "out"))
    text = text.replace("gamma = 0.45", "gamma = 100.0")
    with pytest.raises(ConfigError):
        build_problem(parse_config(_write_config(tmp_path, text=text)))


def test_build_problem_zero_obstacle(tmp_path):
    text = BASE.format(eps="0.05", outdir=str(tmp_path / "out"))
    text = text.replace(
        "obstacle = plateau\nr0 = 0.12\nheight = 0.55\nramp_width = 0.22",
        "obstacle = none")
    domain = build_problem(parse_config(_write_config(tmp_path, text=text)))
    assert float(domain.phi.values.max()) == 0.0
    assert domain.meta is None


def test_build_problem_mask_file(tmp_path):
    grid = build_grid((-1, 1, -1, 1), 0.0625)
    mask = rasterize_disk((0.0, 0.0), 0.55, grid)
    mask_path = str(tmp_path / "mask.field")
    save_field(mask_path, mask)
    text = BASE.format(eps="0.05", outdir=str(tmp_path / "out"))
    text = text.replace("omega_radius = 0.55\ncenter = 0 0",
                        f"mask_file = {mask_path}")
    domain = build_problem(parse_config(_write_config(tmp_path, text=text)))
    np.testing.assert_array_equal(domain.omega_mask.values, mask.values)

    # a mask on the wrong grid is rejected
    bad_grid = build_grid((-1, 1, -1, 1), 0.125)
    save_field(mask_path, rasterize_disk((0.0, 0.0), 0.55, bad_grid))
    with pytest.raises(ConfigError):
        build_problem(parse_config(_write_config(tmp_path, text=text)))


def test_run_experiment_bad_config_is_exit_2(tmp_path):
    result = run_experiment(str(tmp_path / "missing.ini"))
    assert result.exit_code == EXIT_CONFIG_ERROR


def test_run_experiment_zero_obstacle_trivial(tmp_path, capsys):
    text = BASE.format(eps="0.05", outdir=str(tmp_path / "out"))
    text = text.replace(
        "obstacle = plateau\nr0 = 0.12\nheight = 0.55\nramp_width = 0.22",
        "obstacle = none")
    result = run_experiment(_write_config(tmp_path, text=text), quiet=True)
    assert result.exit_code == EXIT_OK
    assert capsys.readouterr().out == ""  # quiet really is quiet
    u = load_field(os.path.join(result.out_dir, "fields", "u_p4.field"))
    np.testing.assert_array_equal(u.values, 0.0)


def test_run_experiment_full_coarse_pipeline(tmp_path):
    result = run_experiment(_write_config(tmp_path), quiet=True)
    assert result.exit_code in (EXIT_OK, EXIT_VERIFY_FAILED)
    out = result.out_dir
    for rel in ("checkpoints/state.txt", "config.ini",
                "checkpoints/cont_00.field", "checkpoints/cont_01.meta",
                "checkpoints/sweep_p2.field", "checkpoints/sweep_p4.field",
                "fields/u_p2.field", "fields/u_p4.field",
                "fields/phi.field", "fields/oracle_cone.field",
                "contours/exterior_p4.csv", "contours/interior_p4.csv",
                "report/per_p.csv", "report/stages.csv",
                "report/summary.txt"):
        assert os.path.exists(os.path.join(out, rel)), rel
    report = load_report(out)
    assert "all_passed=" in report["summary.txt"]
    assert report["per_p.csv"].splitlines()[0].startswith("p,")

    # resuming a finished run is a no-op that reports the recorded exit
    again = run_experiment(_write_config(tmp_path), resume_dir=out, quiet=True)
    assert again.exit_code == result.exit_code
    assert any("nothing to resume" in m for m in again.messages)


def test_resume_reproduces_uninterrupted_run(tmp_path):
    cfg_path = _write_config(tmp_path)
    full = run_experiment(cfg_path, quiet=True)
    out_a = full.out_dir

    # fabricate an interrupted copy: keep the config hash and the first
    # continuation checkpoint, drop every later state entry
    out_b = str(tmp_path / "out_b")
    shutil.copytree(out_a, out_b)
    state_path = os.path.join(out_b, "checkpoints", "state.txt")
    with open(state_path) as f:
        lines = f.readlines()
    kept = [ln for ln in lines
            if ln.startswith("config_sha256=") or ln == "stage=cont_00\n"]
    with open(state_path, "w") as f:
        f.writelines(kept)

    resumed = run_experiment(cfg_path, resume_dir=out_b, quiet=True)
    assert resumed.exit_code == full.exit_code
    for rel in ("checkpoints/sweep_p4.field", "fields/u_p2.field",
                "fields/u_p4.field", "report/per_p.csv",
                "report/summary.txt"):
        with open(os.path.join(out_a, rel), "rb") as fa, \
                open(os.path.join(out_b, rel), "rb") as fb:
            assert fa.read() == fb.read(), rel


def test_resume_rejects_config_drift(tmp_path):
    cfg_path = _write_config(tmp_path)
    full = run_experiment(cfg_path, quiet=True)
    out = full.out_dir
    cfg_copy = os.path.join(out, "config.ini")
    with open(cfg_copy, "a") as f:
        f.write("\n# drifted\n")
    resumed = run_experiment(cfg_path, resume_dir=out, quiet=True)
    assert resumed.exit_code == EXIT_CONFIG_ERROR
    assert any("hash mismatch" in m for m in resumed.messages)


def test_load_report_requires_completed_run(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_report(str(tmp_path))
