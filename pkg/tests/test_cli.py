import os

import numpy as np
import pytest

from qtensor.cli import main
from qtensor.config import ExperimentConfig, emit_config
from qtensor.runner import EXIT_OK, EXIT_TOL, EXIT_USAGE, compare, run_config


def write_config(tmp_path, cfg, name="config.ini"):
    path = tmp_path / name
    path.write_text(emit_config(cfg))
    return str(path)


def minimal_2d_cfg(tmp_path, run_id="mini"):
    return ExperimentConfig(
        shape="disk",
        radius=1.0,
        resolution=24,
        boundary_kind="planar-degree",
        degree=0,
        L_schedule=(0.1,),
        mode="full",
        method="nonlinear-cg",
        grad_tol=1e-4,
        out_dir=str(tmp_path / run_id),
        run_id=run_id,
    )


class TestRun:
    def test_minimal_2d_constant_boundary(self, tmp_path):
        cfg = minimal_2d_cfg(tmp_path)
        code = main(["run", write_config(tmp_path, cfg)])
        assert code == EXIT_OK
        out = tmp_path / "mini"
        assert (out / "config.ini").exists()
        assert (out / "summary.txt").exists()
        assert (out / "defects.csv").exists()
        summary = dict(
            line.strip().split("=", 1) for line in open(out / "summary.txt") if "=" in line
        )
        assert abs(float(summary["energy"])) < 1e-8
        assert summary["n_defects"] == "0"

    def test_vortex_run_finds_one_defect(self, tmp_path):
        cfg = minimal_2d_cfg(tmp_path, run_id="vortex")
        cfg.degree = 1
        cfg.resolution = 48
        cfg.L_schedule = (0.06, 0.04)
        cfg.grad_tol = 5e-3
        code, out = run_config(cfg)
        assert code == EXIT_OK
        with open(os.path.join(out, "defects.csv")) as fh:
            header = fh.readline().strip().split(",")
            rows = [line.strip().split(",") for line in fh if line.strip()]
        assert header[:4] == ["run_id", "L", "x", "y"]
        assert len(rows) == 2  # one defect per schedule entry
        x = float(rows[-1][2])
        y = float(rows[-1][3])
        assert np.hypot(x, y) < 4 * (2.0 / 47)

    def test_malformed_config_exits_2(self, tmp_path):
        path = tmp_path / "bad.ini"
        path.write_text("[schedule]\nL = -1\n")
        assert main(["run", str(path)]) == EXIT_USAGE

    def test_missing_config_exits_2(self, tmp_path):
        assert main(["run", str(tmp_path / "nope.ini")]) == EXIT_USAGE

    def test_reproducible_artifacts(self, tmp_path):
        cfg_a = minimal_2d_cfg(tmp_path, run_id="repro_a")
        cfg_b = minimal_2d_cfg(tmp_path, run_id="repro_b")
        cfg_a.degree = cfg_b.degree = 1
        _, out_a = run_config(cfg_a)
        _, out_b = run_config(cfg_b)
        for name in ("defects.csv", "asymptotics.csv"):
            a = open(os.path.join(out_a, name)).read().replace("repro_a", "X")
            b = open(os.path.join(out_b, name)).read().replace("repro_b", "X")
            assert a == b


class TestCompare:
    def test_identical_runs_empty_diff(self, tmp_path):
        cfg = minimal_2d_cfg(tmp_path, run_id="one")
        _, out = run_config(cfg)
        code, lines = compare(out, out)
        assert code == EXIT_OK
        assert lines == []

    def test_tolerance_exceeded_exits_1(self, tmp_path):
        cfg_a = minimal_2d_cfg(tmp_path, run_id="a")
        cfg_b = minimal_2d_cfg(tmp_path, run_id="b")
        cfg_b.L_schedule = (0.2,)
        _, out_a = run_config(cfg_a)
        _, out_b = run_config(cfg_b)
        code, lines = compare(out_a, out_b, tol=1e-15)
        assert code == EXIT_TOL
        assert any("L_final" in line for line in lines)

    def test_mismatched_grids_marked_incomparable(self, tmp_path):
        cfg_a = minimal_2d_cfg(tmp_path, run_id="small")
        cfg_b = minimal_2d_cfg(tmp_path, run_id="large")
        cfg_b.resolution = 32
        _, out_a = run_config(cfg_a)
        _, out_b = run_config(cfg_b)
        code, lines = compare(out_a, out_b, tol=1e9)
        assert any("incomparable" in line for line in lines)

    def test_missing_summary_exits_2(self, tmp_path):
        os.makedirs(tmp_path / "empty", exist_ok=True)
        code, _ = compare(str(tmp_path / "empty"), str(tmp_path / "empty"))
        assert code == EXIT_USAGE


class TestExport:
    def test_cli_roundtrip(self, tmp_path):
        cfg = minimal_2d_cfg(tmp_path, run_id="exp")
        _, out = run_config(cfg)
        dump = os.path.join(out, "field_L0.1.qfield")
        assert os.path.exists(dump)
        csv = str(tmp_path / "field.csv")
        back = str(tmp_path / "field_back.qfield")
        assert main(["export", dump, "--format", "csv", "-o", csv]) == EXIT_OK
        assert main(["export", csv, "--format", "qfield", "-o", back]) == EXIT_OK
        from qtensor.qfield_io import load_qfield

        _, v1, _ = load_qfield(dump)
        _, v2, _ = load_qfield(back)
        assert np.max(np.abs(v1 - v2)) < 1e-15

    def test_unknown_format_exits_2(self, tmp_path):
        code = main(["export", "whatever.qfield", "--format", "csv"])
        assert code == EXIT_USAGE
