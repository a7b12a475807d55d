import json

import numpy as np
import pytest
from click.testing import CliRunner

import fracbm.cli as cli
from fracbm import __version__
from fracbm.cli import RunConfig, main
from fracbm.experiments import CheckResult, ExperimentResult
from fracbm.fraccalc import DifferintegralSpec, GridFunction, fractional_integral, read_grid_csv, write_grid_csv
from fracbm.fbmintegrate import symmetric_integral
from fracbm.gaussianpaths import GridSpec, RngSeed, generate_fbm_circulant, read_path_csv, write_path_csv
from fracbm.itocalc import AdaptedIntegrand, ito_integral


@pytest.fixture
def runner():
    return CliRunner()


def run_ok(runner, args):
    result = runner.invoke(main, args, catch_exceptions=False)
    assert result.exit_code == 0, result.output
    return result


class TestGenerate:
    def test_writes_path_and_manifest(self, runner, tmp_path):
        out = tmp_path / "run"
        run_ok(runner, ["generate", "--hurst", "0.7", "--steps", "128", "--seed", "5", "--out", str(out)])
        path = read_path_csv(out / "path.csv")
        assert path.grid.n_steps == 128
        assert path.hurst == 0.7
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["tool_version"] == __version__
        assert "path.csv" in manifest["artifacts"]
        cfg = RunConfig.from_record(manifest["config"])
        assert cfg.command == "generate"
        assert cfg.parameters["hurst"] == 0.7

    def test_reruns_are_byte_identical(self, runner, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        args = ["generate", "--hurst", "0.3", "--steps", "64", "--seed", "9", "--stream", "2"]
        run_ok(runner, args + ["--out", str(a)])
        run_ok(runner, args + ["--out", str(b)])
        assert (a / "path.csv").read_bytes() == (b / "path.csv").read_bytes()

    def test_brownian_generator_matches_module(self, runner, tmp_path):
        out = tmp_path / "bm"
        run_ok(runner, ["generate", "--generator", "bm", "--steps", "64", "--seed", "3", "--out", str(out)])
        path = read_path_csv(out / "path.csv")
        from fracbm.gaussianpaths import generate_bm

        direct = generate_bm(GridSpec(1.0, 64), RngSeed(3, 0))
        assert np.array_equal(path.values, direct.values)

    def test_hurst_out_of_range_is_a_usage_error(self, runner, tmp_path):
        result = runner.invoke(main, ["generate", "--hurst", "1.5", "--out", str(tmp_path / "x")])
        assert result.exit_code == 2
        assert "hurst" in result.output.lower()

    def test_brownian_generator_rejects_other_indices(self, runner, tmp_path):
        result = runner.invoke(
            main, ["generate", "--generator", "bm", "--hurst", "0.7", "--out", str(tmp_path / "x")]
        )
        assert result.exit_code == 2

    def test_config_preseeds_and_flags_win(self, runner, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("hurst = 0.25\nsteps = 256  # grid size\n")
        out1 = tmp_path / "seeded"
        run_ok(runner, ["--config", str(cfg), "generate", "--seed", "4", "--out", str(out1)])
        m1 = json.loads((out1 / "manifest.json").read_text())
        assert m1["config"]["parameters"]["hurst"] == 0.25
        assert m1["config"]["parameters"]["steps"] == 256
        out2 = tmp_path / "overridden"
        run_ok(
            runner,
            ["--config", str(cfg), "generate", "--seed", "4", "--hurst", "0.75", "--out", str(out2)],
        )
        m2 = json.loads((out2 / "manifest.json").read_text())
        assert m2["config"]["parameters"]["hurst"] == 0.75

    def test_malformed_config_reports_the_line(self, runner, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("hurst = 0.25\nnot a pair\n")
        result = runner.invoke(main, ["--config", str(cfg), "generate", "--out", str(tmp_path / "x")])
        assert result.exit_code == 2
        assert "line 2" in result.output


class TestFracint:
    def test_round_trips_through_the_module(self, runner, tmp_path):
        f = GridFunction.from_callable(np.sin, 0.0, 1.0, 256)
        src = tmp_path / "in.csv"
        write_grid_csv(f, src)
        out = tmp_path / "out.csv"
        run_ok(
            runner,
            ["fracint", "--input", str(src), "--alpha", "0.5", "--kind", "integral", "--out", str(out)],
        )
        produced = read_grid_csv(out)
        direct = fractional_integral(f, DifferintegralSpec(0.5))
        assert np.array_equal(produced.values, direct.values)

    def test_integral_orders_above_one_are_allowed(self, runner, tmp_path):
        f = GridFunction.from_callable(np.sin, 0.0, 1.0, 64)
        src = tmp_path / "in.csv"
        write_grid_csv(f, src)
        run_ok(
            runner,
            ["fracint", "--input", str(src), "--alpha", "1.5", "--kind", "integral", "--out", str(tmp_path / "o")],
        )

    def test_derivative_orders_above_one_are_rejected(self, runner, tmp_path):
        f = GridFunction.from_callable(np.sin, 0.0, 1.0, 64)
        src = tmp_path / "in.csv"
        write_grid_csv(f, src)
        result = runner.invoke(
            main,
            ["fracint", "--input", str(src), "--alpha", "1.5", "--kind", "derivative", "--out", str(tmp_path / "o")],
        )
        assert result.exit_code == 2


class TestIto:
    def test_value_matches_module(self, runner, tmp_path):
        out = tmp_path / "bm"
        run_ok(runner, ["generate", "--generator", "bm", "--steps", "512", "--seed", "8", "--out", str(out)])
        result = run_ok(runner, ["ito", "--input", str(out / "path.csv"), "--integrand", "path"])
        rec = json.loads(result.output)
        path = read_path_csv(out / "path.csv")
        assert rec["value"] == pytest.approx(ito_integral(AdaptedIntegrand.path_value(), path), abs=1e-14)
        assert rec["integrand"] == "path"

    def test_rejects_non_brownian_input(self, runner, tmp_path):
        out = tmp_path / "fbm"
        run_ok(runner, ["generate", "--hurst", "0.75", "--steps", "128", "--seed", "8", "--out", str(out)])
        result = runner.invoke(main, ["ito", "--input", str(out / "path.csv")])
        assert result.exit_code == 2
        assert "hurst" in result.output.lower()

    def test_malformed_csv_reports_the_line(self, runner, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("t,value\n0.0,0.0\nbroken line\n")
        result = runner.invoke(main, ["ito", "--input", str(bad)])
        assert result.exit_code == 2
        assert "line 3" in result.output


class TestFbmIntegrate:
    def test_symmetric_of_one_matches_module(self, runner, tmp_path):
        out = tmp_path / "fbm"
        run_ok(runner, ["generate", "--hurst", "0.75", "--steps", "4096", "--seed", "20", "--out", str(out)])
        result = run_ok(
            runner,
            ["fbm-integrate", "--input", str(out / "path.csv"), "--type", "symmetric", "--f", "one"],
        )
        rec = json.loads(result.output)
        path = read_path_csv(out / "path.csv")
        direct = symmetric_integral(1.0, path)
        assert rec["value"] == pytest.approx(direct.value, abs=1e-14)
        assert rec["converged"] is True
        assert rec["type"] == "symmetric"


class TestStats:
    def test_rescaled_range_record(self, runner, tmp_path):
        out = tmp_path / "fbm"
        run_ok(runner, ["generate", "--hurst", "0.7", "--steps", "4096", "--seed", "11", "--out", str(out)])
        result = run_ok(runner, ["stats", "--input", str(out / "path.csv"), "--estimator", "rescaled-range"])
        rec = json.loads(result.output)
        assert rec["estimator"] == "rescaled-range"
        assert abs(rec["h_hat"] - 0.7) <= 0.15

    def test_quadratic_variation_record(self, runner, tmp_path):
        out = tmp_path / "bm"
        run_ok(runner, ["generate", "--generator", "bm", "--steps", "1024", "--seed", "12", "--out", str(out)])
        result = run_ok(runner, ["stats", "--input", str(out / "path.csv"), "--estimator", "quadratic-variation"])
        rec = json.loads(result.output)
        assert abs(rec["value"] - 1.0) <= 0.2

    def test_short_series_is_a_usage_error(self, runner, tmp_path):
        out = tmp_path / "short"
        run_ok(runner, ["generate", "--generator", "bm", "--steps", "128", "--seed", "1", "--out", str(out)])
        result = runner.invoke(main, ["stats", "--input", str(out / "path.csv"), "--estimator", "rescaled-range"])
        assert result.exit_code == 2
        assert "256" in result.output


class TestVerify:
    def test_single_experiment_produces_artifacts(self, runner, tmp_path):
        out = tmp_path / "verify"
        result = run_ok(runner, ["verify", "--suite", "E1", "--out", str(out)])
        assert "E1 pass" in result.output
        rec = json.loads((out / "E1.json").read_text())
        assert rec["verdict"] == "pass"
        assert all(c["verdict"] == "pass" for c in rec["checks"])
        lines = (out / "summary.csv").read_text().splitlines()
        assert lines[0] == "experiment,check,target,estimate,tolerance,verdict"
        assert all(line.startswith("E1,") for line in lines[1:])
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["verdicts"] == {"E1": "pass"}
        assert set(manifest["artifacts"]) == {"E1.json", "summary.csv"}

    def test_unknown_experiment_is_a_usage_error(self, runner, tmp_path):
        result = runner.invoke(main, ["verify", "--suite", "E99", "--out", str(tmp_path / "v")])
        assert result.exit_code == 2
        assert "E99" in result.output and "E1" in result.output

    def test_replicate_floor(self, runner, tmp_path):
        result = runner.invoke(main, ["verify", "--suite", "E1", "--replicates", "1", "--out", str(tmp_path / "v")])
        assert result.exit_code == 2

    def test_failing_experiment_exits_nonzero(self, runner, tmp_path, monkeypatch):
        bad = ExperimentResult(
            "E1",
            "stub",
            [CheckResult("stub-check", 0.0, 1.0, 0.5, False, "synthetic miss")],
            0.01,
        )
        monkeypatch.setattr(cli, "run_experiment", lambda eid, cfg=None: bad)
        out = tmp_path / "v"
        result = runner.invoke(main, ["verify", "--suite", "E1", "--out", str(out)])
        assert result.exit_code == 1
        assert "E1 fail" in result.output
        assert json.loads((out / "E1.json").read_text())["verdict"] == "fail"

    def test_crashing_experiment_is_reported_not_raised(self, runner, tmp_path, monkeypatch):
        def explode(eid, cfg=None):
            raise RuntimeError("synthetic crash")

        monkeypatch.setattr(cli, "run_experiment", explode)
        out = tmp_path / "v"
        result = runner.invoke(main, ["verify", "--suite", "E1", "--out", str(out)])
        assert result.exit_code == 1
        rec = json.loads((out / "E1.json").read_text())
        assert rec["verdict"] == "error"
        assert "synthetic crash" in rec["error"]
        assert "E1,,,,,error" in (out / "summary.csv").read_text()


class TestRunConfig:
    def test_record_round_trip(self):
        cfg = RunConfig("generate", {"hurst": 0.7, "n_steps": 128}, "out")
        assert RunConfig.from_record(cfg.record()) == cfg


def test_version_flag(runner):
    result = run_ok(runner, ["--version"])
    assert __version__ in result.output
