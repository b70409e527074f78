"""End-to-end tests of the benchmark command line."""

import json

import numpy as np
import pytest

from scrcd.cli import main
from scrcd.trace import read_trace_csv


def run_cli(argv):
    return main([str(a) for a in argv])


def deterministic_columns(path):
    trace = read_trace_csv(path)
    return [(r.iteration, r.epoch, r.rel_residual) for r in trace.records]


class TestSynth:
    def test_minimal_run_writes_artifacts(self, tmp_path):
        out = tmp_path / "run"
        code = run_cli(["synth", "--n", "256", "--methods", "scrcd", "--d", "24", "--l", "8",
                        "--max-epochs", "10", "--out", out, "--seed", "3"])
        assert code == 0
        assert (out / "trace_scrcd.csv").exists()
        assert (out / "spectrum.csv").exists()
        summary = json.loads((out / "summary.json").read_text())
        assert summary["experiment"] == "synth"
        assert summary["config"]["seed"] == 3
        assert summary["solvers"][0]["name"] == "scrcd"
        assert summary["solvers"][0]["trace_path"] == "trace_scrcd.csv"

    def test_determinism_replay(self, tmp_path):
        args = ["synth", "--n", "64", "--r", "4", "--methods", "scrcd,cg", "--d", "8", "--l", "4",
                "--max-epochs", "15", "--seed", "7"]
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert run_cli(args + ["--out", out1]) == 0
        assert run_cli(args + ["--out", out2]) == 0
        for name in ("trace_scrcd.csv", "trace_cg.csv"):
            assert deterministic_columns(out1 / name) == deterministic_columns(out2 / name)
        # Spectrum and summary (modulo the per-run output path) are fully deterministic.
        assert (out1 / "spectrum.csv").read_bytes() == (out2 / "spectrum.csv").read_bytes()
        s1 = json.loads((out1 / "summary.json").read_text())
        s2 = json.loads((out2 / "summary.json").read_text())
        s1["config"]["output_dir"] = s2["config"]["output_dir"] = ""
        assert s1 == s2

    def test_spectrum_contains_matrix_and_residual(self, tmp_path):
        out = tmp_path / "run"
        assert run_cli(["synth", "--n", "48", "--r", "4", "--methods", "scrcd", "--d", "8",
                        "--l", "4", "--max-epochs", "5", "--out", out]) == 0
        lines = (out / "spectrum.csv").read_text().splitlines()
        assert lines[0] == "index,matrix,eigenvalue"
        labels = {line.split(",")[1] for line in lines[1:]}
        assert labels == {"A", "residual"}

    def test_pcg_spectrum_series(self, tmp_path):
        out = tmp_path / "run"
        assert run_cli(["synth", "--n", "40", "--r", "4", "--methods", "pcg", "--d", "8",
                        "--lam", "0.01", "--max-epochs", "10", "--out", out]) == 0
        labels = {line.split(",")[1] for line in (out / "spectrum.csv").read_text().splitlines()[1:]}
        assert "preconditioned" in labels


class TestValidation:
    def test_unknown_solver_key_exit_2(self, tmp_path, capsys):
        config = {
            "experiment": "synth",
            "matrix": {"n": 32},
            "solvers": [{"method": "scrcd", "blok_size": 4}],
        }
        path = tmp_path / "config.json"
        path.write_text(json.dumps(config))
        code = run_cli(["synth", "--config", path, "--out", tmp_path / "out"])
        assert code == 2
        err = json.loads(capsys.readouterr().err)
        assert "blok_size" in err["error"]["message"]

    def test_unknown_top_level_key(self, tmp_path, capsys):
        path = tmp_path / "config.json"
        path.write_text(json.dumps({"experiment": "synth", "matrx": {}}))
        assert run_cli(["synth", "--config", path]) == 2
        assert "matrx" in json.loads(capsys.readouterr().err)["error"]["message"]

    def test_experiment_subcommand_mismatch(self, tmp_path, capsys):
        path = tmp_path / "config.json"
        path.write_text(json.dumps({"experiment": "krr", "matrix": {}}))
        assert run_cli(["synth", "--config", path]) == 2
        capsys.readouterr()

    def test_flags_override_config(self, tmp_path):
        config = {
            "experiment": "synth",
            "seed": 1,
            "matrix": {"n": 32, "r": 2},
            "solvers": [{"method": "scrcd", "d": 4, "block_size": 2, "max_epochs": 5.0}],
        }
        path = tmp_path / "config.json"
        path.write_text(json.dumps(config))
        out = tmp_path / "out"
        assert run_cli(["synth", "--config", path, "--out", out, "--seed", "9"]) == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["config"]["seed"] == 9
        assert summary["config"]["matrix"]["n"] == 32


class TestRates:
    def test_measured_below_bound(self, tmp_path):
        out = tmp_path / "rates"
        assert run_cli(["rates", "--n", "32", "--d", "6", "--block-sizes", "1,2",
                        "--trials", "2000", "--out", out, "--seed", "5"]) == 0
        summary = json.loads((out / "summary.json").read_text())
        pairs = summary["contraction_pairs"]
        assert {p["block_size"] for p in pairs} == {1, 2}
        for pair in pairs:
            assert pair["measured"] <= pair["bound"] + 3 * pair["stderr"]
        assert (out / "spectrum.csv").exists()


class TestKrrCommand:
    def make_dataset(self, path, m=60, seed=0):
        rng = np.random.default_rng(seed)
        features = rng.standard_normal((m, 3))
        targets = features.sum(axis=1) + 0.1 * rng.standard_normal(m)
        lines = ["f1,f2,f3,y"]
        for row, t in zip(features, targets):
            lines.append(",".join(repr(float(v)) for v in row) + f",{float(t)!r}")
        path.write_text("\n".join(lines) + "\n")

    def test_end_to_end(self, tmp_path):
        data = tmp_path / "data.csv"
        self.make_dataset(data)
        out = tmp_path / "out"
        code = run_cli(["krr", "--data", data, "--target", "y", "--sigma", "3", "--lambda-coeff", "1e-4",
                        "--method", "scrcd", "--d", "10", "--l", "5", "--max-epochs", "200",
                        "--stop-tol", "1e-8", "--out", out, "--seed", "2"])
        assert code == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["lam"] == pytest.approx(1e-4 * 60)
        assert summary["solvers"][0]["status"] in ("converged", "epoch_budget")
        assert (out / "trace_scrcd.csv").exists()

    def test_missing_target_is_runtime_error(self, tmp_path, capsys):
        data = tmp_path / "data.csv"
        self.make_dataset(data)
        code = run_cli(["krr", "--data", data, "--target", "absent", "--method", "cg", "--out", tmp_path / "o"])
        assert code == 1
        assert "absent" in json.loads(capsys.readouterr().err)["error"]["message"]


class TestLsCommand:
    def test_end_to_end(self, tmp_path):
        out = tmp_path / "out"
        code = run_cli(["ls", "--m", "80", "--n", "20", "--d", "4", "--l", "4",
                        "--max-epochs", "150", "--stop-tol", "1e-9", "--out", out, "--seed", "4"])
        assert code == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["shape"] == [80, 20]
        assert summary["solvers"][0]["final_rel_residual"] <= 1e-8


class TestReport:
    def test_combines_traces(self, tmp_path):
        out = tmp_path / "run"
        assert run_cli(["synth", "--n", "48", "--r", "4", "--methods", "scrcd,cg", "--d", "6",
                        "--l", "4", "--max-epochs", "5", "--out", out]) == 0
        combined = tmp_path / "combined.csv"
        assert run_cli(["report", "--dir", out, "--out-csv", combined]) == 0
        lines = combined.read_text().splitlines()
        assert lines[0].startswith("trace,")
        assert len(lines) == 3  # header + two solvers

    def test_empty_directory_fails(self, tmp_path, capsys):
        assert run_cli(["report", "--dir", tmp_path, "--out-csv", tmp_path / "c.csv"]) == 2
        capsys.readouterr()
