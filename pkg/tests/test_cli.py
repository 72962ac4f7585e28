"""CLI surface: config ingestion, subcommands, manifests, exit codes."""
import json
import subprocess
import sys

import pytest

from fibrelay import ConfigError, lambda_deterministic_closed_form
from fibrelay.cli import main
from fibrelay.config import parse_config, read_config_file, resolve
from fibrelay.manifest import canonical_digest, dumps_17g, load_manifest


class TestParseConfig:
    def test_flags_only(self):
        params = parse_config("lyapunov", overrides={
            "network.model": "deterministic:c=1", "network.gain": 0.5, "run.n": 1000})
        assert params.model.c == 1.0
        assert params.gains.g == 0.5
        assert params.n == 1000
        assert params.n0 == 1.0 and params.i0 == 1.0
        assert params.replicas == 32

    def test_negative_gain_names_key(self):
        with pytest.raises(ConfigError, match="gain"):
            parse_config("lyapunov", overrides={
                "network.model": "deterministic:c=1", "network.gain": -1.0})

    def test_flag_overrides_file(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("network.model = deterministic:c=1\nnetwork.n0 = 1\n")
        params = parse_config("simulate", cfg, {"network.n0": 2.0})
        assert params.n0 == 2.0

    def test_kv_file_with_comments(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(
            "# relay chain setup\n"
            "network.model = rayleigh:mu=1.0  # fading\n"
            "network.gain = 0.6\n"
            "run.n = 500\n"
            "run.seed = 7\n")
        params = parse_config("simulate", cfg)
        assert params.model.mu == 1.0
        assert params.gains.g == 0.6
        assert params.seed == 7

    def test_json_nested_file(self, tmp_path):
        cfg = tmp_path / "run.json"
        cfg.write_text(json.dumps({
            "network": {"model": "deterministic:c=0.2", "gain": 2.5},
            "run": {"n": 800}}))
        params = parse_config("verify", cfg)
        assert params.model.c == 0.2
        assert params.n == 800

    def test_unknown_key_named(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("network.model = deterministic:c=1\nrun.bogus = 3\n")
        with pytest.raises(ConfigError, match="run.bogus"):
            parse_config("lyapunov", cfg)

    def test_model_required(self):
        with pytest.raises(ConfigError, match="network.model"):
            resolve("lyapunov", {}, {})

    def test_worker_count_env_default(self, monkeypatch):
        monkeypatch.setenv("FIBRELAY_WORKERS", "4")
        params = parse_config("lyapunov", overrides={
            "network.model": "deterministic:c=1"})
        assert params.workers == 4

    def test_auto_seed_draws_fresh(self):
        a = parse_config("lyapunov", overrides={
            "network.model": "deterministic:c=1", "run.seed": "auto"})
        b = parse_config("lyapunov", overrides={
            "network.model": "deterministic:c=1", "run.seed": "auto"})
        assert a.seed != b.seed

    def test_manifest_round_trips_config(self, tmp_path):
        rc = main(["simulate", "--model", "rayleigh:mu=1.0", "--gain", "0.7",
                   "--n", "40", "--seed", "11", "--output-dir", str(tmp_path)])
        assert rc == 0
        reread = read_config_file(tmp_path / "manifest.json")
        params = resolve("simulate", reread)
        assert params.seed == 11
        assert params.gains.g == 0.7


class TestJson17g:
    def test_float_formatting(self):
        text = dumps_17g({"a": 1 / 3, "b": [0.1, 2], "c": "x"})
        assert "0.33333333333333331" in text
        assert json.loads(text)["a"] == 1 / 3

    def test_sorted_keys_and_digest_stability(self):
        a = {"x": 1.5, "y": 2}
        b = {"y": 2, "x": 1.5}
        assert dumps_17g(a) == dumps_17g(b)
        assert canonical_digest(a) == canonical_digest(b)
        assert canonical_digest(a) != canonical_digest({"x": 1.5, "y": 3})


class TestCommands:
    def test_lyapunov_stdout_json(self, capsys):
        rc = main(["lyapunov", "--model", "deterministic:c=1", "--gain", "0.5",
                   "--n", "2000", "--replicas", "2", "--kind", "tail_ratio"])
        assert rc == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["lambda_hat"] == pytest.approx(0.0, abs=1e-9)
        assert doc["estimator_kind"] == "tail_ratio"
        assert doc["model_spec"] == "deterministic:c=1"

    def test_sweep_values(self, capsys):
        rc = main(["sweep", "--model", "deterministic:c=1",
                   "--gain-grid", "0.25,0.5,1", "--n", "20000", "--replicas", "1"])
        assert rc == 0
        lines = capsys.readouterr().out.strip().split("\n")
        assert lines[0] == "g,lambda_hat,std_err"
        got = [float(line.split(",")[1]) for line in lines[1:]]
        want = [lambda_deterministic_closed_form(1.0, g) for g in (0.25, 0.5, 1.0)]
        for g_est, g_ref in zip(got, want):
            assert g_est == pytest.approx(g_ref, abs=1e-3)

    def test_simulate_reproducible(self, tmp_path, capsys):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        args = ["simulate", "--model", "rayleigh:mu=1.0", "--gain", "0.6",
                "--n", "50", "--trajectories", "2", "--seed", "5"]
        assert main(args + ["--output-dir", str(out1)]) == 0
        assert main(args + ["--output-dir", str(out2)]) == 0
        for name in ("trajectory_000.csv", "trajectory_001.csv"):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()
        manifest = load_manifest(out1 / "manifest.json")
        assert manifest["output_files"] == ["trajectory_000.csv", "trajectory_001.csv"]
        assert manifest["master_seed"] == 5

    def test_simulate_requires_output_dir(self, capsys):
        rc = main(["simulate", "--model", "deterministic:c=1", "--n", "10"])
        assert rc == 2
        assert "output-dir" in capsys.readouterr().err

    def test_calibrate_json(self, tmp_path, capsys):
        rc = main(["calibrate", "--model", "deterministic:c=1", "--n", "10000",
                   "--replicas", "1", "--tol", "1e-3",
                   "--output-dir", str(tmp_path)])
        assert rc == 0
        doc = json.loads((tmp_path / "calibration.json").read_text())
        assert abs(doc["g_star"] - 0.5) <= 1e-3
        assert doc["converged"] is True
        assert doc["bracket_history"]

    def test_verify_writes_reports_and_slopes(self, tmp_path, capsys):
        rc = main(["verify", "--model", "deterministic:c=1", "--gain", "0.5",
                   "--n", "5000", "--replicas", "2", "--output-dir", str(tmp_path)])
        assert rc == 0
        table = capsys.readouterr().out
        assert "capacity" in table and "power" in table and "consistent" in table
        cap = json.loads((tmp_path / "verify_capacity.json").read_text())
        pwr = json.loads((tmp_path / "verify_power.json").read_text())
        assert cap["verdict"] == "consistent" and pwr["verdict"] == "consistent"
        slopes = (tmp_path / "slopes.csv").read_text().strip().split("\n")
        assert slopes[0] == "replica,capacity_slope,power_slope"
        assert len(slopes) == 3

    def test_verify_inconsistent_exit_code(self, capsys):
        # with a vanishing band the growing chain's small-but-nonzero
        # capacity slope is judged inconsistent
        rc = main(["verify", "--model", "deterministic:c=1", "--gain", "1",
                   "--n", "4000", "--replicas", "2", "--slope-tol", "1e-9",
                   "--tolerance-sigma", "1e-6"])
        assert rc == 1

    def test_usage_error_exit_code(self, capsys):
        assert main(["lyapunov", "--model", "deterministic:c=1",
                     "--gain", "-1"]) == 2
        assert main(["lyapunov"]) == 2             # missing model
        assert main(["no-such-command"]) == 2

    def test_unbracketable_exit_code(self, capsys):
        rc = main(["calibrate", "--model", "deterministic:c=1e-9", "--n", "2000",
                   "--replicas", "1", "--max-doublings", "2"])
        assert rc == 3
        assert "sign change" in capsys.readouterr().err

    def test_validation_flag_gate(self, capsys):
        rc = main(["lyapunov", "--model", "signed:p=0.5", "--n", "2000",
                   "--replicas", "1"])
        assert rc == 2
        rc = main(["lyapunov", "--model", "signed:p=0.5", "--n", "2000",
                   "--replicas", "1", "--validation"])
        assert rc == 0

    def test_entry_point_subprocess(self):
        out = subprocess.run([sys.executable, "-m", "fibrelay", "--version"],
                             capture_output=True, text=True)
        assert out.returncode == 0
        assert "fibrelay" in out.stdout
