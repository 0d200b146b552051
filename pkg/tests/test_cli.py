from pathlib import Path

from trcm.cli import EXIT_IO, EXIT_OK, EXIT_VALIDATION, load_config_file, main


def run_cli(*args):
    return main(list(args))


class TestRunCommand:
    def test_basic_run_writes_outputs(self, tmp_path, capsys):
        out = tmp_path / "out"
        code = run_cli(
            "run", "--rounds", "120", "--seeds", "2", "--providers", "3",
            "--dim", "3", "--mu", "0.05", "--alpha", "0.75",
            "--reward", "gaussian", "--cost-family", "uniform",
            "--out", str(out), "--base-seed", "7",
        )
        assert code == EXIT_OK
        for name in (
            "metrics_by_round.csv", "runs_summary.csv",
            "cum_regret.svg", "round_regret.svg", "revenue.svg",
        ):
            assert (out / name).exists()

    def test_rerun_is_byte_identical(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        args = ("run", "--rounds", "100", "--seeds", "2", "--providers", "3", "--dim", "3")
        assert run_cli(*args, "--out", str(a)) == EXIT_OK
        assert run_cli(*args, "--out", str(b)) == EXIT_OK
        for f in a.iterdir():
            assert f.read_bytes() == (b / f.name).read_bytes()

    def test_config_file_with_flag_override(self, tmp_path):
        cfg = tmp_path / "sweep.cfg"
        cfg.write_text(
            "# experiment\nrounds=100\nseeds=2\nproviders=3\ndim=3\n"
            f"out_dir={tmp_path / 'from_file'}\n",
            encoding="utf-8",
        )
        out = tmp_path / "override"
        code = run_cli("run", "--config", str(cfg), "--out", str(out))
        assert code == EXIT_OK
        assert out.exists()
        assert not (tmp_path / "from_file").exists()

    def test_validation_error_exit_code(self, tmp_path):
        assert run_cli("run", "--rounds", "2", "--providers", "4",
                       "--out", str(tmp_path)) == EXIT_VALIDATION

    def test_usage_error_exit_code(self):
        assert run_cli("run", "--reward", "poisson") == EXIT_VALIDATION

    def test_unwritable_output_is_io_error(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        code = run_cli("run", "--rounds", "50", "--seeds", "1", "--providers", "2",
                       "--dim", "2", "--out", str(blocker / "nested"))
        assert code == EXIT_IO


class TestAuditCommand:
    def test_epir_audit_passes(self, tmp_path):
        out = tmp_path / "audit"
        code = run_cli("audit", "--check", "epir", "--rounds", "400",
                       "--providers", "3", "--dim", "3", "--out", str(out))
        assert code == EXIT_OK
        csv = out / "audit_epir.csv"
        assert csv.exists()
        lines = csv.read_text().splitlines()
        assert lines[-1].split(",")[0] == "summary"

    def test_monotonicity_audit_small(self, tmp_path):
        code = run_cli("audit", "--check", "monotonicity", "--trials", "4",
                       "--rounds", "400", "--out", str(tmp_path))
        assert code == EXIT_OK
        assert (tmp_path / "audit_monotonicity.csv").exists()

    def test_agreement_audit_small(self, tmp_path):
        code = run_cli("audit", "--check", "agreement", "--trials", "40",
                       "--rounds", "600", "--out", str(tmp_path))
        assert code == EXIT_OK

    def test_unknown_check_rejected(self, tmp_path):
        assert run_cli("audit", "--check", "bogus") == EXIT_VALIDATION


class TestConfigFile:
    def test_parses_and_coerces(self, tmp_path):
        p = tmp_path / "c.cfg"
        p.write_text("rounds=500\nmu=0.1\nreward=exponential\n# note\n\n", encoding="utf-8")
        values = load_config_file(str(p))
        assert values == {"rounds": 500, "mu": 0.1, "reward": "exponential"}

    def test_rejects_unknown_keys(self, tmp_path):
        p = tmp_path / "c.cfg"
        p.write_text("horizon=5\n", encoding="utf-8")
        try:
            load_config_file(str(p))
        except ValueError as exc:
            assert "horizon" in str(exc)
        else:
            raise AssertionError("expected ValueError")

    def test_rejects_malformed_lines(self, tmp_path):
        p = tmp_path / "c.cfg"
        p.write_text("rounds 500\n", encoding="utf-8")
        try:
            load_config_file(str(p))
        except ValueError as exc:
            assert "key=value" in str(exc)
        else:
            raise AssertionError("expected ValueError")
