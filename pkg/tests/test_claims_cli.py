"""Tests for claims ingestion, serialization and the command-line surface."""

import json
import math

import numpy as np
import pytest

from specrisk import ClaimsFormatError, LtrcSample, WindowScheme, parse_claims, write_ltrc_csv
from specrisk.cli import main
from specrisk.config import load_config, model_from_config, scheme_from_config


class TestParseClaims:
    def test_raw_claims_uncensored_conversion(self, tmp_path):
        path = tmp_path / "claims.csv"
        path.write_text("claim\n600000\n900000\n")
        out = parse_claims(path, "raw", WindowScheme.fixed(500_000.0, math.inf))
        sample = out.groups["all"]
        assert sample.y.tolist() == [600000.0, 900000.0]
        assert sample.t.tolist() == [500000.0, 500000.0]
        assert sample.delta.tolist() == [1, 1]

    def test_raw_claims_marine_window(self, tmp_path):
        path = tmp_path / "claims.csv"
        path.write_text("claim\n0.5\n")
        out = parse_claims(path, "raw", WindowScheme.fixed(0.018, 31904.2))
        obs = list(out.groups["all"])[0]
        assert (obs.y, obs.t, obs.delta) == (0.5, 0.018, 1)

    def test_raw_claim_at_limit_is_censored(self, tmp_path):
        path = tmp_path / "claims.csv"
        path.write_text("claim\n40000\n")
        out = parse_claims(path, "raw", WindowScheme.fixed(0.018, 31904.2))
        obs = list(out.groups["all"])[0]
        assert (obs.y, obs.delta) == (31904.2, 0)

    def test_grouping_column(self, tmp_path):
        path = tmp_path / "claims.csv"
        path.write_text("y,t,delta,group\n2,1,1,1981\n3,1,0,1981\n5,2,1,1982\n")
        out = parse_claims(path, "ltrc")
        assert sorted(out.groups) == ["1981", "1982"]
        assert len(out.groups["1981"]) == 2

    def test_invariant_violations_rejected_with_line_numbers(self, tmp_path):
        path = tmp_path / "claims.csv"
        path.write_text("y,t,delta\n2,1,1\n1,5,1\n2,1,7\n")
        out = parse_claims(path, "ltrc")
        assert len(out.groups["all"]) == 1
        assert [line for line, _ in out.rejected] == [3, 4]

    def test_line_numbers_account_for_comment_lines(self, tmp_path):
        path = tmp_path / "claims.csv"
        path.write_text("# written by some tool\n# seed=1\ny,t,delta\n2,1,1\n1,5,1\n")
        out = parse_claims(path, "ltrc")
        assert [line for line, _ in out.rejected] == [5]

    def test_below_deductible_rejected(self, tmp_path):
        path = tmp_path / "claims.csv"
        path.write_text("claim\n400000\n600000\n")
        out = parse_claims(path, "raw", WindowScheme.fixed(500_000.0, math.inf))
        assert len(out.groups["all"]) == 1
        assert out.rejected[0][0] == 2

    def test_empty_file_rejected(self, tmp_path):
        path = tmp_path / "claims.csv"
        path.write_text("y,t,delta\n")
        with pytest.raises(ClaimsFormatError, match="no observations"):
            parse_claims(path, "ltrc")

    def test_missing_column(self, tmp_path):
        path = tmp_path / "claims.csv"
        path.write_text("y,t\n1,0\n")
        with pytest.raises(ClaimsFormatError, match="missing required column"):
            parse_claims(path, "ltrc")

    def test_malformed_row_reports_line(self, tmp_path):
        path = tmp_path / "claims.csv"
        path.write_text("y,t,delta\n1,0,1\nfoo,0,1\n")
        with pytest.raises(ClaimsFormatError, match=":3"):
            parse_claims(path, "ltrc")

    def test_raw_without_scheme(self, tmp_path):
        path = tmp_path / "claims.csv"
        path.write_text("claim\n1\n")
        with pytest.raises(ClaimsFormatError, match="window scheme"):
            parse_claims(path, "raw")


class TestRoundTrip:
    def test_serialize_parse_is_lossless(self, tmp_path):
        rng = np.random.default_rng(31)
        y = np.exp(rng.normal(size=40)) * math.pi
        t = y * rng.uniform(0.0, 1.0, size=40)
        d = rng.integers(0, 2, size=40)
        groups = {"a": LtrcSample(y[:20], t[:20], d[:20]), "b": LtrcSample(y[20:], t[20:], d[20:])}
        path = tmp_path / "out.csv"
        write_ltrc_csv(path, groups, header_lines=("seed=1",))
        parsed = parse_claims(path, "ltrc")
        for name, sample in groups.items():
            got = parsed.groups[name]
            assert np.array_equal(got.y, sample.y)
            assert np.array_equal(got.t, sample.t)
            assert np.array_equal(got.delta, sample.delta)


class TestConfigFiles:
    def test_load_and_build(self, tmp_path):
        path = tmp_path / "model.cfg"
        path.write_text(
            "# severity setup\nfamily = exp\nx0 = 1000\ntheta = 1000\nd = 4000\nu = 14000\n"
        )
        cfg = load_config(path)
        model = model_from_config(cfg)
        scheme = scheme_from_config(cfg)
        assert model.theta == 1000.0
        assert scheme.deductible == 4000.0 and scheme.limit == 14000.0

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "model.cfg"
        path.write_text("frobnicate = 3\n")
        with pytest.raises(ClaimsFormatError, match="unknown key"):
            load_config(path)


class TestCli:
    def _write_claims(self, tmp_path):
        path = tmp_path / "claims.csv"
        path.write_text(
            "claim,group\n600000,1981\n900000,1981\n750000,1981\n"
            "1200000,1982\n820000,1982\n510000,1982\n"
        )
        return path

    def test_estimate_writes_deterministic_files(self, tmp_path):
        claims = self._write_claims(tmp_path)
        args = [
            "estimate", "--input", str(claims), "--format", "raw",
            "--deductible", "500000", "--estimators", "prod", "--k", "1,5",
            "--bootstrap", "60", "--seed", "9",
        ]
        assert main(args + ["--out", str(tmp_path / "o1")]) == 0
        assert main(args + ["--out", str(tmp_path / "o2")]) == 0
        a = (tmp_path / "o1" / "estimates.csv").read_bytes()
        b = (tmp_path / "o2" / "estimates.csv").read_bytes()
        assert a == b
        payload = json.loads((tmp_path / "o1" / "estimates.json").read_text())
        assert payload["config"]["seed"] == 9
        assert len(payload["results"]) == 4

    def test_estimate_identical_claims_zero_width(self, tmp_path):
        claims = tmp_path / "claims.csv"
        claims.write_text("y,t,delta\n" + "700,100,1\n" * 12)
        code = main(
            [
                "estimate", "--input", str(claims), "--format", "ltrc",
                "--estimators", "prod", "--k", "1,5,100", "--bootstrap", "60",
                "--seed", "2", "--out", str(tmp_path / "out"),
            ]
        )
        assert code == 0
        rows = json.loads((tmp_path / "out" / "estimates.json").read_text())["results"]
        for row in rows:
            assert row["ci_low"] == row["ci_high"] == row["point"] == pytest.approx(700.0)

    def test_unknown_estimator_is_usage_error(self, tmp_path, capsys):
        claims = self._write_claims(tmp_path)
        with pytest.raises(SystemExit) as err:
            main(
                [
                    "estimate", "--input", str(claims), "--format", "raw",
                    "--deductible", "500000", "--estimators", "bogus",
                    "--out", str(tmp_path / "x"),
                ]
            )
        assert err.value.code == 2
        assert "valid names" in capsys.readouterr().err

    def test_invalid_grid_is_usage_error(self, tmp_path):
        with pytest.raises(SystemExit) as err:
            main(["simulate", "--design", "iid-exp", "--n", "0", "--out", str(tmp_path / "x")])
        assert err.value.code == 2

    def test_negative_k_is_usage_error(self, tmp_path):
        with pytest.raises(SystemExit) as err:
            main(["simulate", "--design", "iid-exp", "--k", "-3", "--out", str(tmp_path / "x")])
        assert err.value.code == 2

    def test_parametric_estimator_without_window_is_usage_error(self, tmp_path):
        claims = self._write_claims(tmp_path)
        with pytest.raises(SystemExit) as err:
            main(
                [
                    "estimate", "--input", str(claims), "--format", "ltrc",
                    "--estimators", "ml", "--out", str(tmp_path / "x"),
                ]
            )
        assert err.value.code == 2

    def test_simulate_writes_results_and_figure_data(self, tmp_path):
        code = main(
            [
                "simulate", "--design", "iid-exp", "--n", "20", "--k", "1",
                "--reps", "10", "--seed", "7", "--out", str(tmp_path / "sim"),
            ]
        )
        assert code == 0
        text = (tmp_path / "sim" / "results.csv").read_text()
        assert "# master_seed=7" in text
        assert (tmp_path / "sim" / "rmse_log_ratios.csv").exists()

    def test_simulate_worker_invariance(self, tmp_path):
        base = [
            "simulate", "--design", "iid-exp", "--n", "15", "--k", "1",
            "--reps", "8", "--seed", "3",
        ]
        assert main(base + ["--workers", "1", "--out", str(tmp_path / "w1")]) == 0
        assert main(base + ["--workers", "2", "--out", str(tmp_path / "w2")]) == 0
        a = (tmp_path / "w1" / "results.csv").read_bytes()
        b = (tmp_path / "w2" / "results.csv").read_bytes()
        assert a == b

    def test_dependent_simulate_records_calibrated_mu(self, tmp_path):
        code = main(
            [
                "simulate", "--design", "dependent", "--n", "15", "--k", "1",
                "--reps", "6", "--seed", "5", "--out", str(tmp_path / "dep"),
            ]
        )
        assert code == 0
        payload = json.loads((tmp_path / "dep" / "results.json").read_text())
        assert 0.3 < float(payload["config"]["mu"]) < 1.0

    def test_coverage_command(self, tmp_path):
        code = main(
            [
                "coverage", "--design", "iid-exp", "--n", "20", "--k", "1",
                "--reps", "6", "--bootstrap", "55", "--seed", "4",
                "--out", str(tmp_path / "cov"),
            ]
        )
        assert code == 0
        text = (tmp_path / "cov" / "coverage.csv").read_text()
        assert "coverage" in text.splitlines()[-2] or "coverage" in text

    def test_calibrate_command(self, tmp_path):
        code = main(["calibrate", "--target-alpha", "0.3", "--out", str(tmp_path / "cal")])
        assert code == 0
        payload = json.loads((tmp_path / "cal" / "calibration.json").read_text())
        assert 0.3 < payload["results"]["mu"] < 1.0

    def test_env_var_overrides_seed_default(self, tmp_path, monkeypatch):
        claims = self._write_claims(tmp_path)
        monkeypatch.setenv("SPECRISK_SEED", "4242")
        code = main(
            [
                "estimate", "--input", str(claims), "--format", "raw",
                "--deductible", "500000", "--estimators", "prod", "--k", "1",
                "--bootstrap", "60", "--out", str(tmp_path / "env"),
            ]
        )
        assert code == 0
        payload = json.loads((tmp_path / "env" / "estimates.json").read_text())
        assert payload["config"]["seed"] == 4242

    def test_compute_failure_exit_code(self, tmp_path):
        missing = tmp_path / "nope.csv"
        code = main(
            ["estimate", "--input", str(missing), "--format", "ltrc", "--out", str(tmp_path / "x")]
        )
        assert code == 1

    def test_estimate_on_synthetic_window_data_matches_oracle(self, tmp_path):
        # losses above a deductible with no cap follow a shifted exponential
        # anchored at the deductible; the closed form of its spectral value
        # is an independent oracle for the product-limit point estimate
        from test_severity import exp_srm_closed_form

        rng = np.random.default_rng(123)
        d, theta, n = 4000.0, 1000.0, 10_000
        claims = d + rng.exponential(theta, size=n)
        path = tmp_path / "claims.csv"
        path.write_text("claim\n" + "\n".join(f"{c:.17g}" for c in claims) + "\n")
        code = main(
            [
                "estimate", "--input", str(path), "--format", "raw",
                "--deductible", str(d), "--estimators", "prod", "--k", "1",
                "--bootstrap", "60", "--seed", "5", "--out", str(tmp_path / "syn"),
            ]
        )
        assert code == 0
        row = json.loads((tmp_path / "syn" / "estimates.json").read_text())["results"][0]
        oracle = exp_srm_closed_form(d, theta, 1.0)
        assert abs(row["point"] - oracle) <= 3.0 * row["std_error"]
