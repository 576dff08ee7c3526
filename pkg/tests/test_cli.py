"""CLI contract: exit codes, report files, reproducibility, diff."""

import json
import os

import pytest

from dirichlet_lab.cli import main
from dirichlet_lab.reports import SchemaError, report_diff


def run(args):
    return main([str(a) for a in args])


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


class TestGapCommand:
    def test_summary_fields(self, tmp_path):
        out = tmp_path / "gap"
        assert run(["gap", "--alpha", "0.7,1.3,2.1", "--out", out]) == 0
        summary = read_json(out / "gap_summary.json")
        assert summary["gap"] == pytest.approx(2.1, abs=1e-12)
        assert summary["method"] == "recursion+eigen"
        assert summary["agrees"] is True
        assert (out / "gap_detail.csv").exists()
        assert (out / "gap_figure.png").exists()
        assert (out / "run_meta.json").exists()

    def test_single_coordinate_gap(self, tmp_path):
        out = tmp_path / "gap1"
        assert run(["gap", "--alpha", "1.0,1.0", "--out", out]) == 0
        assert read_json(out / "gap_summary.json")["gap"] == pytest.approx(2.0)

    def test_reproducible_bytes(self, tmp_path):
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        run(["gap", "--alpha", "0.7,1.3,2.1", "--seed", 5, "--out", out_a])
        run(["gap", "--alpha", "0.7,1.3,2.1", "--seed", 5, "--out", out_b])
        for name in ("gap_summary.json", "gap_detail.csv", "gap_figure.png"):
            assert (out_a / name).read_bytes() == (out_b / name).read_bytes(), name

    def test_tiny_tolerance_fails_assertion(self, tmp_path):
        code = run(
            ["gap", "--alpha", "0.7,1.3,2.1", "--tolerance", "1e-30",
             "--out", tmp_path / "strict"]
        )
        assert code == 5

    def test_no_figures_flag(self, tmp_path):
        out = tmp_path / "nofig"
        run(["gap", "--alpha", "0.7,1.3,2.1", "--no-figures", "--out", out])
        assert not (out / "gap_figure.png").exists()


class TestValidationAndParseErrors:
    def test_zero_alpha_is_validation_error(self, tmp_path, capsys):
        code = run(["gap", "--alpha", "0.7,0,2.1", "--out", tmp_path / "bad"])
        assert code == 3
        assert "alpha" in capsys.readouterr().err

    def test_malformed_config_is_parse_error(self, tmp_path):
        cfg = tmp_path / "broken.json"
        cfg.write_text("{not json")
        assert run(["gap", "--config", cfg, "--out", tmp_path / "o"]) == 2

    def test_missing_config_is_parse_error(self, tmp_path):
        assert run(["gap", "--config", tmp_path / "nope.json", "--out", tmp_path / "o"]) == 2

    def test_kind_mismatch_is_validation_error(self, tmp_path):
        cfg = tmp_path / "kind.json"
        cfg.write_text(json.dumps({"kind": "spectrum", "alpha": ["1", "1", "1"]}))
        assert run(["gap", "--config", cfg, "--out", tmp_path / "o"]) == 3


class TestChainCommands:
    def test_chain_gap_summary(self, tmp_path):
        out = tmp_path / "cg"
        cfg = tmp_path / "cg.json"
        cfg.write_text(json.dumps({"alpha": ["0.7", "1.3", "2.1"], "M": 6}))
        assert run(["chain-gap", "--config", cfg, "--out", out]) == 0
        summary = read_json(out / "chain_gap_summary.json")
        assert summary["gap"] == pytest.approx(2.1, abs=1e-8)
        assert summary["detailed_balance_violation"] < 1e-12
        assert summary["states"] == 28

    def test_detailed_balance_summary(self, tmp_path):
        out = tmp_path / "db"
        assert run(["detailed-balance", "--alpha", "1.1,0.6,2.0", "--M", 8,
                    "--out", out]) == 0
        summary = read_json(out / "detailed_balance_summary.json")
        assert summary["max_violation"] < 1e-12
        assert summary["perturbed_violation"] > 1e-3
        assert summary["reversible"] is True


class TestSimulateAndDecay:
    def test_simulate_report(self, tmp_path):
        out = tmp_path / "sim"
        cfg = tmp_path / "sim.json"
        cfg.write_text(json.dumps({
            "alpha": ["1", "1", "1"], "horizon": 1.0, "paths": 400,
            "dt": 2e-3, "record_stride": 100,
        }))
        assert run(["simulate", "--config", cfg, "--out", out]) == 0
        summary = read_json(out / "simulate_summary.json")
        assert summary["within_6_se"] is True
        detail = (out / "simulate_detail.csv").read_text().splitlines()
        assert detail[0].startswith("time,mean_x1,mean_x2,se_x1")

    def test_decay_fit_report(self, tmp_path):
        out = tmp_path / "dk"
        cfg = tmp_path / "dk.json"
        cfg.write_text(json.dumps({
            "alpha": ["0.7", "1.3", "2.1"], "observable": "u1", "horizon": 0.4,
            "dt": 1e-3, "outer": 64, "inner": 8, "record_stride": 20,
        }))
        assert run(["decay-fit", "--config", cfg, "--out", out]) == 0
        summary = read_json(out / "decay_fit_summary.json")
        assert summary["target"] == pytest.approx(2.1)
        assert summary["rate"] > 0

    def test_unknown_observable_is_validation_error(self, tmp_path):
        cfg = tmp_path / "bad.json"
        cfg.write_text(json.dumps({"alpha": ["1", "1", "1"], "observable": "w9"}))
        assert run(["decay-fit", "--config", cfg, "--out", tmp_path / "o"]) == 3

    def test_inconclusive_fit_is_numerical_failure(self, tmp_path, capsys):
        cfg = tmp_path / "short.json"
        cfg.write_text(json.dumps({
            "alpha": ["0.7", "1.3", "2.1"], "observable": "u1", "horizon": 0.02,
            "dt": 1e-3, "record_stride": 10, "outer": 16, "inner": 4,
            "x0_law": "point", "burn_in": 0.019,
        }))
        assert run(["decay-fit", "--config", cfg, "--out", tmp_path / "o"]) == 4
        assert "numerical failure" in capsys.readouterr().err


class TestPoincareCommand:
    def test_ratios(self, tmp_path):
        out = tmp_path / "pc"
        cfg = tmp_path / "pc.json"
        cfg.write_text(json.dumps({
            "alpha": ["0.7", "1.3", "2.1"], "n_samples": 50_000, "mc_tolerance": 0.05,
        }))
        assert run(["poincare", "--config", cfg, "--out", out]) == 0
        summary = read_json(out / "poincare_summary.json")
        assert summary["expected"] == [pytest.approx(2.1), pytest.approx(4.1)]
        assert summary["exact_within_tolerance"] is True
        assert summary["mc_within_tolerance"] is True


class TestInfiniteSweep:
    def test_sweep_and_witness(self, tmp_path):
        out = tmp_path / "inf"
        cfg = tmp_path / "inf.json"
        cfg.write_text(json.dumps({
            "gem": {"family": "geometric", "c": 1.0, "r": 0.5, "alpha_inf": 0.5},
            "points": [[2, 6, 0.25], [3, 6, 0.25]],
            "paths": 150, "dt": 2e-3,
        }))
        assert run(["infinite-sweep", "--config", cfg, "--threads", 2, "--out", out]) == 0
        summary = read_json(out / "infinite_sweep_summary.json")
        assert summary["all_satisfied"] is True
        assert summary["truncation_gaps"]["2"] == pytest.approx(0.5)
        detail = (out / "infinite_sweep_detail.csv").read_text().splitlines()
        assert detail[0] == "m,n,T,bound,estimate,se"
        assert len(detail) == 3


class TestDiff:
    def test_identical_reports_empty_diff(self, tmp_path, capsys):
        out = tmp_path / "g"
        run(["gap", "--alpha", "0.7,1.3,2.1", "--out", out])
        capsys.readouterr()
        code = run(["diff", out / "gap_summary.json", out / "gap_summary.json"])
        assert code == 0
        assert json.loads(capsys.readouterr().out) == {}

    def test_permuted_alpha_leaves_gap_unchanged(self, tmp_path):
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        run(["gap", "--alpha", "0.7,1.3,2.1", "--out", out_a])
        run(["gap", "--alpha", "1.3,0.7,2.1", "--out", out_b])
        diff = report_diff(
            out_a / "gap_summary.json", out_b / "gap_summary.json", tolerance=1e-10
        )
        assert any(key.startswith("alpha") for key in diff)
        assert not any(key.startswith("gap") for key in diff)

    def test_differing_reports_exit_five(self, tmp_path):
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        run(["gap", "--alpha", "0.7,1.3,2.1", "--out", out_a])
        run(["gap", "--alpha", "0.7,1.3,0.9", "--out", out_b])
        code = run(["diff", out_a / "gap_summary.json", out_b / "gap_summary.json"])
        assert code == 5

    def test_schema_mismatch_raises(self, tmp_path):
        a = tmp_path / "a.json"
        b = tmp_path / "b.json"
        a.write_text(json.dumps({"x": 1.0}))
        b.write_text(json.dumps({"y": 1.0}))
        with pytest.raises(SchemaError):
            report_diff(a, b)
        assert run(["diff", a, b]) == 3


def test_outdir_env_variable(tmp_path, monkeypatch):
    monkeypatch.setenv("DIRICHLET_LAB_OUTDIR", str(tmp_path / "envroot"))
    assert run(["gap", "--alpha", "0.7,1.3,2.1"]) == 0
    assert (tmp_path / "envroot" / "gap" / "gap_summary.json").exists()
    assert os.path.isfile(tmp_path / "envroot" / "gap" / "run_meta.json")
