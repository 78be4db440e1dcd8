import json
import math

import numpy as np
import pytest

from pcl.cli import EXIT_INVALID, EXIT_LEAKAGE, EXIT_OK, main
from pcl.evolution import run_trajectory
from pcl.experiments import (
    ConfigError,
    build_collision,
    landscape_temperature,
    load_config,
    parse_override,
    read_csv,
    run_experiment,
)
from pcl.phaseonium import PhaseoniumParams, steady_temperature
from pcl.plotting import render

HOT_PHI = 2.404315987


def small(**extra):
    overrides = ["space.cutoff=20", "n_steps=150", "initial_temperatures=[0.5, 0.5]"]
    overrides += [f"{k}={v}" for k, v in extra.items()]
    return load_config(None, overrides)


class TestConfig:
    def test_override_parsing(self):
        assert parse_override("params.alpha=0.3") == {"params": {"alpha": 0.3}}
        assert parse_override("initial_temperatures=[1, 2]") == {"initial_temperatures": [1, 2]}
        assert parse_override("noise.mean=") == {"noise": {"mean": None}}
        with pytest.raises(ConfigError):
            parse_override("alpha")

    def test_precedence(self, tmp_path):
        path = tmp_path / "cfg.yaml"
        path.write_text("seed: 4\nparams:\n  alpha: 0.2\nspace:\n  cutoff: 22\n")
        cfg = load_config(str(path), ["params.alpha=0.3"], seed=9)
        assert cfg["params"] == {"alpha": 0.3, "phi": HOT_PHI, "epsilon": 0.0}
        assert cfg["space"] == {"cutoff": 22, "margin": 2}
        assert cfg["seed"] == 9

    def test_non_mapping_file(self, tmp_path):
        path = tmp_path / "cfg.yaml"
        path.write_text("- 1\n- 2\n")
        with pytest.raises(ConfigError):
            load_config(str(path))

    def test_unknown_kind(self, tmp_path):
        with pytest.raises(ConfigError):
            run_experiment("nope", load_config(), tmp_path)


class TestCli:
    def test_ok(self, tmp_path, capsys):
        code = main(["trajectory", "--out", str(tmp_path), "--set", "space.cutoff=20", "--set", "n_steps=40",
                     "--set", "initial_temperatures=[0.5]", "--seed", "3"])
        assert code == EXIT_OK
        record = json.loads(capsys.readouterr().out)
        assert record["seed"] == 3 and record["artifacts"] == ["trajectory.csv"]
        assert json.loads((tmp_path / "run.json").read_text())["summary"] == record["summary"]

    @pytest.mark.parametrize("override", ["params.alpha=1.5", "dt=-0.1", "params.alpha=abc", "space.cutoff=1"])
    def test_invalid(self, tmp_path, override, capsys):
        assert main(["trajectory", "--out", str(tmp_path), "--set", override]) == EXIT_INVALID
        assert "invalid configuration" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert main(["trajectory", "--config", str(tmp_path / "none.yaml")]) == EXIT_INVALID

    def test_leakage(self, tmp_path, capsys):
        code = main(["trajectory", "--out", str(tmp_path), "--set", "params.alpha=0.9", "--set", "space.cutoff=12"])
        assert code == EXIT_LEAKAGE
        assert "leakage" in capsys.readouterr().err

    def test_env_out(self, tmp_path, monkeypatch):
        monkeypatch.setenv("PCL_OUT", str(tmp_path))
        assert main(["landscape", "--set", "landscape.alpha=[0.25]", "--set", "landscape.phi=[1.0]"]) == EXIT_OK
        assert (tmp_path / "landscape" / "landscape.csv").exists()


class TestLandscape:
    def test_values(self, tmp_path):
        cfg = load_config(None, ["landscape.alpha=[0.0, 0.25, 0.9]", f"landscape.phi=[0.0, {HOT_PHI}]"])
        record = run_experiment("landscape", cfg, tmp_path)
        cols = read_csv(tmp_path / "landscape.csv")
        table = {(float(a), float(p)): t for a, p, t in zip(cols["alpha"], cols["phi"], cols["T"])}
        assert abs(float(table[(0.25, HOT_PHI)]) - 1.5) < 2e-4
        assert float(table[(0.0, 0.0)]) == 0.0 and float(table[(0.0, HOT_PHI)]) == 0.0
        assert table[(0.9, 0.0)] == "inf"
        assert record.summary["divergent"] == 2

    def test_matches_steady_temperature(self):
        for alpha, phi in [(0.25, 1.585589386), (0.4, 0.3), (0.1, -2.0)]:
            assert landscape_temperature(alpha, phi) == pytest.approx(steady_temperature(PhaseoniumParams(alpha, phi)), abs=1e-12)

    def test_bad_alpha(self, tmp_path):
        with pytest.raises(ConfigError):
            run_experiment("landscape", load_config(None, ["landscape.alpha=[1.2]"]), tmp_path)


class TestProtocol:
    def test_solve_alpha(self, tmp_path):
        cfg = small(**{"protocol.target": 0.5, "protocol.phi": 1.5707963267948966, "n_steps": 3000})
        record = run_experiment("protocol", cfg, tmp_path)
        assert record.summary["alpha"] == pytest.approx(0.2517517, abs=1e-6)
        assert record.summary["rel_error_T1"] < 1e-3

    def test_solve_phi(self, tmp_path):
        cfg = small(**{"protocol.target": 0.5, "protocol.alpha": 0.25, "n_steps": 3000})
        record = run_experiment("protocol", cfg, tmp_path)
        assert record.summary["phi"] == pytest.approx(1.5855893865, abs=1e-8)
        assert record.summary["rel_error_T1"] < 1e-3 and record.summary["rel_error_T2"] < 1e-3

    def test_unreachable(self, tmp_path):
        with pytest.raises(ValueError):
            run_experiment("protocol", small(**{"protocol.target": 0.5, "protocol.alpha": 0.7}), tmp_path)


class TestSweep:
    def test_failures_recorded(self, tmp_path):
        cfg = small(**{"sweep.axis": "alpha", "sweep.values": "[0.25, 1.5]"})
        record = run_experiment("sweep", cfg, tmp_path)
        cols = read_csv(tmp_path / "sweep.csv")
        assert cols["status"][0] == "ok" and cols["status"][1].startswith("error")
        assert record.summary["failed"] == 1

    def test_single_cell_equals_trajectory(self, tmp_path):
        cfg = small(**{"sweep.axis": "dt", "sweep.values": "[0.6]"})
        run_experiment("sweep", cfg, tmp_path)
        cols = read_csv(tmp_path / "sweep.csv")
        ref = run_trajectory(build_collision({**cfg, "dt": 0.6}))
        assert float(cols["T1"][0]) == ref.T1[-1] and float(cols["T2"][0]) == ref.T2[-1]

    def test_phi_axis_matches_landscape(self, tmp_path):
        phis = [1.2, 1.585589386, 2.0]
        cfg = small(**{"sweep.axis": "phi", "sweep.values": str(phis), "n_steps": 3000, "dt": 0.6})
        run_experiment("sweep", cfg, tmp_path)
        cols = read_csv(tmp_path / "sweep.csv")
        for phi, t1, t2 in zip(phis, cols["T1"], cols["T2"]):
            expected = landscape_temperature(0.25, phi)
            assert abs(float(t1) - expected) < 0.01 * expected
            assert abs(float(t2) - expected) < 0.01 * expected

    def test_bad_axis(self, tmp_path):
        with pytest.raises(ConfigError):
            run_experiment("sweep", small(**{"sweep.axis": "colour"}), tmp_path)


class TestDeterminism:
    @pytest.mark.parametrize("kind", ["noisy-dt", "noisy-phi"])
    def test_jobs_do_not_change_bytes(self, tmp_path, kind):
        cfg = small(**{"n_steps": 60, "noise.n_runs": 3, "noise.tail": 20, "seed": 11})
        run_experiment(kind, cfg, tmp_path / "a", jobs=1)
        run_experiment(kind, cfg, tmp_path / "b", jobs=2)
        for name in ("ensemble.csv", "reference.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_seed_changes_output(self, tmp_path):
        base = {"n_steps": 40, "noise.n_runs": 2, "noise.tail": 10}
        run_experiment("noisy-phi", small(**base, seed=1), tmp_path / "a")
        run_experiment("noisy-phi", small(**base, seed=2), tmp_path / "b")
        assert (tmp_path / "a" / "ensemble.csv").read_bytes() != (tmp_path / "b" / "ensemble.csv").read_bytes()

    def test_ensemble_layout(self, tmp_path):
        run_experiment("noisy-dt", small(**{"n_steps": 30, "noise.n_runs": 2, "noise.tail": 10}), tmp_path)
        cols = read_csv(tmp_path / "ensemble.csv")
        assert set(cols["run_id"]) == {"0", "1", "mean", "std"}
        assert len(cols["run_id"]) == 4 * 31


class TestGaussianCommand:
    def test_from_rates(self, tmp_path):
        cfg = load_config(None, ["gaussian.gamma_alpha_prime=0.05", "gaussian.gamma_beta_prime=0.15",
                                 "gaussian.t_total=5.0", "initial_temperatures=[0.6, 0.3]"])
        record = run_experiment("gaussian", cfg, tmp_path)
        assert record.summary["steady_n1"] == pytest.approx(0.5, abs=1e-9)
        assert record.summary["steady_MI"] < 1e-12
        cols = read_csv(tmp_path / "gaussian.csv")
        assert len(cols["t"]) == 51
        assert max(float(v) for v in cols["MI"]) > 0

    def test_from_collision_params(self, tmp_path):
        record = run_experiment("gaussian", load_config(None, ["gaussian.t_total=1.0"]), tmp_path)
        assert record.summary["T_phi"] == pytest.approx(1.5, abs=2e-4)

    def test_unstable(self, tmp_path):
        cfg = load_config(None, ["gaussian.gamma_alpha_prime=0.2", "gaussian.gamma_beta_prime=0.1", "gaussian.t_total=1.0"])
        record = run_experiment("gaussian", cfg, tmp_path)
        assert record.summary["stable"] is False
        assert "steady_n1" not in record.summary


class TestFigure:
    def test_fig3_layout(self, tmp_path):
        cfg = load_config(None, ["figure.n_steps=40", "figure.cutoff=20"])
        record = run_experiment("figure", cfg, tmp_path, plot=True)
        assert len(record.summary["panels"]) == 6
        assert len(record.summary["runs"]) == 18
        assert {r["curve"] for r in record.summary["runs"]} == {"hot", "cold"}
        assert (tmp_path / "row2_dt1.30_hot.csv").exists()
        assert any(a.endswith(".png") for a in record.artifacts)

    def test_unknown(self, tmp_path):
        with pytest.raises(ConfigError):
            run_experiment("figure", load_config(None, ["figure.name=fig9"]), tmp_path)


class TestPlots:
    @pytest.mark.parametrize("kind, extra", [
        ("trajectory", {}),
        ("landscape", {"landscape.alpha": "[0.1, 0.2]", "landscape.phi": "[0.0, 1.0]"}),
        ("sweep", {"sweep.values": "[0.4, 0.6]"}),
        ("noisy-dt", {"n_steps": 20, "noise.n_runs": 2, "noise.tail": 5}),
        ("gaussian", {"gaussian.t_total": 1.0}),
    ])
    def test_rerender_from_csv(self, tmp_path, kind, extra):
        record = run_experiment(kind, small(**extra), tmp_path)
        pngs = render(kind, tmp_path, record)
        assert pngs
        for name in pngs:
            assert (tmp_path / name).read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
