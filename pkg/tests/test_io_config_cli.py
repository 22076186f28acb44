import json
from pathlib import Path

import numpy as np
import pytest

from impactflow import ModelParams, simulate_tape
from impactflow.cli import run_cli
from impactflow.config import RunConfig, config_from_dict, default_config, read_config, write_config
from impactflow.errors import ConfigurationError, TapeFormatError
from impactflow.tapeio import (
    read_metaorders_csv,
    read_price_csv,
    read_tape_csv,
    tapes_equal,
    write_metaorders_csv,
    write_price_csv,
    write_tape_csv,
)


@pytest.fixture(scope="module")
def tiny_tape():
    p = ModelParams(nu=1.0, phi_child=10.0, mu1=1.5, lam=0.0, sigma_logq=1.0, Gamma_amp=0.0, seed=313)
    return simulate_tape(p, 5000)


class TestTapeCsv:
    def test_round_trip(self, tiny_tape, tmp_path):
        path = tmp_path / "t.csv"
        write_tape_csv(tiny_tape, path)
        back, price = read_tape_csv(path)
        assert price is None
        assert tapes_equal(tiny_tape, back)

    def test_round_trip_with_price(self, tiny_tape, tmp_path):
        path = tmp_path / "t.csv"
        price = np.linspace(0, 1, tiny_tape.n_trades) * np.pi
        write_tape_csv(tiny_tape, path, price=price)
        back, p2 = read_tape_csv(path)
        assert np.array_equal(p2, price)

    def test_external_tape_without_meta(self, tmp_path):
        path = tmp_path / "ext.csv"
        path.write_text(
            "trade_idx,time,metaorder_id,sign,volume,price\n"
            "0,0.5,,1,2.0,\n1,1.5,,-1,1.0,\n2,2.0,,1,3.5,\n"
        )
        tape, _ = read_tape_csv(path)
        assert tape.n_trades == 3
        assert tape.metaorders is None
        assert np.all(tape.meta_ids == -1)

    def test_bad_sign_rejected_with_line(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text(
            "trade_idx,time,metaorder_id,sign,volume,price\n0,0.5,,1,2.0,\n1,1.5,,0,1.0,\n"
        )
        with pytest.raises(TapeFormatError, match=":3"):
            read_tape_csv(path)

    def test_bad_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(TapeFormatError, match="header"):
            read_tape_csv(path)

    def test_metaorders_round_trip(self, tiny_tape, tmp_path):
        path = tmp_path / "m.csv"
        write_metaorders_csv(tiny_tape.metaorders, path)
        back = read_metaorders_csv(path)
        assert np.array_equal(back.start_times, tiny_tape.metaorders.start_times)
        assert np.array_equal(back.durations, tiny_tape.metaorders.durations)
        assert np.array_equal(back.child_volumes, tiny_tape.metaorders.child_volumes)

    def test_price_csv_round_trip(self, tmp_path):
        path = tmp_path / "p.csv"
        idx = np.array([0, 10, 20])
        pr = np.array([0.1, -2.5, 3.14159])
        write_price_csv(idx, pr, path)
        i2, p2 = read_price_csv(path)
        assert np.array_equal(i2, idx)
        assert np.array_equal(p2, pr)


class TestConfig:
    def test_minimal_config_fills_defaults(self):
        cfg = config_from_dict({"mu1": 1.6})
        assert cfg.params.mu1 == 1.6
        assert cfg.horizon_trades == 1_000_000
        assert cfg.a_grid[1] == 0.25

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigurationError, match="bogus_key"):
            config_from_dict({"bogus_key": 1})

    def test_invalid_mu1_names_key(self):
        with pytest.raises(ConfigurationError, match="mu1"):
            config_from_dict({"mu1": 0.9})

    def test_round_trip_canonical(self, tmp_path):
        cfg = default_config()
        path = tmp_path / "c.json"
        write_config(cfg, path)
        first = path.read_bytes()
        cfg2 = read_config(path)
        write_config(cfg2, path)
        assert path.read_bytes() == first

    def test_lambda_key_maps(self):
        cfg = config_from_dict({"lambda": 0.2, "mu_floor": 1.1})
        assert cfg.params.lam == 0.2

    def test_grid_validation(self):
        with pytest.raises(ConfigurationError, match="T_grid"):
            config_from_dict({"T_grid": [64, 32]})
        with pytest.raises(ConfigurationError, match="fit_range"):
            config_from_dict({"fit_range": [100]})


class TestCli:
    def _write_cfg(self, tmp_path, **over):
        doc = {
            "nu": 0.5,
            "phi_child": 2.0,
            "mu1": 1.5,
            "lambda": 0.0,
            "sigma_logq": 0.0,
            "Gamma_amp": 0.0,
            "theta0": 1.0,
            "seed": 99,
            "horizon_trades": 40_000,
            "n_realizations": 2,
            "T_grid": [16, 32, 64, 128, 256, 512, 1024],
            "a_grid": [0.0, 0.5, 1.0],
            "fit_range": [16, 1024],
            "max_windows": 128,
        }
        doc.update(over)
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(doc))
        return path

    def test_unknown_subcommand_exit_1(self, capsys):
        assert run_cli(["frobnicate"]) == 1

    def test_selftest_passes(self, capsys):
        assert run_cli(["selftest"]) == 0
        out = capsys.readouterr().out
        assert "PASS" in out and "FAIL " not in out

    def test_pipeline_end_to_end(self, tmp_path, capsys):
        cfg = self._write_cfg(tmp_path)
        outdir = tmp_path / "tapes"
        assert run_cli(["simulate", "--config", str(cfg), "--out", str(outdir)]) == 0
        assert (outdir / "tape_000.csv").exists()
        assert (outdir / "run.json").exists()
        adir = tmp_path / "analysis"
        assert run_cli(["analyze", "--tape", str(outdir), "--config", str(cfg), "--out", str(adir)]) == 0
        assert (adir / "surfaces.csv").exists()
        assert (adir / "exponents.csv").exists()
        pred = tmp_path / "pred.csv"
        assert run_cli(["predict", "--config", str(cfg), "--out", str(pred)]) == 0
        report = tmp_path / "report.json"
        code = run_cli(["report", "--measured", str(adir), "--pred", str(pred), "--out", str(report)])
        assert code in (0, 4)
        doc = json.loads(report.read_text())
        assert doc["entries"]
        assert any(e["prediction"] is not None for e in doc["entries"])

    def test_predict_default_config_sign_variance_row(self, tmp_path):
        cfgp = tmp_path / "d.json"
        write_config(default_config(), cfgp)
        out = tmp_path / "pred.csv"
        assert run_cli(["predict", "--config", str(cfgp), "--out", str(out)]) == 0
        rows = [ln.split(",") for ln in out.read_text().splitlines()[1:]]
        hit = [r for r in rows if r[0] == "sigma2_exponent" and r[1] == "0"]
        assert hit and float(hit[0][3]) == pytest.approx(1.5)

    def test_simulate_determinism(self, tmp_path):
        cfg = self._write_cfg(tmp_path, n_realizations=1, horizon_trades=20_000)
        a = tmp_path / "a.csv"
        b = tmp_path / "b.csv"
        assert run_cli(["simulate", "--config", str(cfg), "--out", str(a)]) == 0
        assert run_cli(["simulate", "--config", str(cfg), "--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_missing_config_is_exit_1(self, tmp_path):
        assert run_cli(["simulate", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path / "x")]) == 1

    def test_analyze_rejects_missing_tape(self, tmp_path):
        cfg = self._write_cfg(tmp_path)
        code = run_cli(["analyze", "--tape", str(tmp_path / "none"), "--config", str(cfg), "--out", str(tmp_path / "o")])
        assert code == 2
