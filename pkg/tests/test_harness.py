import csv
import json
import math

import numpy as np
import pytest

from kakf import harness
from kakf.cli import main
from kakf.errors import ConfigError, EmptyMask, IdentifiabilityViolation, ZeroTruth
from kakf.harness import CSV_COLUMNS, CampaignConfig, config_from_dict, load_config, nmse, run_campaign, ser
from kakf.scenario import SystemDims

DESK = dict(m_bs=4, n_irs=8, n_users=2, l_ut=2, k_blocks=32, t_slots=2, i_frames=2)
FULL = dict(m_bs=4, n_irs=36, n_users=5, l_ut=2, k_blocks=720, t_slots=2, i_frames=5, l_h=1, l_g=1)


def write_toml(path, values):
    lines = []
    for k, v in values.items():
        if isinstance(v, bool):
            lines.append(f"{k} = {'true' if v else 'false'}")
        elif isinstance(v, str):
            lines.append(f'{k} = "{v}"')
        elif isinstance(v, (list, tuple)):
            items = ", ".join(f'"{x}"' if isinstance(x, str) else str(x) for x in v)
            lines.append(f"{k} = [{items}]")
        else:
            lines.append(f"{k} = {v}")
    path.write_text("\n".join(lines) + "\n")
    return path


class TestMetrics:
    def test_nmse(self):
        truth = np.array([[1 + 1j, 2], [0, -3j]])
        assert nmse(truth, truth) == 0
        assert nmse(np.zeros_like(truth), truth) == 1
        assert nmse(2 * truth, truth) == 1

    def test_nmse_zero_truth(self):
        with pytest.raises(ZeroTruth):
            nmse(np.ones(3), np.zeros(3))

    def test_ser(self):
        truth = np.arange(8).reshape(2, 4)
        mask = np.ones((2, 4), dtype=bool)
        mask[0] = False
        assert ser(truth, truth, mask) == 0
        assert ser(truth + 1, truth, mask) == 1
        half = truth.copy()
        half[1, :2] += 1
        assert ser(half, truth, mask) == 0.5
        # anchor row errors are ignored
        anchor_wrong = truth.copy()
        anchor_wrong[0] += 1
        assert ser(anchor_wrong, truth, mask) == 0

    def test_ser_empty_mask(self):
        with pytest.raises(EmptyMask):
            ser(np.ones(3), np.ones(3), np.zeros(3, dtype=bool))


class TestConfig:
    def test_round_trip(self, tmp_path):
        path = write_toml(tmp_path / "c.toml", {**DESK, "snr_grid_db": [0, 10], "n_trials": 3,
                                                "receivers": ["kakf"], "master_seed": 5,
                                                "output_path": str(tmp_path / "o.csv"), "noiseless_mode": False})
        cfg = load_config(path)
        assert cfg.dims == SystemDims(**DESK)
        assert cfg.snr_grid_db == [0.0, 10.0]
        assert cfg.receivers == ("kakf",)
        assert load_config(path, n_trials=7, receivers="kakf,bals").n_trials == 7

    def test_identifiability(self):
        with pytest.raises(IdentifiabilityViolation):
            config_from_dict({**DESK, "k_blocks": 31, "snr_grid_db": [0]})

    @pytest.mark.parametrize(
        "bad",
        [
            {"snr_grid_db": []},
            {"snr_grid_db": [0], "n_trials": 0},
            {"snr_grid_db": [0], "receivers": ["mmse"]},
            {"snr_grid_db": [0], "colour": "blue"},
            {},
        ],
    )
    def test_rejects(self, bad):
        with pytest.raises(ConfigError):
            config_from_dict({**DESK, **bad})

    def test_missing_dims(self):
        with pytest.raises(ConfigError):
            config_from_dict({"m_bs": 4, "snr_grid_db": [0]})


def desk_cfg(tmp_path, **kw):
    base = dict(dims=SystemDims(**DESK), snr_grid_db=[0, 15, 30], n_trials=6, master_seed=11,
                output_path=str(tmp_path / "out.csv"))
    base.update(kw)
    return CampaignConfig(**base)


class TestCampaign:
    def test_schema(self, tmp_path):
        cfg = desk_cfg(tmp_path, n_trials=200, snr_grid_db=[0, 10, 20, 30])
        res = run_campaign(cfg)
        with open(cfg.output_path) as fh:
            rows = list(csv.reader(fh))
        assert tuple(rows[0]) == CSV_COLUMNS
        assert len(rows) == 1 + 4 * 2
        assert {(float(r[0]), r[1]) for r in rows[1:]} == {(s, rx) for s in (0, 10, 20, 30) for rx in ("kakf", "bals")}
        for r in rows[1:]:
            assert int(r[7]) + int(r[8]) == 200
        summary = json.loads((tmp_path / "out.json").read_text())
        assert summary["config"]["n_irs"] == 8
        assert summary["derived"]["p"] == 32
        assert summary["version"].startswith("0.1.0")
        assert len(summary["points"]) == 8
        for t in res.trials:
            assert t.nmse_h >= 0 and t.nmse_g >= 0
            if t.receiver == "kakf":
                assert 0 <= t.ser <= 1

    def test_noiseless_kakf(self, tmp_path):
        res = run_campaign(desk_cfg(tmp_path, receivers=("kakf",), noiseless_mode=True, n_trials=10))
        (row,) = res.table
        assert math.isinf(row["snr_db"])
        assert row["nmse_h_mean"] <= 1e-10 and row["nmse_g_mean"] <= 1e-10
        assert row["ser_mean"] == 0

    def test_same_noise_for_both_receivers(self, tmp_path):
        res = run_campaign(desk_cfg(tmp_path), write=False)
        by_key = {}
        for t in res.trials:
            by_key.setdefault((t.trial, t.snr_db), set()).add(t.data_checksum)
        assert all(len(v) == 1 for v in by_key.values())
        assert len({next(iter(v)) for v in by_key.values()}) == len(by_key)

    def test_byte_identical_reruns(self, tmp_path):
        a = desk_cfg(tmp_path, timing=False, output_path=str(tmp_path / "a.csv"))
        b = desk_cfg(tmp_path, timing=False, output_path=str(tmp_path / "b.csv"))
        run_campaign(a)
        run_campaign(b)
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()

    def test_parallel_matches_sequential(self, tmp_path):
        seq = run_campaign(desk_cfg(tmp_path, timing=False), write=False)
        par = run_campaign(desk_cfg(tmp_path, timing=False, workers=2), write=False)
        assert harness.format_csv(seq.table) == harness.format_csv(par.table)

    def test_seed_changes_results(self, tmp_path):
        a = run_campaign(desk_cfg(tmp_path, timing=False), write=False)
        b = run_campaign(desk_cfg(tmp_path, timing=False, master_seed=12), write=False)
        assert harness.format_csv(a.table) != harness.format_csv(b.table)

    def test_failed_trial_is_recorded(self, tmp_path, monkeypatch):
        from kakf.errors import RankDeficientStep

        def boom(*args, **kwargs):
            raise RankDeficientStep("G", 3, 32)

        monkeypatch.setattr(harness, "bals_estimate", boom)
        res = run_campaign(desk_cfg(tmp_path, n_trials=3), write=False)
        bals_rows = res.rows("bals")
        assert all(r["n_trials_failed"] == 3 and r["n_trials_ok"] == 0 for r in bals_rows)
        assert all(math.isnan(r["nmse_g_mean"]) for r in bals_rows)
        assert all(r["n_trials_ok"] == 3 for r in res.rows("kakf"))
        assert all(t.flags == ("error:RankDeficientStep",) for t in res.trials if t.receiver == "bals")

    def test_full_config_runs(self, tmp_path):
        cfg = CampaignConfig(dims=SystemDims(**FULL), snr_grid_db=[20], n_trials=1,
                             output_path=str(tmp_path / "p.csv"))
        res = run_campaign(cfg)
        assert all(r["n_trials_ok"] == 1 for r in res.table)
        assert cfg.dims.rate == pytest.approx(4 * 2 * 1 / (720 * 2))


class TestCli:
    def test_validate_ok(self, tmp_path, capsys):
        path = write_toml(tmp_path / "c.toml", {**FULL, "snr_grid_db": [0]})
        assert main(["validate", str(path)]) == 0
        out = capsys.readouterr().out
        assert "P = 360" in out and "K = 720" in out and "rho = 0.00555556" in out

    def test_validate_rejects_short_k(self, tmp_path, capsys):
        path = write_toml(tmp_path / "c.toml", {**DESK, "k_blocks": 16, "snr_grid_db": [0]})
        assert main(["validate", str(path)]) == 2
        assert "K >= P" in capsys.readouterr().err

    def test_run_with_overrides(self, tmp_path, capsys):
        path = write_toml(tmp_path / "c.toml", {**DESK, "snr_grid_db": [10, 20], "n_trials": 50})
        out_csv = tmp_path / "sub" / "r.csv"
        assert main(["run", str(path), "--trials", "3", "--out", str(out_csv), "--receivers", "kakf", "--seed", "4"]) == 0
        rows = list(csv.reader(out_csv.open()))
        assert len(rows) == 3
        assert all(r[1] == "kakf" and r[7] == "3" for r in rows[1:])

    def test_run_noiseless_flag(self, tmp_path):
        path = write_toml(tmp_path / "c.toml", {**DESK, "snr_grid_db": [10], "n_trials": 2,
                                                "output_path": str(tmp_path / "n.csv")})
        assert main(["run", str(path), "--noiseless", "--receivers", "kakf"]) == 0
        rows = list(csv.reader((tmp_path / "n.csv").open()))
        assert rows[1][0] == "inf" and float(rows[1][3]) <= 1e-10

    def test_selftest(self, capsys):
        assert main(["selftest"]) == 0
        out = capsys.readouterr().out
        assert out.count("PASS") == 4 and "FAIL" not in out
