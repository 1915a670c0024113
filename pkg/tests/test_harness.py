import dataclasses
import json
import math

import pytest

from goqsm.config import DNN_GRIDS, ML_MRC_GRIDS, OPTIMAL_TRAINING_SNR_DB, PRESETS, loads_config, parse_grid, preset
from goqsm.dnn import TrainConfig
from goqsm.harness import (
    BerRecord,
    ConfigError,
    SweepConfig,
    best_required_snr,
    find_snr_at_ber,
    read_records,
    records_to_csv,
    records_to_json,
    run_sweep,
    snr_at_ber_table,
)


def small_config(**kw) -> SweepConfig:
    base = dict(
        schemes=("GOQSM", "GOSM"),
        spectral_efficiencies=(3,),
        detectors=("ml-mrc", "dnn"),
        detector_snr_grids={"ml-mrc": (158.0, 168.0), "dnn": (136.0, 141.0)},
        training_snr_db=(136.0,),
        min_bit_errors=100,
        max_bits=60_000,
        block_symbols=4,
        train=TrainConfig(train_set_size=3_000, validation_set_size=1_000, epochs=2),
        seed=7,
    )
    base.update(kw)
    return SweepConfig(**base)


def rec(snr, ber, **kw):
    fields = dict(scheme="GOQSM", detector="ml-mrc", spectral_efficiency=3, snr_db=snr, training_snr_db=None,
                  bit_errors=200, bits_simulated=int(200 / ber) if ber else 10**6, ber=ber, reliable=True, seed=0,
                  wall_time=0.0)
    fields.update(kw)
    return BerRecord(**fields)


class TestFindSnrAtBer:
    def test_log_linear_midpoint(self):
        assert find_snr_at_ber([(160, 1e-2), (164, 1e-4)]) == pytest.approx(162.0, abs=1e-12)

    def test_exact_hit(self):
        assert find_snr_at_ber([(150, 1e-2), (152, 1e-3), (154, 1e-4)]) == 152.0

    def test_not_bracketed(self):
        with pytest.raises(ValueError):
            find_snr_at_ber([(150, 1e-1), (152, 1e-2)])

    def test_zero_ber_points_ignored(self):
        assert find_snr_at_ber([rec(150, 1e-2), rec(154, 1e-4), rec(158, 0.0)]) == pytest.approx(152.0)

    def test_table_and_best(self):
        recs = [rec(150, 1e-2, detector="dnn", training_snr_db=t) for t in (134.0, 136.0)]
        recs += [rec(154, 1e-4, detector="dnn", training_snr_db=134.0), rec(152, 1e-4, detector="dnn", training_snr_db=136.0)]
        table = snr_at_ber_table(recs)
        assert table[("GOQSM", "dnn", 3, 134.0)] == pytest.approx(152.0)
        assert best_required_snr(table, "GOQSM", "dnn", 3) == (pytest.approx(151.0), 136.0)


class TestConfigValidation:
    def test_empty_grid(self):
        with pytest.raises(ConfigError) as err:
            small_config(detector_snr_grids={}, snr_grid_db=()).validate()
        assert any("empty SNR grid" in p for p in err.value.problems)

    def test_lists_every_problem(self):
        cfg = small_config(schemes=("GOQSM", "QSM"), min_bit_errors=10, workers=0, detectors=("ml-mrc", "zf"))
        problems = cfg.problems()
        for token in ("QSM", "min_bit_errors", "workers", "'zf'"):
            assert any(token in p for p in problems), token

    def test_missing_training_snr(self):
        assert any("GOSM@3" in p for p in small_config(training_snr_db=()).problems())

    def test_bad_efficiency(self):
        assert any("spectral_efficiencies" in p for p in small_config(spectral_efficiencies=(7,)).problems())

    def test_ini_unknown_key(self):
        with pytest.raises(ConfigError) as err:
            loads_config("[sweep]\nsnr_grid_db = 150:2:160\nbogus = 1\n[scheme]\nfoo = 2\n")
        problems = err.value.problems
        assert "sweep.bogus: unknown key" in problems and "scheme.foo: unknown key" in problems

    def test_ini_overrides(self):
        cfg = loads_config(
            "[scheme]\nschemes = GOSM\nspectral_efficiencies = 4\n"
            "[sweep]\nsnr_grid_db = 150:2:156\nsnr_grid_db.dnn = 140, 141\nseed = 3\nworkers = 2\n"
            "[dnn]\ntraining_snr_db = 142\ntraining_snr_db.GOSM@4 = 140, 144\nepochs = 3\n"
            "[geometry]\npd_positions = 2 2 0.85; 2.1 2 0.85; 2 2.1 0.85; 2.1 2.1 0.85\n[optics]\nlens_fov_half_angle = 70\n"
        )
        assert cfg.schemes == ("GOSM",) and cfg.spectral_efficiencies == (4,)
        assert cfg.grid_for("ml-mrc") == (150.0, 152.0, 154.0, 156.0)
        assert cfg.grid_for("dnn") == (140.0, 141.0)
        assert cfg.training_snrs_for("GOSM", 4) == (140.0, 144.0)
        assert (cfg.seed, cfg.workers, cfg.train.epochs, cfg.channel.lens_fov_half_angle) == (3, 2, 3, 70.0)

    def test_parse_grid(self):
        assert parse_grid("1:0.5:2") == (1.0, 1.5, 2.0)
        assert parse_grid("3, 1") == (3.0, 1.0)
        with pytest.raises(ValueError):
            parse_grid("1:0:2")


class TestPresets:
    @pytest.mark.parametrize("name", sorted(PRESETS))
    def test_valid(self, name):
        cfg = preset(name)
        assert cfg.validate() is cfg

    def test_fig3_uses_optimal_training_snr(self):
        cfg = preset("fig3")
        assert cfg.detectors == ("dnn",) and cfg.spectral_efficiencies == (3, 4, 5)
        for s in cfg.schemes:
            for se in cfg.spectral_efficiencies:
                assert cfg.training_snrs_for(s, se) == (OPTIMAL_TRAINING_SNR_DB[f"{s}@{se}"],)

    def test_fig4_scan(self):
        cfg = preset("fig4a")
        t = OPTIMAL_TRAINING_SNR_DB["GOQSM@3"]
        assert cfg.training_snrs_for("GOQSM", 3) == (t - 4, t - 2, t, t + 2, t + 4)
        assert cfg.grid_for("ml-mrc") == ML_MRC_GRIDS[3] and cfg.grid_for("dnn") == DNN_GRIDS[3]

    def test_unknown(self):
        with pytest.raises(ConfigError):
            preset("fig9")


class TestSerialization:
    def test_csv_round_trip(self, tmp_path):
        recs = [rec(150, 1e-2), rec(152.5, 0.0, bit_errors=0, reliable=False, detector="dnn", training_snr_db=136.0)]
        path = tmp_path / "r.csv"
        path.write_text(records_to_csv(recs))
        assert read_records(path) == recs

    def test_json(self):
        data = json.loads(records_to_json([rec(150, 1e-2)]))
        assert data[0]["snr_db"] == 150 and data[0]["training_snr_db"] is None

    def test_malformed_rows_skipped(self, tmp_path):
        path = tmp_path / "r.csv"
        path.write_text(records_to_csv([rec(150, 1e-2)]) + "GOQSM,ml-mrc,3,oops\n")
        assert len(read_records(path)) == 1


@pytest.fixture(scope="module")
def baseline():
    return run_sweep(small_config())


class TestSweep:
    def test_records(self, baseline):
        recs = baseline.records
        assert {(r.scheme, r.detector) for r in recs} == {(s, d) for s in ("GOQSM", "GOSM") for d in ("ml-mrc", "dnn")}
        for r in recs:
            assert r.ber == r.bit_errors / r.bits_simulated
            assert r.reliable == (r.bit_errors >= 100)
            assert r.bits_simulated <= 60_000 + 4 * 127 * 6 or r.reliable
        assert len(baseline.histories) == 2 * 2

    def test_deterministic(self, baseline):
        again = run_sweep(small_config())
        assert records_to_csv(again.records, with_time=False) == records_to_csv(baseline.records, with_time=False)

    @pytest.mark.parametrize("workers", [4, 8])
    def test_worker_invariance(self, baseline, workers):
        par = run_sweep(small_config(workers=workers))
        assert records_to_csv(par.records, with_time=False) == records_to_csv(baseline.records, with_time=False)

    def test_seed_changes_results(self, baseline):
        other = run_sweep(small_config(seed=8, detectors=("ml-mrc",)))
        a = [r.bit_errors for r in baseline.records if r.detector == "ml-mrc"]
        assert a != [r.bit_errors for r in other.records]

    def test_resume_is_identical(self, tmp_path):
        cfg = small_config(detectors=("ml-mrc",))
        out = tmp_path / "ber.csv"
        first = run_sweep(cfg, out)
        text = out.read_text()
        # simulate an interrupted run: keep the header and first record only
        part = tmp_path / "ber.csv.part"
        part.write_text("\n".join(text.splitlines()[:2]) + "\n")
        out.unlink()
        second = run_sweep(cfg, out)
        assert records_to_csv(read_records(out), False) == records_to_csv(first.records, False)
        # the completed record was reused verbatim, wall time included
        assert out.read_text().splitlines()[1] == text.splitlines()[1]
        assert len(second.records) == len(first.records)
        assert not part.exists()

    def test_resume_skips_training(self, tmp_path):
        cfg = small_config(schemes=("GOSM",))
        out = tmp_path / "ber.csv"
        run_sweep(cfg, out)
        again = run_sweep(cfg, out)
        assert again.detectors == [] and len(again.records) > 0

    def test_model_cache(self, tmp_path):
        cfg = small_config(schemes=("GOQSM",), detectors=("dnn",), model_dir=str(tmp_path))
        a = run_sweep(cfg)
        files = list(tmp_path.glob("*.bin"))
        assert len(files) == 1
        b = run_sweep(cfg)
        assert records_to_csv(a.records, False) == records_to_csv(b.records, False)

    def test_curve_stops_below_min_ber(self):
        cfg = small_config(detectors=("ml-mrc",), schemes=("GOQSM",),
                           detector_snr_grids={"ml-mrc": (176.0, 178.0, 180.0)}, min_ber=0.5)
        assert len(run_sweep(cfg).records) == 1

    def test_max_bits_cap(self):
        cfg = small_config(detectors=("ml-mrc",), schemes=("GOQSM",), detector_snr_grids={"ml-mrc": (175.0,)},
                           max_bits=10_000, min_ber=0.0)
        r = run_sweep(cfg).records[0]
        assert not r.reliable and r.bits_simulated >= 10_000 and math.isfinite(r.ber)


def test_points_span_several_blocks(baseline):
    # the worker-invariance check is only meaningful when points cross wave boundaries
    block = 4 * 127 * 6
    assert max(r.bits_simulated for r in baseline.records) >= 9 * block
