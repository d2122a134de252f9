import csv
import json

import numpy as np
import pytest

from otfs_xd.channel import ChannelPath, ChannelRealization
from otfs_xd.harness import (ExperimentSpec, SpecError, ber_csv, bench_csv, mse_csv, run_ber_sweep,
                             run_complexity_bench, run_mse_trace, write_mse_outputs)
from otfs_xd.harness.cli import main
from otfs_xd.harness.sweep import _frame_channel, flops_block, flops_full
from otfs_xd.transforms import FrameGeometry


@pytest.fixture
def identity_file(tmp_path):
    path = tmp_path / "identity.json"
    ChannelRealization((ChannelPath(1.0, 0, 0),), FrameGeometry(8, 4)).save(path)
    return str(path)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


TINY = dict(M=2, N=2, P=2, l_max=1, k_max=1.0, integer_doppler=True)


class TestSpec:

    def test_validation(self):
        with pytest.raises(SpecError):
            ExperimentSpec(frames=0)
        with pytest.raises(SpecError):
            ExperimentSpec(snr_db=())
        with pytest.raises(SpecError):
            ExperimentSpec(detector="zf")
        with pytest.raises(ValueError):
            ExperimentSpec(constellation="8psk")

    def test_file_round_trip(self, tmp_path):
        spec = ExperimentSpec(M=8, N=4, snr_db=[4, 8], seed=9)
        path = tmp_path / "spec.json"
        path.write_text(json.dumps(spec.to_dict()))
        assert ExperimentSpec.from_file(path) == spec

    def test_unknown_key(self):
        with pytest.raises(SpecError, match="unknown"):
            ExperimentSpec.from_dict({"M": 4, "colour": "red"})

    def test_overrides_skip_none(self):
        spec = ExperimentSpec(seed=3).with_overrides(seed=None, iters=7)
        assert spec.seed == 3 and spec.iters == 7


class TestBerSweep:

    def test_identity_channel_high_snr_is_error_free(self, identity_file):
        spec = ExperimentSpec(M=8, N=4, channel_file=identity_file, snr_db=[40], frames=20)
        (rec,) = run_ber_sweep(spec)
        assert rec.bit_errors == 0 and rec.ber == 0.0
        assert rec.bits == 20 * 64

    def test_same_seed_byte_identical(self, tmp_path):
        spec = ExperimentSpec(M=4, N=4, P=3, l_max=3, k_max=1.5, snr_db=[6, 10], frames=15, seed=5)
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        ber_csv(run_ber_sweep(spec), a)
        ber_csv(run_ber_sweep(spec), b)
        assert a.read_bytes() == b.read_bytes()
        c = tmp_path / "c.csv"
        ber_csv(run_ber_sweep(spec.with_overrides(seed=6)), c)
        assert c.read_bytes() != a.read_bytes()

    def test_accounting(self):
        spec = ExperimentSpec(M=4, N=2, P=2, l_max=2, k_max=1.0, snr_db=[0, 6], frames=30,
                              min_bit_errors=10)
        for rec in run_ber_sweep(spec):
            assert 0 <= rec.bit_errors <= rec.bits
            assert rec.ber * rec.bits == pytest.approx(rec.bit_errors)
            assert rec.symbol_errors <= rec.symbols
            assert rec.frames <= 30

    def test_early_stop_consistent_with_full_run(self):
        base = ExperimentSpec(**TINY, snr_db=[4], frames=600, iters=3, min_bit_errors=100)
        (stopped,) = run_ber_sweep(base)
        (full,) = run_ber_sweep(base.with_overrides(early_stop=False))
        assert stopped.frames < full.frames
        assert stopped.bit_errors >= 100
        p = full.ber
        se = np.sqrt(p * (1 - p) / stopped.bits)
        assert abs(stopped.ber - p) <= 3 * se

    def test_channels_shared_across_snr_points(self):
        spec = ExperimentSpec(M=4, N=2, P=3, l_max=3, k_max=1.0, snr_db=[0, 10])
        assert _frame_channel(spec, None, 4) == _frame_channel(spec, None, 4)
        assert _frame_channel(spec, None, 4) != _frame_channel(spec, None, 5)

    def test_proposed_close_to_map_oracle(self):
        spec = ExperimentSpec(**TINY, snr_db=[14], frames=1000, early_stop=False, seed=1)
        prop, oracle = run_ber_sweep(spec, detectors=["proposed", "map_oracle"])
        assert oracle.bit_errors > 0
        assert prop.ber <= 2 * oracle.ber

    def test_full_lmmse_detector_runs(self):
        spec = ExperimentSpec(M=4, N=2, P=2, l_max=2, k_max=1.0, snr_db=[20], frames=5)
        (rec,) = run_ber_sweep(spec, detectors=["full_lmmse"])
        assert rec.frames == 5 and len(rec.mse_per_iter) == spec.iters


class TestMseTrace:

    def test_identity_channel_variants_coincide(self, identity_file, tmp_path):
        spec = ExperimentSpec(M=8, N=4, channel_file=identity_file, snr_db=[8], frames=10, iters=4)
        trace = run_mse_trace(spec)
        ex, tin, genie = (trace.trajectories[v].v_pT for v in ("exact", "tin", "genie"))
        np.testing.assert_allclose(tin, ex, rtol=1e-12)
        np.testing.assert_allclose(genie, ex, rtol=1e-12)
        paths = write_mse_outputs(trace, tmp_path)
        rows = read_csv(paths["mse"])
        assert rows[0] == ["variant", "iter", "mse"]
        assert {r[0] for r in rows[1:]} == {"mc", "exact", "tin", "genie"}
        assert len(rows) == 1 + 4 * 4
        assert read_csv(paths["tin"])[0] == ["variant", "iter", "v_aT", "v_pT", "v_aDD", "v_pDD"]

    def test_needs_fixed_channel(self):
        with pytest.raises(SpecError):
            run_mse_trace(ExperimentSpec(M=4, N=2))

    def test_reproducible(self, tmp_path, identity_file):
        spec = ExperimentSpec(M=8, N=4, channel_file=identity_file, snr_db=[3], frames=6, iters=3)
        assert mse_csv(run_mse_trace(spec)) == mse_csv(run_mse_trace(spec))

    def test_geometry_mismatch(self, identity_file):
        with pytest.raises(SpecError):
            run_mse_trace(ExperimentSpec(M=4, N=4, channel_file=identity_file))


class TestBench:

    def test_small_case(self, tmp_path):
        rows = run_complexity_bench(ExperimentSpec(M=4, N=2, P=2, l_max=2, k_max=1.0), frames=3)
        block, full = rows
        assert block.detector == "proposed" and full.detector == "full_lmmse"
        # two blocks of size 2M cost more than one solve of size 2M once N < 3
        assert full.flops_est / block.flops_est == pytest.approx(2 ** 2 / 8)
        assert block.median_ms_per_iter > 0 and full.median_ms_per_iter > 0
        text = bench_csv(rows, tmp_path / "bench.csv")
        assert text.splitlines()[0] == "detector,M,N,median_ms_per_iter,flops_est"

    def test_flop_counts(self):
        assert flops_block(64, 32) == 32 * 128 ** 3
        assert flops_full(64, 32) == 2048 ** 3
        assert flops_full(64, 32) / flops_block(64, 32) == 32 ** 2 / 8
        assert flops_full(8, 3) > flops_block(8, 3)


class TestCli:

    def test_ber_with_config_and_plot(self, tmp_path, identity_file):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"M": 8, "N": 4, "channel_file": identity_file, "frames": 3}))
        out = tmp_path / "out"
        assert main(["ber", "--config", str(cfg), "--out", str(out), "--snr", "10,40",
                     "--seed", "2", "--iters", "2", "--detector", "proposed"]) == 0
        rows = read_csv(out / "ber.csv")
        assert rows[0] == ["snr_db", "detector", "iters", "bits", "bit_errors", "ber"]
        assert [r[0] for r in rows[1:]] == ["10.0", "40.0"]
        assert rows[1][2] == "2"
        assert (out / "ber.png").stat().st_size > 0

    def test_mse_trace_and_bench(self, tmp_path, identity_file):
        out = tmp_path / "mse"
        assert main(["mse-trace", "--channel", identity_file, "--out", str(out), "--frames", "2",
                     "--iters", "3"]) == 0
        assert (out / "mse.csv").exists() and (out / "se_genie.csv").exists()
        assert (out / "mse.png").stat().st_size > 0
        out = tmp_path / "bench"
        assert main(["bench", "--out", str(out), "--frames", "2",
                     "--config", _cfg(tmp_path, M=4, N=2, l_max=2)]) == 0
        assert len(read_csv(out / "bench.csv")) == 3
        assert (out / "bench.png").exists()

    def test_bad_config_reports_error(self, tmp_path, capsys):
        cfg = _cfg(tmp_path, frames=0)
        assert main(["ber", "--config", cfg, "--no-plots"]) == 2
        assert "frames" in capsys.readouterr().err

    def test_bad_detector_rejected(self):
        with pytest.raises(SystemExit):
            main(["ber", "--detector", "zf"])


def _cfg(tmp_path, **kw):
    path = tmp_path / f"cfg_{len(list(tmp_path.iterdir()))}.json"
    path.write_text(json.dumps(kw))
    return str(path)
