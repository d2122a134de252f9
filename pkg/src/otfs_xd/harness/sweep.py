"""Seeded Monte Carlo experiments: BER sweeps, MSE traces and complexity timing.

Every random draw is tied to a child stream keyed on ``(seed, snr index,
frame)``, so any single point of a sweep can be re-run on its own and the
aggregated CSVs are bitwise reproducible.
"""

from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from ..analysis import VARIANTS, run_state_evolution, trajectories_to_csv
from ..channel import (ChannelRealization, build_block_channel, build_time_channel_dense,
                       sample_channel)
from ..detector import (DetectorConfig, GaussianMessage, block_lmmse, brute_force_map,
                        detect_cross_domain, full_lmmse_baseline)
from ..modem import apply_channel, get_constellation, hard_indices, make_frame, snr_to_n0
from ..transforms import FrameGeometry

DETECTORS = ("proposed", "full_lmmse", "map_oracle")

BER_HEADER = ("snr_db", "detector", "iters", "bits", "bit_errors", "ber")
MSE_HEADER = ("variant", "iter", "mse")
BENCH_HEADER = ("detector", "M", "N", "median_ms_per_iter", "flops_est")


class SpecError(ValueError):
    """Invalid experiment specification."""


@dataclass(frozen=True)
class ExperimentSpec:
    """Everything needed to reproduce one experiment.

    ``channel_file`` pins a single realization (JSON written by
    :meth:`ChannelRealization.save`); otherwise a fresh channel is drawn per
    frame from ``(P, l_max, k_max)``.
    """

    M: int = 64
    N: int = 32
    P: int = 4
    l_max: int = 10
    k_max: float = 5.0
    integer_doppler: bool = False
    channel_file: Optional[str] = None
    constellation: str = "qpsk"
    snr_db: tuple = (12.0,)
    detector: str = "proposed"
    iters: int = 5
    frames: int = 100
    min_bit_errors: int = 100
    early_stop: bool = True
    damping: float = 0.0
    seed: int = 0
    out: str = "results"

    def __post_init__(self):
        object.__setattr__(self, "snr_db", tuple(float(s) for s in self.snr_db))
        if self.frames < 1:
            raise SpecError("frames must be >= 1")
        if not self.snr_db:
            raise SpecError("SNR grid must be nonempty")
        if self.iters < 1:
            raise SpecError("iters must be >= 1")
        if self.detector not in DETECTORS:
            raise SpecError(f"detector must be one of {DETECTORS}, got {self.detector!r}")
        if self.seed < 0:
            raise SpecError("seed must be non-negative")
        get_constellation(self.constellation)
        FrameGeometry(self.M, self.N)

    @property
    def geom(self) -> FrameGeometry:
        return FrameGeometry(self.M, self.N)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise SpecError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_file(cls, path) -> "ExperimentSpec":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["snr_db"] = list(self.snr_db)
        return d

    def with_overrides(self, **kw) -> "ExperimentSpec":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


@dataclass
class RunRecord:
    """Aggregated outcome of one (SNR, detector) point."""

    snr_db: float
    detector: str
    iters: int
    frames: int = 0
    bits: int = 0
    bit_errors: int = 0
    symbols: int = 0
    symbol_errors: int = 0
    mse_per_iter: list = field(default_factory=list)
    wall_time_s: float = 0.0

    @property
    def ber(self) -> float:
        return self.bit_errors / self.bits if self.bits else float("nan")

    @property
    def ser(self) -> float:
        return self.symbol_errors / self.symbols if self.symbols else float("nan")


def frame_rng(seed: int, snr_index: int, frame: int) -> np.random.Generator:
    """Independent stream for the bits and noise of one frame at one SNR point."""
    return np.random.default_rng([seed, snr_index, frame])


def channel_seed(seed: int, frame: int) -> np.random.SeedSequence:
    # channels depend on the frame only, so every SNR point sees the same draws
    return np.random.SeedSequence([seed, 2 ** 32 - 1, frame])


def load_fixed_channel(spec: ExperimentSpec) -> Optional[ChannelRealization]:
    if spec.channel_file is None:
        return None
    ch = ChannelRealization.load(spec.channel_file)
    if (ch.geom.M, ch.geom.N) != (spec.M, spec.N):
        raise SpecError(f"channel file is {ch.geom.M}x{ch.geom.N}, spec asks for {spec.M}x{spec.N}")
    return ch


def _frame_channel(spec, fixed, frame):
    if fixed is not None:
        return fixed
    return sample_channel(spec.geom, spec.P, spec.l_max, spec.k_max,
                          rng_seed=channel_seed(spec.seed, frame),
                          integer_doppler=spec.integer_doppler)


def detect_frame(detector: str, ch: ChannelRealization, blocks, r, N0, const, iters, damping=0.0,
                 H=None):
    """Run one detector; returns (hard symbols, list of time-domain posterior means or None)."""
    if detector == "map_oracle":
        H = build_time_channel_dense(ch) if H is None else H
        return brute_force_map(H, r, const, geom=ch.geom), None
    cfg = DetectorConfig(max_iters=iters, damping=damping)
    estimator = None
    if detector == "full_lmmse":
        H = build_time_channel_dense(ch) if H is None else H

        def estimator(r_, prior_, n0_):
            return full_lmmse_baseline(H, r_, prior_, n0_, cfg.var_floor, cfg.var_ceil)
    res = detect_cross_domain(blocks, r, N0, const, cfg, estimator=estimator)
    return res.hard_symbols, [p.mean for p in res.time_posteriors]


def run_ber_sweep(spec: ExperimentSpec, detectors: Optional[Sequence[str]] = None) -> list:
    """BER/SER per SNR point, accumulated in frame order.

    With ``early_stop`` a point ends after the first frame that brings the
    bit-error count to ``min_bit_errors``.
    """
    const = get_constellation(spec.constellation)
    fixed = load_fixed_channel(spec)
    bps = const.bits_per_symbol
    records = []
    for det in detectors or (spec.detector,):
        for si, snr in enumerate(spec.snr_db):
            N0 = snr_to_n0(snr)
            rec = RunRecord(snr, det, spec.iters)
            mse_sum = np.zeros(spec.iters)
            t0 = time.perf_counter()
            for f in range(spec.frames):
                ch = _frame_channel(spec, fixed, f)
                blocks = build_block_channel(ch)
                rng = frame_rng(spec.seed, si, f)
                tx = make_frame(spec.geom, const, rng)
                r = apply_channel(tx.s_time, blocks, N0, rng)
                x_hat, means = detect_frame(det, ch, blocks, r, N0, const, spec.iters, spec.damping)
                idx_hat = hard_indices(x_hat, const)
                bits_hat = const.bit_table()[idx_hat].reshape(-1)
                rec.frames += 1
                rec.bits += tx.bits.size
                rec.bit_errors += int(np.count_nonzero(bits_hat != tx.bits))
                rec.symbols += tx.bits.size // bps
                rec.symbol_errors += int(np.count_nonzero(idx_hat != hard_indices(tx.x_dd, const)))
                if means is not None:
                    for l, m in enumerate(means):
                        mse_sum[l] += np.mean(np.abs(m - tx.s_time) ** 2)
                if spec.early_stop and rec.bit_errors >= spec.min_bit_errors:
                    break
            rec.wall_time_s = time.perf_counter() - t0
            if det != "map_oracle":
                rec.mse_per_iter = list(mse_sum / rec.frames)
            records.append(rec)
    return records


def _write(text: str, path):
    if path is not None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def ber_csv(records, path=None) -> str:
    rows = [(repr(r.snr_db), r.detector, r.iters, r.bits, r.bit_errors, repr(r.ber)) for r in records]
    return _write(_csv_text(BER_HEADER, rows), path)


@dataclass
class MseTrace:
    """Monte Carlo MSE per iteration next to the three state-evolution variants."""

    snr_db: float
    frames: int
    mc_mse: list
    trajectories: dict

    def mse_rows(self):
        rows = [("mc", l + 1, repr(float(v))) for l, v in enumerate(self.mc_mse)]
        for name in VARIANTS:
            t = self.trajectories[name]
            rows += [(name, l + 1, repr(float(v))) for l, v in enumerate(t.v_pT)]
        return rows


def run_mse_trace(spec: ExperimentSpec, channel: Optional[ChannelRealization] = None,
                  variants: Sequence[str] = VARIANTS) -> MseTrace:
    """Time-domain posterior MSE over ``spec.frames`` noise draws on one fixed channel.

    Only the first SNR of the grid is used.  Early stopping does not apply.
    """
    ch = channel if channel is not None else load_fixed_channel(spec)
    if ch is None:
        raise SpecError("mse-trace needs a fixed channel (channel_file)")
    const = get_constellation(spec.constellation)
    blocks = build_block_channel(ch)
    snr = spec.snr_db[0]
    N0 = snr_to_n0(snr)
    H = build_time_channel_dense(ch) if spec.detector == "full_lmmse" else None
    if spec.detector == "map_oracle":
        raise SpecError("mse-trace needs an iterative detector")
    acc = np.zeros(spec.iters)
    for f in range(spec.frames):
        rng = frame_rng(spec.seed, 0, f)
        tx = make_frame(ch.geom, const, rng)
        r = apply_channel(tx.s_time, blocks, N0, rng)
        _, means = detect_frame(spec.detector, ch, blocks, r, N0, const, spec.iters, spec.damping, H)
        acc += [np.mean(np.abs(m - tx.s_time) ** 2) for m in means]
    trajs = {v: run_state_evolution(blocks, N0, const, spec.iters, v) for v in variants}
    return MseTrace(snr, spec.frames, list(acc / spec.frames), trajs)


def mse_csv(trace: MseTrace, path=None) -> str:
    return _write(_csv_text(MSE_HEADER, trace.mse_rows()), path)


def write_mse_outputs(trace: MseTrace, out_dir) -> dict:
    """mse.csv plus one state-evolution CSV per variant; returns the written paths."""
    out = Path(out_dir)
    paths = {"mse": out / "mse.csv"}
    mse_csv(trace, paths["mse"])
    for name, traj in trace.trajectories.items():
        paths[name] = out / f"se_{name}.csv"
        _write(trajectories_to_csv([traj]), paths[name])
    return paths


def flops_block(M: int, N: int) -> float:
    """Dominant term of N Hermitian solves of size 2M."""
    return float(N * (2 * M) ** 3)


def flops_full(M: int, N: int) -> float:
    """Dominant term of one Hermitian solve of size MN."""
    return float((M * N) ** 3)


@dataclass
class BenchRow:
    detector: str
    M: int
    N: int
    median_ms_per_iter: float
    flops_est: float


def run_complexity_bench(spec: ExperimentSpec, frames: Optional[int] = None) -> list:
    """Median wall time of one time-domain LMMSE pass, block-wise vs. frame-wide.

    Each frame times both estimators on the same received vector with an
    uninformative prior, i.e. the first-iteration workload.
    """
    frames = spec.frames if frames is None else frames
    const = get_constellation(spec.constellation)
    fixed = load_fixed_channel(spec)
    N0 = snr_to_n0(spec.snr_db[0])
    t_block, t_full = [], []
    for f in range(frames):
        ch = _frame_channel(spec, fixed, f)
        blocks = build_block_channel(ch)
        H = build_time_channel_dense(ch)
        rng = frame_rng(spec.seed, 0, f)
        tx = make_frame(spec.geom, const, rng)
        r = apply_channel(tx.s_time, blocks, N0, rng)
        prior = GaussianMessage.uninformative(spec.geom.size)
        t0 = time.perf_counter()
        block_lmmse(blocks, r, prior, N0)
        t1 = time.perf_counter()
        full_lmmse_baseline(H, r, prior, N0)
        t2 = time.perf_counter()
        t_block.append(t1 - t0)
        t_full.append(t2 - t1)
    M, N = spec.M, spec.N
    return [BenchRow("proposed", M, N, 1e3 * float(np.median(t_block)), flops_block(M, N)),
            BenchRow("full_lmmse", M, N, 1e3 * float(np.median(t_full)), flops_full(M, N))]


def bench_csv(rows, path=None) -> str:
    body = [(b.detector, b.M, b.N, repr(b.median_ms_per_iter), repr(b.flops_est)) for b in rows]
    return _write(_csv_text(BENCH_HEADER, body), path)
