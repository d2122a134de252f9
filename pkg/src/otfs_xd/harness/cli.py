"""Command-line entry point: ``otfs-xd {ber,mse-trace,bench}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from ..channel import ChannelConfigError, ChannelRealization, reference_channel
from . import plotting
from .sweep import (DETECTORS, ExperimentSpec, SpecError, ber_csv, bench_csv, run_ber_sweep,
                    run_complexity_bench, run_mse_trace, write_mse_outputs)

log = logging.getLogger("otfs_xd")


def _float_list(text):
    try:
        return tuple(float(t) for t in text.replace(",", " ").split())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a list of numbers: {text!r}")


def _detector_list(text):
    names = tuple(t for t in text.replace(",", " ").split())
    bad = [n for n in names if n not in DETECTORS]
    if bad or not names:
        raise argparse.ArgumentTypeError(f"detectors must be drawn from {DETECTORS}")
    return names


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON experiment file")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--iters", type=int, help="cross-domain iterations")
    common.add_argument("--snr", type=_float_list, help="Es/N0 grid in dB, e.g. '8,10,12'")
    common.add_argument("--detector", type=_detector_list,
                        help="detector name (ber accepts a comma list)")
    common.add_argument("--frames", type=int, help="frames per SNR point")
    common.add_argument("--channel", help="fixed channel JSON file")
    common.add_argument("--no-plots", action="store_true", help="skip figure rendering")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="otfs-xd", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("ber", parents=[common], help="BER against Es/N0")
    sub.add_parser("mse-trace", parents=[common],
                   help="per-iteration MSE on a fixed channel with state evolution")
    sub.add_parser("bench", parents=[common], help="block vs. frame-wide LMMSE timing")
    return p


def resolve_spec(args, **defaults) -> ExperimentSpec:
    base = ExperimentSpec.from_file(args.config).to_dict() if args.config else {}
    for k, v in defaults.items():
        base.setdefault(k, v)
    spec = ExperimentSpec.from_dict(base)
    det = args.detector[0] if args.detector else None
    spec = spec.with_overrides(seed=args.seed, out=str(args.out) if args.out else None,
                               iters=args.iters, snr_db=args.snr, detector=det,
                               frames=args.frames, channel_file=args.channel)
    if spec.channel_file is not None:
        # a fixed channel dictates the frame geometry
        geom = ChannelRealization.load(spec.channel_file).geom
        spec = spec.with_overrides(M=geom.M, N=geom.N)
    return spec


def cmd_ber(args) -> int:
    spec = resolve_spec(args)
    out = Path(spec.out)
    records = run_ber_sweep(spec, detectors=args.detector)
    ber_csv(records, out / "ber.csv")
    for r in records:
        log.info("%s %.1f dB: %d/%d bit errors (BER %.3e) in %d frames", r.detector, r.snr_db,
                 r.bit_errors, r.bits, r.ber, r.frames)
    if not args.no_plots:
        plotting.plot_ber(records, out / "ber.png")
    return 0


def cmd_mse_trace(args) -> int:
    spec = resolve_spec(args, iters=10, frames=200, snr_db=[12.0])
    out = Path(spec.out)
    channel = None
    if spec.channel_file is None:
        channel = reference_channel()
        out.mkdir(parents=True, exist_ok=True)
        channel.save(out / "channel.json")
        spec = spec.with_overrides(M=channel.geom.M, N=channel.geom.N)
    trace = run_mse_trace(spec, channel=channel)
    write_mse_outputs(trace, out)
    for l, v in enumerate(trace.mc_mse, 1):
        log.info("iter %d: MC %.3e  SE %.3e", l, v, trace.trajectories["exact"].v_pT[l - 1])
    if not args.no_plots:
        plotting.plot_mse(trace, out / "mse.png")
    return 0


def cmd_bench(args) -> int:
    spec = resolve_spec(args, frames=10)
    out = Path(spec.out)
    rows = run_complexity_bench(spec)
    bench_csv(rows, out / "bench.csv")
    for b in rows:
        log.info("%s M=%d N=%d: %.2f ms/iter, %.3g flops", b.detector, b.M, b.N,
                 b.median_ms_per_iter, b.flops_est)
    if not args.no_plots:
        plotting.plot_bench(rows, out / "bench.png")
    return 0


COMMANDS = {"ber": cmd_ber, "mse-trace": cmd_mse_trace, "bench": cmd_bench}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s")
    try:
        return COMMANDS[args.command](args)
    except (SpecError, ChannelConfigError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
