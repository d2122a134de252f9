"""Experiment engine and command-line front end."""

from .sweep import (DETECTORS, BenchRow, ExperimentSpec, MseTrace, RunRecord, SpecError,
                    ber_csv, bench_csv, mse_csv, run_ber_sweep, run_complexity_bench,
                    run_mse_trace, write_mse_outputs)
