"""Command-line interface.

Subcommands: ``simulate`` (write a synthetic dataset), ``identify`` (run an
estimator over a CSV series), ``compare`` (fast vs dense on one dataset),
``bench`` (per-step scaling of both filters), ``impulse`` (impulse response
of a saved filter snapshot).  Exit codes: 0 success, 2 invalid input,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .exceptions import ConfigError, NumericalError
from .harness import (
    ExperimentConfig,
    bench_scaling,
    compare_fast_slow,
    generate_dataset,
    identify_series,
    load_config,
    load_truth,
)
from .model import read_time_series
from .srdf import SrdfState, estimated_impulse_response, load_state, save_state


def _cmd_simulate(args) -> int:
    config = load_config(args.config)
    data_path, truth_path = generate_dataset(config, data_path=args.out, truth_path=args.truth)
    print(f"wrote {data_path} (T={config.T}) and truth sidecar {truth_path}")
    return 0


def _cmd_identify(args) -> int:
    config = load_config(args.config)
    if args.method:
        config.method = args.method
    if args.init:
        config.init = args.init
    config = ExperimentConfig.from_dict(config.to_dict())  # re-validate overrides
    ts = read_time_series(args.input)
    truth = load_truth(args.truth) if args.truth else None
    report, state = identify_series(config, ts.samples, truth=truth)
    rms = np.sqrt(report.residual_mse())
    print(f"method={report.method} T={report.T} residual rms={rms:.6g} "
          f"median step={report.step_seconds['median'] * 1e6:.1f} us")
    if report.final_impulse_error is not None:
        print(f"impulse-response error vs truth: {report.final_impulse_error:.6g}")
    report_path = args.report or config.report_path
    if report_path:
        report.save(report_path)
        print(f"report written to {report_path}")
    if args.trace:
        report.write_trace_csv(args.trace)
        print(f"per-step trace written to {args.trace}")
    if args.save_state:
        if not isinstance(state, SrdfState):
            raise ConfigError("--save-state requires a srdf method")
        save_state(state, args.save_state)
        print(f"state snapshot written to {args.save_state}")
    return 0


def _cmd_compare(args) -> int:
    config = load_config(args.config)
    report = compare_fast_slow(config)
    print(json.dumps(report.to_dict(), indent=2))
    report_path = args.report or config.report_path
    if report_path:
        report.save(report_path)
    return 0


def _cmd_bench(args) -> int:
    sizes = [int(s) for s in args.sizes.split(",") if s.strip()]
    report = bench_scaling(sizes, steps=args.steps, delta=args.delta, seed=args.seed)
    print(report.table())
    if args.report:
        report.save(args.report)
    return 0


def _cmd_impulse(args) -> int:
    state = load_state(args.state)
    h = estimated_impulse_response(state, args.lags)
    print("lag,h_re,h_im")
    for j, v in enumerate(h):
        print(f"{j},{float(v.real)!r},{float(v.imag)!r}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="innofilt",
                                     description="Adaptive identification of innovations-form systems")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic dataset from a config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--truth", default=None, help="truth sidecar path (default: <out>.truth.json)")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("identify", help="run an estimator over a CSV time series")
    p.add_argument("--config", required=True)
    p.add_argument("--input", required=True, help="input CSV path")
    p.add_argument("--method", choices=["srdf", "srdf-aposteriori", "plr-dense", "lms"])
    p.add_argument("--init", choices=["exact", "tib-fast"])
    p.add_argument("--report", default=None, help="write the metrics report JSON here")
    p.add_argument("--truth", default=None, help="truth sidecar enabling error metrics")
    p.add_argument("--trace", default=None, help="write a per-step CSV trace here")
    p.add_argument("--save-state", default=None, help="write a resumable filter snapshot here")
    p.set_defaults(func=_cmd_identify)

    p = sub.add_parser("compare", help="fast vs dense estimator on identical data")
    p.add_argument("--config", required=True)
    p.add_argument("--report", default=None)
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("bench", help="per-step scaling benchmark")
    p.add_argument("--sizes", default="128,256,512,1024", help="comma-separated ascending sizes")
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--delta", type=float, default=0.99)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--report", default=None)
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("impulse", help="impulse response of a saved filter snapshot")
    p.add_argument("--state", required=True)
    p.add_argument("--lags", type=int, default=50)
    p.set_defaults(func=_cmd_impulse)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, OSError, json.JSONDecodeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
