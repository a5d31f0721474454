"""Command-line entry point: ``vanet-twohop {analytic,simulate,trace,gen-traces}``.

Every command writes plot-ready CSV or JSON and is deterministic given its
flags. Exit codes: 0 success, 2 invalid input, 3 precision refusal.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys

import numpy as np

from vanet_twohop import analytic, simulator, stats, traces
from vanet_twohop.analytic import ChannelModel, PrecisionExhausted, RoadScenario

SCHEMA = "vanet-twohop/1"
SEED_ENV = "VANET_TWOHOP_SEED"

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_PRECISION = 3

ANALYTIC_COLUMNS = ["rho", "beta", "rho_eff", "mean_degree", "series", "quadrature",
                    "dense_asymptotic", "sparse_asymptotic", "method", "value",
                    "estimated_abs_error"]
SIMULATE_COLUMNS = ["rho", "beta", "eta", "runs", "seed", "mean", "variance", "std_error",
                    "analytic_mean", "z_score", "ks", "ks_corrected", "ks_critical",
                    "normal_pass"]
TRACE_COLUMNS = ["beta", "rho_hat", "snapshots", "runs", "mean", "variance", "std_error",
                 "analytic_mean", "z_score", "ks_corrected", "ks_critical", "normal_pass"]


def _float_list(text: str):
    return [float(v) for v in text.split(",") if v.strip()]


def _rho_values(args):
    values = []
    for chunk in args.rho or []:
        values.extend(_float_list(chunk))
    if args.rho_range:
        start, stop, num = args.rho_range
        values.extend(np.linspace(float(start), float(stop), int(num)).tolist())
    if not values:
        raise ValueError("at least one --rho value is required")
    return values


def _betas(args):
    out = []
    for chunk in args.beta:
        out.extend(_float_list(chunk))
    return out


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _emit(rows, columns, payload, fmt: str, out):
    if fmt == "json":
        text = json.dumps(payload, indent=2, sort_keys=True, allow_nan=False) + "\n"
    else:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row.get(c)) for c in columns])
        text = buf.getvalue()
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _clean(value):
    """JSON-safe floats (NaN/inf become null)."""
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def analytic_row(rho: float, channel: ChannelModel, method: str = "auto") -> dict:
    rho_eff = analytic.effective_intensity(rho, channel)
    alpha = rho_eff * analytic.SQRT_PI_2
    series = quadrature = dense = None
    if method in ("auto", "series"):
        try:
            series = analytic.expected_n2_series(alpha).value * rho_eff
        except PrecisionExhausted:
            if method == "series":
                raise
    if method in ("auto", "quadrature") or series is None:
        quadrature = analytic.expected_n2_quadrature(alpha).value * rho_eff
    if rho_eff == 0:
        dense = 0.0
    elif alpha > 1:
        dense = analytic.expected_n2_dense_asymptotic(rho_eff)
    chosen = analytic.expected_n2(RoadScenario(rho), channel, method)
    return {
        "rho": rho, "beta": channel.beta, "rho_eff": rho_eff,
        "mean_degree": analytic.mean_degree(rho, channel),
        "series": series, "quadrature": quadrature, "dense_asymptotic": dense,
        "sparse_asymptotic": analytic.expected_n2_sparse_asymptotic(rho_eff),
        "method": chosen.method, "value": chosen.value,
        "estimated_abs_error": chosen.estimated_abs_error,
    }


def cmd_analytic(args) -> int:
    channel = ChannelModel(args.beta_single, args.eta)
    rows = [analytic_row(rho, channel, args.method) for rho in _rho_values(args)]
    _emit(rows, ANALYTIC_COLUMNS, {"schema": SCHEMA, "command": "analytic", "rows": rows},
          args.format, args.out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    channel = ChannelModel(args.beta_single, args.eta)
    rows = []
    for rho in _rho_values(args):
        config = simulator.SimConfig(RoadScenario(rho), channel, args.runs, args.seed,
                                     args.epsilon)
        st = simulator.run_experiment(config, threads=args.threads)
        row = {"rho": rho, "beta": channel.beta, "eta": channel.eta, "runs": st.runs,
               "seed": args.seed, "mean": st.mean, "variance": st.variance,
               "std_error": st.std_error, "analytic_mean": None, "z_score": None,
               "ks": None, "ks_corrected": None, "ks_critical": None, "normal_pass": None}
        if channel.eta == 2:
            ref = analytic.expected_n2(RoadScenario(rho), channel).value
            row["analytic_mean"] = ref
            row["z_score"] = _clean(st.z_score(ref))
            if st.variance > 0:
                res = stats.normal_approx_test(st.counts,
                                               stats.GaussianFit(ref, math.sqrt(st.variance)))
                row.update(ks=res.ks, ks_corrected=res.ks_corrected,
                           ks_critical=res.critical_value, normal_pass=res.passed)
        row["pmf"] = st.pmf.to_dict()
        rows.append(row)
    _emit(rows, SIMULATE_COLUMNS, {"schema": SCHEMA, "command": "simulate", "rows": rows},
          args.format, args.out)
    return EXIT_OK


def _load_snapshots(args):
    if args.trace_file:
        with open(args.trace_file, "rb") as fh:
            return traces.parse_trace(fh, road_length=args.road_length, lanes=args.lanes)
    rho = _rho_values(args)
    if len(rho) != 1:
        raise ValueError("trace generation takes exactly one --rho")
    return traces.generate_traces(rho[0], n_snapshots=args.count, road_length=args.road_length,
                                  lanes=args.lanes, gap_law=args.gap_law,
                                  hardcore=args.hardcore, seed=args.seed)


def cmd_trace(args) -> int:
    snaps = _load_snapshots(args)
    channels = tuple(ChannelModel(b, args.eta) for b in _betas(args))
    config = traces.TraceExperimentConfig(channels, args.snapshots, args.configs, args.runs,
                                          args.road_length, args.seed)
    results = traces.trace_experiment(config, snaps)
    rows = []
    for res in results:
        st = res.stats
        row = res.to_dict()
        row.update(snapshots=int(res.intensities.size), z_score=_clean(st.z_score(res.analytic_mean)),
                   ks_corrected=None, ks_critical=None, normal_pass=None, overlay=None)
        if st.variance > 0:
            fit = stats.GaussianFit(res.analytic_mean, math.sqrt(st.variance))
            test = stats.normal_approx_test(st.counts, fit)
            row.update(ks_corrected=test.ks_corrected, ks_critical=test.critical_value,
                       normal_pass=test.passed)
            support = np.arange(min(st.pmf.support), max(st.pmf.support) + 1)
            row["overlay"] = {"x": support.tolist(), "pdf": fit.pdf(support).tolist()}
        row["intensities"] = res.intensities.tolist()
        rows.append(row)
    _emit(rows, TRACE_COLUMNS, {"schema": SCHEMA, "command": "trace", "rows": rows},
          args.format, args.out)
    return EXIT_OK


def cmd_gen_traces(args) -> int:
    rho = _rho_values(args)
    if len(rho) != 1:
        raise ValueError("gen-traces takes exactly one --rho")
    snaps = traces.generate_traces(rho[0], n_snapshots=args.count, road_length=args.road_length,
                                   lanes=args.lanes, gap_law=args.gap_law,
                                   hardcore=args.hardcore, seed=args.seed)
    text = traces.serialize_trace(snaps)
    if args.out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    return EXIT_OK


def _default_seed():
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw == "":
        return 0
    try:
        return int(raw)
    except ValueError:
        raise SystemExit(f"error: {SEED_ENV} must be an integer, got {raw!r}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--rho", action="append", metavar="R[,R...]",
                        help="vehicle intensity (1/m); repeat or comma-separate for a grid")
    common.add_argument("--rho-range", nargs=3, metavar=("START", "STOP", "NUM"),
                        help="evenly spaced intensity grid")
    common.add_argument("--eta", type=float, default=2.0, help="path-loss exponent")
    common.add_argument("--seed", type=int, default=None,
                        help=f"master seed (default ${SEED_ENV} or 0)")
    common.add_argument("--out", default=None, help="output path (default stdout)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--threads", type=int, default=1, help="worker processes")

    parser = argparse.ArgumentParser(
        prog="vanet-twohop",
        description="Two-hop connectivity to a roadside unit in a 1D random connection model.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analytic", parents=[common], help="closed forms and asymptotics")
    p.add_argument("--beta", dest="beta_single", type=float, default=1.0)
    p.add_argument("--method", choices=("auto", "series", "quadrature"), default="auto")
    p.set_defaults(func=cmd_analytic)

    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo on the infinite line")
    p.add_argument("--beta", dest="beta_single", type=float, default=1.0)
    p.add_argument("--runs", type=int, default=20_000)
    p.add_argument("--epsilon", type=float, default=simulator.DEFAULT_EPSILON)
    p.set_defaults(func=cmd_simulate)

    def road_flags(p):
        p.add_argument("--road-length", type=float, default=traces.DEFAULT_ROAD_LENGTH)
        p.add_argument("--lanes", type=int, default=traces.DEFAULT_LANES)
        p.add_argument("--count", type=int, default=traces.DEFAULT_SNAPSHOTS,
                       help="number of synthetic snapshots")
        p.add_argument("--gap-law", choices=("exponential", "hardcore"), default="exponential")
        p.add_argument("--hardcore", type=float, default=0.0,
                       help="minimum same-lane spacing (m) for --gap-law hardcore")

    p = sub.add_parser("trace", parents=[common], help="trace-driven experiment")
    p.add_argument("--beta", action="append", required=True, metavar="B[,B...]")
    p.add_argument("--trace-file", default=None)
    p.add_argument("--snapshots", default=f"last:{traces.DEFAULT_KEEP_LAST}",
                   help="all, last:K, I or A:B")
    p.add_argument("--configs", type=int, default=100, help="road configurations per snapshot")
    p.add_argument("--runs", type=int, default=1, help="link draws per configuration")
    road_flags(p)
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("gen-traces", parents=[common], help="write a synthetic trace CSV")
    road_flags(p)
    p.set_defaults(func=cmd_gen_traces, rho=None)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.seed is None:
        args.seed = _default_seed()
    if args.command == "gen-traces" and not args.rho and not args.rho_range:
        args.rho = [repr(0.0604)]
    if args.threads < 1:
        parser.error("--threads must be at least 1")
    try:
        return args.func(args)
    except PrecisionExhausted as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PRECISION
    except (ValueError, OverflowError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
