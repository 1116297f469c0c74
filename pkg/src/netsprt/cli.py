"""Command-line front end.

Subcommands:
  run         execute the configured experiment, write metrics CSV
  sweep       same, over a log-spaced budget grid (alpha = beta)
  thresholds  print closed-form and numeric thresholds as JSON
  lfd         dump the clipping band and sampled least-favorable densities
  snapshot    dump raw statistic samples at selected times

Exit codes: 0 success, 1 configuration error, 2 runtime error.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace

import numpy as np

from . import montecarlo
from .hypothesis import llr_moments
from .lfd import (
    clipped_llr,
    clipped_llr_moments,
    excess_masses,
    lfd_densities,
    solve_lfd_eps,
    support_interval,
)
from .montecarlo import ConfigError, ExperimentConfig, config_from_json
from .network import equal_weight_matrix, xi_bound
from .thresholds import ErrorBudget, ThresholdError, closed_form, tighter_numeric


def _load_config(path: str, seed: int | None) -> ExperimentConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from None
    cfg = config_from_json(text)
    if seed is not None:
        cfg = montecarlo.with_seed(cfg, seed)
    return cfg


def _cmd_run(args) -> int:
    cfg = _load_config(args.config, args.seed)
    rows = montecarlo.run_experiment(cfg)
    text = montecarlo.metrics_to_csv(rows, args.out)
    if args.verbose:
        sys.stdout.write(text)
    else:
        print(f"wrote {len(rows)} rows to {args.out}")
    return 0


def _cmd_sweep(args) -> int:
    cfg = _load_config(args.config, args.seed)
    grid = np.logspace(-3, -1, args.points)
    budgets = tuple((float(a), float(a)) for a in grid)
    cfg = replace(cfg, detection=replace(cfg.detection, budgets=budgets))
    rows = montecarlo.run_experiment(cfg)
    text = montecarlo.metrics_to_csv(rows, args.out)
    if args.verbose:
        sys.stdout.write(text)
    else:
        print(f"wrote {len(rows)} rows to {args.out}")
    return 0


def _cmd_thresholds(args) -> int:
    cfg = _load_config(args.config, args.seed)
    graph = montecarlo._graph_for(cfg, (cfg.execution.seed, montecarlo.SEED_GRAPH))
    w = equal_weight_matrix(graph)
    xi = xi_bound(w, cfg.detection.xi_method, cfg.detection.xi_power)
    plain_moments = llr_moments(cfg.test)
    clip = None
    if "lfd" in cfg.detection.variants:
        clip = solve_lfd_eps(cfg.test, cfg.contamination.epsilon, cfg.detection.lfd_tol)
    entries = []
    for name in cfg.detection.variants:
        moments = montecarlo._cell_moments(cfg, name, plain_moments, clip)
        for alpha, beta in cfg.detection.budgets:
            budget = ErrorBudget(alpha, beta)
            closed = closed_form(moments, xi, budget)
            entry = {
                "variant": name,
                "alpha": alpha,
                "beta": beta,
                "moments": {
                    "mean0": moments.mean0,
                    "mean1": moments.mean1,
                    "var0": moments.var0,
                    "var1": moments.var1,
                },
                "closed_form": {"lower": closed.lower, "upper": closed.upper},
            }
            try:
                numeric = tighter_numeric(moments, xi, budget)
                entry["numeric"] = {"lower": numeric.lower, "upper": numeric.upper}
            except ThresholdError as exc:
                entry["numeric"] = None
                entry["numeric_error"] = str(exc)
            entries.append(entry)
    doc = {
        "scenario": cfg.scenario_label,
        "xi": {"value": xi.value, "method": xi.method, "power": xi.power},
        "n_nodes": graph.n,
        "entries": entries,
    }
    text = json.dumps(doc, indent=2)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    print(text)
    return 0


def _cmd_lfd(args) -> int:
    cfg = _load_config(args.config, args.seed)
    clip = solve_lfd_eps(cfg.test, cfg.contamination.epsilon, cfg.detection.lfd_tol)
    masses = excess_masses(clip)
    moments = clipped_llr_moments(masses, clip)
    doc = {
        "eps": clip.eps,
        "c0": clip.c0,
        "c1": clip.c1,
        "C0": clip.lower,
        "C1": clip.upper,
        "edge_mass_lower": list(masses.a0),
        "edge_mass_upper": list(masses.a1),
        "interior_level": list(masses.a2),
        "clipped_moments": {
            "mean0": moments.mean0,
            "mean1": moments.mean1,
            "var0": moments.var0,
            "var1": moments.var1,
        },
    }
    print(json.dumps(doc, indent=2))
    if args.out:
        a, b = support_interval(cfg.test)
        ys = np.linspace(a, b, args.samples)
        q0, q1 = lfd_densities(clip, ys)
        eta_c = clipped_llr(clip, cfg.test, ys)
        with open(args.out, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["y", "q0", "q1", "clipped_llr"])
            for i in range(len(ys)):
                writer.writerow([repr(float(v)) for v in (ys[i], q0[i], q1[i], eta_c[i])])
        print(f"wrote {len(ys)} density samples to {args.out}")
    return 0


def _cmd_snapshot(args) -> int:
    cfg = _load_config(args.config, args.seed)
    if args.times:
        times = [int(x) for x in args.times.split(",")]
    else:
        times = list(cfg.execution.snapshot_times)
    if not times:
        raise ConfigError("no snapshot times given (execution.snapshot_times or --times)")
    snaps = montecarlo.collect_statistic_snapshots(cfg, times)
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["time", "node", "value"])
        for t in sorted(snaps):
            block = snaps[t]
            for r in range(block.shape[0]):
                for k in range(block.shape[1]):
                    writer.writerow([t, k, repr(float(block[r, k]))])
    print(f"wrote snapshots for times {sorted(snaps)} to {args.out}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="netsprt",
        description="Robust sequential detection over distributed sensor networks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_out=True):
        p.add_argument("--config", required=True, help="experiment config JSON")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("-v", "--verbose", action="store_true")
        if needs_out:
            p.add_argument("--out", required=True, help="output CSV path")

    p_run = sub.add_parser("run", help="run the configured experiment")
    common(p_run)
    p_run.set_defaults(func=_cmd_run)

    p_sweep = sub.add_parser("sweep", help="run over a log-spaced alpha=beta grid")
    common(p_sweep)
    p_sweep.add_argument("--points", type=int, default=3, help="grid points from 1e-3 to 1e-1")
    p_sweep.set_defaults(func=_cmd_sweep)

    p_thr = sub.add_parser("thresholds", help="print decision thresholds as JSON")
    common(p_thr, needs_out=False)
    p_thr.add_argument("--out", default=None, help="also write the JSON here")
    p_thr.set_defaults(func=_cmd_thresholds)

    p_lfd = sub.add_parser("lfd", help="dump the clipping band and density curves")
    common(p_lfd, needs_out=False)
    p_lfd.add_argument("--out", default=None, help="CSV path for sampled densities")
    p_lfd.add_argument("--samples", type=int, default=1001)
    p_lfd.set_defaults(func=_cmd_lfd)

    p_snap = sub.add_parser("snapshot", help="dump raw statistic samples")
    common(p_snap)
    p_snap.add_argument("--times", default=None, help="comma-separated time indices")
    p_snap.set_defaults(func=_cmd_snapshot)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
