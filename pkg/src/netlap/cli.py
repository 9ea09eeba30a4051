"""Command line front end: spectrum / converge / compare / oracle.

Exit codes: 0 success, 2 config error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import yaml

from . import harness, oracle, spectra
from .geometry import GeometryError
from .harness import ConfigError
from .sampling import SamplingError, save_net_csv
from .spectra import SolverError


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="netlap",
                                description="graph Laplacian spectra on epsilon-nets")
    sub = p.add_subparsers(dest="command", required=True)
    for name, desc in [("spectrum", "single (eps, rho) spectrum run"),
                       ("converge", "convergence sweep over the rho schedule"),
                       ("compare", "A/B sweep with the compare overrides"),
                       ("oracle", "finite-difference reference spectrum")]:
        q = sub.add_parser(name, help=desc)
        q.add_argument("--config", required=True, help="YAML experiment config")
        q.add_argument("--out", default="out", help="output directory")
        q.add_argument("--seed", type=int, default=None, help="override master seed")
        q.add_argument("--threads", type=int, default=1, help="sweep worker count")
        if name == "oracle":
            q.add_argument("--h", type=float, default=1e-3, help="grid step")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = harness.parse_config(args.config)
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed, sampler_seed=args.seed)
    except (ConfigError, OSError, yaml.YAMLError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        return _dispatch(args, cfg, out)
    except (SolverError, SamplingError, GeometryError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


def _dispatch(args, cfg, out: Path) -> int:
    prov = harness.provenance_lines(cfg)
    if args.command == "spectrum":
        if len(cfg.rho_values) != 1:
            print("config error: spectrum needs exactly one rho", file=sys.stderr)
            return 2
        rows, net = harness.run_spectrum(cfg)
        harness.write_report_csv(out / "report.csv", rows, prov, cfg.warnings)
        save_net_csv(net, out / "net.csv")
        for r in rows:
            print(f"k={r.k} lambda={r.lambda_gamma:.8g} ref={r.lambda_ref:.8g} "
                  f"rel_err={r.rel_err:.3g}")
        return 0
    if args.command == "converge":
        if len(cfg.rho_values) < 3:
            print("config error: converge needs at least 3 rho points", file=sys.stderr)
            return 2
        report = harness.run_sweep(cfg, threads=args.threads)
        if report.failures and not report.rows:
            print("numerical failure: " + "; ".join(report.failures), file=sys.stderr)
            return 3
        harness.write_report_csv(out / "report.csv", report.rows, prov,
                                 cfg.warnings + report.failures)
        harness.write_rates_csv(out / "rates.csv", report.rates)
        _, net = harness.run_spectrum(cfg, cfg.rho_values[-1], with_eigfn=False)
        save_net_csv(net, out / "net.csv")
        for k, slope, _, n in report.rates:
            print(f"k={k} slope={slope:.3f} ({n} points)")
        return 0
    if args.command == "compare":
        cfg_b = harness.apply_compare_overrides(cfg)
        rep_a = harness.run_sweep(cfg, threads=args.threads)
        rep_b = harness.run_sweep(cfg_b, threads=args.threads)
        harness.write_report_csv(out / "report_a.csv", rep_a.rows, prov, cfg.warnings)
        harness.write_report_csv(out / "report_b.csv", rep_b.rows,
                                 harness.provenance_lines(cfg_b), cfg_b.warnings)
        harness.write_rates_csv(out / "rates_a.csv", rep_a.rates)
        harness.write_rates_csv(out / "rates_b.csv", rep_b.rates)
        for tag, rep in (("A", rep_a), ("B", rep_b)):
            lam1 = [r for r in rep.rows if r.k == 1]
            if lam1:
                print(f"{tag}: rel_err(lambda_1) = "
                      + ", ".join(f"{r.rel_err:.3g}" for r in lam1))
        return 0
    # oracle
    if cfg.space.dim != 1:
        print("numerical failure: the FD oracle is 1-d only", file=sys.stderr)
        return 3
    fd = oracle.fd_metric_graph_spectrum(cfg.space, args.h, cfg.k_max, strict=False)
    ref = spectra.reference_spectrum(cfg.space, cfg.k_max)
    with open(out / "oracle.csv", "w") as fh:
        fh.write("k,lambda_fd,lambda_ref,rel_diff\n")
        for k in range(cfg.k_max + 1):
            fd_v = float(fd.eigenvalues[k])
            rf_v = float(ref.eigenvalues[k])
            rel = abs(fd_v - rf_v) / rf_v if rf_v > 0 else abs(fd_v - rf_v)
            fh.write(f"{k},{fd_v:.17g},{rf_v:.17g},{rel:.17g}\n")
            print(f"k={k} fd={fd_v:.8g} ref={rf_v:.8g} rel_diff={rel:.3g}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
