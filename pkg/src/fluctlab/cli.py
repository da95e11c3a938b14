"""Command-line interface: sample, analyze, figures, oracle-check.

Batch orchestration only; all parallelism lives inside run_experiment.
Exit codes: 0 success, 1 identity-check failure, 2 usage or config or
schema error, 3 replicate-failure budget exceeded.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys

from .config import read_config
from .errors import ConfigError, FailureBudgetExceeded, SchemaError
from .figures import write_figures
from .harness import run_experiment
from .observables import Contour, TestFunction
from .oracles import (
    DEFAULT_GAF_TRUNCATION,
    CovarianceOracle,
    DiskQuadrature,
    bergman_identity_check,
    contour_covariance_identity,
    gaf_covariance_truncated,
    resolvent_covariance,
)
from .records import (
    SPECTRA_NAME,
    build_report,
    read_records,
    read_spectra,
    write_report,
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fluctlab",
        description="Monte Carlo laboratory for spectral fluctuations of "
                    "i.i.d. random matrices")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample",
                       help="run an experiment and persist its records")
    p.add_argument("--config", required=True, help="experiment config file")
    p.add_argument("--out", help="output directory (overrides config)")
    p.add_argument("--seed", type=int,
                   help="master seed (overrides config)")
    p.add_argument("--threads", type=int, default=1,
                   help="worker threads; affects speed only, never results")
    p.add_argument("--contour-radius", type=float,
                   help="contour radius (overrides config)")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("analyze",
                       help="estimate moments and compare to theory")
    p.add_argument("records", help="records file written by sample")
    p.add_argument("--out", help="report directory (default: records dir)")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("figures", help="emit SVG figures from records")
    p.add_argument("records", help="records file written by sample")
    p.add_argument("--out", help="figure directory (default: records dir)")
    p.add_argument("--qq-column", default="f0.re",
                   help="column for the QQ plot, e.g. f0.re or g1.im")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_figures)

    p = sub.add_parser("oracle-check",
                       help="verify the closed-form covariance identities")
    p.add_argument("--coarse", action="store_true",
                   help="use a deliberately coarse disk quadrature "
                        "(forces the failure path)")
    p.add_argument("--gaf-truncation", type=int,
                   default=DEFAULT_GAF_TRUNCATION,
                   help="series truncation order for the GAF identity")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_oracle_check)
    return parser


def _say(args, text: str) -> None:
    if not args.quiet:
        print(text)


def cmd_sample(args) -> int:
    cfg = read_config(args.config)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, master_seed=args.seed)
    if args.contour_radius is not None:
        cfg = dataclasses.replace(
            cfg, contour=Contour(args.contour_radius,
                                 cfg.contour.node_count))
    if args.out is not None:
        cfg = dataclasses.replace(cfg, outputs=args.out)

    total_tasks = len(cfg.n_values) * cfg.replicates
    tick = max(1, total_tasks // 20)

    def progress(done, total):
        if not args.quiet and (done % tick == 0 or done == total):
            print(f"progress: {done}/{total} replicates", file=sys.stderr)

    records = run_experiment(cfg, threads=args.threads, persist=True,
                             progress=progress)
    failed = sum(1 for rec in records if rec.failed)
    _say(args, f"wrote {len(records)} replicate records "
               f"({failed} failed) to {cfg.outputs}")
    return 0


def cmd_analyze(args) -> int:
    cfg, records, _ = read_records(args.records)
    out_dir = args.out or os.path.dirname(os.path.abspath(args.records))
    bundle = build_report(cfg, records)
    paths = write_report(bundle, out_dir)
    flagged = [row for row in bundle.deviations
               if "z>4" in row.flag and "exploratory" not in row.flag]
    _say(args, f"experiment {bundle.experiment_id}: "
               f"{len(bundle.deviations)} theory comparisons, "
               f"{len(flagged)} flagged")
    for path in paths:
        _say(args, f"wrote {path}")
    return 0


def cmd_figures(args) -> int:
    cfg, records, _ = read_records(args.records)
    records_dir = os.path.dirname(os.path.abspath(args.records))
    out_dir = args.out or records_dir
    spectra = read_spectra(os.path.join(records_dir, SPECTRA_NAME))
    paths = write_figures(cfg, records, spectra, out_dir,
                          qq_column=args.qq_column)
    for path in paths:
        _say(args, f"wrote {path}")
    return 0


def _oracle_rows(coarse: bool, truncation: int):
    """(identity, point, gap, bound, passed) rows for the check table."""
    quad = DiskQuadrature(4, 8) if coarse else None
    oracle = CovarianceOracle()
    rows = []

    for zr in (2.0, 3.0, 5.0):
        for wr in (2.0, 3.0, 5.0):
            z, w = complex(zr), complex(wr)
            check = bergman_identity_check(z, w, q=quad)
            rows.append(("bergman-kernel", f"z={zr:g} w={wr:g}", check.gap,
                         oracle.bergman_gap_tol,
                         check.gap <= oracle.bergman_gap_tol))

    contour = Contour(2.0, 512)
    fns = (TestFunction((0.0, 1.0)), TestFunction((0.0, 0.0, 1.0)),
           TestFunction((0.0, 1.0, 1.0)))
    for f in fns:
        for g in fns:
            check = contour_covariance_identity(f, g, contour, q=quad)
            rows.append(("contour-covariance",
                         f"f={f.describe()} g={g.describe()}", check.gap,
                         oracle.contour_gap_tol,
                         check.gap <= oracle.contour_gap_tol))

    for zr in (1.5, 2.0, 3.0, 5.0, 10.0):
        for wr in (1.5, 2.0, 3.0, 5.0, 10.0):
            z, w = complex(zr), complex(wr)
            partial, tail = gaf_covariance_truncated(truncation, z, w)
            gap = abs(partial - resolvent_covariance(z, w))
            rows.append(("gaf-series", f"z={zr:g} w={wr:g} K={truncation}",
                         gap, tail, gap <= tail))
    return rows


def cmd_oracle_check(args) -> int:
    if args.gaf_truncation < 1:
        raise ConfigError("--gaf-truncation must be at least 1")
    rows = _oracle_rows(args.coarse, args.gaf_truncation)
    if not args.quiet:
        print(f"{'identity':20s} {'point':34s} {'gap':>12s} "
              f"{'bound':>12s} status")
        for name, point, gap, bound, passed in rows:
            print(f"{name:20s} {point:34s} {gap:12.3e} {bound:12.3e} "
                  f"{'pass' if passed else 'FAIL'}")
    failures = [(name, point) for name, point, _, _, passed in rows
                if not passed]
    if failures:
        print(f"{len(failures)} identity check(s) failed:", file=sys.stderr)
        for name, point in failures:
            print(f"  {name} at {point}", file=sys.stderr)
        return 1
    _say(args, f"all {len(rows)} identity checks passed")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        return args.func(args)
    except (ConfigError, SchemaError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FailureBudgetExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
