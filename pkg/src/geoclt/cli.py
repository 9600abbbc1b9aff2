"""Command line entry point: ``geoclt experiment | diagnose | sample | report``."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from .errors import ConfigError, DataError, GeoCLTError, NumericalError

EXIT_OK, EXIT_FAILURE, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3


def _load_toml(path):
    from .experiments import tomllib

    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}") from None


def cmd_experiment(args):
    from .experiments import ExperimentConfig, emit_report, run_experiment

    cfg = ExperimentConfig.from_toml(args.config)
    report = run_experiment(cfg, threads=args.threads)
    paths = emit_report(report, args.out, plots=not args.no_plots)
    _print_summary(report)
    print(f"wrote {', '.join(str(p) for p in paths.values())}")


def cmd_report(args):
    from .experiments import _plots, load_report

    report = load_report(args.inp)
    _print_summary(report)
    if args.plots:
        if not report.records:
            raise DataError("records.csv is required to redraw plots")
        _plots(report, Path(args.inp))


def _print_summary(report):
    print(f"{report.name}  config {report.config_hash}  seed {report.master_seed}")
    print(f"{'n':>8} {'reps':>6} {'mean':>14} {'variance':>12} {'d_Kol':>8} {'fail':>5}")
    for s in report.per_n:
        print(f"{s.n:>8} {s.reps:>6} {s.mean:>14.8g} {s.variance:>12.5g} {s.kolmogorov:>8.4f} {s.failures:>5}")
    if report.variance_fit:
        v = report.variance_fit
        print(f"variance slope {v.slope:.3f} (expected {v.expected:.3f}), r2 {v.r2:.4f}"
              + ("  FLAGGED" if v.flagged else ""))
    if report.rate:
        print(f"d_Kol rate exponent {report.rate.exponent:.3f}, below envelope: {report.rate.below_envelope}")


def cmd_diagnose(args):
    from .diagnostics import diagnostic_csv, run_diagnostic

    res = run_diagnostic(_load_toml(args.config))
    text = diagnostic_csv(res)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{res.kind}.csv").write_text(text)
        summary = {"kind": res.kind, "config_hash": res.config_hash, "slope": res.slope, "intercept": res.intercept}
        (out / f"{res.kind}.json").write_text(json.dumps(summary, indent=1, sort_keys=True))
    sys.stdout.write(text)
    if res.slope is not None:
        print(f"log-log slope {res.slope:.4f}")


def cmd_sample(args):
    from .experiments import ExperimentConfig
    from .model import Model
    from .sampling import SeedStream

    cfg = ExperimentConfig.from_toml(args.config)
    model = Model.from_config(cfg)
    seed = cfg.master_seed if args.seed is None else args.seed
    bp = model.sample(SeedStream(seed, (cfg.tag,)), args.n)
    d = model.dim
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"x{i}" for i in range(d)] + [f"u{i}" for i in range(d)])
        for x, u in zip(bp.x, bp.normal):
            w.writerow([format(v, ".17g") for v in list(x) + list(u)])
    finally:
        if args.out:
            fh.close()


def build_parser():
    p = argparse.ArgumentParser(prog="geoclt", description="Random inscribed polytopes: CLT experiments and diagnostics.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("experiment", help="run a CLT experiment from a TOML config")
    e.add_argument("--config", required=True)
    e.add_argument("--out", required=True)
    e.add_argument("--threads", type=int, default=None, help="worker processes (default: GEOCLT_THREADS or 1)")
    e.add_argument("--no-plots", action="store_true")
    e.set_defaults(func=cmd_experiment)

    r = sub.add_parser("report", help="summarize a finished experiment directory")
    r.add_argument("--in", dest="inp", required=True)
    r.add_argument("--plots", action="store_true", help="redraw the SVG plots")
    r.set_defaults(func=cmd_report)

    g = sub.add_parser("diagnose", help="surface-body, visibility, containment and difference diagnostics")
    g.add_argument("--config", required=True)
    g.add_argument("--out", default=None)
    g.set_defaults(func=cmd_diagnose)

    s = sub.add_parser("sample", help="draw boundary points for the body and geometry of a config")
    s.add_argument("--config", required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_sample)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (GeoCLTError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
