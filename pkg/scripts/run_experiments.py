"""Run every experiment and diagnostic config in configs/ through the CLI.

    python3 scripts/run_experiments.py [--out results] [--threads N] [--only clt_disc ...]

Experiment configs write records.csv, report.json and SVG plots to
``<out>/<name>``; diagnostic configs write ``<kind>.csv`` and ``<kind>.json``.
"""
import argparse
import sys
from pathlib import Path

from geoclt.cli import main as cli

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results")
    ap.add_argument("--threads", type=int, default=None)
    ap.add_argument("--only", nargs="*", default=None, help="config stems to run")
    args = ap.parse_args(argv)
    status = 0
    for path in sorted(CONFIGS.glob("*.toml")):
        if args.only and path.stem not in args.only:
            continue
        out = str(Path(args.out) / path.stem)
        print(f"== {path.stem}", flush=True)
        if path.stem.startswith("diagnose_"):
            code = cli(["diagnose", "--config", str(path), "--out", out])
        else:
            extra = ["--threads", str(args.threads)] if args.threads else []
            code = cli(["experiment", "--config", str(path), "--out", out, *extra])
        status = status or code
    return status


if __name__ == "__main__":
    sys.exit(main())
