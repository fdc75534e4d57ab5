"""Command-line interface.

Exit codes: 0 success, 1 a patient or input failed, 2 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from collections import defaultdict
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, load_config
from .error_models import DegenerateDataError, estimate_duplicate_sd, fit_capillary_error
from .harness import run_cohort, run_patient
from .io import PatientFileError, load_patient
from .reports import relative_difference_histogram
from .simulate import generate_synthetic_cohort

EXIT_OK, EXIT_FAILED, EXIT_CONFIG = 0, 1, 2

log = logging.getLogger("ogttbayes")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ogttbayes", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="JSON run configuration")
    parser.add_argument("--seed", type=int, help="master seed (overrides the config)")
    parser.add_argument("--out", help="output directory (overrides the config)")
    parser.add_argument("--iterations", type=int, help="sampler iterations (overrides the config)")
    parser.add_argument("--workers", type=int, help="parallel patients for cohort runs")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("infer", help="run inference for one patient file")
    p.add_argument("patient")

    p = sub.add_parser("cohort", help="run every patient file in a directory")
    p.add_argument("directory")

    p = sub.add_parser("simulate", help="write a synthetic cohort")
    p.add_argument("--n", type=int, required=True)

    p = sub.add_parser("histogram", help="relative capillary-venous difference histogram")
    p.add_argument("directory")
    p.add_argument("--bin-width", type=float, default=0.05)

    p = sub.add_parser(
        "calibrate-error",
        help="fit error-model parameters from calibration pairs",
        description=(
            "Capillary pairs: CSV with header patient_id,capillary_mgdl,venous_mgdl. "
            "Duplicate venous assays (--duplicates): header first_mgdl,second_mgdl."
        ),
    )
    p.add_argument("pairs")
    p.add_argument("--duplicates", action="store_true")
    return parser


def _config_from_args(args) -> RunConfig:
    config = load_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        config = config.with_seed(args.seed)
    if args.iterations is not None:
        config = replace(config, sampler=replace(config.sampler, iterations=args.iterations))
    if args.out is not None:
        config = replace(config, out_dir=args.out)
    if args.workers is not None:
        config = replace(config, workers=args.workers)
    return config


def _out_dir(config: RunConfig, default: str) -> Path:
    return Path(config.out_dir or default)


def _cmd_infer(args, config) -> int:
    obs = load_patient(args.patient)
    out = _out_dir(config, "results") / obs.patient_id
    result = run_patient(obs, config, out)
    summary = result.summary()
    print(json.dumps(summary, indent=2, sort_keys=True))
    return EXIT_OK


def _cmd_cohort(args, config) -> int:
    out = _out_dir(config, "results")
    result = run_cohort(args.directory, config, out)
    print(json.dumps({"tallies": result.tallies, "fractions": result.fractions}, indent=2, sort_keys=True))
    if result.failed:
        log.error("failed patients: %s", ", ".join(result.failed))
        return EXIT_FAILED
    return EXIT_OK


def _cmd_simulate(args, config) -> int:
    out = _out_dir(config, "synthetic")
    rng = np.random.default_rng(config.sampler.seed)
    patients = generate_synthetic_cohort(args.n, config, rng, out)
    print(f"wrote {len(patients)} patients to {out}")
    return EXIT_OK


def _cmd_histogram(args, config) -> int:
    paths = sorted(Path(args.directory).glob("*.csv"))
    observations = [load_patient(p) for p in paths]
    out = _out_dir(config, ".")
    out.mkdir(parents=True, exist_ok=True)
    rows = relative_difference_histogram(observations, args.bin_width, out / "relative_differences.csv")
    for center, _, _, count in rows:
        print(f"{center:+.3f} {count}")
    return EXIT_OK


def _cmd_calibrate(args, config) -> int:
    with open(args.pairs, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        rows = list(reader)
    if args.duplicates:
        pairs = [(float(r["first_mgdl"]), float(r["second_mgdl"])) for r in rows]
        print(json.dumps({"duplicate_sd": estimate_duplicate_sd(pairs), "n_pairs": len(pairs)}))
        return EXIT_OK
    groups = defaultdict(list)
    for r in rows:
        groups[r["patient_id"]].append(float(r["capillary_mgdl"]) - float(r["venous_mgdl"]))
    spec = fit_capillary_error(dict(groups))
    print(json.dumps(spec.to_dict(), indent=2, sort_keys=True))
    return EXIT_OK


COMMANDS = {
    "infer": _cmd_infer,
    "cohort": _cmd_cohort,
    "simulate": _cmd_simulate,
    "histogram": _cmd_histogram,
    "calibrate-error": _cmd_calibrate,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        config = _config_from_args(args)
    except (ConfigError, ValueError) as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](args, config)
    except (PatientFileError, DegenerateDataError, KeyError, ValueError, OSError, RuntimeError) as exc:
        log.error("%s", exc)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
