"""Command-line front end: generate, estimate, calibrate, sweep, min-n.

Exit codes: 0 on success, 1 on domain or runtime errors (bad data, failed
preconditions, I/O), 2 on usage errors.  All randomness flows from --seed
or the config file's master_seed; repeated invocations with identical
flags write identical files.
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .calibration import QuadratureSpec, ScoreDifferenceLaw, estimate_c1, estimate_pe, solve_alpha_for_pe
from .comparisons import (
    CsvFormatError,
    LogisticLink,
    generate_comparisons,
    generate_samples,
    read_comparisons_csv,
    read_samples_csv,
    write_comparisons_csv,
    write_samples_csv,
)
from .estimator import angle, estimate_beta, estimate_covariance, norm_error, write_estimate_csv
from .harness import (
    TrialFailure,
    find_min_n_detailed,
    read_min_n_config,
    read_sweep_config,
    realize_model,
    run_sweep,
    write_results,
)
from .randomness import RngStream, SpdMatrix


@dataclass(frozen=True)
class TruthRecord:
    """Ground truth as persisted by generate: weights plus link calibration."""

    beta: np.ndarray
    alpha: Optional[float]
    c1: Optional[float]


def write_truth_csv(model, alpha: Optional[float], c1: Optional[float], path) -> None:
    """One row: weights, mean, row-major covariance, link slope, shrinkage constant.

    The slope column holds the word "deterministic" for noiseless generation,
    and the shrinkage column is then empty.
    """
    d = model.d
    header = (
        [f"beta_{k + 1}" for k in range(d)]
        + [f"mu_{k + 1}" for k in range(d)]
        + [f"sigma_{r + 1}_{c + 1}" for r in range(d) for c in range(d)]
        + ["alpha", "c1"]
    )
    row = (
        [repr(float(v)) for v in model.beta]
        + [repr(float(v)) for v in model.mu]
        + [repr(float(v)) for v in model.sigma.entries.ravel()]
        + ["deterministic" if alpha is None else repr(float(alpha))]
        + ["" if c1 is None else repr(float(c1))]
    )
    with open(path, "w", newline="") as f:
        f.write(",".join(header) + "\n")
        f.write(",".join(row) + "\n")


def read_truth_csv(path) -> TruthRecord:
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        row = next(reader, None)
    if not header or not header[0].startswith("beta_") or row is None:
        raise CsvFormatError(f"{path}: not a truth file")
    d = sum(1 for name in header if name.startswith("beta_"))
    if len(header) != 2 * d + d * d + 2 or len(row) != len(header):
        raise CsvFormatError(f"{path}: expected {2 * d + d * d + 2} columns for d={d}")
    try:
        beta = np.array([float(v) for v in row[:d]])
        alpha = None if row[-2] == "deterministic" else float(row[-2])
        c1 = None if row[-1] == "" else float(row[-1])
    except ValueError as exc:
        raise CsvFormatError(f"{path}: {exc}") from exc
    return TruthRecord(beta, alpha, c1)


def _read_vector_csv(path, prefix: str) -> np.ndarray:
    """One-row CSV with header `<prefix>_1,...,<prefix>_k`."""
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        row = next(reader, None)
    if not header or header != [f"{prefix}_{k + 1}" for k in range(len(header))] or row is None:
        raise CsvFormatError(f"{path}: expected a one-row CSV with header {prefix}_1,...")
    if len(row) != len(header):
        raise CsvFormatError(f"{path}:2: expected {len(header)} fields, got {len(row)}")
    try:
        return np.array([float(v) for v in row])
    except ValueError as exc:
        raise CsvFormatError(f"{path}:2: {exc}") from exc


def _read_sigma_csv(path) -> SpdMatrix:
    """Row-major flattened covariance with header sigma_1_1,...,sigma_d_d."""
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        row = next(reader, None)
    if not header or row is None or len(row) != len(header):
        raise CsvFormatError(f"{path}: expected a one-row CSV with header sigma_1_1,...")
    d = round(len(header) ** 0.5)
    expected = [f"sigma_{r + 1}_{c + 1}" for r in range(d) for c in range(d)]
    if d * d != len(header) or header != expected:
        raise CsvFormatError(f"{path}: header is not a row-major d x d sigma grid")
    try:
        entries = np.array([float(v) for v in row]).reshape(d, d)
    except ValueError as exc:
        raise CsvFormatError(f"{path}:2: {exc}") from exc
    return SpdMatrix(entries)


def cmd_generate(args) -> int:
    stream = RngStream(args.seed)
    model, alpha, c1 = realize_model(stream, args.d, args.lambda_min, args.pe)
    samples = generate_samples(stream.child("features"), model, args.n)
    dataset = generate_comparisons(stream.child("comparisons"), model, samples, args.m)
    write_samples_csv(samples, f"{args.out_prefix}.samples.csv")
    write_comparisons_csv(dataset, f"{args.out_prefix}.comparisons.csv")
    write_truth_csv(model, alpha, c1, f"{args.out_prefix}.truth.csv")
    return 0


def cmd_estimate(args) -> int:
    samples = read_samples_csv(args.samples)
    dataset = read_comparisons_csv(args.comparisons, samples.n)
    cov = estimate_covariance(samples)
    est = estimate_beta(dataset, samples, cov)
    write_estimate_csv(est, args.out)
    print("beta_hat=" + ",".join(repr(float(v)) for v in est.beta_hat))
    if args.truth is not None:
        truth = read_truth_csv(args.truth)
        if truth.c1 is not None:
            print(f"norm_error={norm_error(est.beta_hat, truth.beta, truth.c1)!r}")
        print(f"angle={angle(est.beta_hat, truth.beta)!r}")
    return 0


def cmd_calibrate(args) -> int:
    if args.sigma_s is not None:
        if args.beta_file is not None or args.sigma_file is not None:
            args.parser.error("--sigma-s excludes --beta-file/--sigma-file")
        law = ScoreDifferenceLaw(args.sigma_s)
    else:
        if args.beta_file is None or args.sigma_file is None:
            args.parser.error("need either --sigma-s or both --beta-file and --sigma-file")
        law = ScoreDifferenceLaw.from_parameters(
            _read_vector_csv(args.beta_file, "beta"), _read_sigma_csv(args.sigma_file)
        )
    quad = QuadratureSpec()
    alpha = args.alpha if args.alpha is not None else solve_alpha_for_pe(args.pe, law, quad)
    link = LogisticLink(alpha)
    print(f"c1={estimate_c1(link, law, quad)!r} pe={estimate_pe(link, law, quad)!r} alpha={alpha!r}")
    return 0


def cmd_sweep(args) -> int:
    result = run_sweep(read_sweep_config(args.config))
    write_results(result, args.out_prefix)
    failed = sum(1 for row in result.rows if isinstance(row, TrialFailure))
    if failed:
        print(f"warning: {failed} of {len(result.rows)} trials failed", file=sys.stderr)
    return 0


def cmd_min_n(args) -> int:
    found, result = find_min_n_detailed(read_min_n_config(args.config))
    write_results(result, args.out_prefix)
    print("not-found" if found is None else found)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rankreg",
        description="Rank regression from noisy pairwise comparisons: data synthesis, "
        "closed-form estimation, noise calibration, and parameter sweeps.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="synthesize samples, comparisons, and a truth record")
    g.add_argument("--d", type=int, required=True, help="feature dimension")
    g.add_argument("--n", type=int, required=True, help="comparison pool size (2n rows are drawn)")
    g.add_argument("--m", type=int, required=True, help="number of comparisons")
    g.add_argument("--lambda-min", type=float, default=1.0, help="smallest covariance eigenvalue (default 1)")
    g.add_argument("--pe", type=float, default=0.0, help="target label-noise rate; 0 means noiseless")
    g.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    g.add_argument("--out-prefix", default="out", help="output file prefix (default 'out')")
    g.set_defaults(func=cmd_generate, parser=g)

    e = sub.add_parser("estimate", help="estimate weights from samples and comparisons")
    e.add_argument("--samples", required=True, help="samples CSV path")
    e.add_argument("--comparisons", required=True, help="comparisons CSV path")
    e.add_argument("--truth", help="truth CSV path; enables metrics output")
    e.add_argument("--out", default="beta_hat.csv", help="estimate CSV path (default beta_hat.csv)")
    e.set_defaults(func=cmd_estimate, parser=e)

    c = sub.add_parser("calibrate", help="map the logistic slope to the noise rate and back")
    pick = c.add_mutually_exclusive_group(required=True)
    pick.add_argument("--alpha", type=float, help="logistic slope to evaluate")
    pick.add_argument("--pe", type=float, help="target noise rate to solve the slope for")
    c.add_argument("--sigma-s", type=float, help="score-difference standard deviation")
    c.add_argument("--beta-file", help="one-row CSV of weights (header beta_1,...)")
    c.add_argument("--sigma-file", help="one-row CSV of the row-major covariance (header sigma_1_1,...)")
    c.set_defaults(func=cmd_calibrate, parser=c)

    s = sub.add_parser("sweep", help="run a parameter sweep from a config file")
    s.add_argument("--config", required=True, help="key=value sweep configuration file")
    s.add_argument("--out-prefix", default="sweep", help="output prefix for .trials.csv/.agg.csv")
    s.set_defaults(func=cmd_sweep, parser=s)

    n = sub.add_parser("min-n", help="smallest n on a grid whose mean angle clears a threshold")
    n.add_argument("--config", required=True, help="key=value configuration file with an n_grid")
    n.add_argument("--out-prefix", default="min_n", help="output prefix for .trials.csv/.agg.csv")
    n.set_defaults(func=cmd_min_n, parser=n)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit as exc:  # argparse usage errors
        return int(exc.code or 0)
    except (ValueError, OSError, RuntimeError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entry() -> None:
    sys.exit(main())
