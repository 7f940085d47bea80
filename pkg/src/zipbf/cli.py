"""Command-line front end.

    zipbf test COUNTS          Poisson vs ZIP, no covariates
    zipbf test-reg DATA.csv    Poisson regression vs ZIP regression
    zipbf check DATA.csv       integrability diagnostics only

Exit codes: 0 success, 2 input error, 3 integrability refusal, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import special

from .errors import DomainError, InputError, IntegrabilityError, NumericalError, PreconditionError
from .exact_bf import (
    BfResult,
    log_bf_all_zeros,
    log_bf_gamma,
    log_bf_jeffreys,
    log_bf_l1,
    summarize,
)
from .numerics import IntegrationConfig
from .priors import PriorSpec
from .rank_deficient import log_bf_rank_deficient
from .regression_bf import check_integrability, load_regression, log_bf_regression

EXIT_OK, EXIT_INPUT, EXIT_INTEGRABILITY, EXIT_NUMERICAL = 0, 2, 3, 4
MODELS = {"M0": "Poisson", "M1": "zero-inflated Poisson"}
ALL_ZEROS_NOTICE = (
    "all counts are zero: the improper-prior ZIP marginal is infinite, so the "
    "Bayes factor uses a proper Gamma(a, b) prior on lambda; default a = b = 1 "
    "(Exponential(1)), giving B10 = sum_{j=0}^{n} 1/(j+1)"
)


@dataclass
class RunConfig:
    command: str
    input_path: Path
    prior: PriorSpec | None = None
    prior_odds: float = 1.0
    integration: IntegrationConfig = field(default_factory=IntegrationConfig)
    output_format: str = "json"
    intercept: bool = False
    force: bool = False
    enumerate_selections: bool = False


# --------------------------------------------------------------------------
# file parsing
# --------------------------------------------------------------------------


def read_counts(path) -> list[int]:
    """One nonnegative integer per line; optional ``count`` header; ``#`` comments."""
    counts = []
    seen_data = False
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if not seen_data and line.lower() == "count":
                seen_data = True
                continue
            seen_data = True
            try:
                value = int(line)
            except ValueError:
                raise InputError(f"{path}: line {lineno}: not an integer: {line!r}") from None
            if value < 0:
                raise InputError(f"{path}: line {lineno}: negative count {value}")
            counts.append(value)
    if not counts:
        raise InputError(f"{path}: no counts found")
    return counts


def read_regression_csv(path, intercept: bool = False):
    """CSV with header ``count,offset,x1,...,xq``; the offset column is optional.

    Returns (counts, design matrix, offsets, covariate names).
    """
    rows = []
    header = None
    with open(path, encoding="utf-8", newline="") as fh:
        for lineno, rec in enumerate(csv.reader(fh), start=1):
            if not rec or not "".join(rec).strip() or rec[0].strip().startswith("#"):
                continue
            rec = [c.strip() for c in rec]
            if header is None:
                header = [c.lower() for c in rec]
                if "count" not in header:
                    raise InputError(f"{path}: line {lineno}: header must contain a 'count' column")
                continue
            if len(rec) != len(header):
                raise InputError(f"{path}: line {lineno}: expected {len(header)} fields, got {len(rec)}")
            try:
                vals = [float(c) for c in rec]
            except ValueError:
                raise InputError(f"{path}: line {lineno}: non-numeric field") from None
            if not all(math.isfinite(v) for v in vals):
                raise InputError(f"{path}: line {lineno}: non-finite field")
            c = vals[header.index("count")]
            if c < 0 or c != int(c):
                raise InputError(f"{path}: line {lineno}: count must be a nonnegative integer")
            rows.append(vals)
    if header is None or not rows:
        raise InputError(f"{path}: no data rows")
    data = np.array(rows)
    cov_names = [h for h in header if h not in ("count", "offset")]
    counts = data[:, header.index("count")].astype(np.int64)
    offsets = data[:, header.index("offset")] if "offset" in header else np.zeros(len(rows))
    X = data[:, [header.index(h) for h in cov_names]] if cov_names else np.zeros((len(rows), 0))
    if intercept:
        X = np.column_stack([np.ones(len(rows)), X])
        cov_names = ["(intercept)"] + cov_names
    if X.shape[1] == 0:
        raise InputError(f"{path}: no covariate columns (use --intercept for an intercept-only model)")
    return counts, X, offsets, cov_names


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def _bf_block(res: BfResult) -> dict:
    return {
        "log_bf10": res.log_bf10,
        "bf10": res.bf10,
        "post_prob_m1": res.post_prob_m1,
        "post_prob_m0": float(special.expit(-(res.log_bf10 + math.log(res.prior_odds)))),
        "prior_odds": res.prior_odds,
        "method": res.method,
        "rel_se": res.rel_se,
    }


def run_test(config: RunConfig) -> dict:
    counts = read_counts(config.input_path)
    summary = summarize(counts)
    prior = config.prior or PriorSpec("jeffreys", l=0)
    notices = []
    if prior.family not in ("jeffreys", "gamma"):
        raise InputError(f"prior {prior.label()} is not available for the test command")
    if summary.s == 0:
        if prior.family == "gamma" and prior.b > 0:
            a, b = prior.a, prior.b
        else:
            a = b = 1.0
            notices.append(ALL_ZEROS_NOTICE)
        res = log_bf_all_zeros(summary.n, a, b, config.prior_odds)
        prior_label = f"gamma:{a:g},{b:g}"
    elif prior.family == "gamma":
        res = log_bf_gamma(summary, prior.a, prior.b, config.prior_odds)
        prior_label = prior.label()
    elif prior.l == 1:
        res = log_bf_l1(summary, config.prior_odds, config.integration)
        prior_label = prior.label()
    else:
        res = log_bf_jeffreys(summary, config.prior_odds)
        prior_label = prior.label()
    report = {
        "command": "test",
        "models": MODELS,
        "prior": prior_label,
        "n": summary.n,
        "k": summary.k,
        "s": summary.s,
        **_bf_block(res),
        "notices": notices,
        "warnings": list(res.warnings),
    }
    return report


def _load_reg(config):
    counts, X, offsets, names = read_regression_csv(config.input_path, config.intercept)
    return load_regression(counts, X, offsets), names


def run_check(config: RunConfig) -> dict:
    data, names = _load_reg(config)
    report = check_integrability(data)
    return {
        "command": "check",
        "covariates": names,
        "integrability": report.as_dict(),
        "diagnostics": report.lines(),
    }


def run_test_reg(config: RunConfig) -> dict:
    data, names = _load_reg(config)
    report = check_integrability(data)
    cfg = config.integration
    requested = config.prior
    if requested is not None and requested.family not in ("reg_jeffreys", "partial_jeffreys"):
        raise InputError(f"prior {requested.label()} is not available for test-reg; use j0, j1 or partial")
    warnings = []
    out = {
        "command": "test-reg",
        "models": {"M0": "Poisson regression", "M1": "ZIP regression"},
        "covariates": names,
        "n": data.n,
        "k": data.k,
        "q": data.q,
        "seed": cfg.seed,
        "integrability": report.as_dict(),
    }
    use_partial = report.recommended_prior == "partial"
    if requested is not None and requested.family == "partial_jeffreys" and not use_partial:
        raise PreconditionError("partial prior is only defined when positive-count rows are rank deficient")
    if use_partial and requested is not None and requested.family == "reg_jeffreys":
        warnings.append(f"requested prior {requested.label()} is unusable with rank-deficient "
                        "positive-count rows; using the partial prior")
    if use_partial:
        rd = log_bf_rank_deficient(data, cfg, enumerate_all=config.enumerate_selections)
        res = rd.default(config.prior_odds)
        out.update(prior="partial", **_bf_block(res))
        out["backend"] = rd.backend
        out["rank_deficiency"] = {"t": rd.t, "r": rd.r, "deficiency": rd.deficiency}
        out["selections"] = [
            {
                "l_set": [i + 1 for i in s.l_set],
                "log_bf10": s.log_bf10,
                "bf10": math.exp(s.log_bf10) if s.log_bf10 < 709 else math.inf,
                "rel_se": s.rel_se,
            }
            for s in rd.selections
        ]
        out["arithmetic_mean_bf"] = rd.arithmetic_mean_bf
        out["geometric_mean_bf"] = rd.geometric_mean_bf
        warnings.extend(res.warnings)
    else:
        j = requested.j if requested is not None else 1
        res = log_bf_regression(data, j, cfg, config.prior_odds, force=config.force)
        out.update(prior=f"j{j}", **_bf_block(res))
        out["backend"] = cfg.resolve_backend(data.q)
        warnings.extend(res.warnings)
    out["warnings"] = warnings
    return out


# --------------------------------------------------------------------------
# formatting
# --------------------------------------------------------------------------


def _fmt(x: float) -> str:
    if not math.isfinite(x):
        return str(x)
    return f"{x:.6g}" if abs(x) < 1e6 else f"{x:.4e}"


def format_text(report: dict) -> str:
    lines = []
    cmd = report["command"]
    if cmd in ("test", "test-reg"):
        m = report["models"]
        if cmd == "test":
            lines.append(f"n = {report['n']}, zero counts k = {report['k']}, total count s = {report['s']}")
        else:
            lines.append(f"n = {report['n']}, zero counts k = {report['k']}, q = {report['q']} "
                         f"({', '.join(report['covariates'])})")
        lines.append(f"prior: {report['prior']}   method: {report['method']}")
        se = f" (relative s.e. {report['rel_se']:.2g})" if report["rel_se"] else ""
        lines.append(f"Bayes factor B10 = {_fmt(report['bf10'])} in favor of M1 ({m['M1']}) "
                     f"versus M0 ({m['M0']}){se}")
        lines.append(f"prior odds Pr(M1)/Pr(M0) = {_fmt(report['prior_odds'])}")
        lines.append(f"Pr(M1|x) = {report['post_prob_m1']:.3f}, Pr(M0|x) = {report['post_prob_m0']:.3f}")
        if "selections" in report:
            lines.append("selections (zero-count rows carrying the proper prior part):")
            for s in report["selections"]:
                lines.append(f"  rows {s['l_set']}: B10 = {_fmt(s['bf10'])}  (log {s['log_bf10']:.6f}, "
                             f"rel s.e. {s['rel_se']:.2g})")
            lines.append(f"arithmetic mean B10 = {_fmt(report['arithmetic_mean_bf'])}, "
                         f"geometric mean B10 = {_fmt(report['geometric_mean_bf'])}")
        if "seed" in report:
            lines.append(f"backend: {report['backend']}, seed: {report['seed']}")
    if "integrability" in report:
        lines.extend(report.get("diagnostics") or [])
        if cmd == "test-reg":
            lines.append(f"integrability: recommended {report['integrability']['recommended_prior']}")
    for note in report.get("notices", []):
        lines.append(f"notice: {note}")
    for w in report.get("warnings", []):
        lines.append(f"warning: {w}")
    return "\n".join(lines) + "\n"


def format_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


# --------------------------------------------------------------------------
# argument handling
# --------------------------------------------------------------------------


def _seed_default() -> int:
    env = os.environ.get("ZIPBF_SEED")
    if env is None or not env.strip():
        return 0
    try:
        return int(env)
    except ValueError:
        raise InputError(f"ZIPBF_SEED must be an integer, got {env!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--prior", help="jeffreys0 | jeffreys1 | gamma:a,b | j0 | j1 | partial")
    common.add_argument("--prior-odds", type=float, default=1.0, help="Pr(M1)/Pr(M0) (default 1)")
    common.add_argument("--backend", choices=("quad", "mc"), help="integration backend (default: quad for q <= 3)")
    common.add_argument("--mc-samples", type=int, default=65536)
    common.add_argument("--seed", type=int, help="RNG seed (falls back to $ZIPBF_SEED, then 0)")
    common.add_argument("--radius", type=float, default=30.0, help="quadrature truncation radius (standardized units)")
    common.add_argument("--intercept", action="store_true", help="prepend a column of ones to the design")
    common.add_argument("--force", action="store_true", help="run even when integrability is not established")
    common.add_argument("--enumerate-selections", action="store_true",
                        help="rank-deficient designs: evaluate every admissible zero-row selection")
    common.add_argument("--format", choices=("json", "text"), default="json")

    parser = argparse.ArgumentParser(prog="zipbf", description=__doc__.split("\n")[0],
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("test", parents=[common], help="Poisson vs ZIP for a counts file").add_argument("input")
    sub.add_parser("test-reg", parents=[common], help="Poisson vs ZIP regression").add_argument("input")
    sub.add_parser("check", parents=[common], help="integrability diagnostics").add_argument("input")
    return parser


def config_from_args(args) -> RunConfig:
    if args.prior_odds is None or not args.prior_odds > 0:
        raise InputError("--prior-odds must be positive")
    seed = args.seed if args.seed is not None else _seed_default()
    backend = {"quad": "quadrature", "mc": "importance_sampling", None: "auto"}[args.backend]
    integration = IntegrationConfig(backend=backend, mc_samples=args.mc_samples, seed=seed,
                                    truncation_radius=args.radius)
    return RunConfig(
        command=args.command,
        input_path=Path(args.input),
        prior=PriorSpec.parse(args.prior) if args.prior else None,
        prior_odds=args.prior_odds,
        integration=integration,
        output_format=args.format,
        intercept=args.intercept,
        force=args.force,
        enumerate_selections=args.enumerate_selections,
    )


COMMANDS = {"test": run_test, "test-reg": run_test_reg, "check": run_check}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = config_from_args(args)
        report = COMMANDS[config.command](config)
    except IntegrabilityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTEGRABILITY
    except NumericalError as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (InputError, DomainError, PreconditionError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    out = format_json(report) if config.output_format == "json" else format_text(report)
    sys.stdout.write(out)
    if config.command == "check" and report["integrability"]["recommended_prior"] == "none":
        return EXIT_INTEGRABILITY
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
