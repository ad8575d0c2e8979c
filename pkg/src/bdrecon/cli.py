"""Command-line experiment runner: ``bdrecon run CONFIG`` and ``bdrecon --verify``."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional

import numpy as np

from .config import ExperimentConfig, load_config
from .errors import BdreconError, BudgetExceeded, FactorizationFailure, QuadratureFailure
from .estimators import ExperimentReport, averaged_estimate, coverage_and_N0, direct_estimate

log = logging.getLogger("bdrecon")

MAXWELL_COLUMNS = ("N", "est_re", "est_im", "truth_re", "truth_im", "abs_err", "rem_cutoff",
                   "rem_lipschitz", "rem_LN_l2", "fN_hm1", "fN_l2", "noise_var")
ELASTIC_COLUMNS = ("N",) + tuple(f"z{i}{j}_{part}" for i in range(1, 4) for j in range(1, 4)
                                 for part in ("re", "im")) + ("abs_err", "noise_var", "lam_hat", "mu_hat",
                                                              "elliptic_rhs", "fN_l2")
AVERAGED_COLUMNS = ("N", "T", "M", "est_re", "est_im", "truth_re", "truth_im", "abs_err", "det_re",
                    "det_im", "noise_var", "noise_var_theory")

EXIT_OK, EXIT_FAIL, EXIT_VALIDATION, EXIT_BUDGET = 0, 1, 2, 3


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    x = float(x)
    return "nan" if np.isnan(x) else "%.17g" % (x + 0.0)


def _csv_rows(cfg: ExperimentConfig, report: ExperimentReport):
    if cfg.mode == "averaged":
        for r in report.rows:
            d = r["diagnostics"]
            yield AVERAGED_COLUMNS, [r["N"], d["T"], d["M"], r["estimate"].real, r["estimate"].imag,
                                     r["truth"].real, r["truth"].imag, r["abs_error"], r["deterministic"].real,
                                     r["deterministic"].imag, r["noise_var"], d["noise_var_theory"]]
    elif cfg.estimator.is_elastic:
        for r in report.rows:
            d = r["diagnostics"]
            lam = d.get("lame")
            lam_hat, mu_hat = lam if isinstance(lam, tuple) else (float("nan"), float("nan"))
            z = [v for e in np.asarray(r["estimate"]).ravel() for v in (e.real, e.imag)]
            yield ELASTIC_COLUMNS, [r["N"], *z, r["abs_error"], r["noise_var"], lam_hat, mu_hat,
                                    d["elliptic_rhs"], d["fN_l2"]]
    else:
        for r in report.rows:
            d = r["diagnostics"]
            yield MAXWELL_COLUMNS, [r["N"], r["estimate"].real, r["estimate"].imag, r["truth"].real,
                                    r["truth"].imag, r["abs_error"], d["rem_cutoff"], d["rem_lipschitz"],
                                    d["rem_LN_l2"], d["fN_hm1"], d["fN_l2"], r["noise_var"]]


def write_csv(path: Path, cfg: ExperimentConfig, report: ExperimentReport):
    rows = list(_csv_rows(cfg, report))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(rows[0][0])
        for _, vals in rows:
            w.writerow([fmt(v) for v in vals])


def _pass_flags(cfg: ExperimentConfig, report: ExperimentReport, cov) -> dict:
    flags = {}
    slope = report.fitted_slopes.get("abs_error")
    if slope is not None:
        flags["error_slope_le_-0.4"] = bool(slope <= -0.4)
    last = report.rows[-1]
    if cfg.estimator.noise_level == "None" and cfg.mode == "direct" and not cfg.estimator.is_elastic:
        flags["final_relative_error_le_1pct"] = bool(last["abs_error"] <= 0.01 * abs(last["truth"]))
    if cfg.estimator.noise_level == "HMinus1" and "noise_var_theory" in report.fitted_slopes:
        flags["noise_var_slope_-2"] = bool(abs(report.fitted_slopes["noise_var_theory"] + 2) <= 0.3)
    if cfg.mode == "averaged":
        th = cfg.estimator.theta
        scaled = [r["diagnostics"]["noise_var_theory"] * r["N"] ** (2 + th) for r in report.rows]
        flags["variance_le_C_N^-(2+theta)"] = bool(all(s <= scaled[0] * (1 + 1e-12) for s in scaled))
    if cov is not None:
        beyond = [v for N, v in cov.coverage.items() if N >= cov.N0]
        flags["coverage_beyond_N0"] = bool(all(v >= 1 - cov.eps for v in beyond)) if beyond else None
    return flags


def summary(cfg: ExperimentConfig, report: ExperimentReport, cov) -> dict:
    coverage = None
    if cov is not None:
        coverage = {"eps": cov.eps, "C": cov.C, "C_boundary": cov.C_boundary, "N0": cov.N0,
                    "per_N": {fmt(N): v for N, v in cov.coverage.items()}}
    return {"config": cfg.to_dict(), "seed": cfg.estimator.seed,
            "slopes": dict(report.fitted_slopes), "coverage": coverage,
            "pass_flags": _pass_flags(cfg, report, cov), "notes": list(report.notes)}


def run_experiment(cfg: ExperimentConfig, jobs: int = 1) -> tuple[ExperimentReport, Optional[object]]:
    patch, point, params, spec, cutoff = cfg.build()
    if cfg.mode == "averaged":
        report = averaged_estimate(cfg.estimator, patch, point, params, spec, cutoff, M=cfg.window_nodes, jobs=jobs)
        return report, None
    report = direct_estimate(cfg.estimator, patch, point, params, spec, cutoff, jobs=jobs)
    cov = None
    if cfg.estimator.trials >= 200 and cfg.estimator.noise_level != "None" and not cfg.estimator.is_elastic:
        cov = coverage_and_N0(cfg.estimator, report, cfg.coverage_eps)
        report.coverage = cov.coverage
        report.N0_theoretical = cov.N0
    return report, cov


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, estimator=replace(cfg.estimator, seed=int(args.seed)))
    out = Path(args.out or cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report, cov = run_experiment(cfg, jobs=args.jobs)
    csv_path, json_path = out / f"{cfg.name}.csv", out / f"{cfg.name}.json"
    write_csv(csv_path, cfg, report)
    json_path.write_text(json.dumps(summary(cfg, report, cov), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"wrote {csv_path} and {json_path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bdrecon", description="Boundary-probe reconstruction experiments.")
    p.add_argument("--verify", action="store_true", help="run the built-in invariant suite and exit")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command")
    r = sub.add_parser("run", help="run the experiment described by a TOML config")
    r.add_argument("config")
    r.add_argument("--seed", type=int, help="override the master seed")
    r.add_argument("--out", help="output directory (default: [output] dir of the config)")
    r.add_argument("--jobs", type=int, default=1, help="worker threads for per-N measurements")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.verify:
            from .verify import run_verification
            return EXIT_OK if run_verification() else EXIT_FAIL
        if args.command != "run":
            parser.print_usage(sys.stderr)
            return EXIT_VALIDATION
        if args.jobs < 1:
            raise ValueError("--jobs must be at least 1")
        return cmd_run(args)
    except (BudgetExceeded, QuadratureFailure, FactorizationFailure) as exc:
        print(f"bdrecon: budget failure: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (BdreconError, ValueError) as exc:
        print(f"bdrecon: invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
