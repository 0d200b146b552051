"""Command line entry point: `trcm run ...` and `trcm audit ...`.

Exit codes: 0 success (and, for audits, all requested checks passed),
1 validation/usage error or a failed audit check, 2 I/O error.
A flat UTF-8 key=value file may supply any option via --config; explicit
command-line flags take precedence over file values.
"""
from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

import numpy as np

from . import audit as audit_mod
from .harness import ExperimentConfig, run_experiment
from .mechanism import RunConfig, run_mechanism

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2

AUDIT_CHECKS = ("monotonicity", "epic", "epir", "payment-identity", "agreement", "lemmas")


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems are validation errors (exit 1)
        self.print_usage(sys.stderr)
        raise SystemExit(self._fail(message))

    @staticmethod
    def _fail(message) -> int:
        print(f"error: {message}", file=sys.stderr)
        return EXIT_VALIDATION


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="trcm", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="seed sweep with CSV/SVG outputs")
    run_p.add_argument("--rounds", type=int)
    run_p.add_argument("--seeds", type=int)
    run_p.add_argument("--providers", type=int)
    run_p.add_argument("--dim", type=int)
    run_p.add_argument("--mu", type=float)
    run_p.add_argument("--alpha", type=float)
    run_p.add_argument("--reward", choices=("gaussian", "exponential"))
    run_p.add_argument("--reward-sigma", dest="reward_sigma", type=float)
    run_p.add_argument("--cost-family", dest="cost_family", choices=("uniform", "lognormal"))
    run_p.add_argument("--diag-scale", dest="diag_scale", type=float)
    run_p.add_argument("--offdiag-corr", dest="offdiag_corr", type=float)
    run_p.add_argument("--base-seed", dest="base_seed", type=int)
    run_p.add_argument("--out", dest="out_dir")
    run_p.add_argument("--config", dest="config_file")
    run_p.add_argument(
        "--gated-exploration",
        dest="gated_exploration",
        action="store_const",
        const=True,
        help="gate forced exploration on candidate sets (steeper learning "
        "curves, but allocation monotonicity no longer exact)",
    )

    audit_p = sub.add_parser("audit", help="run one empirical property check")
    audit_p.add_argument("--check", required=True, choices=AUDIT_CHECKS)
    audit_p.add_argument("--trials", type=int)
    audit_p.add_argument("--rounds", type=int)
    audit_p.add_argument("--providers", type=int)
    audit_p.add_argument("--dim", type=int)
    audit_p.add_argument("--mu", type=float)
    audit_p.add_argument("--alpha", type=float)
    audit_p.add_argument("--base-seed", dest="base_seed", type=int)
    audit_p.add_argument("--out", dest="out_dir")
    audit_p.add_argument("--config", dest="config_file")
    return parser


def _parse_bool(value: str) -> bool:
    lowered = value.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {value!r}")


_COERCERS = {
    "rounds": int,
    "seeds": int,
    "providers": int,
    "dim": int,
    "base_seed": int,
    "trials": int,
    "mu": float,
    "alpha": float,
    "reward_sigma": float,
    "diag_scale": float,
    "offdiag_corr": float,
    "reward": str,
    "cost_family": str,
    "out_dir": str,
    "check": str,
    "gated_exploration": _parse_bool,
}


def load_config_file(path: str) -> dict:
    """Flat key=value file; blank lines and '#' comments are skipped."""
    values = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, _, value = line.partition("=")
            key = key.strip().replace("-", "_")
            if key not in _COERCERS:
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
            values[key] = _COERCERS[key](value.strip())
    return values


def _merge(args: argparse.Namespace, keys: tuple[str, ...]) -> dict:
    merged = {}
    if getattr(args, "config_file", None):
        file_values = load_config_file(args.config_file)
        merged.update({k: v for k, v in file_values.items() if k in keys})
    for k in keys:
        v = getattr(args, k, None)
        if v is not None:
            merged[k] = v
    return merged


def _cmd_run(args: argparse.Namespace) -> int:
    keys = (
        "rounds", "seeds", "providers", "dim", "mu", "alpha", "reward",
        "reward_sigma", "cost_family", "diag_scale", "offdiag_corr",
        "base_seed", "out_dir", "gated_exploration",
    )
    config = ExperimentConfig(**_merge(args, keys))
    config.validate()
    result = run_experiment(config)
    print(
        f"wrote {len(result.summaries)} runs x {config.rounds} rounds to {config.out_dir}"
    )
    return EXIT_OK


def _audit_config(values: dict) -> RunConfig:
    cfg = RunConfig(
        rounds=values.get("rounds", 1000),
        providers=values.get("providers", 4),
        dim=values.get("dim", 5),
        mu=values.get("mu", 0.05),
        alpha=values.get("alpha", 0.75),
        seed=values.get("base_seed", 0),
    )
    cfg.validate()
    return cfg


def _cmd_audit(args: argparse.Namespace) -> int:
    keys = ("trials", "rounds", "providers", "dim", "mu", "alpha", "base_seed", "out_dir", "check")
    values = _merge(args, keys)
    check = values["check"]
    trials = values.get("trials")
    out_dir = values.get("out_dir", "audit_out")
    cfg = _audit_config(values)

    if check == "monotonicity":
        report = audit_mod.monotonicity_sweep(
            replace(cfg, rounds=values.get("rounds", 2000)),
            n_probes=trials or 50,
            probe_seed=cfg.seed,
        )
    elif check == "epic":
        epic_cfg = replace(cfg, providers=2, rounds=values.get("rounds", 500), mu=values.get("mu", 0.1))
        providers = audit_mod._providers_for(epic_cfg)
        p = providers.providers[0]
        grid = np.linspace(p.cost_lower, p.cost_upper, 11)
        mid = float(grid[5])
        providers = providers.with_cost(0, mid)
        report = audit_mod.epic_estimate(
            epic_cfg, provider=0, bid_grid=grid, n_trials=trials or 1000, providers=providers
        )
    elif check == "epir":
        trace = run_mechanism(replace(cfg, rounds=values.get("rounds", 5000)))
        report = audit_mod.epir_check(trace)
    elif check == "payment-identity":
        report = audit_mod.payment_identity_sweep(
            replace(cfg, rounds=400), n_setups=trials or 5, n_samples=100_000, setup_seed=cfg.seed
        )
    elif check == "agreement":
        report = audit_mod.agreement_rate(
            replace(cfg, rounds=values.get("rounds", 400)), n_trials=trials or 1000
        )
    elif check == "lemmas":
        report = audit_mod.lemma_instrumentation(
            replace(cfg, rounds=values.get("rounds", 5000), providers=values.get("providers", 3), dim=values.get("dim", 3))
        )
    else:  # unreachable: argparse restricts choices
        raise ValueError(f"unknown check {check!r}")

    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, f"audit_{check}.csv")
    audit_mod.emit_report_csv(report, path)
    status = "PASS" if report.passed else "FAIL"
    print(f"{status} {check}: trials={report.trials} violations={report.violations} "
          f"worst_margin={report.worst_margin:.6g} -> {path}")
    return EXIT_OK if report.passed else EXIT_VALIDATION


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_VALIDATION
    try:
        if args.command == "run":
            return _cmd_run(args)
        return _cmd_audit(args)
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, AssertionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
