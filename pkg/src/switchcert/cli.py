"""Command-line driver.

Subcommands: ``certify`` (synthesize and write a safety certificate),
``validate`` (check a switching signal against a dwell-time budget),
``simulate`` (Monte Carlo campaign under a certificate), ``scenario``
(closed-loop leader-following walker run).

Every output directory receives exactly one ``run_manifest.json`` recording
the tool version, input hashes, seed, and resolved parameters; reruns with
the same inputs and seed reproduce all other output bytes exactly.

Environment variables prefixed ``SWITCHCERT_`` provide defaults for the
global options (``SWITCHCERT_SEED``, ``SWITCHCERT_OUT_DIR``,
``SWITCHCERT_CONFIG``); explicit flags win.

Exit codes: 0 success (certify: feasible), 1 input error, 2 infeasible,
3 invalid signal.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from importlib import resources
from pathlib import Path

from . import __version__
from .certificates import (
    Certificate,
    DEFAULT_N0_CANDIDATES,
    estimate_disturbance_margin,
    synthesize_certificate,
)
from .library_io import load_library
from .simulation import monte_carlo
from .switching import DwellTimeBudget, SwitchingSignal, validate_dwell_time
from .walker import load_scenario, run_scenario

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_INFEASIBLE = 2
EXIT_INVALID_SIGNAL = 3

SHIPPED_LIBRARY = "shipped-walker"
SHIPPED_CERTIFICATE = "shipped"
_ENV_PREFIX = "SWITCHCERT_"


class InputError(Exception):
    """Anything wrong with the inputs; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad usage; 2 means infeasible here, so remap.
    def error(self, message):
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _env_default(name: str, fallback=None):
    return os.environ.get(_ENV_PREFIX + name, fallback)


def _shipped_bytes(name: str) -> bytes:
    return resources.files("switchcert").joinpath("data", name).read_bytes()


def _load_library_arg(value: str):
    if value == SHIPPED_LIBRARY:
        raw = _shipped_bytes("walker_library.json")
    else:
        path = Path(value)
        if not path.is_file():
            raise InputError(f"library file not found: {value}")
        raw = path.read_bytes()
    from .library_io import library_from_dict

    try:
        library = library_from_dict(json.loads(raw.decode()))
    except (ValueError, KeyError, TypeError, json.JSONDecodeError) as exc:
        raise InputError(f"bad library {value}: {exc}") from exc
    return library, raw


def _load_certificate_arg(value: str):
    if value == SHIPPED_CERTIFICATE:
        raw = _shipped_bytes("walker_certificate.json")
    else:
        path = Path(value)
        if not path.is_file():
            raise InputError(f"certificate file not found: {value}")
        raw = path.read_bytes()
    try:
        certificate = Certificate.from_dict(json.loads(raw.decode()))
    except (ValueError, KeyError, TypeError, json.JSONDecodeError) as exc:
        raise InputError(f"bad certificate {value}: {exc}") from exc
    return certificate, raw


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _write_manifest(out_dir: Path, subcommand: str, seed: int,
                    inputs: dict[str, tuple[str, bytes]], resolved: dict,
                    started: float) -> None:
    manifest = {
        "format": "switchcert-run-manifest",
        "version": 1,
        "tool_version": __version__,
        "subcommand": subcommand,
        "seed": seed,
        "inputs": {
            role: {"path": str(path), "sha256": _sha256(raw)}
            for role, (path, raw) in sorted(inputs.items())
        },
        "resolved": resolved,
        "duration_seconds": time.time() - started,
    }
    _write_json(out_dir / "run_manifest.json", manifest)


def _out_dir(args) -> Path:
    if args.out_dir is None:
        raise InputError("--out-dir is required for this subcommand")
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_certify(args) -> int:
    started = time.time()
    library, raw = _load_library_arg(args.library)
    out = _out_dir(args)
    result = synthesize_certificate(library, method=args.method, epsilon=args.epsilon)
    lines = [
        f"library: {args.library}  members: {len(library)}  "
        f"contraction rate: {library.contraction_rate!r}",
        f"method: {args.method}",
        "",
        f"{'kappa':>14} {'omega':>14} {'mu':>12} {'na_bar':>10}  feasible_n0",
    ]
    for diag in result.diagnostics:
        n0s = ",".join(str(n) for n in diag.feasible_n0) or "-"
        note = f"  ({diag.note})" if diag.note else ""
        lines.append(
            f"{diag.kappa:>14.6e} {diag.omega:>14.6e} {diag.mu:>12.6f} "
            f"{diag.na_bar:>10.4f}  {n0s}{note}")
    lines.append("")
    resolved = {
        "method": args.method,
        "n0_candidates": list(DEFAULT_N0_CANDIDATES),
        "margin_trials": args.margin_trials,
    }
    if result.feasible:
        certificate = result.certificate
        if args.margin_trials:
            estimate = estimate_disturbance_margin(
                library, certificate, trial_budget=args.margin_trials, seed=args.seed)
            from dataclasses import replace

            certificate = replace(certificate, delta_hat=estimate.delta_hat)
            lines.append(f"disturbance margin estimate: {estimate.delta_hat!r} "
                         f"(upper {estimate.upper!r}, {args.margin_trials} trials/level)")
        lines.append(
            "FEASIBLE: "
            f"kappa={certificate.kappa!r} n0_bar={certificate.n0_bar} "
            f"na_bar={certificate.na_bar!r} mu={certificate.mu!r} "
            f"omega={certificate.omega!r}")
        certificate.save(out / "certificate.json")
        code = EXIT_OK
    else:
        lines.append(f"INFEASIBLE: {result.reason}")
        code = EXIT_INFEASIBLE
    report = "\n".join(lines) + "\n"
    (out / "certify_report.txt").write_text(report)
    sys.stdout.write(report)
    _write_manifest(out, "certify", args.seed, {"library": (args.library, raw)},
                    resolved, started)
    return code


def cmd_validate(args) -> int:
    started = time.time()
    path = Path(args.signal)
    if not path.is_file():
        raise InputError(f"signal file not found: {args.signal}")
    raw = path.read_bytes()
    try:
        signal = SwitchingSignal.from_csv(path)
        budget = DwellTimeBudget(n0=args.n0, na=args.na)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    report = validate_dwell_time(signal, budget)
    verdict = "VALID" if report.valid else "INVALID"
    text = (
        f"signal: {args.signal}  steps: {len(signal)}  "
        f"switches: {report.switch_count}\n"
        f"budget: n0={budget.n0!r} na={budget.na!r}\n"
        f"worst interval: {list(report.worst_interval)}  "
        f"slack: {report.worst_slack!r}\n"
        f"{verdict}\n"
    )
    sys.stdout.write(text)
    if args.out_dir is not None:
        out = _out_dir(args)
        (out / "validation_report.txt").write_text(text)
        _write_json(out / "validation_report.json", {
            "valid": report.valid,
            "switch_count": report.switch_count,
            "worst_interval": list(report.worst_interval),
            "worst_slack": report.worst_slack,
            "n0": budget.n0,
            "na": budget.na,
        })
        _write_manifest(out, "validate", args.seed, {"signal": (args.signal, raw)},
                        {"n0": budget.n0, "na": budget.na}, started)
    return EXIT_OK if report.valid else EXIT_INVALID_SIGNAL


def cmd_simulate(args) -> int:
    started = time.time()
    library, lraw = _load_library_arg(args.library)
    certificate, craw = _load_certificate_arg(args.certificate)
    out = _out_dir(args)
    try:
        report, traces = monte_carlo(
            library, certificate,
            episode_count=args.episodes,
            horizon=args.horizon,
            disturbance_amplitude=args.amplitude,
            seed=args.seed,
            keep_traces=args.keep_traces,
        )
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    _write_json(out / "campaign_summary.json", report.to_dict())
    for index, trace in enumerate(traces):
        trace.to_csv(out / f"trace_{index:04d}.csv")
    resolved = {
        "episodes": args.episodes,
        "horizon": args.horizon,
        "amplitude": args.amplitude,
        "keep_traces": args.keep_traces,
    }
    _write_manifest(
        out, "simulate", args.seed,
        {"library": (args.library, lraw), "certificate": (args.certificate, craw)},
        resolved, started)
    sys.stdout.write(
        f"episodes: {report.episodes}  violations: {report.violation_count} "
        f"(rate {report.violation_rate!r})\n"
        f"trapping level: {report.trapping_level!r}\n")
    return EXIT_OK


def cmd_scenario(args) -> int:
    started = time.time()
    if args.config is None:
        raise InputError("--config is required for scenario")
    cfg_path = Path(args.config)
    if not cfg_path.is_file():
        raise InputError(f"config file not found: {args.config}")
    raw = cfg_path.read_bytes()
    out = _out_dir(args)
    try:
        scenario = load_scenario(
            cfg_path,
            mode_override=args.mode,
            certificate_override=args.certificate,
        )
        trace = run_scenario(scenario)
    except (ValueError, KeyError, TypeError, json.JSONDecodeError) as exc:
        raise InputError(str(exc)) from exc
    trace.write_outputs(out, leader=scenario.leader)
    trace.write_ellipses(out, scenario.reduced_library, scenario.certificate)
    _write_json(out / "summary.json", trace.summary())
    inputs = {"config": (args.config, raw)}
    if args.certificate is not None and args.certificate != SHIPPED_CERTIFICATE:
        inputs["certificate"] = (args.certificate, Path(args.certificate).read_bytes())
    resolved = {
        "mode": trace.mode,
        "strides": trace.stride_count,
        "dead_zone": scenario.dead_zone,
        "initial_primitive": scenario.initial_primitive,
    }
    _write_manifest(out, "scenario", args.seed, inputs, resolved, started)
    summary = trace.summary()
    sys.stdout.write(
        f"mode: {summary['mode']}  strides: {summary['strides']}  "
        f"switches: {summary['switch_count']}\n"
        f"max lateral deviation: {summary['max_lateral_deviation']!r}\n"
        f"final lateral deviation: {summary['final_lateral_deviation']!r}\n"
        f"reduced trace in all basins: {summary['reduced_in_all_basins']}\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="switchcert", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    common = _Parser(add_help=False)
    seed_env = _env_default("SEED")
    common.add_argument("--seed", type=int,
                        default=int(seed_env) if seed_env is not None else 0,
                        help="root seed for all randomness (default 0)")
    common.add_argument("--out-dir", default=_env_default("OUT_DIR"),
                        help="directory for outputs and the run manifest")
    common.add_argument("--config", default=_env_default("CONFIG"),
                        help="scenario config JSON (scenario subcommand)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("certify", parents=[common],
                       help="synthesize a certificate for a primitive library")
    p.add_argument("--library", required=True,
                   help=f"library JSON path, or '{SHIPPED_LIBRARY}'")
    p.add_argument("--method", choices=("grid", "analytic"), default="grid",
                   help="set-constant evaluation method (default grid)")
    p.add_argument("--epsilon", type=float, default=None,
                   help="decay target in (rate, 1); default rate + 0.9*(1 - rate)")
    p.add_argument("--margin-trials", type=int, default=0,
                   help="episodes per level for the disturbance margin "
                        "estimate (0 skips it)")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("validate", parents=[common],
                       help="validate a switching signal against a budget")
    p.add_argument("--signal", required=True, help="signal CSV path")
    p.add_argument("--n0", type=float, required=True, help="burst allowance")
    p.add_argument("--na", type=float, required=True, help="average dwell time")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("simulate", parents=[common],
                       help="Monte Carlo campaign under a certificate")
    p.add_argument("--library", required=True,
                   help=f"library JSON path, or '{SHIPPED_LIBRARY}'")
    p.add_argument("--certificate", required=True,
                   help=f"certificate JSON path, or '{SHIPPED_CERTIFICATE}'")
    p.add_argument("--episodes", type=int, default=100)
    p.add_argument("--horizon", type=int, default=200)
    p.add_argument("--amplitude", type=float, default=0.0,
                   help="disturbance sup-norm bound (default 0)")
    p.add_argument("--keep-traces", type=int, default=0,
                   help="write the first N episode traces as CSV")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("scenario", parents=[common],
                       help="closed-loop leader-following walker run")
    p.add_argument("--mode", default=None,
                   help="override the config mode: adaptive or fixed:<id>")
    p.add_argument("--certificate", default=None,
                   help="override the config certificate path")
    p.set_defaults(func=cmd_scenario)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits directly for --help (0) and usage errors (remapped
        # to the input-error code by _Parser); surface that as a return value
        return int(exc.code or 0)
    try:
        return args.func(args)
    except InputError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INPUT
    except OSError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INPUT


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
