"""Command-line front end.

Wires the pipeline end to end: calibrate -> verify -> estimate-error ->
infer -> diagnose -> whatif -> suite.  Every command is deterministic for
identical inputs, flags, and seed (flag --seed, env OPDIAG_SEED, default 0).
Exit codes: 0 success, 1 input error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bottleneck import DiagnosisReport, diagnose, diagnose_demands, what_if
from .calibration import (
    SweepSpec,
    calibrate_profile,
    load_samples_csv,
    read_counter_log,
    verify,
)
from .error_model import (
    ErrorModel,
    NotPositiveDefiniteError,
    estimate_error_model,
    load_error_pairs,
)
from .harness import GroundTruthSystem, Scenario, default_truth, run_suite
from .inference import InferenceConfig, InferenceResult, invert, mpe
from .priors import WorkloadPrior, default_prior
from .types import (
    COUNTER_NAMES,
    N_COUNTERS,
    RESOURCES,
    ConvergenceError,
    CounterVector,
    HardwareProfile,
    InputError,
    OpdiagError,
    ResourceDemands,
    WorkloadVector,
)


def _resolve_seed(args) -> int:
    if getattr(args, "seed", None) is not None:
        return args.seed
    env = os.environ.get("OPDIAG_SEED")
    if env:
        try:
            return int(env)
        except ValueError as exc:
            raise InputError(f"OPDIAG_SEED must be an integer, got {env!r}") from exc
    return 0


def _load_profile(args) -> HardwareProfile:
    if getattr(args, "profile", None):
        return HardwareProfile.load(args.profile)
    return HardwareProfile()


def _load_prior(args) -> WorkloadPrior:
    if getattr(args, "prior", None):
        return WorkloadPrior.load(args.prior)
    return default_prior()


def _load_json(path) -> dict:
    with open(path) as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}: line {exc.lineno}: {exc.msg}") from exc


def _emit(args, json_dict, text: str | None = None) -> None:
    if getattr(args, "format", "json") == "text" and text is not None:
        payload = text + "\n"
    else:
        payload = json.dumps(json_dict, indent=2) + "\n"
    if getattr(args, "out", None):
        Path(args.out).write_text(payload)
    else:
        sys.stdout.write(payload)


def write_counters_csv(path, c: CounterVector) -> None:
    """Write a single observed counter vector with schema-order headers."""
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(COUNTER_NAMES)
        writer.writerow([repr(v) for v in c.as_array()])


def read_counters_csv(path) -> CounterVector:
    import csv

    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise InputError(f"{path}: empty file")
        if [h.strip() for h in header] != list(COUNTER_NAMES):
            raise InputError(f"{path}: line 1: header must list the 14 counters in schema order")
        row = next(reader, None)
        if row is None:
            raise InputError(f"{path}: line 2: missing counter row")
        if len(row) != N_COUNTERS:
            raise InputError(f"{path}: line 2: expected {N_COUNTERS} columns")
        try:
            return CounterVector.from_array([float(v) for v in row])
        except ValueError as exc:
            raise InputError(f"{path}: line 2: {exc}") from exc


def _inference_config(args, c_a: CounterVector | None = None) -> InferenceConfig:
    kwargs = {"seed": _resolve_seed(args)}
    if getattr(args, "starts", None) is not None:
        kwargs["start_count"] = args.starts
    if getattr(args, "max_evals", None) is not None:
        kwargs["max_evals"] = args.max_evals
    if getattr(args, "weights", None):
        parts = [p for p in args.weights.split(",") if p.strip()]
        try:
            weights = tuple(float(p) for p in parts)
        except ValueError as exc:
            raise InputError(f"--weights: {exc}") from exc
        kwargs["weights"] = weights
    return InferenceConfig(**kwargs)


def _run_inference(args, method: str, c_a: CounterVector) -> InferenceResult:
    profile = _load_profile(args)
    cfg = _inference_config(args, c_a)
    if method == "inversion":
        return invert(c_a, profile, cfg)
    prior = _load_prior(args)
    if not getattr(args, "error_model", None):
        raise InputError("--error-model is required for the mpe method")
    em = ErrorModel.load(args.error_model)
    return mpe(c_a, profile, prior, em, cfg)


# ---------------------------------------------------------------------------
# Subcommands


def cmd_calibrate(args) -> int:
    samples = load_samples_csv(args.samples)
    base = _load_profile(args)
    profile = calibrate_profile(samples, base)
    _emit(args, profile.to_json_dict())
    return 0


def cmd_verify(args) -> int:
    profile = _load_profile(args)
    sweep = SweepSpec.from_json_dict(_load_json(args.sweep))
    actual = read_counter_log(args.log)
    report = verify(profile, sweep, actual)
    lines = ["counter                        max_rel_dev  mean_rel_dev"]
    for name in report.max_rel_dev:
        lines.append(
            f"{name:<30} {report.max_rel_dev[name]:>11.4g}  {report.mean_rel_dev[name]:>11.4g}"
        )
    _emit(args, report.to_json_dict(), "\n".join(lines))
    return 0


def cmd_estimate_error(args) -> int:
    pairs = []
    for path in args.pairs:
        pairs.extend(load_error_pairs(path))
    em = estimate_error_model(pairs, shrinkage=args.shrinkage)
    _emit(args, em.to_json_dict())
    return 0


def cmd_infer(args) -> int:
    c_a = read_counters_csv(args.counters)
    if args.compare:
        results = {m: _run_inference(args, m, c_a) for m in ("inversion", "mpe")}
        profile = _load_profile(args)
        lines = [
            f"{'method':<10} {'objective':>14} {'evals':>8} {'D_cpu':>11} {'D_disk':>11} bottleneck"
        ]
        for m, res in results.items():
            rep = diagnose(res.workload, profile)
            lines.append(
                f"{m:<10} {res.objective:>14.6g} {res.evaluations:>8d} "
                f"{rep.demands['cpu']:>11.5g} {rep.demands['disk']:>11.5g} {rep.bottleneck}"
            )
        _emit(
            args,
            {m: r.to_json_dict() for m, r in results.items()},
            "\n".join(lines),
        )
        return 0
    result = _run_inference(args, args.method, c_a)
    _emit(args, result.to_json_dict())
    return 0


def _parse_demands(text: str) -> ResourceDemands:
    values = {}
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise InputError(f"--demands: expected name=value, got {part!r}")
        name, _, raw = part.partition("=")
        name = name.strip()
        if name not in RESOURCES:
            raise InputError(f"--demands: unknown resource {name!r}")
        try:
            values[name] = float(raw)
        except ValueError as exc:
            raise InputError(f"--demands: {exc}") from exc
    if not values:
        raise InputError("--demands: no resources given")
    return ResourceDemands(cpu=values.get("cpu", 0.0), disk=values.get("disk", 0.0))


def cmd_diagnose(args) -> int:
    sources = [bool(args.result), bool(args.workload), bool(args.counters), bool(args.demands)]
    if sum(sources) != 1:
        raise InputError("give exactly one of --result, --workload, --counters, --demands")
    if args.demands:
        report = diagnose_demands(_parse_demands(args.demands))
    else:
        profile = _load_profile(args)
        if args.result:
            workload = InferenceResult.load(args.result).workload
        elif args.workload:
            workload = WorkloadVector.from_dict(_load_json(args.workload))
        else:
            c_a = read_counters_csv(args.counters)
            workload = _run_inference(args, args.method, c_a).workload
        report = diagnose(workload, profile)
    _emit(args, report.to_json_dict(), report.render_text())
    return 0


def cmd_whatif(args) -> int:
    report = DiagnosisReport.load(args.report)
    if report.workload is None:
        raise InputError(f"{args.report}: report carries no workload to increment")
    delta_raw = _load_json(args.delta)
    if not isinstance(delta_raw, dict):
        raise InputError(f"{args.delta}: delta must be an object of component increments")
    delta = {}
    for key, value in delta_raw.items():
        try:
            delta[key] = float(value)
        except (TypeError, ValueError) as exc:
            raise InputError(f"{args.delta}: {key}: {exc}") from exc
    profile = _load_profile(args)
    new_report = what_if(report.workload, delta, profile)
    _emit(args, new_report.to_json_dict(), new_report.render_text())
    return 0


def cmd_suite(args) -> int:
    seed = _resolve_seed(args)
    if args.scenarios:
        paths = sorted(Path(args.scenarios).glob("*.json"))
        if not paths:
            raise InputError(f"{args.scenarios}: no scenario JSON files found")
        scenarios = [Scenario.load(p) for p in paths]
    else:
        from .harness import builtin_scenarios

        scenarios = builtin_scenarios()
    profile = _load_profile(args)
    truth = default_truth(profile, seed=seed, noise_std=args.noise)
    methods = tuple(m.strip() for m in args.methods.split(",") if m.strip())
    cfg = _inference_config(args)
    report = run_suite(
        scenarios,
        truth,
        methods=methods,
        cfg=cfg,
        model_profile=profile,
        prior=_load_prior(args),
        error_count=args.error_count,
        seed=seed,
    )
    _emit(args, report.to_json_dict(), report.render_text())
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="opdiag",
        description="Infer workloads from performance counters and diagnose bottlenecks.",
    )
    parser.add_argument("--version", action="version", version=f"opdiag {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, seed=True, fmt=True):
        p.add_argument("--out", help="write output to this file instead of stdout")
        if fmt:
            p.add_argument("--format", choices=("json", "text"), default="json")
        if seed:
            p.add_argument("--seed", type=int, default=None,
                           help="random seed (default: OPDIAG_SEED or 0)")

    p = sub.add_parser("calibrate", help="fit profile constants from primitive samples")
    p.add_argument("--samples", required=True, help="primitive,x,y CSV")
    p.add_argument("--profile", help="base profile JSON (default: built-in)")
    add_common(p, seed=False, fmt=False)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("verify", help="compare model predictions against a counter log")
    p.add_argument("--profile", help="profile JSON")
    p.add_argument("--sweep", required=True, help="sweep spec JSON")
    p.add_argument("--log", required=True, help="sweep_value,<counters> CSV")
    add_common(p, seed=False)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("estimate-error", help="estimate the Gaussian error model")
    p.add_argument("--pairs", action="append", required=True,
                   help="actual/predicted pairs CSV (repeat to pool datasets)")
    p.add_argument("--shrinkage", type=float, default=0.1)
    add_common(p, seed=False, fmt=False)
    p.set_defaults(func=cmd_estimate_error)

    p = sub.add_parser("infer", help="recover the workload behind observed counters")
    p.add_argument("--counters", required=True, help="single-row counter CSV")
    p.add_argument("--method", choices=("inversion", "mpe"), default="inversion")
    p.add_argument("--compare", action="store_true", help="run both methods side by side")
    p.add_argument("--profile", help="profile JSON")
    p.add_argument("--prior", help="prior JSON (mpe)")
    p.add_argument("--error-model", help="error model JSON (mpe)")
    p.add_argument("--weights", help="comma list of 14 inversion weights")
    p.add_argument("--starts", type=int, default=None)
    p.add_argument("--max-evals", type=int, default=None)
    add_common(p)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("diagnose", help="bottleneck/cause/remedy report")
    p.add_argument("--result", help="inference result JSON")
    p.add_argument("--workload", help="workload JSON")
    p.add_argument("--counters", help="counter CSV (runs inference first)")
    p.add_argument("--demands", help="direct demands, e.g. cpu=0.3,disk=0.5")
    p.add_argument("--method", choices=("inversion", "mpe"), default="inversion")
    p.add_argument("--profile", help="profile JSON")
    p.add_argument("--prior", help="prior JSON (mpe)")
    p.add_argument("--error-model", help="error model JSON (mpe)")
    p.add_argument("--weights", help="comma list of 14 inversion weights")
    p.add_argument("--starts", type=int, default=None)
    p.add_argument("--max-evals", type=int, default=None)
    add_common(p)
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("whatif", help="re-diagnose after a workload increment")
    p.add_argument("--report", required=True, help="diagnosis report JSON")
    p.add_argument("--delta", required=True, help="JSON object of component increments")
    p.add_argument("--profile", help="profile JSON")
    add_common(p, seed=False)
    p.set_defaults(func=cmd_whatif)

    p = sub.add_parser("suite", help="run the scenario suite end to end")
    p.add_argument("--scenarios", help="directory of scenario JSON files (default: built-ins)")
    p.add_argument("--methods", default="inversion,mpe")
    p.add_argument("--profile", help="model profile JSON")
    p.add_argument("--prior", help="prior JSON")
    p.add_argument("--noise", type=float, default=0.02, help="truth counter noise std")
    p.add_argument("--error-count", type=int, default=40)
    p.add_argument("--starts", type=int, default=None)
    p.add_argument("--max-evals", type=int, default=None)
    add_common(p)
    p.set_defaults(func=cmd_suite)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        return args.func(args)
    except (ConvergenceError, NotPositiveDefiniteError) as exc:
        print(f"opdiag: numerical failure: {exc}", file=sys.stderr)
        return 2
    except (OpdiagError, OSError) as exc:
        print(f"opdiag: error: {exc}", file=sys.stderr)
        return 1
    except np.linalg.LinAlgError as exc:
        print(f"opdiag: numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
