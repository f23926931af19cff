"""Command line interface: ``aaadmm <command> [options]``.

Commands: generate, solve, spectrum, optimal-beta, sweep, experiment, report.
Failures exit with status 1 and a message of the form ``error [stage]: ...``.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np
import yaml

from . import theory
from .anderson import SAAPlan, Scheme, run_accelerated
from .experiment import (
    ExperimentError,
    plain_data,
    analyze,
    compare_report,
    load_config,
    load_summary,
    run_experiment,
)
from .fixed_point import estimate_convergence_factor
from .jacobian import Spectrum, read_eigenvalues_csv, write_eigenvalues_csv
from .problems import KINDS, build_fpi, generate_instance, read_instance, write_instance, zero_state


class CLIError(RuntimeError):
    def __init__(self, stage, message):
        super().__init__(message)
        self.stage = stage


def _parse_params(items):
    params = {}
    for item in items or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise CLIError("config", f"parameter {item!r} is not key=value")
        value = value.strip()
        if value.lower() in ("true", "false"):
            params[key.strip()] = value.lower() == "true"
        else:
            try:
                params[key.strip()] = float(value)
            except ValueError:
                raise CLIError("config", f"parameter {key} needs a number") from None
    return params


def _dump(data):
    yaml.safe_dump(plain_data(data), sys.stdout, sort_keys=False, default_flow_style=False)


def _load_instance(path):
    try:
        return read_instance(path)
    except (OSError, ValueError) as exc:
        raise CLIError("load", str(exc)) from exc


def _spectrum_from_args(args):
    if getattr(args, "eigenvalues", None):
        try:
            return Spectrum(read_eigenvalues_csv(args.eigenvalues)), None
        except (OSError, ValueError) as exc:
            raise CLIError("load", str(exc)) from exc
    if getattr(args, "values", None):
        return Spectrum(np.array(args.values, dtype=float)), None
    if not getattr(args, "instance", None):
        raise CLIError("config", "give --instance, --eigenvalues or --values")
    instance = _load_instance(args.instance)
    an = analyze(instance, build_fpi(instance), args.fd_step, args.central, args.workers)
    return an.effective, an


def cmd_generate(args):
    try:
        inst = generate_instance(args.kind, args.m, args.n, args.density, args.seed,
                                 _parse_params(args.param))
        write_instance(inst, args.out)
    except (ValueError, OSError) as exc:
        raise CLIError("generate", str(exc)) from exc
    _dump({"instance": args.out, **inst.scalar_fields()})


def cmd_solve(args):
    instance = _load_instance(args.instance)
    fpmap = build_fpi(instance)
    try:
        kind, m = Scheme.parse(args.scheme)
    except ValueError as exc:
        raise CLIError("config", str(exc)) from exc
    an = None
    if kind == "saa":
        if args.beta:
            if len(args.beta) != m:
                raise CLIError("config", f"{args.scheme} needs {m} coefficients")
            plan = SAAPlan(tuple(args.beta))
        else:
            an = analyze(instance, fpmap, args.fd_step, args.central, args.workers)
            result = theory.optimal_saa1(an.effective) if m == 1 else theory.brute_force_sweep(an.effective, m)
            plan = SAAPlan.from_result(result)
        scheme = Scheme.saa(plan)
    else:
        scheme = Scheme.plain() if kind == "plain" else Scheme.aa(m)
    reference, floor = None, 0.0
    if args.reference:
        if an is None:
            an = analyze(instance, fpmap, args.fd_step, args.central, args.workers)
        reference, floor = an.reference.x, an.floor
    try:
        trace = run_accelerated(fpmap, zero_state(instance), scheme, args.max_iter,
                                max(args.tol, floor), reference=reference, floor=floor)
    except Exception as exc:
        raise CLIError("run", str(exc)) from exc
    if args.trace:
        trace.write_csv(args.trace)
    est = estimate_convergence_factor(trace, args.window)
    out = {
        "scheme": scheme.label,
        "terminal_status": trace.terminal_status,
        "iterations": trace.iterations,
        "final_error": trace.records[-1].error if trace.records else None,
        "measured_factor": est.describe(),
    }
    if scheme.plan is not None:
        out["beta"] = list(scheme.plan.beta)
    _dump(out)


def cmd_spectrum(args):
    instance = _load_instance(args.instance)
    an = analyze(instance, build_fpi(instance), args.fd_step, args.central, args.workers)
    if args.out:
        write_eigenvalues_csv(an.spectrum.eigenvalues, args.out)
    _dump({"jacobian": an.jacobian_method, "fd_step": an.fd_step, "spectrum": an.spectrum.summary(),
           "effective_spectrum": an.effective.summary()})


def cmd_optimal_beta(args):
    spec, _ = _spectrum_from_args(args)
    try:
        result = theory.optimal_saa1(spec)
    except theory.TheoryDomainError as exc:
        raise CLIError("theory", str(exc)) from exc
    _dump({"spectrum": spec.summary(), "result": result.to_dict()})


def cmd_sweep(args):
    spec, _ = _spectrum_from_args(args)
    try:
        result = theory.brute_force_sweep(spec, args.window_size, args.lo, args.hi, args.step,
                                          refine=args.refine)
    except ValueError as exc:
        raise CLIError("sweep", str(exc)) from exc
    _dump({"spectrum": spec.summary(), "result": result.to_dict()})


def cmd_experiment(args):
    try:
        cfg = load_config(args.config)
    except (OSError, ValueError) as exc:
        raise CLIError("config", str(exc)) from exc
    if args.output_dir:
        cfg.output_dir = args.output_dir
    summary = run_experiment(cfg)
    _dump({
        "output_dir": cfg.output_dir,
        "rho_q": summary.get("rho_q"),
        "schemes": [
            {k: s[k] for k in ("label", "beta", "predicted_factor", "measured_factor", "terminal_status")}
            for s in summary["schemes"]
        ],
    })


def cmd_report(args):
    try:
        summaries = [load_summary(p) for p in args.summaries]
        rows = compare_report(summaries, args.out)
    except (OSError, ValueError, KeyError) as exc:
        raise CLIError("report", str(exc)) from exc
    print(f"wrote {len(rows)} rows to {args.out}")


def _add_analysis_flags(p):
    p.add_argument("--fd-step", type=float, default=None, help="finite-difference step (default per problem)")
    p.add_argument("--central", action="store_true", help="central instead of forward differences")
    p.add_argument("--workers", type=int, default=1, help="threads for Jacobian columns")


def _add_spectrum_source(p):
    src = p.add_mutually_exclusive_group()
    src.add_argument("--instance", help="instance file; the Jacobian is computed")
    src.add_argument("--eigenvalues", help="CSV with re,im columns")
    src.add_argument("--values", type=float, nargs="+", help="real eigenvalues given inline")
    _add_analysis_flags(p)


def build_parser():
    parser = argparse.ArgumentParser(prog="aaadmm", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a seeded problem instance")
    p.add_argument("--kind", required=True, choices=KINDS)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--m", type=int, default=None, help="rows / samples")
    p.add_argument("--n", type=int, default=None, help="columns / features / signal length")
    p.add_argument("--density", type=float, default=None)
    p.add_argument("--param", action="append", metavar="KEY=VALUE",
                   help="reg_lambda, penalty_rho, smoothing_alpha, box_lo, box_hi, scaled_projection, ...")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("solve", help="run one scheme on an instance")
    p.add_argument("--instance", required=True)
    p.add_argument("--scheme", default="plain", help="plain, AA(m) or sAA(m)")
    p.add_argument("--beta", type=float, nargs="+", help="sAA coefficients (default: theory or sweep)")
    p.add_argument("--max-iter", type=int, default=3000)
    p.add_argument("--tol", type=float, default=1e-12)
    p.add_argument("--window", type=int, default=20, help="trailing ratios for the factor estimate")
    p.add_argument("--reference", action="store_true", help="measure ||x_k - x*|| instead of the residual")
    p.add_argument("--trace", help="write the trace CSV here")
    _add_analysis_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("spectrum", help="Jacobian spectrum at the fixed point")
    p.add_argument("--instance", required=True)
    p.add_argument("--out", help="eigenvalue CSV")
    _add_analysis_flags(p)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("optimal-beta", help="optimal sAA(1) coefficient")
    _add_spectrum_source(p)
    p.set_defaults(func=cmd_optimal_beta)

    p = sub.add_parser("sweep", help="grid search for sAA(m) coefficients")
    _add_spectrum_source(p)
    p.add_argument("--window-size", "-m", type=int, default=2)
    p.add_argument("--lo", type=float, default=-1.0)
    p.add_argument("--hi", type=float, default=1.0)
    p.add_argument("--step", type=float, default=0.05)
    p.add_argument("--refine", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("experiment", help="full pipeline from a YAML config")
    p.add_argument("--config", required=True)
    p.add_argument("--output-dir", default=None)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("report", help="tabulate experiment summaries")
    p.add_argument("summaries", nargs="+", help="summary.yaml files or their directories")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (CLIError, ExperimentError) as exc:
        stage = exc.stage
        message = str(exc)
        if isinstance(exc, ExperimentError):
            message = message.split("] ", 1)[-1]
        print(f"error [{stage}]: {message}", file=sys.stderr)
        return 1
    except theory.TheoryDomainError as exc:
        print(f"error [theory]: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
