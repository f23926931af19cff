"""End-to-end experiments: instance, fixed point, spectrum, coefficients, runs.

A config is a YAML mapping; unknown keys are rejected. Example::

    problem:
      kind: lasso
      m: 150
      n: 300
      density: 0.001
      seed: 0
      params: {reg_lambda: 1.0, penalty_rho: 10.0}
    schemes: [plain, AA(1), AA(2), sAA(1), {scheme: sAA(2), beta: sweep}]
    max_iter: 3000
    tol: 1.0e-12
    fd_step: null          # per-kind default
    fd_central: false
    sweep: {lo: -1.0, hi: 1.0, step: 0.05, step_m3: 0.1, refine_m3: true}
    window: 20
    error_metric: auto     # reference | residual | auto
    output_dir: runs/lasso

``run_experiment`` writes the instance file, ``spectrum_q.csv``, one
``spectrum_psi_m<m>.csv`` per sAA window, one ``trace_<scheme>.csv`` per
scheme, ``summary.yaml`` and ``plot_results.py``.
"""

from __future__ import annotations

import copy
import csv
import math
import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import yaml

from . import theory
from .anderson import SAAPlan, Scheme, run_accelerated
from .fixed_point import (
    DEFAULT_WINDOW,
    estimate_convergence_factor,
    reference_solution_info,
)
from .jacobian import (
    FD_STEPS,
    analytic_jacobian,
    fd_jacobian,
    spectrum_of,
    write_eigenvalues_csv,
)
from .problems import build_fpi, generate_instance, write_instance, zero_state

EPS = np.finfo(float).eps
SUMMARY_NAME = "summary.yaml"
DEFAULT_SCHEMES = ("plain", "AA(1)", "AA(2)", "AA(3)", "sAA(1)", "sAA(2)")


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""


class ExperimentError(RuntimeError):
    """A pipeline stage failed; ``stage`` names it."""

    def __init__(self, stage, message):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


@dataclass
class SchemeSpec:
    kind: str
    m: int
    beta_source: Optional[str] = None  # theory | sweep | explicit
    beta: Optional[tuple] = None

    @property
    def label(self):
        return "plain" if self.kind == "plain" else f"{'AA' if self.kind == 'aa' else 'sAA'}({self.m})"


@dataclass
class SweepConfig:
    lo: float = -1.0
    hi: float = 1.0
    step: float = 0.05
    step_m3: float = 0.1
    refine_m3: bool = True


@dataclass
class ExperimentConfig:
    kind: str
    m: Optional[int] = None
    n: Optional[int] = None
    density: Optional[float] = None
    seed: int = 0
    params: dict = field(default_factory=dict)
    schemes: list = field(default_factory=list)
    max_iter: int = 3000
    tol: float = 1e-12
    fd_step: Optional[float] = None
    fd_central: bool = False
    sweep: SweepConfig = field(default_factory=SweepConfig)
    window: int = DEFAULT_WINDOW
    error_metric: str = "auto"
    output_dir: str = "."
    reference_max_iter: int = 200000
    workers: int = 1

    def __post_init__(self):
        if not self.schemes:
            self.schemes = [parse_scheme_entry(s) for s in DEFAULT_SCHEMES]
        if self.max_iter < 1:
            raise ConfigError("max_iter must be positive")
        if not self.tol > 0:
            raise ConfigError("tol must be positive")
        if self.window < 2:
            raise ConfigError("window must be at least 2")
        if self.error_metric not in ("auto", "reference", "residual"):
            raise ConfigError("error_metric must be auto, reference or residual")
        if self.fd_step is not None and not self.fd_step > 0:
            raise ConfigError("fd_step must be positive")
        labels = [s.label for s in self.schemes]
        if len(set(labels)) != len(labels):
            raise ConfigError(f"duplicate schemes in {labels}")

    @property
    def resolved_fd_step(self) -> float:
        return self.fd_step if self.fd_step is not None else FD_STEPS[self.kind]


_TOP_KEYS = {"problem", "schemes", "max_iter", "tol", "fd_step", "fd_central", "sweep", "window",
             "error_metric", "output_dir", "reference_max_iter", "workers"}
_PROBLEM_KEYS = {"kind", "m", "n", "density", "seed", "params"}
_SWEEP_KEYS = {"lo", "hi", "step", "step_m3", "refine_m3"}
_SCHEME_KEYS = {"scheme", "beta"}


def _check_keys(mapping, allowed, where):
    if not isinstance(mapping, dict):
        raise ConfigError(f"{where} must be a mapping")
    unknown = set(mapping) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")


def parse_scheme_entry(entry) -> SchemeSpec:
    """``"AA(2)"``, ``"sAA(1)"`` or ``{scheme: sAA(2), beta: sweep | theory | [..]}``."""
    beta = None
    if isinstance(entry, dict):
        _check_keys(entry, _SCHEME_KEYS, "scheme entry")
        if "scheme" not in entry:
            raise ConfigError("scheme entry needs a 'scheme' key")
        text, beta = entry["scheme"], entry.get("beta")
    else:
        text = entry
    try:
        kind, m = Scheme.parse(str(text))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if kind != "saa":
        if beta is not None:
            raise ConfigError(f"{text}: only sAA schemes take beta")
        return SchemeSpec(kind, m)
    if beta is None:
        source = "theory" if m == 1 else "sweep"
    elif isinstance(beta, str):
        if beta not in ("theory", "sweep"):
            raise ConfigError(f"{text}: beta must be theory, sweep or a list")
        source = beta
    else:
        values = tuple(float(b) for b in np.atleast_1d(beta))
        if len(values) != m:
            raise ConfigError(f"{text}: expected {m} coefficients, got {len(values)}")
        return SchemeSpec(kind, m, "explicit", values)
    if source == "theory" and m != 1:
        raise ConfigError(f"{text}: closed-form coefficients exist for m = 1 only")
    return SchemeSpec(kind, m, source)


def config_from_dict(raw: dict, base_dir=".") -> ExperimentConfig:
    """Validate a parsed YAML mapping and build the config."""
    _check_keys(raw, _TOP_KEYS, "config")
    if "problem" not in raw:
        raise ConfigError("config needs a 'problem' section")
    prob = raw["problem"]
    _check_keys(prob, _PROBLEM_KEYS, "problem")
    if "kind" not in prob:
        raise ConfigError("problem needs a 'kind'")
    sweep_raw = raw.get("sweep") or {}
    _check_keys(sweep_raw, _SWEEP_KEYS, "sweep")
    schemes = [parse_scheme_entry(s) for s in raw.get("schemes") or []]
    out_dir = raw.get("output_dir", ".")
    if not os.path.isabs(out_dir):
        out_dir = os.path.join(base_dir, out_dir)
    try:
        return ExperimentConfig(
            kind=prob["kind"],
            m=prob.get("m"),
            n=prob.get("n"),
            density=prob.get("density"),
            seed=int(prob.get("seed", 0)),
            params=dict(prob.get("params") or {}),
            schemes=schemes,
            max_iter=int(raw.get("max_iter", 3000)),
            tol=float(raw.get("tol", 1e-12)),
            fd_step=None if raw.get("fd_step") is None else float(raw["fd_step"]),
            fd_central=bool(raw.get("fd_central", False)),
            sweep=SweepConfig(**{k: (bool(v) if k == "refine_m3" else float(v)) for k, v in sweep_raw.items()}),
            window=int(raw.get("window", DEFAULT_WINDOW)),
            error_metric=str(raw.get("error_metric", "auto")),
            output_dir=out_dir,
            reference_max_iter=int(raw.get("reference_max_iter", 200000)),
            workers=int(raw.get("workers", 1)),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        raw = yaml.safe_load(fh)
    return config_from_dict(raw or {}, base_dir=os.path.dirname(os.path.abspath(path)))


@dataclass
class Analysis:
    """Fixed point, Jacobian spectrum and derived quantities for one instance."""

    reference: object
    jacobian_method: str
    fd_step: Optional[float]
    spectrum: object
    effective: object
    rho_q: float
    floor: float


def analyze(instance, fpmap, fd_step=None, central=False, workers=1, reference_max_iter=200000):
    """Reference solution, ``q'`` at it, and its spectrum.

    Eigenvalues equal to one (a continuum of fixed points) are dropped from the
    effective spectrum used for predictions. ``floor`` estimates the accuracy of
    the reference: ``max(64 eps ||x*||, last step / (1 - rho))``.
    """
    stage = "reference"
    try:
        ref = reference_solution_info(fpmap, zero_state(instance), 1e-16, reference_max_iter)
        stage = "jacobian"
        if instance.kind == "ridge":
            jac, method, h = analytic_jacobian(instance, ref.x), "analytic", None
        else:
            h = fd_step if fd_step is not None else FD_STEPS[instance.kind]
            jac = fd_jacobian(fpmap, ref.x, h, central=central, workers=workers)
            method = "central_difference" if central else "forward_difference"
        stage = "spectrum"
        spec = spectrum_of(jac)
    except ExperimentError:
        raise
    except Exception as exc:
        raise ExperimentError(stage, str(exc)) from exc
    effective = spec.without_neutral()
    rho = effective.spectral_radius
    floor = 64.0 * EPS * max(1.0, float(np.linalg.norm(ref.x)))
    if rho < 1.0:
        floor = max(floor, ref.final_step / (1.0 - rho))
    else:
        floor = max(floor, ref.final_step)
    return Analysis(ref, method, h, spec, effective, rho, floor)


def resolve_plan(spec: SchemeSpec, effective, sweep: SweepConfig):
    """Coefficients of an sAA scheme plus the theory result that produced them."""
    if spec.beta_source == "explicit":
        beta = spec.beta
        return SAAPlan(beta, theory.rho_saa(effective, beta), "user_supplied"), None
    if spec.beta_source == "theory":
        result = theory.optimal_saa1(effective)
    else:
        step = sweep.step if spec.m <= 2 else sweep.step_m3
        refine = sweep.refine_m3 and spec.m >= 3
        result = theory.brute_force_sweep(effective, spec.m, sweep.lo, sweep.hi, step, refine=refine)
    return SAAPlan.from_result(result), result


def _first_below(errors, tol):
    hits = np.nonzero(np.asarray(errors) <= tol)[0]
    return int(hits[0]) if hits.size else None


def plain_data(value):
    if isinstance(value, dict):
        return {k: plain_data(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [plain_data(v) for v in value]
    if isinstance(value, (np.floating, float)):
        return float(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def _write_summary(path, summary):
    with open(path, "w") as fh:
        yaml.safe_dump(plain_data(summary), fh, sort_keys=False, default_flow_style=False)


PLOT_SCRIPT = '''"""Plot error histories and spectra written by an aaadmm experiment."""
import csv
import os
import sys

import matplotlib.pyplot as plt
import yaml

here = os.path.dirname(os.path.abspath(__file__))
with open(os.path.join(here, "summary.yaml")) as fh:
    summary = yaml.safe_load(fh)


def columns(name, keys):
    with open(os.path.join(here, name)) as fh:
        rows = list(csv.DictReader(fh))
    return [[float(r[k]) for r in rows] for k in keys]


fig, (ax_err, ax_spec) = plt.subplots(2, 1, figsize=(7, 9))
for scheme in summary["schemes"]:
    k, err = columns(scheme["trace_file"], ("k", "error_norm"))
    ax_err.semilogy(k, err, label=scheme["label"])
ax_err.set_xlabel("iteration")
ax_err.set_ylabel(summary["error_metric"] + " error")
ax_err.legend()

for name, label in summary["files"]["spectra"].items():
    re, im = columns(label, ("re", "im"))
    ax_spec.scatter(re, im, s=6, label=name)
ax_spec.set_aspect("equal")
ax_spec.legend()
fig.tight_layout()
out = sys.argv[1] if len(sys.argv) > 1 else os.path.join(here, "results.png")
fig.savefig(out, dpi=150)
'''


def run_experiment(config: ExperimentConfig) -> dict:
    """Run the full pipeline and write all artifacts to ``config.output_dir``.

    On failure the partial summary is still written (with ``status: failed``
    and the stage name) before :class:`ExperimentError` propagates.
    """
    out = config.output_dir
    os.makedirs(out, exist_ok=True)
    summary = {
        "status": "running",
        "problem": {"kind": config.kind, "seed": config.seed},
        "files": {"instance": "instance.txt", "spectra": {}, "plot_script": "plot_results.py"},
    }
    summary_path = os.path.join(out, SUMMARY_NAME)
    try:
        _pipeline(config, summary, out)
    except Exception as exc:
        stage = exc.stage if isinstance(exc, ExperimentError) else "internal"
        summary["status"] = "failed"
        summary["failed_stage"] = stage
        summary["error"] = str(exc)
        _write_summary(summary_path, summary)
        if isinstance(exc, ExperimentError):
            raise
        raise ExperimentError(stage, str(exc)) from exc
    summary["status"] = "completed"
    _write_summary(summary_path, summary)
    return summary


def _pipeline(config, summary, out):
    try:
        instance = generate_instance(config.kind, config.m, config.n, config.density,
                                     config.seed, config.params)
        write_instance(instance, os.path.join(out, "instance.txt"))
        fpmap = build_fpi(instance)
    except Exception as exc:
        raise ExperimentError("generate", str(exc)) from exc
    summary["problem"] = instance.scalar_fields()

    an = analyze(instance, fpmap, config.fd_step if instance.kind != "ridge" else None,
                 config.fd_central, config.workers, config.reference_max_iter)
    write_eigenvalues_csv(an.spectrum.eigenvalues, os.path.join(out, "spectrum_q.csv"))
    summary["files"]["spectra"]["q_prime"] = "spectrum_q.csv"
    summary["reference"] = {
        "iterations": an.reference.iterations,
        "stop_reason": an.reference.reason,
        "final_step": an.reference.final_step,
        "accuracy_floor": an.floor,
    }
    summary["jacobian"] = {"method": an.jacobian_method, "fd_step": an.fd_step,
                           "uniform_step_all_coordinates": True}
    summary["spectrum"] = an.spectrum.summary()
    summary["effective_spectrum"] = an.effective.summary()
    summary["rho_q"] = an.rho_q
    if an.rho_q < 1.0:
        summary["saa1_formula_factor"] = 1.0 - math.sqrt(1.0 - an.rho_q)

    metric = config.error_metric
    if metric == "auto":
        metric = "residual" if an.effective.neutral_removed else "reference"
    summary["error_metric"] = metric
    reference = an.reference.x if metric == "reference" else None
    stop_tol = max(config.tol, an.floor)
    summary["stop_tolerance"] = stop_tol

    plans = {}
    for spec in config.schemes:
        if spec.kind != "saa":
            continue
        stage = "theory" if spec.beta_source == "theory" else "sweep"
        try:
            plans[spec.label] = resolve_plan(spec, an.effective, config.sweep)
        except Exception as exc:
            raise ExperimentError(stage, f"{spec.label}: {exc}") from exc

    for label, (plan, _) in plans.items():
        name = f"spectrum_psi_{label.replace('(', '_m').rstrip(')')}.csv"
        roots = theory.spectrum_of_psi(an.spectrum, plan.beta)
        write_eigenvalues_csv(roots, os.path.join(out, name))
        summary["files"]["spectra"][f"psi_{label}"] = name

    x0 = zero_state(instance)
    rows = []
    for spec in config.schemes:
        if spec.kind == "plain":
            scheme, predicted, plan, result = Scheme.plain(), an.rho_q, None, None
        elif spec.kind == "aa":
            scheme, predicted, plan, result = Scheme.aa(spec.m), None, None, None
        else:
            plan, result = plans[spec.label]
            scheme, predicted = Scheme.saa(plan), plan.predicted_factor
        try:
            trace = run_accelerated(fpmap, x0, scheme, config.max_iter, stop_tol,
                                    reference=reference, floor=an.floor)
        except Exception as exc:
            raise ExperimentError("run", f"{spec.label}: {exc}") from exc
        trace_name = f"trace_{spec.label.replace('(', '_').rstrip(')')}.csv"
        trace.write_csv(os.path.join(out, trace_name))
        est = estimate_convergence_factor(trace, config.window)
        row = {
            "label": spec.label,
            "kind": spec.kind,
            "m": spec.m,
            "beta": list(plan.beta) if plan else None,
            "beta_source": spec.beta_source,
            "provenance": plan.provenance if plan else None,
            "predicted_factor": None if predicted is None or math.isnan(predicted) else predicted,
            "measured_factor": None if math.isnan(est.factor) else est.factor,
            "measured_reliable": est.reliable,
            "ratios_used": est.ratios_used,
            "terminal_status": trace.terminal_status,
            "iterations": trace.iterations,
            "iterations_to_tol": _first_below(trace.errors, stop_tol),
            "trace_file": trace_name,
        }
        if result is not None:
            row["theory"] = result.to_dict()
        rows.append(row)
    summary["schemes"] = rows

    with open(os.path.join(out, "plot_results.py"), "w") as fh:
        fh.write(PLOT_SCRIPT)


REPORT_COLUMNS = ("problem", "seed", "scheme", "rho_q", "beta", "provenance", "predicted_factor",
                  "measured_factor", "iterations_to_tol", "terminal_status")


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return format(value, ".17g")
    if isinstance(value, (list, tuple)):
        return " ".join(format(float(v), ".17g") for v in value)
    return str(value)


def compare_report(summaries, path=None):
    """One CSV row per (problem, scheme); returns the rows and writes ``path``."""
    if not summaries:
        raise ValueError("need at least one summary")
    rows = []
    for summary in summaries:
        problem = summary.get("problem", {})
        for scheme in summary.get("schemes", []):
            rows.append({
                "problem": problem.get("kind"),
                "seed": problem.get("seed"),
                "scheme": scheme["label"],
                "rho_q": summary.get("rho_q"),
                "beta": scheme.get("beta"),
                "provenance": scheme.get("provenance"),
                "predicted_factor": scheme.get("predicted_factor"),
                "measured_factor": scheme.get("measured_factor"),
                "iterations_to_tol": scheme.get("iterations_to_tol"),
                "terminal_status": scheme.get("terminal_status"),
            })
    if path is not None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(REPORT_COLUMNS)
            for row in rows:
                writer.writerow([_cell(row[c]) for c in REPORT_COLUMNS])
    return rows


def load_summary(path) -> dict:
    """Read a ``summary.yaml`` (or a directory holding one)."""
    if os.path.isdir(path):
        path = os.path.join(path, SUMMARY_NAME)
    with open(path) as fh:
        return yaml.safe_load(fh)


def default_config(kind, **overrides) -> ExperimentConfig:
    """Config with the standard parameters for ``kind``."""
    cfg = ExperimentConfig(kind=kind)
    for key, value in overrides.items():
        if not hasattr(cfg, key):
            raise ConfigError(f"unknown config field {key!r}")
        setattr(cfg, key, copy.deepcopy(value))
    cfg.__post_init__()
    return cfg
