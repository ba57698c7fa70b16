"""Command-line front end.

Usage::

    frictionhb {frf,optcurve,hysteresis,uniqueness,transient} [CONFIG] [-o DIR] [--verify]

Each run writes into ``<output>/<experiment>_alpha<deg>/``: CSV tables,
SVG plots and ``report.json``. Exit codes: 0 ok, 2 configuration error,
3 solver failure, 4 verification failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import traceback

import numpy as np

from . import dti, scenarios
from .config import EXPERIMENTS, OUTPUT_ENV, ConfigError, default_config, parse_config
from .contact import loop_energy
from .errors import ConvergenceError, FrictionHbError
from .hbm import StaticState
from .model import build_two_dof
from .svg import PlotStyle, emit_svg

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_VERIFY = 4

_TOL_STEADY = 0.10
_TOL_COUPLED = 0.05
_TOL_SPREAD = 0.01


def _tag(f):
    return f"F{f:.4g}N"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, StaticState):
        return _jsonable(obj.as_dict())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return float(f"{v:.9g}") if math.isfinite(v) else None
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def _write_json(path, data):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(_jsonable(data), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _assertion(name, value, reference, tol, relative=True):
    err = abs(value - reference) / abs(reference) if relative else abs(value - reference)
    return {"name": name, "value": value, "reference": reference, "tolerance": tol,
            "error": err, "passed": bool(err <= tol)}


# ------------------------------------------------------------------ experiments

def run_frf(cfg, outdir):
    files, table = [], []
    for method in cfg.methods:
        curves = scenarios.run_frf_family(cfg.alpha, method, cfg.params, cfg.grid, cfg.f_exc,
                                          cfg.workers, **cfg.hbm_overrides)
        series = []
        for curve in curves:
            name = f"frf_{method}_{_tag(curve.f_exc)}.csv"
            curve.to_csv(os.path.join(outdir, name))
            files.append(name)
            series.append((f"{curve.f_exc:g} N", curve.frequencies, curve.ratios))
            row = curve.summary()
            row.update(method=method, file=name)
            row.pop("label", None)
            table.append(row)
        svg = f"frf_{method}.svg"
        emit_svg(os.path.join(outdir, svg), series,
                 title=f"Pseudo-FRF, alpha = {cfg.alpha_deg:g} deg, {method}",
                 xlabel="frequency [Hz]", ylabel="|q_x| / F_exc [m/N]",
                 style=PlotStyle(markers=method == scenarios.DTI))
        files.append(svg)
    return {"peaks": table}, files, []


def run_optcurve(cfg, outdir):
    files, report, series = [], {"curves": {}}, []
    annotations, assertions = [], []
    for method in cfg.methods:
        curve = scenarios.optimization_curve(cfg.alpha, method, cfg.params, cfg.grid, cfg.f_exc,
                                             cfg.workers, **cfg.hbm_overrides)
        name = f"optcurve_{method}.csv"
        curve.to_csv(os.path.join(outdir, name))
        files.append(name)
        order = np.argsort(curve.ratios)
        series.append((method, curve.ratios[order], curve.normalized()[order]))
        i_min = int(np.argmin(curve.normalized()))
        report["curves"][method] = {
            "file": name,
            "points": [{"ratio": p.ratio, "f_exc_N": p.f_exc, "peak_frequency_Hz": p.peak_frequency,
                        "peak_amplitude_m": p.peak_amplitude, "slip": p.slip,
                        "lift_off": p.lift_off} for p in curve.points],
            "minimum_f_exc_N": curve.points[i_min].f_exc,
            "minimum_ratio": curve.points[i_min].ratio,
        }
    try:
        ratio = scenarios.stick_slip_transition_ratio(cfg.alpha, cfg.params, cfg.grid,
                                                      **cfg.hbm_overrides)
        report["stick_slip_transition_ratio"] = ratio
        annotations.append((ratio, f"stick/slip {ratio:.1f}"))
        if cfg.alpha_deg == 0:
            assertions.append(_assertion("stick-slip transition ratio 106 +/- 4", ratio, 106.0,
                                         4.0, relative=False))
    except FrictionHbError as exc:
        report["stick_slip_transition_ratio"] = None
        logger.warning("transition ratio unavailable: %s", exc)
    svg = "optcurve.svg"
    emit_svg(os.path.join(outdir, svg), series,
             title=f"Optimization curve, alpha = {cfg.alpha_deg:g} deg",
             xlabel="F_pl / F_exc [-]", ylabel="peak |q_x| / F_exc [m/N]",
             style=PlotStyle(xlog=True, markers=True), annotations=annotations)
    files.append(svg)
    return report, files, assertions


def run_hysteresis(cfg, outdir):
    files, loops = [], []
    for method in cfg.methods:
        series = []
        for f in cfg.f_exc:
            tr = scenarios.hysteresis_at_peak(cfg.alpha, method, f, cfg.params, cfg.grid,
                                              **cfg.hbm_overrides)
            name = f"hysteresis_{method}_{_tag(f)}.csv"
            tr.to_csv(os.path.join(outdir, name))
            files.append(name)
            series.append((f"{f:g} N", np.append(tr.u, tr.u[0]), np.append(tr.T, tr.T[0])))
            loops.append({"method": method, "f_exc_N": f, "file": name,
                          "frequency_Hz": 1.0 / tr.period, "loop_energy_J": loop_energy(tr),
                          "slip": tr.has_slip, "lift_off": tr.has_lift_off,
                          "mean_T_N": float(tr.T.mean()), "mean_N_N": float(tr.N.mean())})
        svg = f"hysteresis_{method}.svg"
        emit_svg(os.path.join(outdir, svg), series,
                 title=f"Hysteresis at resonance, alpha = {cfg.alpha_deg:g} deg, {method}",
                 xlabel="u [m]", ylabel="T [N]")
        files.append(svg)
    return {"loops": loops}, files, []


def run_uniqueness(cfg, outdir):
    rep = scenarios.uniqueness_experiment(cfg.params, cfg.ratio, cfg.frequency, cfg.alpha)
    files, series = [], []
    report = {"ratio": rep["ratio"], "frequency_Hz": rep["frequency_Hz"],
              "f_exc_N": rep["f_exc_N"], "spread": rep["spread"], "runs": {}, "coupled": {}}
    for key in ("u1", "u2"):
        run = rep[key]
        name = f"transient_{key}.csv"
        run["history"].to_csv(os.path.join(outdir, name), cfg.decimate)
        files.append(name)
        h = run["history"]
        series.append((key.upper(), h.t, h.q[:, 0]))
        report["runs"][key] = {"file": name, "prestress": run["prestress"],
                               "steady": run["steady"], "amplitude_m": run["amplitude"],
                               "converged": run["converged"]}
    for key, sol in rep["coupled"].items():
        report["coupled"][key] = {k: sol[k] for k in ("T0", "N0", "x0", "y0", "converged")}
    emit_svg(os.path.join(outdir, "transient.svg"), series,
             title=f"Transients from U1 and U2 preload, {cfg.frequency:g} Hz",
             xlabel="t [s]", ylabel="q_x [m]")
    files.append("transient.svg")

    steady = rep["u1"]["steady"]
    assertions = []
    for k, ref in scenarios.REFERENCE_STEADY_STATE.items():
        assertions.append(_assertion(f"DTI steady {k}", steady[k], ref, _TOL_STEADY))
    for k in scenarios.REFERENCE_STEADY_STATE:
        assertions.append(_assertion(f"coupled {k} vs DTI", rep["coupled"]["u1"][k], steady[k],
                                     _TOL_COUPLED))
    assertions.append({"name": "U1/U2 common steady state", "value": rep["spread"],
                       "reference": 0.0, "tolerance": _TOL_SPREAD, "error": rep["spread"],
                       "passed": bool(rep["spread"] <= _TOL_SPREAD)})
    return report, files, assertions


def run_transient(cfg, outdir):
    f_exc = cfg.params.F_pl / cfg.ratio
    model = build_two_dof(cfg.params, cfg.alpha, f_exc)
    # one step size throughout so cycle slicing of the joined history stays exact
    dt = cfg.dt or 1.0 / (200.0 * cfg.frequency)
    state, pre = dti.preload_state(model, cfg.preload, dt=dt)
    static = np.asarray(model.static_load, dtype=float)
    amp = model.harmonic_load_matrix(1)[0]
    t0 = float(pre.t[-1])
    sched = dti.LoadSchedule((dti.Segment.harmonic_load(cfg.duration, static, amp, cfg.frequency,
                                                        ramp_in=0.05, phase_time=t0),),
                             t_start=t0)
    q, v, w = dti.continue_from(pre)
    forced = dti.integrate(model, sched, dt, q, v, w)
    hist = dti.concatenate([pre, forced])
    name = f"transient_{cfg.preload.lower()}.csv"
    hist.to_csv(os.path.join(outdir, name), cfg.decimate)
    emit_svg(os.path.join(outdir, "transient.svg"),
             [("q_x", hist.t, hist.q[:, 0]), ("q_y", hist.t, hist.q[:, 1])],
             title=f"{cfg.preload} preload then {cfg.frequency:g} Hz excitation",
             xlabel="t [s]", ylabel="displacement [m]")
    report = {"preload": cfg.preload, "prestress": state, "f_exc_N": f_exc,
              "frequency_Hz": cfg.frequency, "file": name, "dt_s": hist.dt,
              "samples": int(hist.t.size)}
    try:
        report["final_cycle_mean"] = scenarios.cycle_mean_state(hist, cfg.frequency)
    except FrictionHbError:
        report["final_cycle_mean"] = None
    return report, [name, "transient.svg"], []


RUNNERS = {"frf": run_frf, "optcurve": run_optcurve, "hysteresis": run_hysteresis,
           "uniqueness": run_uniqueness, "transient": run_transient}


# ------------------------------------------------------------------ entry point

def _experiment_dir(cfg):
    return os.path.join(cfg.output_dir, f"{cfg.experiment}_alpha{cfg.alpha_deg:g}")


def _error(kind, message, code, outdir=None, **extra):
    payload = {"status": "error", "kind": kind, "exit_code": code, "message": message, **extra}
    text = json.dumps(_jsonable(payload), sort_keys=True)
    print(text, file=sys.stderr)
    if outdir and os.path.isdir(outdir):
        _write_json(os.path.join(outdir, "error.json"), payload)
    return code


def build_parser():
    p = argparse.ArgumentParser(prog="frictionhb",
                                description="Friction-damped oscillator experiments.")
    p.add_argument("experiment", choices=EXPERIMENTS)
    p.add_argument("config", nargs="?", help="scenario file (INI); defaults apply when omitted")
    p.add_argument("-o", "--output", help=f"output root (overrides ${OUTPUT_ENV} and the file)")
    p.add_argument("--verify", action="store_true",
                   help="also run the benchmark assertion suite; exit 4 if any check fails")
    p.add_argument("--quick", action="store_true",
                   help="with --verify, skip the long time-integration checks")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.config:
            cfg = parse_config(args.config, experiment=args.experiment)
        else:
            cfg = default_config(args.experiment)
    except ConfigError as exc:
        return _error("config", str(exc), EXIT_CONFIG, key=exc.key)
    if args.output:
        cfg.output_dir = args.output

    outdir = _experiment_dir(cfg)
    try:
        os.makedirs(outdir, exist_ok=True)
    except OSError as exc:
        return _error("config", f"cannot create output directory: {exc}", EXIT_CONFIG,
                      key="output.directory")

    try:
        report, files, assertions = RUNNERS[cfg.experiment](cfg, outdir)
    except ConvergenceError as exc:
        return _error("solver", str(exc), EXIT_SOLVER, outdir,
                      error_type=type(exc).__name__, residual=exc.residual)
    except FrictionHbError as exc:
        return _error("solver", str(exc), EXIT_SOLVER, outdir, error_type=type(exc).__name__)
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        logger.debug("%s", traceback.format_exc())
        return _error("solver", str(exc), EXIT_SOLVER, outdir, error_type=type(exc).__name__)

    checks = []
    if args.verify:
        try:
            checks = [{"name": c.name, "passed": c.passed, "detail": c.detail}
                      for c in scenarios.verification_suite(cfg.params, quick=args.quick)]
        except FrictionHbError as exc:
            return _error("solver", f"verification suite: {exc}", EXIT_SOLVER, outdir,
                          error_type=type(exc).__name__)
    verified = all(a["passed"] for a in assertions) and all(c["passed"] for c in checks)
    status = "ok" if (verified or not args.verify) else "verification_failed"
    doc = {"status": status, "experiment": cfg.experiment, "config": cfg.as_dict(),
           "files": sorted(files), "assertions": assertions, "verification": checks,
           "results": report}
    _write_json(os.path.join(outdir, "report.json"), doc)
    for a in assertions:
        print(f"{'PASS' if a['passed'] else 'FAIL'} {a['name']}: {a['value']:.4g} "
              f"(reference {a['reference']:.4g})")
    for c in checks:
        print(f"{'PASS' if c['passed'] else 'FAIL'} {c['name']}: {c['detail']}")
    print(f"wrote {len(files) + 1} files to {outdir}")
    if args.verify and not verified:
        return EXIT_VERIFY
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
