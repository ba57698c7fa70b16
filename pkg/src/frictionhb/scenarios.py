"""Benchmark experiments on the 2-DOF friction oscillator.

Pseudo-FRF families, optimization curves (peak amplitude against the
preload-to-excitation ratio), hysteresis loops at resonance, the U1/U2
preload-history comparison and the time-integration uniqueness run.
"""

from __future__ import annotations

import csv
import functools
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import dti
from .errors import ValidationError
from .hbm import COUPLED, UNCOUPLED, FrfCurve, HbmConfig, refine_peak, solve_static, sweep
from .model import Table1Params, build_two_dof

logger = logging.getLogger(__name__)

__all__ = [
    "Table1Params", "OptimizationCurve", "METHODS", "default_grid", "prestress",
    "run_frf_family", "optimization_curve", "hysteresis_at_peak", "uniqueness_experiment",
    "stick_slip_transition_ratio", "loop_deviation", "dti_peak_amplitude", "solution_at",
    "energy_check", "verification_suite", "Check", "OptimizationPoint", "cycle_mean_state",
]

COUPLED_M = "coupled"
UNCOUPLED_U1 = "uncoupled_u1"
UNCOUPLED_U2 = "uncoupled_u2"
DTI = "dti"
METHODS = (COUPLED_M, UNCOUPLED_U1, UNCOUPLED_U2, DTI)


def default_grid():
    """80-160 Hz at 0.5 Hz."""
    return np.arange(80.0, 160.0 + 1e-9, 0.5)


@dataclass
class OptimizationPoint:
    ratio: float
    peak_amplitude: float
    peak_frequency: float
    method: str
    f_exc: float
    slip: bool = False
    lift_off: bool = False


@dataclass
class OptimizationCurve:
    points: list = field(default_factory=list)

    def __post_init__(self):
        if any(p.ratio <= 0 for p in self.points):
            raise ValidationError("ratios must be strictly positive")

    @property
    def ratios(self):
        return np.array([p.ratio for p in self.points])

    @property
    def peak_amplitudes(self):
        return np.array([p.peak_amplitude for p in self.points])

    @property
    def peak_frequencies(self):
        return np.array([p.peak_frequency for p in self.points])

    def normalized(self):
        """Peak amplitude divided by the excitation amplitude [m/N]."""
        return np.array([p.peak_amplitude / p.f_exc for p in self.points])

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["ratio", "f_exc_N", "peak_frequency_Hz", "peak_amplitude_m",
                         "peak_ratio_m_per_N", "slip", "lift_off", "method"])
            for p in self.points:
                wr.writerow([f"{p.ratio:.9g}", f"{p.f_exc:.9g}", f"{p.peak_frequency:.9g}",
                             f"{p.peak_amplitude:.9g}", f"{p.peak_amplitude / p.f_exc:.9g}",
                             int(p.slip), int(p.lift_off), p.method])


def _check_method(method):
    if method not in METHODS:
        raise ValidationError(f"unknown method {method!r}; expected one of {METHODS}")


@functools.lru_cache(maxsize=32)
def _prestress_cached(params, alpha, style):
    model = build_two_dof(params, alpha)
    if style == dti.U1:
        return solve_static(model)
    state, _ = dti.preload_state(model, dti.U2)
    return state


def prestress(params, alpha, style):
    """Static prestress for the uncoupled method.

    ``U1``: monotonic incremental static solve. ``U2``: time integration of
    the overshooting preload history, then settling.
    """
    if style not in (dti.U1, dti.U2):
        raise ValidationError(f"unknown prestress style {style!r}")
    return _prestress_cached(params, float(alpha), style)


def _config(method, params, alpha, grid, **overrides):
    if method == UNCOUPLED_U1:
        return HbmConfig(frequencies=grid, mode=UNCOUPLED,
                         prestress=prestress(params, alpha, dti.U1), **overrides)
    if method == UNCOUPLED_U2:
        return HbmConfig(frequencies=grid, mode=UNCOUPLED,
                         prestress=prestress(params, alpha, dti.U2), **overrides)
    return HbmConfig(frequencies=grid, mode=COUPLED, **overrides)


def _map(fn, items, workers):
    if workers and workers > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(it) for it in items]


def _frf_one(args):
    alpha, method, params, grid, f_exc, overrides = args
    model = build_two_dof(params, alpha, f_exc)
    if method == DTI:
        return _dti_frf(model, params, alpha, grid, overrides)
    cfg = _config(method, params, alpha, grid, **overrides)
    start = cfg.prestress if cfg.prestress is not None else prestress(params, alpha, dti.U1)
    return sweep(model, cfg, start=start, label=f"{f_exc:g} N")


def _dti_frf(model, params, alpha, grid, overrides, span=3):
    cfg = _config(COUPLED_M, params, alpha, grid, **overrides)
    ref = sweep(model, cfg, start=prestress(params, alpha, dti.U1), keep_solutions=False)
    i = int(np.argmax(ref.amplitudes))
    sel = grid[max(i - span, 0):i + span + 1]
    start = prestress(params, alpha, dti.U1)
    amps, conv = [], []
    for f in sel:
        _, a, _, ok = dti.harmonic_steady_state(model, start, f)
        amps.append(a)
        conv.append(ok)
    f_exc = ref.f_exc
    return FrfCurve(np.array(sel), np.array(amps), f_exc, np.array(conv),
                    np.zeros(len(sel), dtype=int), [], f"{f_exc:g} N (DTI)")


def run_frf_family(alpha, method, params=None, grid=None, amplitudes=None, workers=1,
                   **overrides):
    """One pseudo-FRF per excitation amplitude.

    Parameters
    ----------
    alpha : float
        Wall angle [rad].
    method : {'coupled', 'uncoupled_u1', 'uncoupled_u2', 'dti'}
    params : Table1Params, optional
    grid : array_like, optional
        Frequencies [Hz]; defaults to :func:`default_grid`.
    amplitudes : sequence of float, optional
        Defaults to ``params.F_exc``.
    workers : int
        Process count for running family members concurrently.
    **overrides
        Extra :class:`HbmConfig` fields (``H``, ``J``, ``newton_tol`` ...).

    Returns
    -------
    list of FrfCurve
    """
    _check_method(method)
    params = Table1Params() if params is None else params
    grid = default_grid() if grid is None else np.asarray(grid, dtype=float)
    amplitudes = params.F_exc if amplitudes is None else tuple(amplitudes)
    items = [(alpha, method, params, grid, float(f), overrides) for f in amplitudes]
    return _map(_frf_one, items, workers)


def _peak_solution(alpha, method, params, grid, f_exc, overrides):
    model = build_two_dof(params, alpha, f_exc)
    hb_method = COUPLED_M if method == DTI else method
    cfg = _config(hb_method, params, alpha, grid, **overrides)
    start = cfg.prestress if cfg.prestress is not None else prestress(params, alpha, dti.U1)
    curve = sweep(model, cfg, start=start, label=f"{f_exc:g} N")
    return model, cfg, curve, refine_peak(model, cfg, curve)


def dti_peak_amplitude(alpha, params, f_exc, frequency, min_time=0.0):
    """Steady DTI amplitude of ``q_x`` at ``frequency`` after a U1 preload."""
    model = build_two_dof(params, alpha, f_exc)
    hist, a, _, ok = dti.harmonic_steady_state(model, prestress(params, alpha, dti.U1),
                                               frequency, min_time=min_time)
    return a, ok, hist


def _opt_point(args):
    alpha, method, params, grid, f_exc, overrides = args
    model, cfg, curve, best = _peak_solution(alpha, method, params, grid, f_exc, overrides)
    tr = best.traces[0]
    if method == DTI:
        amp, _, hist = dti_peak_amplitude(alpha, params, f_exc, best.frequency)
        dtr = hist.contact_trace(best.frequency)
        return OptimizationPoint(params.F_pl / f_exc, amp, best.frequency, method, f_exc,
                                 dtr.has_slip, dtr.has_lift_off)
    return OptimizationPoint(params.F_pl / f_exc, best.amplitude(cfg.observe_dof, cfg.J),
                             best.frequency, method, f_exc, tr.has_slip, tr.has_lift_off)


def optimization_curve(alpha, method, params=None, grid=None, amplitudes=None, workers=1,
                       **overrides):
    """Refined FRF peak for every excitation amplitude.

    For ``method='dti'`` the time integration runs at the refined coupled
    peak frequency.
    """
    _check_method(method)
    params = Table1Params() if params is None else params
    grid = default_grid() if grid is None else np.asarray(grid, dtype=float)
    amplitudes = params.F_exc if amplitudes is None else tuple(amplitudes)
    items = [(alpha, method, params, grid, float(f), overrides) for f in amplitudes]
    return OptimizationCurve(_map(_opt_point, items, workers))


def stick_slip_transition_ratio(alpha=0.0, params=None, grid=None, **overrides):
    """Preload-to-excitation ratio at which the resonant contact starts to slip.

    Uses the coupled resonance at a small excitation (1 N, full stick): the
    contact forces are ``T = T0 + F tau(t)``, ``N = N0 + F nu(t)``, linear in
    the excitation amplitude ``F``; the largest ``F`` keeping ``|T| <= mu N``
    at every sample is the slip threshold.
    """
    params = Table1Params() if params is None else params
    grid = default_grid() if grid is None else np.asarray(grid, dtype=float)
    _, _, _, best = _peak_solution(alpha, COUPLED_M, params, grid, 1.0, overrides)
    tr = best.traces[0]
    if tr.has_slip or tr.has_lift_off:
        raise ValidationError("1 N reference response is not in full stick")
    T0, N0 = tr.T.mean(), tr.N.mean()
    tau, nu = tr.T - T0, tr.N - N0
    mu = params.mu
    limits = []
    for a, b in ((tau - mu * nu, mu * N0 - T0), (-tau - mu * nu, mu * N0 + T0)):
        pos = a > 0
        limits.extend(b / a[pos])
    f_crit = float(np.min(limits))
    return params.F_pl / f_crit


def hysteresis_at_peak(alpha, method, f_exc, params=None, grid=None, frequency=None,
                       **overrides):
    """Contact trace at the FRF peak (or at ``frequency`` when given)."""
    _check_method(method)
    params = Table1Params() if params is None else params
    grid = default_grid() if grid is None else np.asarray(grid, dtype=float)
    if frequency is None:
        _, _, _, best = _peak_solution(alpha, method, params, grid, f_exc, overrides)
        frequency = best.frequency
    else:
        best = None
    if method == DTI:
        _, _, hist = dti_peak_amplitude(alpha, params, f_exc, frequency)
        return hist.contact_trace(frequency)
    if best is None:
        best = solution_at(alpha, method, f_exc, frequency, params, **overrides)
    return best.traces[0]


def solution_at(alpha, method, f_exc, frequency, params=None, approach=(120.0,), **overrides):
    """HBM solution at one frequency, reached by a short continuation."""
    params = Table1Params() if params is None else params
    hb_method = COUPLED_M if method == DTI else method
    grid = np.array([*[f for f in approach if f < frequency], frequency])
    model = build_two_dof(params, alpha, f_exc)
    cfg = _config(hb_method, params, alpha, grid, **overrides)
    start = cfg.prestress if cfg.prestress is not None else prestress(params, alpha, dti.U1)
    curve = sweep(model, cfg, start=start)
    return curve.solutions[-1]


def loop_deviation(trace, reference):
    """Largest pointwise gap between two hysteresis loops.

    ``reference`` is interpolated periodically to the phases of ``trace``;
    the gaps in ``u`` and ``T`` are divided by the reference loop extent in
    the same quantity and the larger value is returned.
    """
    ph = np.arange(trace.J) / trace.J
    ph_ref = np.arange(reference.J) / reference.J
    out = 0.0
    for a, b in ((trace.u, reference.u), (trace.T, reference.T)):
        b_i = np.interp(ph, ph_ref, b, period=1.0)
        extent = float(np.max(b) - np.min(b))
        out = max(out, float(np.max(np.abs(a - b_i))) / max(extent, 1e-300))
    return out


def cycle_mean_state(hist, frequency):
    sl = hist.cycle_slice(frequency)
    sl = slice(sl.start, sl.stop - 1)
    return {"T0": float(hist.T[sl, 0].mean()), "N0": float(hist.N[sl, 0].mean()),
            "x0": float(hist.q[sl, 0].mean()), "y0": float(hist.q[sl, 1].mean())}


REFERENCE_STEADY_STATE = {"T0": -6.0, "N0": 23.9, "x0": -5.4e-5, "y0": 1.7e-4}
REFERENCE_U1 = {"T0": 14.2, "N0": 28.5, "x0": -2.6e-5, "y0": 1.6e-4}
REFERENCE_U2 = {"T0": -10.8, "N0": 22.9, "x0": -6e-5, "y0": 1.7e-4}


def uniqueness_experiment(params=None, ratio=84.0, frequency=132.0, alpha=np.pi / 4,
                          min_time=1.0):
    """Harmonic excitation started from the U1 and U2 preload states.

    Returns
    -------
    dict
        ``u1``/``u2``: prestress, steady mean state and transient
        ``Trajectory`` of each run; ``coupled``: 0th harmonic of the coupled
        HBM solution at ``frequency``; ``spread``: largest relative
        difference between the two steady mean states.
    """
    params = Table1Params() if params is None else params
    f_exc = params.F_pl / ratio
    model = build_two_dof(params, alpha, f_exc)
    report = {"ratio": ratio, "frequency_Hz": frequency, "f_exc_N": f_exc}
    for style in (dti.U1, dti.U2):
        pre = prestress(params, alpha, style)
        hist, a, _, ok = dti.harmonic_steady_state(model, pre, frequency, min_time=min_time)
        report[style.lower()] = {"prestress": pre, "steady": cycle_mean_state(hist, frequency),
                                 "amplitude": a, "converged": ok, "history": hist}
    s1, s2 = report["u1"]["steady"], report["u2"]["steady"]
    report["spread"] = max(abs(s1[k] - s2[k]) / abs(s1[k]) for k in s1)
    coupled = {}
    for style in (dti.U1, dti.U2):
        pre = prestress(params, alpha, style)
        cfg = HbmConfig(frequencies=[frequency])
        sol = sweep(model, cfg, start=pre).solutions[0]
        T0, N0 = sol.mean_contact_forces()[0]
        coupled[style.lower()] = {"T0": T0, "N0": N0, "x0": float(sol.hs.c0[0]),
                                  "y0": float(sol.hs.c0[1]), "converged": sol.converged,
                                  "solution": sol}
    report["coupled"] = coupled
    return report


def energy_check(model, hist, frequency):
    """Relative energy balance error over the last steady cycle."""
    e = dti.cycle_energy_balance(model, hist, frequency)
    return abs(e["external"] - e["viscous"] - e["friction"]) / abs(e["external"]), e


# ------------------------------------------------------------- verification

@dataclass
class Check:
    name: str
    passed: bool
    detail: str


def _rel(a, b):
    return abs(a - b) / abs(b)


def verification_suite(params=None, quick=False):
    """Executable form of the benchmark numbers; returns a list of :class:`Check`.

    ``quick`` skips the DTI cross-checks over the full amplitude family.
    """
    params = Table1Params() if params is None else params
    checks = []

    def add(name, ok, detail):
        checks.append(Check(name, bool(ok), detail))
        logger.info("%s %s: %s", "PASS" if ok else "FAIL", name, detail)

    st0 = prestress(params, 0.0, dti.U1)
    T0, N0 = st0.fc0[0]
    add("static alpha=0 N0 ~ 46 N (3%)", _rel(N0, 46.0) <= 0.03, f"N0={N0:.4g} N")
    add("static alpha=0 y0 ~ 0.15e-3 m (3%)", _rel(st0.q0[1], 0.15e-3) <= 0.03,
        f"y0={st0.q0[1]:.4g} m")

    opt = optimization_curve(0.0, COUPLED_M, params)
    f1 = opt.points[0]
    add("alpha=0, 1 N peak at 132 +/- 1 Hz", abs(f1.peak_frequency - 132.0) <= 1.0,
        f"f={f1.peak_frequency:.2f} Hz")
    i_min = int(np.argmin(opt.normalized()))
    add("alpha=0 minimum peak at 24 N", opt.points[i_min].f_exc == 24.0,
        f"min at {opt.points[i_min].f_exc:g} N")
    p24 = [p for p in opt.points if p.f_exc == 24.0][0]
    add("alpha=0, 24 N peak at 115 +/- 2 Hz", abs(p24.peak_frequency - 115.0) <= 2.0,
        f"f={p24.peak_frequency:.2f} Hz")
    ratio = stick_slip_transition_ratio(0.0, params)
    add("alpha=0 stick-slip transition at ratio 106 +/- 4", abs(ratio - 106.0) <= 4.0,
        f"ratio={ratio:.2f}")

    u1 = prestress(params, np.pi / 4, dti.U1)
    u2 = prestress(params, np.pi / 4, dti.U2)
    add("alpha=45 U1 static N0 ~ 28.5 N (5%)", _rel(u1.fc0[0][1], 28.5) <= 0.05,
        f"N0={u1.fc0[0][1]:.4g} N")
    add("alpha=45 U1 static T0 = +mu N0", abs(u1.fc0[0][0] - params.mu * u1.fc0[0][1]) < 1e-6,
        f"T0={u1.fc0[0][0]:.4g} N")
    add("alpha=45 U2 static T0 < 0", u2.fc0[0][0] < 0, f"T0={u2.fc0[0][0]:.4g} N")
    add("alpha=45 U2 static N0 ~ 22.9 N (10%)", _rel(u2.fc0[0][1], 22.9) <= 0.10,
        f"N0={u2.fc0[0][1]:.4g} N")

    if not quick:
        f84 = params.F_pl / 84.0
        pk = {m: optimization_curve(np.pi / 4, m, params, amplitudes=[f84]).points[0]
              for m in (UNCOUPLED_U1, UNCOUPLED_U2)}
        a1, a2 = pk[UNCOUPLED_U1].peak_amplitude, pk[UNCOUPLED_U2].peak_amplitude
        add("alpha=45 ratio 84: U1 peak above U2 by > 5%", a1 > a2 and _rel(a1, a2) > 0.05,
            f"U1={a1:.4g} m, U2={a2:.4g} m")
        rep = uniqueness_experiment(params)
        for k, ref in REFERENCE_STEADY_STATE.items():
            val = rep["coupled"]["u1"][k]
            add(f"alpha=45 coupled steady {k} ~ {ref:g} (10%)", _rel(val, ref) <= 0.10,
                f"{k}={val:.4g}")
        add("DTI U1/U2 runs reach a common steady state (1%)", rep["spread"] <= 0.01,
            f"spread={rep['spread']:.2e}")
    return checks
