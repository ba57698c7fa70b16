"""Frequency-domain balance of the equations of motion.

Two formulations are provided:

* coupled: the static (0th harmonic) and dynamic balance equations are
  solved together, so the mean contact loads follow the vibration;
* uncoupled: the mean displacement and slider state come from a prior
  static analysis (``StaticState``) and only the harmonics are solved.

Unknowns are packed as real vectors, see :meth:`HarmonicSet.to_vector`.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .contact import tangential_step
from .errors import StaticSolveError, ValidationError
from .harmonics import HarmonicSet, aft_contact_forces, reconstruct

logger = logging.getLogger(__name__)

COUPLED = "coupled"
UNCOUPLED = "uncoupled"


@dataclass(frozen=True)
class StaticState:
    """Static equilibrium: displacements, contact loads and slider positions."""

    q0: np.ndarray
    fc0: tuple
    w0: tuple

    def __post_init__(self):
        object.__setattr__(self, "q0", np.asarray(self.q0, dtype=float))
        object.__setattr__(self, "fc0", tuple(tuple(map(float, tn)) for tn in self.fc0))
        object.__setattr__(self, "w0", tuple(float(w) for w in self.w0))

    def as_dict(self):
        return {"q0": self.q0.tolist(), "fc0": [list(tn) for tn in self.fc0],
                "w0": list(self.w0)}


@dataclass(frozen=True)
class MonotonicRamp:
    """Quasi-static single-slope application of the static load."""

    steps: int = 100


@dataclass(frozen=True)
class ImportedState:
    """Static state produced elsewhere (e.g. by time integration)."""

    state: StaticState


@dataclass
class HbmConfig:
    """Solver settings.

    ``frequencies`` is the sweep grid in Hz. ``fd_step`` of ``None`` means
    ``1e-9 * max(1, |guess|)``.
    """

    H: int = 5
    J: int = 256
    newton_tol: float = 1e-6
    max_newton_iters: int = 40
    fd_step: float = None
    frequencies: np.ndarray = field(default_factory=lambda: np.arange(80.0, 160.0 + 1e-9, 0.5))
    mode: str = COUPLED
    prestress: StaticState = None
    observe_dof: int = 0
    max_cycles: int = 50
    max_halvings: int = 8
    bisect_on_failure: bool = True

    def __post_init__(self):
        self.frequencies = np.asarray(self.frequencies, dtype=float)
        if self.H < 1:
            raise ValidationError("H must be >= 1")
        if self.J < 2 * self.H + 2:
            raise ValidationError(f"J must be >= 2H+2 = {2 * self.H + 2}")
        if not self.newton_tol > 0:
            raise ValidationError("newton_tol must be > 0")
        if self.mode not in (COUPLED, UNCOUPLED):
            raise ValidationError(f"mode must be '{COUPLED}' or '{UNCOUPLED}', got {self.mode!r}")
        if self.mode == UNCOUPLED and self.prestress is None:
            raise ValidationError("uncoupled mode requires a prestress StaticState")
        d = np.diff(self.frequencies)
        if self.frequencies.size > 1 and not (np.all(d > 0) or np.all(d < 0)):
            raise ValidationError("frequency grid must be strictly monotonic")


@dataclass
class HbmSolution:
    hs: HarmonicSet
    traces: list
    residual_norm: float
    iterations: int
    converged: bool
    w_end: tuple = ()

    @property
    def frequency(self):
        return self.hs.omega / (2 * np.pi)

    def amplitude(self, dof=0, J=256):
        """Half peak-to-peak of the reconstructed displacement of ``dof``."""
        x = reconstruct(self.hs.component(dof), J)
        return 0.5 * float(np.max(x) - np.min(x))

    def mean_contact_forces(self):
        """0th harmonic ``(T, N)`` of every contact (trace averages)."""
        return [(float(np.mean(tr.T)), float(np.mean(tr.N))) for tr in self.traces]


# ---------------------------------------------------------------- residuals

def contact_force_harmonics(model, hs, J=256, w_init=None, max_cycles=50):
    """Global contact force series and per-contact traces for displacement ``hs``."""
    n = model.n_dof
    fc0 = np.zeros(n)
    fch = np.zeros((hs.H, n), dtype=complex)
    traces = []
    if w_init is None:
        w_init = (0.0,) * len(model.contacts)
    for ce, w0 in zip(model.contacts, w_init):
        bu, bv = ce.B
        u_hat = HarmonicSet(hs.omega, bu @ hs.c0, hs.ch @ bu)
        v_hat = HarmonicSet(hs.omega, bv @ hs.c0, hs.ch @ bv)
        T_hat, N_hat, trace = aft_contact_forces(u_hat, v_hat, ce.params, J, w0, max_cycles)
        fc0 += bu * T_hat.c0 + bv * N_hat.c0
        fch += np.outer(T_hat.ch, bu) + np.outer(N_hat.ch, bv)
        traces.append(trace)
    return fc0, fch, traces


def _balance(model, hs, fc0, fch):
    r0 = model.stiffness @ hs.c0 - model.static_load + fc0
    F = model.harmonic_load_matrix(hs.H)
    rh = np.empty_like(hs.ch)
    for h in range(1, hs.H + 1):
        rh[h - 1] = model.dynamic_stiffness(h, hs.omega) @ hs.ch[h - 1] - F[h - 1] + fch[h - 1]
    return HarmonicSet(hs.omega, r0, rh).to_vector()


def residual_coupled(model, hs, J=256, w_init=None, max_cycles=50, return_traces=False):
    """Static and dynamic balance residual, length ``n * (2H + 1)`` [N]."""
    if hs.c0.shape != (model.n_dof,):
        raise ValidationError(f"harmonic set must have dimension {model.n_dof}")
    fc0, fch, traces = contact_force_harmonics(model, hs, J, w_init, max_cycles)
    r = _balance(model, hs, fc0, fch)
    return (r, traces) if return_traces else r


def residual_uncoupled(model, hs_dynamic, prestress, J=256, max_cycles=50,
                       return_traces=False):
    """Dynamic balance residual with the mean state frozen at ``prestress``.

    Only the ``h = 1..H`` equations are returned (length ``n * 2H``); the
    contact evaluation uses ``prestress.q0`` as mean displacement and
    ``prestress.w0`` as slider start.
    """
    hs = HarmonicSet(hs_dynamic.omega, prestress.q0, hs_dynamic.ch)
    fc0, fch, traces = contact_force_harmonics(model, hs, J, prestress.w0, max_cycles)
    r = _balance(model, hs, fc0, fch)[model.n_dof:]
    return (r, traces) if return_traces else r


# ------------------------------------------------------------------- static

def _static_contact(model, q, w_prev):
    """Contact force, tangent stiffness and updated sliders at ``q``."""
    n = model.n_dof
    fc = np.zeros(n)
    Kc = np.zeros((n, n))
    forces, w_new = [], []
    for ce, wp in zip(model.contacts, w_prev):
        p = ce.params
        bu, bv = ce.B
        u, v = bu @ q, bv @ q
        N = max(p.k_n * v, 0.0)
        T, w, state = tangential_step(u, wp, N, p)
        fc += bu * T + bv * N
        if N > 0:
            Kc += p.k_n * np.outer(bv, bv)
            if state.is_slip:
                Kc += p.mu * state.direction * p.k_n * np.outer(bu, bv)
            else:
                Kc += p.k_t * np.outer(bu, bu)
        forces.append((T, N))
        w_new.append(w)
    return fc, Kc, forces, w_new


def static_residual(model, q, w_prev, load=None):
    """``k q - f0 + f_c(q)`` with sliders starting from ``w_prev``."""
    load = model.static_load if load is None else load
    fc, _, _, _ = _static_contact(model, q, w_prev)
    return model.stiffness @ q - load + fc


def solve_static(model, load_path=None, tol=1e-9, max_iters=50):
    """Static equilibrium under the static load.

    ``MonotonicRamp`` applies the load in equal increments and updates the
    sliders after each converged increment. ``ImportedState`` is returned
    unchanged after a dimension check.

    Raises
    ------
    StaticSolveError
        Newton failure at one load increment.
    """
    load_path = MonotonicRamp() if load_path is None else load_path
    if isinstance(load_path, ImportedState):
        st = load_path.state
        if st.q0.shape != (model.n_dof,) or len(st.w0) != len(model.contacts):
            raise ValidationError("imported state does not match the model dimensions")
        return st
    if not isinstance(load_path, MonotonicRamp):
        raise ValidationError(f"unknown load path {load_path!r}")
    q = np.zeros(model.n_dof)
    w = [0.0] * len(model.contacts)
    scale = max(float(np.linalg.norm(model.static_load)), 1.0)
    forces = [(0.0, 0.0)] * len(model.contacts)
    for step in range(1, load_path.steps + 1):
        load = model.static_load * (step / load_path.steps)
        for _ in range(max_iters):
            fc, Kc, forces, w_new = _static_contact(model, q, w)
            r = model.stiffness @ q - load + fc
            if np.linalg.norm(r) <= tol * scale:
                break
            q = q - np.linalg.solve(model.stiffness + Kc, r)
        else:
            raise StaticSolveError(
                f"static Newton failed at load step {step}", step=step,
                residual=float(np.linalg.norm(r)))
        w = w_new
    return StaticState(q, forces, w)


# -------------------------------------------------------------------- Newton

def fd_jacobian(fun, z, r=None, step=None):
    """Forward-difference Jacobian of ``fun`` at ``z``.

    ``step`` defaults to ``1e-9 * max(1, |z|)``; ``r`` is ``fun(z)`` if known.
    """
    z = np.asarray(z, dtype=float)
    r = fun(z) if r is None else r
    h = step if step is not None else 1e-9 * max(1.0, float(np.linalg.norm(z)))
    Jac = np.empty((r.size, z.size))
    for k in range(z.size):
        zp = z.copy()
        zp[k] += h
        Jac[:, k] = (fun(zp) - r) / h
    return Jac


def _newton(fun, z0, tol, max_iters, fd_step, max_halvings):
    """Damped Newton with forward-difference Jacobian.

    ``fun`` returns ``(residual, extra)``. Returns ``(z, r, extra, iters, ok)``.
    """
    z = np.array(z0, dtype=float)
    r, extra = fun(z)
    rn = np.linalg.norm(r)
    it = 0
    while rn >= tol and it < max_iters:
        it += 1
        Jac = fd_jacobian(lambda x: fun(x)[0], z, r, fd_step)
        try:
            dz = np.linalg.solve(Jac, -r)
        except np.linalg.LinAlgError:
            dz = np.linalg.lstsq(Jac, -r, rcond=None)[0]
        step = 1.0
        for _ in range(max_halvings + 1):
            z_try = z + step * dz
            r_try, extra_try = fun(z_try)
            rn_try = np.linalg.norm(r_try)
            if rn_try < rn:
                break
            step *= 0.5
        z, r, extra, rn = z_try, r_try, extra_try, rn_try
    return z, r, extra, it, bool(rn < tol)


def linear_guess(model, omega, H, q0=None, stuck=True):
    """Harmonic response of the linearised (stuck or contact-free) system."""
    K = model.stuck_stiffness() if stuck else model.stiffness
    F = model.harmonic_load_matrix(H)
    ch = np.zeros((H, model.n_dof), dtype=complex)
    for h in range(1, H + 1):
        D = K - (h * omega) ** 2 * model.mass + 1j * h * omega * model.damping
        ch[h - 1] = np.linalg.solve(D, F[h - 1])
    if q0 is None:
        q0 = np.linalg.solve(K, model.static_load)
    return HarmonicSet(omega, q0, ch)


def solve_point(model, config, omega, guess, w_init=None):
    """Solve the selected balance equations at one frequency.

    Parameters
    ----------
    model : SystemModel
    config : HbmConfig
    omega : float
        Excitation circular frequency [rad/s].
    guess : HarmonicSet
        Initial iterate (``c0`` ignored in uncoupled mode).
    w_init : sequence of float, optional
        Slider warm start per contact, held fixed during the solve. Defaults
        to the prestress sliders (uncoupled) or zeros (coupled).

    Returns
    -------
    HbmSolution
        ``converged`` is False when the iteration limit is hit.
    """
    n, H = model.n_dof, config.H
    if guess.c0.shape != (n,) or guess.H != H:
        raise ValidationError(f"guess must have dimension {n} and H={H}")
    guess = guess.with_omega(omega)
    if config.mode == UNCOUPLED:
        pre = config.prestress

        def fun(z):
            hs = HarmonicSet.from_vector(np.concatenate([pre.q0, z]), n, H, omega)
            return residual_uncoupled(model, hs, pre, config.J, config.max_cycles,
                                      return_traces=True)

        z0 = guess.to_vector()[n:]
        z, r, traces, it, ok = _newton(fun, z0, config.newton_tol, config.max_newton_iters,
                                       config.fd_step, config.max_halvings)
        hs = HarmonicSet.from_vector(np.concatenate([pre.q0, z]), n, H, omega)
    else:
        w_init = tuple(w_init) if w_init is not None else (0.0,) * len(model.contacts)

        def fun(z):
            hs = HarmonicSet.from_vector(z, n, H, omega)
            return residual_coupled(model, hs, config.J, w_init, config.max_cycles,
                                    return_traces=True)

        z, r, traces, it, ok = _newton(fun, guess.to_vector(), config.newton_tol,
                                       config.max_newton_iters, config.fd_step,
                                       config.max_halvings)
        hs = HarmonicSet.from_vector(z, n, H, omega)
    w_end = tuple(float(tr.w[-1]) for tr in traces)
    return HbmSolution(hs, traces, float(np.linalg.norm(r)), it, ok, w_end)


# --------------------------------------------------------------------- sweep

@dataclass
class FrfCurve:
    """Pseudo-FRF: response amplitude over excitation amplitude."""

    frequencies: np.ndarray
    amplitudes: np.ndarray
    f_exc: float
    converged: np.ndarray
    iterations: np.ndarray
    solutions: list = field(default_factory=list, repr=False)
    label: str = ""

    @property
    def ratios(self):
        return self.amplitudes / self.f_exc

    def peak(self):
        """``(frequency [Hz], amplitude [m])`` at the grid maximum."""
        amp = np.where(self.converged, self.amplitudes, -np.inf)
        i = int(np.argmax(amp))
        return float(self.frequencies[i]), float(self.amplitudes[i])

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["f_Hz", "amplitude_m", "ratio_m_per_N", "converged", "iterations"])
            for f, a, ok, it in zip(self.frequencies, self.amplitudes, self.converged,
                                    self.iterations):
                wr.writerow([f"{f:.9g}", f"{a:.9g}", f"{a / self.f_exc:.9g}",
                             int(bool(ok)), int(it)])

    def summary(self):
        f, a = self.peak()
        return {"label": self.label, "f_exc_N": self.f_exc, "peak_frequency_Hz": f,
                "peak_amplitude_m": a, "peak_ratio_m_per_N": a / self.f_exc,
                "all_converged": bool(np.all(self.converged))}

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, indent=2, sort_keys=True)


def read_frf_csv(path, f_exc):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    col = lambda k, t=float: np.array([t(r[k]) for r in rows])
    return FrfCurve(col("f_Hz"), col("amplitude_m"), float(f_exc),
                    col("converged", lambda s: bool(int(s))), col("iterations", int))


def excitation_amplitude(model):
    F = model.harmonic_load_matrix(1)[0]
    return float(np.linalg.norm(F))


def initial_guess(model, config, omega, start=None):
    """Continuation seed for the first point: stuck linear response.

    The mean displacement comes from ``start`` (or the prestress / a
    monotonic static solve).
    """
    if start is None:
        start = config.prestress if config.prestress is not None else solve_static(model)
    return linear_guess(model, omega, config.H, q0=start.q0), start.w0


def sweep(model, config, start=None, keep_solutions=True, label=""):
    """Frequency sweep with sequential continuation.

    Parameters
    ----------
    start : StaticState, optional
        Mean state and sliders used to seed the first point (coupled mode).

    Returns
    -------
    FrfCurve
    """
    freqs = config.frequencies
    if freqs.size == 0:
        raise ValidationError("frequency grid is empty")
    guess, w = initial_guess(model, config, 2 * np.pi * freqs[0], start)
    amps = np.zeros(freqs.size)
    conv = np.zeros(freqs.size, dtype=bool)
    iters = np.zeros(freqs.size, dtype=int)
    sols = []
    prev_f = None
    for i, f in enumerate(freqs):
        sol = solve_point(model, config, 2 * np.pi * f, guess, w)
        if not sol.converged and config.bisect_on_failure and prev_f is not None:
            mid = solve_point(model, config, np.pi * (f + prev_f), guess, w)
            if mid.converged:
                sol = solve_point(model, config, 2 * np.pi * f, mid.hs,
                                  mid.w_end if config.mode == COUPLED else None)
                sol.iterations += mid.iterations
        if not sol.converged:
            logger.warning("no convergence at %.3f Hz (residual %.3e)", f, sol.residual_norm)
        amps[i] = sol.amplitude(config.observe_dof, config.J)
        conv[i] = sol.converged
        iters[i] = sol.iterations
        if keep_solutions:
            sols.append(sol)
        if sol.converged:
            guess = sol.hs
            if config.mode == COUPLED:
                w = sol.w_end
        prev_f = f
    return FrfCurve(freqs.copy(), amps, excitation_amplitude(model), conv, iters,
                    sols, label)


def refine_peak(model, config, curve, iterations=8):
    """Golden-section refinement of the FRF maximum between grid neighbours.

    Returns the best ``HbmSolution`` found (grid solutions are reused).
    """
    if not curve.solutions:
        raise ValidationError("curve was computed without stored solutions")
    amp = np.where(curve.converged, curve.amplitudes, -np.inf)
    i = int(np.argmax(amp))
    best = curve.solutions[i]
    lo = curve.frequencies[max(i - 1, 0)]
    hi = curve.frequencies[min(i + 1, curve.frequencies.size - 1)]
    if lo > hi:
        lo, hi = hi, lo
    cache = {}

    def evaluate(f):
        if f not in cache:
            seed = best
            w = seed.w_end if config.mode == COUPLED else None
            cache[f] = solve_point(model, config, 2 * np.pi * f, seed.hs, w)
        s = cache[f]
        return s.amplitude(config.observe_dof, config.J) if s.converged else -np.inf

    g = (math.sqrt(5) - 1) / 2
    a, b = lo, hi
    x1, x2 = b - g * (b - a), a + g * (b - a)
    f1, f2 = evaluate(x1), evaluate(x2)
    for _ in range(iterations):
        if f1 > f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - g * (b - a)
            f1 = evaluate(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + g * (b - a)
            f2 = evaluate(x2)
    best_amp = best.amplitude(config.observe_dof, config.J)
    for s in cache.values():
        if s.converged and s.amplitude(config.observe_dof, config.J) > best_amp:
            best, best_amp = s, s.amplitude(config.observe_dof, config.J)
    return best
