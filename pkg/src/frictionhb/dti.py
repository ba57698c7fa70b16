"""Direct time integration with the time-domain contact law.

Newmark average acceleration (gamma = 1/2, beta = 1/4) with a step-local
fixed point on the contact forces. Sliders are updated once per accepted
step. Loads are described by a :class:`LoadSchedule` of segments, each a
linear ramp of the static part plus an optional harmonic term with a
linear envelope rise.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .contact import ContactTrace, loop_energy
from .errors import IntegrationError, ValidationError
from .hbm import StaticState

U1 = "U1"
U2 = "U2"

DEFAULT_RAMP_TIME = 0.5
DEFAULT_OVERSHOOT = 3.0
KE_SETTLED = 1e-12


@dataclass(frozen=True)
class Segment:
    """Load segment of length ``duration`` [s].

    The static part ramps linearly from ``start`` to ``end``. The harmonic
    part is ``env(t) * Re(harmonic * exp(2 pi i frequency (t - phase_time)))``
    where ``env`` rises linearly from 0 to 1 over ``ramp_in`` seconds after
    the segment start. ``phase_time`` of ``None`` means the segment start.
    """

    duration: float
    start: np.ndarray
    end: np.ndarray
    harmonic: np.ndarray = None
    frequency: float = 0.0
    ramp_in: float = 0.0
    phase_time: float = None

    def __post_init__(self):
        if not (np.isfinite(self.duration) and self.duration > 0):
            raise ValidationError(f"segment duration must be positive, got {self.duration}")
        start = np.atleast_1d(np.asarray(self.start, dtype=float))
        end = np.atleast_1d(np.asarray(self.end, dtype=float))
        if start.shape != end.shape:
            raise ValidationError("segment start/end force vectors differ in length")
        object.__setattr__(self, "start", start)
        object.__setattr__(self, "end", end)
        if self.harmonic is not None:
            amp = np.asarray(self.harmonic, dtype=complex)
            if amp.shape != start.shape:
                raise ValidationError("harmonic amplitude length differs from static force")
            if not self.frequency > 0:
                raise ValidationError("harmonic segment needs a positive frequency")
            if self.ramp_in < 0:
                raise ValidationError("ramp_in must be non-negative")
            object.__setattr__(self, "harmonic", amp)

    @classmethod
    def constant(cls, duration, value):
        return cls(duration, value, value)

    @classmethod
    def ramp(cls, duration, start, end):
        return cls(duration, start, end)

    @classmethod
    def harmonic_load(cls, duration, static, amplitude, frequency, ramp_in=0.0,
                      phase_time=None):
        return cls(duration, static, static, amplitude, frequency, ramp_in, phase_time)


@dataclass(frozen=True)
class LoadSchedule:
    """Ordered load segments starting at ``t_start``."""

    segments: tuple
    t_start: float = 0.0

    def __post_init__(self):
        segs = tuple(self.segments)
        if not segs:
            raise ValidationError("load schedule needs at least one segment")
        n = segs[0].start.shape[0]
        if any(s.start.shape[0] != n for s in segs):
            raise ValidationError("all segments must act on the same number of DOFs")
        object.__setattr__(self, "segments", segs)
        bounds = self.boundaries
        for i in range(1, len(segs)):
            tb = bounds[i]
            left = self._segment_force(i - 1, np.array([tb]), bounds[i - 1])[0]
            right = self._segment_force(i, np.array([tb]), tb)[0]
            scale = max(np.max(np.abs(left)), np.max(np.abs(right)), 1.0)
            if np.max(np.abs(left - right)) > 1e-9 * scale:
                raise ValidationError(f"load jumps at segment boundary {i} (t={tb:.6g} s)")

    @property
    def n_dof(self):
        return self.segments[0].start.shape[0]

    @property
    def duration(self):
        return float(sum(s.duration for s in self.segments))

    @property
    def t_end(self):
        return self.t_start + self.duration

    @property
    def boundaries(self):
        return self.t_start + np.concatenate([[0.0], np.cumsum([s.duration for s in self.segments])])

    @property
    def max_frequency(self):
        return max((s.frequency for s in self.segments if s.harmonic is not None), default=0.0)

    def _segment_force(self, i, t, t0):
        s = self.segments[i]
        tau = t - t0
        f = s.start + np.outer(tau / s.duration, s.end - s.start)
        if s.harmonic is not None:
            env = np.ones_like(tau) if s.ramp_in == 0 else np.clip(tau / s.ramp_in, 0.0, 1.0)
            tp = t0 if s.phase_time is None else s.phase_time
            ph = np.exp(2j * np.pi * s.frequency * (t - tp))
            f = f + env[:, None] * np.real(np.outer(ph, s.harmonic))
        return f

    def force(self, t):
        """Force vectors at times ``t``, shape ``(len(t), n)``."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        bounds = self.boundaries
        idx = np.clip(np.searchsorted(bounds, t, side="right") - 1, 0, len(self.segments) - 1)
        out = np.empty((t.size, self.n_dof))
        for i in np.unique(idx):
            sel = idx == i
            out[sel] = self._segment_force(i, t[sel], bounds[i])
        return out


@dataclass
class Trajectory:
    """Recorded time histories; contact arrays have shape (samples, contacts)."""

    t: np.ndarray
    q: np.ndarray
    v: np.ndarray
    f: np.ndarray
    T: np.ndarray
    N: np.ndarray
    w: np.ndarray
    state: np.ndarray
    u_rel: np.ndarray
    v_rel: np.ndarray
    dt: float
    contact_params: tuple = field(default=(), repr=False)
    dof_names: tuple = ()

    @property
    def final_state(self):
        """Last sample as a :class:`StaticState` (meaningful once settled)."""
        return StaticState(self.q[-1], [tuple(x) for x in np.stack([self.T[-1], self.N[-1]], 1)],
                           self.w[-1])

    def kinetic_energy(self, mass):
        return 0.5 * np.einsum("ki,ij,kj->k", self.v, mass, self.v)

    def cycle_slice(self, frequency, k=0):
        """Index slice of the ``k``-th last full excitation cycle (inclusive end).

        The returned slice has ``steps + 1`` samples so the first and last
        sample are one period apart.
        """
        steps = int(round(1.0 / (frequency * self.dt)))
        end = self.t.size - 1 - k * steps
        start = end - steps
        if start < 0:
            raise ValidationError("trajectory shorter than the requested cycle")
        return slice(start, end + 1)

    def contact_trace(self, frequency, contact=0, k=0):
        """Last full cycle of one contact as a :class:`ContactTrace`."""
        sl = self.cycle_slice(frequency, k)
        cut = slice(sl.start, sl.stop - 1)
        return ContactTrace(self.u_rel[cut, contact].copy(), self.v_rel[cut, contact].copy(),
                            self.w[cut, contact].copy(), self.T[cut, contact].copy(),
                            self.N[cut, contact].copy(), self.state[cut, contact].copy(),
                            self.contact_params[contact], 1.0 / frequency)

    def to_csv(self, path, decimate=1):
        names = self.dof_names or tuple(f"q{i}" for i in range(self.q.shape[1]))
        nc = self.T.shape[1]
        cols = ["t_s"] + [f"{nm}_m" for nm in names]
        for c in range(nc):
            sfx = "" if nc == 1 else str(c)
            cols += [f"T{sfx}_N", f"N{sfx}_N"]
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(cols)
            for k in range(0, self.t.size, max(int(decimate), 1)):
                row = [self.t[k], *self.q[k]]
                for c in range(nc):
                    row += [self.T[k, c], self.N[k, c]]
                wr.writerow([f"{x:.9g}" for x in row])


@njit(cache=True)
def _contact_eval(q, w_prev, Bs, kp, fc, T, N, w, st, ur, vr):
    fc[:] = 0.0
    for c in range(Bs.shape[0]):
        u = 0.0
        v = 0.0
        for i in range(q.shape[0]):
            u += Bs[c, 0, i] * q[i]
            v += Bs[c, 1, i] * q[i]
        k_t, k_n, mu = kp[c, 0], kp[c, 1], kp[c, 2]
        n = k_n * v
        if n <= 0.0:
            N[c] = 0.0
            T[c] = 0.0
            w[c] = u
            st[c] = 2
        else:
            N[c] = n
            tp = k_t * (u - w_prev[c])
            lim = mu * n
            if abs(tp) <= lim:
                T[c] = tp
                w[c] = w_prev[c]
                st[c] = 0
            else:
                s = 1.0 if tp > 0.0 else -1.0
                T[c] = lim * s
                w[c] = u - lim * s / k_t
                st[c] = 1 if s > 0.0 else -1
        ur[c] = u
        vr[c] = v
        for i in range(q.shape[0]):
            fc[i] += Bs[c, 0, i] * T[c] + Bs[c, 1, i] * N[c]


@njit(cache=True)
def _newmark(M, C, K, Bs, kp, F, dt, q0, v0, w0, tol, max_fp):
    n = q0.shape[0]
    nc = Bs.shape[0]
    ns = F.shape[0]
    Q = np.empty((ns, n))
    V = np.empty((ns, n))
    Tr = np.empty((ns, nc))
    Nr = np.empty((ns, nc))
    Wr = np.empty((ns, nc))
    Sr = np.empty((ns, nc), dtype=np.int8)
    Ur = np.empty((ns, nc))
    Vr = np.empty((ns, nc))
    fc = np.zeros(n)
    T = np.zeros(nc)
    N = np.zeros(nc)
    w = np.zeros(nc)
    st = np.zeros(nc, dtype=np.int8)
    ur = np.zeros(nc)
    vr = np.zeros(nc)
    q = q0.copy()
    v = v0.copy()
    wp = w0.copy()
    _contact_eval(q, wp, Bs, kp, fc, T, N, w, st, ur, vr)
    wp[:] = w
    a = np.linalg.solve(M, F[0] - C @ v - K @ q - fc)
    Q[0] = q
    V[0] = v
    Tr[0] = T
    Nr[0] = N
    Wr[0] = w
    Sr[0] = st
    Ur[0] = ur
    Vr[0] = vr
    c0 = 4.0 / dt ** 2
    c1 = 2.0 / dt
    Ki = np.linalg.inv(K + c0 * M + c1 * C)
    for k in range(1, ns):
        rhs = F[k] + M @ (c0 * q + 2.0 * c1 * v + a) + C @ (c1 * q + v)
        qn = q.copy()
        ok = False
        for it in range(max_fp):
            _contact_eval(qn, wp, Bs, kp, fc, T, N, w, st, ur, vr)
            qnew = Ki @ (rhs - fc)
            err = np.max(np.abs(qnew - qn))
            qn = qnew
            if err <= tol * max(np.max(np.abs(qn)), 1e-12):
                ok = True
                break
        if not ok:
            return Q, V, Tr, Nr, Wr, Sr, Ur, Vr, k
        _contact_eval(qn, wp, Bs, kp, fc, T, N, w, st, ur, vr)
        an = c0 * (qn - q) - 2.0 * c1 * v - a
        v = v + 0.5 * dt * (a + an)
        q = qn
        a = an
        wp[:] = w
        Q[k] = q
        V[k] = v
        Tr[k] = T
        Nr[k] = N
        Wr[k] = w
        Sr[k] = st
        Ur[k] = ur
        Vr[k] = vr
    return Q, V, Tr, Nr, Wr, Sr, Ur, Vr, -1


def shortest_period(model):
    """Shortest linear period [s] over the contact-free and stuck systems."""
    f = max(model.natural_frequencies(stuck=False)[-1],
            model.natural_frequencies(stuck=True)[-1] if model.contacts else 0.0)
    return 1.0 / f


def default_dt(model, schedule):
    """``period / 200`` for harmonic loading, else ``1 / (50 f_max)``."""
    if schedule.max_frequency > 0:
        return min(1.0 / (200.0 * schedule.max_frequency), shortest_period(model) / 20.0)
    return shortest_period(model) / 50.0


def integrate(model, schedule, dt=None, q_init=None, v_init=None, w_init=None,
              tol=1e-10, max_fixed_point=200):
    """Integrate the equations of motion over the whole schedule.

    Parameters
    ----------
    model : SystemModel
    schedule : LoadSchedule
    dt : float, optional
        Fixed step; must not exceed 1/20 of the shortest linear period.
    q_init, v_init : (n,) array_like, optional
    w_init : sequence of float, optional
        Initial slider displacement per contact.

    Returns
    -------
    Trajectory

    Raises
    ------
    IntegrationError
        If the contact fixed point fails within a step.
    """
    n, nc = model.n_dof, len(model.contacts)
    if schedule.n_dof != n:
        raise ValidationError(f"schedule acts on {schedule.n_dof} DOFs, model has {n}")
    dt = default_dt(model, schedule) if dt is None else float(dt)
    if not dt > 0:
        raise ValidationError("dt must be positive")
    if dt > shortest_period(model) / 20.0 * (1 + 1e-12):
        raise ValidationError(
            f"dt={dt:.3e} s exceeds 1/20 of the shortest linear period "
            f"({shortest_period(model):.3e} s)")
    steps = int(round(schedule.duration / dt))
    t = schedule.t_start + dt * np.arange(steps + 1)
    F = schedule.force(t)
    q0 = np.zeros(n) if q_init is None else np.array(q_init, dtype=float)
    v0 = np.zeros(n) if v_init is None else np.array(v_init, dtype=float)
    w0 = np.zeros(nc) if w_init is None else np.array(w_init, dtype=float)
    if q0.shape != (n,) or v0.shape != (n,) or w0.shape != (nc,):
        raise ValidationError("initial state dimensions do not match the model")
    Bs = np.array([ce.B for ce in model.contacts], dtype=float).reshape(nc, 2, n)
    kp = np.array([[ce.params.k_t, ce.params.k_n, ce.params.mu] for ce in model.contacts],
                  dtype=float).reshape(nc, 3)
    Q, V, T, N, W, S, Ur, Vr, fail = _newmark(
        np.ascontiguousarray(model.mass), np.ascontiguousarray(model.damping),
        np.ascontiguousarray(model.stiffness), Bs, kp, F, dt, q0, v0, w0, tol,
        int(max_fixed_point))
    if fail >= 0:
        raise IntegrationError(f"contact fixed point failed at t={t[fail]:.6g} s",
                               time=float(t[fail]))
    return Trajectory(t, Q, V, F, T, N, W, S, Ur, Vr, dt,
                      tuple(ce.params for ce in model.contacts), model.dof_names)


def continue_from(traj):
    """Initial conditions ``(q, v, w)`` at the end of a trajectory."""
    return traj.q[-1].copy(), traj.v[-1].copy(), traj.w[-1].copy()


def steady_state_amplitude(traj, dof, f_exc, n_check=5, rtol=0.005, min_cycles=10):
    """Amplitude of the last cycle and convergence of the cycle amplitudes.

    Returns
    -------
    amplitude : float
        Half peak-to-peak of ``dof`` over the last cycle [m].
    mean : float
        Mean of ``dof`` over the last cycle [m].
    converged : bool
        The last ``n_check`` per-cycle amplitudes agree within ``rtol``.
    """
    period = 1.0 / f_exc
    if traj.t[-1] - traj.t[0] < min_cycles * period * (1 - 1e-9):
        raise ValidationError(f"trajectory tail shorter than {min_cycles} excitation cycles")
    amps, means = [], []
    for k in range(n_check):
        x = traj.q[traj.cycle_slice(f_exc, k), dof][:-1]
        amps.append(0.5 * (x.max() - x.min()))
        means.append(x.mean())
    amps = np.array(amps)
    spread = (amps.max() - amps.min()) / max(amps.max(), 1e-300)
    return float(amps[0]), float(means[0]), bool(spread <= rtol)


def build_preload_profile(style, F_pl, ramp_time=DEFAULT_RAMP_TIME, hold_time=0.3,
                          overshoot=DEFAULT_OVERSHOOT, direction=(0.0, 1.0)):
    """Preload histories ending at the same force ``F_pl``.

    ``U1`` ramps monotonically to ``F_pl``; ``U2`` ramps to
    ``overshoot * F_pl`` and back down to ``F_pl``. Both then hold.
    """
    if F_pl < 0:
        raise ValidationError("F_pl must be non-negative")
    d = np.asarray(direction, dtype=float)
    zero = np.zeros_like(d)
    if style == U1:
        segs = [Segment.ramp(ramp_time, zero, F_pl * d)]
    elif style == U2:
        if overshoot <= 1:
            raise ValidationError("U2 overshoot factor must exceed 1")
        segs = [Segment.ramp(ramp_time, zero, overshoot * F_pl * d),
                Segment.ramp(ramp_time, overshoot * F_pl * d, F_pl * d)]
    else:
        raise ValidationError(f"unknown preload style {style!r}")
    segs.append(Segment.constant(hold_time, F_pl * d))
    return LoadSchedule(tuple(segs))


def settle(model, q, v, w, static_load, t_start=0.0, window=0.05, max_time=5.0, dt=None):
    """Hold ``static_load`` until kinetic energy stays below 1e-12 J for ``window`` s."""
    t0 = t_start
    last = None
    while t0 - t_start < max_time:
        sched = LoadSchedule((Segment.constant(window, static_load),), t_start=t0)
        last = integrate(model, sched, dt, q, v, w)
        q, v, w = continue_from(last)
        t0 = sched.t_end
        if np.max(last.kinetic_energy(model.mass)) < KE_SETTLED:
            return last, True
    return last, False


def preload_state(model, style, F_pl=None, ramp_time=DEFAULT_RAMP_TIME,
                  overshoot=DEFAULT_OVERSHOOT, dt=None):
    """Apply a preload profile by time integration and settle.

    The preload acts along ``model.static_load``; ``F_pl`` defaults to its norm.

    Returns
    -------
    state : StaticState
    history : Trajectory
        Ramp and settling phases concatenated.
    """
    f0 = np.asarray(model.static_load, dtype=float)
    mag = float(np.linalg.norm(f0))
    direction = f0 / mag if mag > 0 else np.zeros_like(f0)
    F_pl = mag if F_pl is None else F_pl
    sched = build_preload_profile(style, F_pl, ramp_time, 0.1, overshoot, direction)
    ramp = integrate(model, sched, dt)
    q, v, w = continue_from(ramp)
    tail, ok = settle(model, q, v, w, F_pl * direction, t_start=sched.t_end, dt=dt)
    if not ok:
        raise IntegrationError("preload did not settle", time=float(tail.t[-1]))
    return tail.final_state, concatenate([ramp, tail])


def concatenate(trajs):
    """Join consecutive trajectories, dropping duplicated boundary samples."""
    first = trajs[0]
    parts = {k: [getattr(first, k)] for k in ("t", "q", "v", "f", "T", "N", "w", "state",
                                               "u_rel", "v_rel")}
    for tr in trajs[1:]:
        for k in parts:
            parts[k].append(getattr(tr, k)[1:])
    return Trajectory(**{k: np.concatenate(v) for k, v in parts.items()}, dt=first.dt,
                      contact_params=first.contact_params, dof_names=first.dof_names)


def harmonic_steady_state(model, start, frequency, amplitude=None, dt=None, ramp_in=0.05,
                          chunk_cycles=20, min_time=0.0, max_time=4.0, dof=0, t_start=0.0):
    """Apply harmonic excitation from a settled state and run to steady state.

    Parameters
    ----------
    start : StaticState or Trajectory
        Initial condition (velocity zero for a StaticState).
    frequency : float
        Excitation frequency [Hz].
    amplitude : (n,) array_like, optional
        Complex first-harmonic load; defaults to the model's first harmonic load.

    Returns
    -------
    history : Trajectory
        Full transient from the start of excitation.
    amplitude, mean : float
        Steady values of ``dof``.
    converged : bool

    Integration continues in chunks of ``chunk_cycles`` until the amplitude
    has converged and at least ``min_time`` seconds have elapsed, or until
    ``max_time``.
    """
    if isinstance(start, Trajectory):
        q, v, w = continue_from(start)
    else:
        q, v, w = np.array(start.q0), np.zeros(model.n_dof), np.array(start.w0)
    amp = model.harmonic_load_matrix(1)[0] if amplitude is None else np.asarray(amplitude, complex)
    period = 1.0 / frequency
    dt = period / 200.0 if dt is None else dt
    static = np.asarray(model.static_load, dtype=float)
    first = ramp_in + chunk_cycles * period
    t0 = t_start
    parts = []
    sched = LoadSchedule((Segment.harmonic_load(_whole_cycles(first, period), static, amp,
                                                frequency, ramp_in, phase_time=t_start),),
                         t_start=t0)
    while True:
        tr = integrate(model, sched, dt, q, v, w)
        parts.append(tr)
        q, v, w = continue_from(tr)
        t0 = sched.t_end
        hist = concatenate(parts)
        if hist.t[-1] - t_start - ramp_in >= 10 * period:
            a, m, ok = steady_state_amplitude(hist, dof, frequency)
            elapsed = t0 - t_start
            if (ok and elapsed >= min_time) or elapsed >= max_time:
                return hist, a, m, ok
        sched = LoadSchedule((Segment.harmonic_load(chunk_cycles * period, static, amp,
                                                    frequency, 0.0, phase_time=t_start),),
                             t_start=t0)


def _whole_cycles(duration, period):
    return np.ceil(duration / period - 1e-9) * period


def cycle_energy_balance(model, traj, frequency, k=0):
    """Work terms over the ``k``-th last cycle [J].

    Returns a dict with external work, viscous dissipation, friction loop
    energy (sum of ``loop_energy`` over contacts) and the normal-spring work.
    """
    sl = traj.cycle_slice(frequency, k)
    q, v, f = traj.q[sl], traj.v[sl], traj.f[sl]
    dq = np.diff(q, axis=0)
    w_ext = float(np.sum(0.5 * (f[1:] + f[:-1]) * dq))
    cv = v @ model.damping.T
    w_visc = float(np.sum(0.5 * (cv[1:] + cv[:-1]) * dq))
    w_fric = sum(loop_energy(traj.contact_trace(frequency, c, k))
                 for c in range(traj.T.shape[1]))
    Nn, vr = traj.N[sl], traj.v_rel[sl]
    w_norm = float(np.sum(0.5 * (Nn[1:] + Nn[:-1]) * np.diff(vr, axis=0)))
    return {"external": w_ext, "viscous": w_visc, "friction": float(w_fric), "normal": w_norm}
