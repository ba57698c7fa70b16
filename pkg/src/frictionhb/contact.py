"""Node-to-node friction contact element.

Normal direction: unilateral penalty spring, ``N = max(k_n v, 0)``.
Tangential direction: penalty spring in series with a Coulomb slider,
evaluated with a stick predictor followed by a return to the friction
limit. The slider displacement ``w`` is the only memory variable.

State codes used in trace arrays are the integer values of
:class:`ContactState`.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import ContractViolation, ConvergenceError, ValidationError


class ContactState(enum.IntEnum):
    STICK = 0
    SLIP_POS = 1
    SLIP_NEG = -1
    LIFT_OFF = 2

    @property
    def is_slip(self):
        return self in (ContactState.SLIP_POS, ContactState.SLIP_NEG)

    @property
    def direction(self):
        """Slip direction (+1/-1), 0 when not slipping."""
        return int(self) if self.is_slip else 0


@dataclass(frozen=True)
class ContactParams:
    """Penalty stiffnesses [N/m] and friction coefficient of one element."""

    k_t: float
    k_n: float
    mu: float

    def __post_init__(self):
        if not (np.isfinite(self.k_t) and self.k_t > 0):
            raise ValidationError(f"k_t must be > 0, got {self.k_t}")
        if not (np.isfinite(self.k_n) and self.k_n > 0):
            raise ValidationError(f"k_n must be > 0, got {self.k_n}")
        if not (np.isfinite(self.mu) and self.mu >= 0):
            raise ValidationError(f"mu must be >= 0, got {self.mu}")


def normal_force(v, params):
    """Normal contact force; zero (lift-off) for non-positive ``v``."""
    return max(params.k_n * v, 0.0)


def tangential_step(u, w_prev, N, params):
    """One predictor-corrector update of the tangential force.

    Returns
    -------
    T : float
    w : float
        Updated slider displacement.
    state : ContactState
    """
    if N < 0:
        raise ContractViolation(f"normal force must be non-negative, got {N}")
    if N == 0:
        return 0.0, float(u), ContactState.LIFT_OFF
    t_pred = params.k_t * (u - w_prev)
    limit = params.mu * N
    if abs(t_pred) <= limit:
        return float(t_pred), float(w_prev), ContactState.STICK
    s = 1.0 if t_pred > 0 else -1.0
    t = limit * s
    return t, u - t / params.k_t, ContactState(int(s))


@njit(cache=True)
def _march_cycle(u, v, k_t, k_n, mu, w0, T, N, w, state):
    """Time-march one sampled cycle in place; returns the final slider value."""
    wp = w0
    for j in range(u.shape[0]):
        n = k_n * v[j]
        if n <= 0.0:
            N[j] = 0.0
            T[j] = 0.0
            wp = u[j]
            state[j] = 2
        else:
            N[j] = n
            tp = k_t * (u[j] - wp)
            lim = mu * n
            if abs(tp) <= lim:
                T[j] = tp
                state[j] = 0
            else:
                s = 1.0 if tp > 0.0 else -1.0
                T[j] = lim * s
                wp = u[j] - lim * s / k_t
                state[j] = 1 if s > 0.0 else -1
        w[j] = wp
    return wp


@njit(cache=True)
def _periodic_march(u, v, k_t, k_n, mu, w_init, tol, max_cycles):
    J = u.shape[0]
    T = np.empty(J)
    N = np.empty(J)
    w = np.empty(J)
    state = np.empty(J, dtype=np.int8)
    w_old = np.empty(J)
    w_end = _march_cycle(u, v, k_t, k_n, mu, w_init, T, N, w, state)
    diff = np.inf
    for cycle in range(2, max_cycles + 1):
        w_old[:] = w
        w_end = _march_cycle(u, v, k_t, k_n, mu, w_end, T, N, w, state)
        diff = np.max(np.abs(w - w_old))
        if diff < tol:
            return T, N, w, state, cycle, diff
    return T, N, w, state, -1, diff


@dataclass(frozen=True)
class ContactTrace:
    """One period of contact quantities sampled at ``t_j = j * period / J``."""

    u: np.ndarray
    v: np.ndarray
    w: np.ndarray
    T: np.ndarray
    N: np.ndarray
    state: np.ndarray
    params: ContactParams
    period: float = 1.0
    cycles: int = 1

    @property
    def J(self):
        return self.u.shape[0]

    @property
    def t(self):
        return np.arange(self.J) * (self.period / self.J)

    def states(self):
        return [ContactState(int(s)) for s in self.state]

    @property
    def has_slip(self):
        return bool(np.any(np.abs(self.state) == 1))

    @property
    def has_lift_off(self):
        return bool(np.any(self.state == ContactState.LIFT_OFF))

    @property
    def all_stick(self):
        return bool(np.all(self.state == ContactState.STICK))

    def to_csv(self, path):
        """Write columns ``j, t_s, u_m, v_m, w_m, T_N, N_N, state``."""
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["j", "t_s", "u_m", "v_m", "w_m", "T_N", "N_N", "state"])
            for j, t in enumerate(self.t):
                wr.writerow([
                    j, f"{t:.9g}", f"{self.u[j]:.9g}", f"{self.v[j]:.9g}",
                    f"{self.w[j]:.9g}", f"{self.T[j]:.9g}", f"{self.N[j]:.9g}",
                    ContactState(int(self.state[j])).name,
                ])


def read_trace_csv(path, params, period=None):
    """Load a trace written by :meth:`ContactTrace.to_csv`."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    col = lambda k: np.array([float(r[k]) for r in rows])
    state = np.array([ContactState[r["state"]].value for r in rows], dtype=np.int8)
    t = col("t_s")
    if period is None:
        period = t[1] * len(t) if len(t) > 1 else 1.0
    return ContactTrace(col("u_m"), col("v_m"), col("w_m"), col("T_N"),
                        col("N_N"), state, params, period)


def evaluate_periodic_trace(u_samples, v_samples, params, w_init=0.0,
                            max_cycles=50, period=1.0):
    """Periodic steady-state contact forces for one sampled cycle of motion.

    The cycle is repeated, carrying the slider over from one repetition to
    the next, until the slider history stops changing.

    Parameters
    ----------
    u_samples, v_samples : (J,) array_like
        Relative tangential and normal displacements over exactly one period.
    params : ContactParams
    w_init : float
        Slider displacement before the first sample (warm start).
    max_cycles : int
    period : float
        Nominal period length, used only for the trace time axis.

    Returns
    -------
    ContactTrace

    Raises
    ------
    ConvergenceError
        When the slider history is still changing after ``max_cycles``.
    """
    u = np.ascontiguousarray(u_samples, dtype=float)
    v = np.ascontiguousarray(v_samples, dtype=float)
    if u.ndim != 1 or u.shape != v.shape:
        raise ValidationError("u and v must be 1-D arrays of equal length")
    if u.shape[0] < 4:
        raise ValidationError(f"need at least 4 samples per cycle, got {u.shape[0]}")
    tol = 1e-10 * max(float(np.max(np.abs(u))), 1e-12)
    T, N, w, state, cycles, diff = _periodic_march(
        u, v, float(params.k_t), float(params.k_n), float(params.mu),
        float(w_init), tol, int(max_cycles))
    if cycles < 0:
        raise ConvergenceError(
            f"slider not periodic after {max_cycles} cycles (change {diff:.3e} m)",
            residual=float(diff))
    return ContactTrace(u, v, w, T, N, state, params, period, cycles)


def loop_energy(trace):
    """Energy dissipated per cycle, closed trapezoidal integral of T du [J]."""
    T = trace.T
    du = np.roll(trace.u, -1) - trace.u
    return float(np.sum(0.5 * (T + np.roll(T, -1)) * du))
