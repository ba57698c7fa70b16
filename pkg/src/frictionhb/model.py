"""Mechanical system definition and global/contact-local kinematics.

Equation of motion::

    m q'' + c q' + k q = f(t) - f_c(q)

with contact forces resisting the motion. Each contact element maps the
global displacements to its relative tangential/normal displacements with
a 2 x n matrix ``B``; the global contact force is ``B.T @ [T, N]`` so that
virtual work is preserved.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .contact import ContactParams
from .errors import ValidationError


@dataclass(frozen=True)
class Table1Params:
    """Parameters of the 2-DOF benchmark (SI units)."""

    m: float = 1.0
    k_x: float = 3.9e5
    k_y: float = 2.5e6
    k_t: float = 3e5
    k_n: float = 3e5
    c_x: float = 62.8
    c_y: float = 62.8
    mu: float = 0.5
    F_pl: float = 420.0
    F_exc: tuple = (1.0, 4.0, 6.0, 18.0, 24.0, 30.0, 42.0, 60.0)

    def __post_init__(self):
        for name in ("m", "k_x", "k_y", "k_t", "k_n", "c_x", "c_y"):
            val = getattr(self, name)
            if not (np.isfinite(val) and val > 0):
                raise ValidationError(f"{name} must be strictly positive, got {val}")
        if not (np.isfinite(self.mu) and self.mu >= 0):
            raise ValidationError(f"mu must be non-negative, got {self.mu}")
        if not (np.isfinite(self.F_pl) and self.F_pl >= 0):
            raise ValidationError(f"F_pl must be non-negative, got {self.F_pl}")
        object.__setattr__(self, "F_exc", tuple(float(f) for f in self.F_exc))
        if any(not (np.isfinite(f) and f > 0) for f in self.F_exc):
            raise ValidationError("F_exc amplitudes must be strictly positive")

    @property
    def contact(self):
        return ContactParams(self.k_t, self.k_n, self.mu)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class ContactGeometry:
    """Kinematic map ``[u, v] = B q`` of one contact element."""

    kinematic_map: np.ndarray

    def __post_init__(self):
        B = np.array(self.kinematic_map, dtype=float)
        if B.ndim != 2 or B.shape[0] != 2:
            raise ValidationError(f"kinematic map must be 2 x n, got shape {B.shape}")
        B.setflags(write=False)
        object.__setattr__(self, "kinematic_map", B)

    @property
    def force_map(self):
        return self.kinematic_map.T

    @classmethod
    def inclined_wall(cls, alpha, n_dof=2, ix=0, iy=1):
        """Wall inclined by ``alpha``; normal at ``alpha`` from the y-axis.

        ``u = -q_x cos(a) + q_y sin(a)``, ``v = q_x sin(a) + q_y cos(a)``.
        """
        B = np.zeros((2, n_dof))
        ca, sa = np.cos(alpha), np.sin(alpha)
        B[0, ix], B[0, iy] = -ca, sa
        B[1, ix], B[1, iy] = sa, ca
        return cls(B)


@dataclass(frozen=True)
class ContactElement:
    params: ContactParams
    geometry: ContactGeometry

    @property
    def B(self):
        return self.geometry.kinematic_map


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SystemModel:
    """Linear structure plus friction contacts and applied loads.

    Parameters
    ----------
    mass, damping, stiffness : (n, n) array_like
    contacts : sequence of ContactElement
    static_load : (n,) array_like
        Constant force [N].
    harmonic_loads : sequence of (int, (n,) complex array_like)
        Harmonic index and complex amplitude, ``Re(F e^{i h w t})``.
    """

    mass: np.ndarray
    damping: np.ndarray
    stiffness: np.ndarray
    contacts: tuple = ()
    static_load: np.ndarray = None
    harmonic_loads: tuple = ()
    dof_names: tuple = field(default=None)

    def __post_init__(self):
        m, c, k = (_frozen(a) for a in (self.mass, self.damping, self.stiffness))
        n = m.shape[0]
        for name, a in (("mass", m), ("damping", c), ("stiffness", k)):
            if a.shape != (n, n):
                raise ValidationError(f"{name} must be {n}x{n}, got {a.shape}")
            if not np.all(np.isfinite(a)):
                raise ValidationError(f"{name} has non-finite entries")
            if not np.allclose(a, a.T, rtol=1e-12, atol=0.0):
                raise ValidationError(f"{name} must be symmetric")
        try:
            np.linalg.cholesky(m)
        except np.linalg.LinAlgError:
            raise ValidationError("mass must be positive definite") from None
        if np.min(np.linalg.eigvalsh(k)) < -1e-12 * max(np.max(np.abs(k)), 1.0):
            raise ValidationError("stiffness must be positive semidefinite")
        contacts = tuple(self.contacts)
        for i, ce in enumerate(contacts):
            if ce.B.shape[1] != n:
                raise ValidationError(
                    f"contact {i}: kinematic map has {ce.B.shape[1]} columns, expected {n}")
        f0 = np.zeros(n) if self.static_load is None else self.static_load
        f0 = _frozen(f0)
        if f0.shape != (n,):
            raise ValidationError(f"static_load must have length {n}")
        loads = []
        for h, amp in self.harmonic_loads:
            if int(h) != h or h < 1:
                raise ValidationError(f"harmonic index must be a positive integer, got {h}")
            amp = _frozen(amp, complex)
            if amp.shape != (n,):
                raise ValidationError(f"harmonic load amplitude must have length {n}")
            loads.append((int(h), amp))
        names = self.dof_names or tuple(f"q{i}" for i in range(n))
        for attr, val in (("mass", m), ("damping", c), ("stiffness", k),
                          ("contacts", contacts), ("static_load", f0),
                          ("harmonic_loads", tuple(loads)), ("dof_names", tuple(names))):
            object.__setattr__(self, attr, val)

    @property
    def n_dof(self):
        return self.mass.shape[0]

    def harmonic_load_matrix(self, H):
        """Complex load amplitudes, shape (H, n); harmonics above H dropped."""
        F = np.zeros((H, self.n_dof), dtype=complex)
        for h, amp in self.harmonic_loads:
            if h <= H:
                F[h - 1] += amp
        return F

    def dynamic_stiffness(self, h, omega):
        return self.stiffness - (h * omega) ** 2 * self.mass + 1j * h * omega * self.damping

    def stuck_stiffness(self):
        """Stiffness with every contact spring active (full stick, closed)."""
        K = np.array(self.stiffness)
        for ce in self.contacts:
            K += ce.B.T @ np.diag([ce.params.k_t, ce.params.k_n]) @ ce.B
        return K

    def natural_frequencies(self, stuck=False):
        """Undamped natural frequencies [Hz], ascending."""
        K = self.stuck_stiffness() if stuck else self.stiffness
        lam = np.linalg.eigvals(np.linalg.solve(self.mass, K)).real
        return np.sort(np.sqrt(np.clip(lam, 0.0, None))) / (2 * np.pi)

    def with_loads(self, static_load=None, harmonic_loads=None):
        changes = {}
        if static_load is not None:
            changes["static_load"] = static_load
        if harmonic_loads is not None:
            changes["harmonic_loads"] = tuple(harmonic_loads)
        return dataclasses.replace(self, **changes)

    def without_contacts(self):
        return dataclasses.replace(self, contacts=())


def build_two_dof(params=None, alpha=0.0, f_exc=0.0):
    """2-DOF lumped mass against an inclined rigid wall.

    Parameters
    ----------
    params : Table1Params, optional
    alpha : float
        Wall inclination [rad], ``0 <= alpha < pi/2``.
    f_exc : float
        Amplitude of the first-harmonic excitation along x [N]; the preload
        ``F_pl`` acts along +y.
    """
    params = Table1Params() if params is None else params
    if not (np.isfinite(alpha) and 0.0 <= alpha < np.pi / 2):
        raise ValidationError(f"alpha must lie in [0, pi/2), got {alpha}")
    loads = ((1, np.array([f_exc, 0.0], dtype=complex)),) if f_exc else ()
    return SystemModel(
        mass=np.diag([params.m, params.m]),
        damping=np.diag([params.c_x, params.c_y]),
        stiffness=np.diag([params.k_x, params.k_y]),
        contacts=(ContactElement(params.contact, ContactGeometry.inclined_wall(alpha)),),
        static_load=np.array([0.0, params.F_pl]),
        harmonic_loads=loads,
        dof_names=("qx", "qy"),
    )


def local_displacements(model, q):
    """Relative ``(u, v)`` of every contact for global displacements ``q``."""
    q = np.asarray(q, dtype=float)
    if q.shape != (model.n_dof,):
        raise ValidationError(f"q must have length {model.n_dof}, got shape {q.shape}")
    return [tuple(ce.B @ q) for ce in model.contacts]


def assemble_global_contact_force(model, local_forces):
    """Sum of ``B.T @ [T, N]`` over contacts; enters the EOM with a minus sign."""
    if len(local_forces) != len(model.contacts):
        raise ValidationError(
            f"expected {len(model.contacts)} (T, N) pairs, got {len(local_forces)}")
    fc = np.zeros(model.n_dof)
    for ce, tn in zip(model.contacts, local_forces):
        fc += ce.geometry.force_map @ np.asarray(tn, dtype=float)
    return fc
