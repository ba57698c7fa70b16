"""Truncated Fourier series and the alternating frequency/time bridge.

Convention shared by every module::

    x(t) = c0 + Re( sum_{h=1..H} ch[h-1] * exp(i h omega t) )

Samples are taken at ``t_j = j / J * 2 pi / omega`` for ``j = 0 .. J-1``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .contact import evaluate_periodic_trace
from .errors import ValidationError


@dataclass(frozen=True)
class HarmonicSet:
    """Fourier coefficients of a (possibly vector-valued) periodic signal.

    ``c0`` has the signal shape (``()`` for a scalar, ``(n,)`` for a vector);
    ``ch`` has shape ``(H,) + c0.shape``.
    """

    omega: float
    c0: np.ndarray
    ch: np.ndarray

    def __post_init__(self):
        c0 = np.asarray(self.c0, dtype=float)
        ch = np.asarray(self.ch, dtype=complex)
        if ch.ndim < 1 or ch.shape[0] < 1:
            raise ValidationError("at least one harmonic is required")
        if ch.shape[1:] != c0.shape:
            raise ValidationError(
                f"harmonic coefficient shape {ch.shape[1:]} does not match c0 shape {c0.shape}")
        if not (np.isfinite(self.omega) and self.omega > 0):
            raise ValidationError(f"omega must be positive, got {self.omega}")
        object.__setattr__(self, "c0", c0)
        object.__setattr__(self, "ch", ch)

    @property
    def H(self):
        return self.ch.shape[0]

    @property
    def period(self):
        return 2 * np.pi / self.omega

    @classmethod
    def zeros(cls, omega, H, shape=()):
        return cls(omega, np.zeros(shape), np.zeros((H,) + tuple(shape), dtype=complex))

    def component(self, i):
        """Scalar harmonic set of the ``i``-th entry of a vector signal."""
        return HarmonicSet(self.omega, self.c0[i], self.ch[:, i])

    def map(self, A):
        """Apply a real linear map to every coefficient (vector signals)."""
        A = np.asarray(A, dtype=float)
        return HarmonicSet(self.omega, A @ self.c0, self.ch @ A.T)

    def with_omega(self, omega):
        return HarmonicSet(omega, self.c0, self.ch)

    def to_vector(self):
        """Real layout ``[c0, Re c1, Im c1, ..., Re cH, Im cH]`` (flattened)."""
        parts = [self.c0.reshape(1, -1)]
        for h in range(self.H):
            parts.append(self.ch[h].real.reshape(1, -1))
            parts.append(self.ch[h].imag.reshape(1, -1))
        return np.concatenate(parts, axis=0).ravel()

    @classmethod
    def from_vector(cls, z, n, H, omega):
        z = np.asarray(z, dtype=float).reshape(2 * H + 1, n)
        ch = z[1::2] + 1j * z[2::2]
        return cls(omega, z[0].copy(), ch)


def _check_samples(J, H):
    if J < 2 * H + 2:
        raise ValidationError(f"J={J} samples too few for H={H} harmonics (need >= {2 * H + 2})")


def reconstruct(hs, J):
    """Sample one period of the series; result shape ``(J,) + c0.shape``."""
    _check_samples(J, hs.H)
    spec = np.zeros((J // 2 + 1,) + hs.c0.shape, dtype=complex)
    spec[0] = J * hs.c0
    spec[1:hs.H + 1] = 0.5 * J * hs.ch
    return np.fft.irfft(spec, n=J, axis=0)


def extract(samples, H, omega=1.0):
    """Fourier coefficients of ``J`` equally spaced samples of one period.

    The full J-point transform is taken, then truncated to ``H`` harmonics.
    """
    x = np.asarray(samples, dtype=float)
    J = x.shape[0]
    _check_samples(J, H)
    X = np.fft.rfft(x, axis=0)
    return HarmonicSet(omega, X[0].real / J, 2.0 / J * X[1:H + 1])


def aft_contact_forces(u_hat, v_hat, params, J=256, w_init=0.0, max_cycles=50):
    """Fourier coefficients of the contact forces of one element.

    Parameters
    ----------
    u_hat, v_hat : HarmonicSet
        Scalar series of the relative tangential/normal displacements.
    params : ContactParams
    J : int
        Time samples per period.
    w_init : float
        Slider warm start.

    Returns
    -------
    T_hat, N_hat : HarmonicSet
    trace : ContactTrace
    """
    if u_hat.H != v_hat.H or u_hat.omega != v_hat.omega:
        raise ValidationError("u_hat and v_hat must share H and omega")
    u = reconstruct(u_hat, J)
    v = reconstruct(v_hat, J)
    trace = evaluate_periodic_trace(u, v, params, w_init, max_cycles=max_cycles,
                                    period=u_hat.period)
    T_hat = extract(trace.T, u_hat.H, u_hat.omega)
    N_hat = extract(trace.N, u_hat.H, u_hat.omega)
    return T_hat, N_hat, trace
