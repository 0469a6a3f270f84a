"""Mode-exact evolution of the linearized Euler and Navier-Stokes equations in the shear frame."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from couette3d.core import DivergenceError, ParameterRangeError, ZeroWavevectorError, get_logger
from couette3d.services.spectral_core import SpectralVectorField, shear_wavevector

logger = get_logger(__name__)

DIVERGENCE_TOL = 1e-10


@dataclass(frozen=True)
class LinearMode:
    """A single shear-frame Fourier mode (k, eta, l) with velocity ``uhat`` at time ``t``."""

    k: int
    eta: float
    l: int
    uhat: tuple[complex, complex, complex]
    nu: float = 0.0
    t: float = 0.0

    @property
    def vector(self) -> np.ndarray:
        return np.asarray(self.uhat, dtype=complex)

    def wavevector(self, t: float | None = None) -> np.ndarray:
        kv = shear_wavevector(self.k, self.eta, self.l, self.t if t is None else t)
        return kv.as_array()

    def divergence_residual(self) -> float:
        u = self.vector
        scale = float(np.linalg.norm(u))
        if scale == 0.0:
            return 0.0
        return float(abs(self.wavevector() @ u)) / scale


def viscous_exponent(k: float, eta: float, l: float, t: float, nu: float) -> float:
    """nu * int_0^t |k, eta - k tau, l|^2 dtau."""
    return nu * ((k * k + l * l) * t + eta * eta * t - eta * k * t * t + k * k * t ** 3 / 3.0)


def q2_closed_form(k: int, eta: float, l: int, q2_init: complex, t: float, nu: float) -> complex:
    """Q2 of the linearized problem, transported by the exact viscous integrating factor."""
    if t < 0:
        raise ParameterRangeError(f"t must be >= 0, got {t}")
    if nu == 0.0:
        return complex(q2_init)
    return complex(q2_init) * math.exp(-viscous_exponent(k, eta, l, t, nu))


def u2_from_q2(k: int, eta: float, l: int, t: float, q2: complex) -> complex:
    """Invert Delta_L U2 = Q2 at one mode."""
    kv = shear_wavevector(k, eta, l, t)
    if kv.norm_sq == 0.0:
        raise ZeroWavevectorError(kv.k, kv.eta_t, kv.l)
    return -complex(q2) / kv.norm_sq


def _f1(s: np.ndarray, a: float) -> np.ndarray:
    return np.arctan(s / a) / a


def _f2(s: np.ndarray, a: float) -> np.ndarray:
    return s / (2.0 * a * a * (a * a + s * s)) + np.arctan(s / a) / (2.0 * a ** 3)


def linear_mode_exact(mode: LinearMode, t: float) -> LinearMode:
    """Closed-form evolution of ``mode`` from its time stamp to ``t``."""
    h = t - mode.t
    if h < 0:
        raise ParameterRangeError(f"cannot evolve backwards from {mode.t} to {t}")
    k, l, nu = mode.k, mode.l, mode.nu
    eta0 = mode.eta - k * mode.t
    u1, u2, u3 = mode.vector
    decay = math.exp(-viscous_exponent(k, eta0, l, h, nu))

    if k == 0:
        uhat = (decay * (u1 - h * u2), decay * u2, decay * u3)
        return replace(mode, uhat=uhat, t=t)

    a = math.hypot(k, l)
    q_in = -(k * k + eta0 * eta0 + l * l) * u2
    s0, s1 = eta0, eta0 - k * h
    dF1 = _f1(s0, a) - _f1(s1, a)
    dF2 = _f2(s0, a) - _f2(s1, a)
    u2_t = -q_in * decay / (k * k + s1 * s1 + l * l)
    u3_t = decay * (u3 - 2.0 * l * q_in * dF2)
    u1_t = decay * (u1 + (q_in / k) * dF1 - 2.0 * k * q_in * dF2)
    return replace(mode, uhat=(complex(u1_t), complex(u2_t), complex(u3_t)), t=t)


def evolve_linear_mode(mode: LinearMode, t0: float, t1: float, dt: float | None = None) -> LinearMode:
    """
    Integrate one mode of the linearized Navier-Stokes equations from t0 to t1.

    U2 comes from the closed-form Q2; U3 (and U1 when k = 0) are advanced by
    RK4 on the integrating-factor variable, and U1 is recovered from the
    divergence constraint when k != 0.
    """
    if dt is None:
        dt = min(0.01, 0.1 / (1.0 + abs(mode.eta)))
    if dt <= 0:
        raise ParameterRangeError(f"dt must be positive, got {dt}")
    if not t1 >= t0 >= 0:
        raise ParameterRangeError(f"need t1 >= t0 >= 0, got t0={t0}, t1={t1}")
    k, eta, l, nu = mode.k, mode.eta, mode.l, mode.nu
    start = replace(mode, t=t0) if mode.t != t0 else mode
    if start.divergence_residual() > DIVERGENCE_TOL:
        raise DivergenceError(start.divergence_residual())
    eta0 = eta - k * t0
    u1, u2, u3 = start.vector
    q_in = -(k * k + eta0 * eta0 + l * l) * u2

    def phi(tau: float) -> float:
        return viscous_exponent(k, eta0, l, tau, nu)

    def u2_scaled(tau: float) -> complex:
        # e^{phi} U2, from the conserved integrating-factor Q2
        if k == 0:
            return u2
        return -q_in / (k * k + (eta0 - k * tau) ** 2 + l * l)

    def tendency(tau: float) -> tuple[complex, complex]:
        if k == 0:
            return -u2_scaled(tau), 0.0
        denom = k * k + (eta0 - k * tau) ** 2 + l * l
        scaled = u2_scaled(tau)
        return 0.0, 2.0 * k * l * scaled / denom

    span = t1 - t0
    nsteps = max(1, int(math.ceil(span / dt - 1e-12))) if span > 0 else 0
    h = span / nsteps if nsteps else 0.0
    v1, v3 = complex(u1), complex(u3)
    tau = 0.0
    for _ in range(nsteps):
        a1, c1 = tendency(tau)
        a2, c2 = tendency(tau + 0.5 * h)
        a4, c4 = tendency(tau + h)
        v1 += h / 6.0 * (a1 + 4.0 * a2 + a4)
        v3 += h / 6.0 * (c1 + 4.0 * c2 + c4)
        tau += h

    decay = math.exp(-phi(span))
    w2 = decay * u2_scaled(span)
    w3 = decay * v3
    if k == 0:
        w1 = decay * v1
    else:
        w1 = -((eta0 - k * span) * w2 + l * w3) / k
    logger.debug(f"Evolved mode ({k}, {eta}, {l}) from t={t0} to t={t1} in {nsteps} steps")
    return replace(mode, uhat=(complex(w1), complex(w2), complex(w3)), t=t1)


def damping_envelope(component: int, t: float, nu: float, c: float) -> float:
    """
    Reference envelope <t>^-2 e^{-c nu t^3} (component 2) or e^{-c nu t^3} (components 1, 3).

    c ranges over (0, 1/3]; c = 1/3 is the exact decay rate of the (1, 0, 0) mode.
    """
    if component not in (1, 2, 3):
        raise ParameterRangeError(f"component must be 1, 2 or 3, got {component}")
    if not 0.0 < c <= 1.0 / 3.0:
        raise ParameterRangeError(f"c must lie in (0, 1/3], got {c}")
    if t < 1.0:
        raise ParameterRangeError(f"envelope is defined for t >= 1, got {t}")
    envelope = math.exp(-c * nu * t ** 3)
    if component == 2:
        envelope /= 1.0 + t * t
    return envelope


def evolve_linear_field(field: SpectralVectorField, t: float, nu: float) -> SpectralVectorField:
    """Closed-form linear evolution of every mode of a shear-frame field."""
    if field.frame != "shear":
        raise ParameterRangeError("linear field evolution requires a shear-frame field")
    h = t - field.time
    if h < 0:
        raise ParameterRangeError(f"cannot evolve backwards from {field.time} to {t}")
    g = field.grid
    k = np.broadcast_to(g.k, g.spec.spectral_shape)
    l = np.broadcast_to(g.l, g.spec.spectral_shape)
    _, eta0, _ = field.wavevector()
    eta0 = np.broadcast_to(eta0, g.spec.spectral_shape)
    u1, u2, u3 = field.coeffs

    decay = np.exp(-nu * ((k ** 2 + l ** 2) * h + eta0 ** 2 * h - eta0 * k * h * h + k ** 2 * h ** 3 / 3.0))
    out = np.empty_like(field.coeffs)

    zero = k == 0
    out[0][zero] = decay[zero] * (u1[zero] - h * u2[zero])
    out[1][zero] = decay[zero] * u2[zero]
    out[2][zero] = decay[zero] * u3[zero]

    nz = ~zero
    kk, ll, s0 = k[nz], l[nz], eta0[nz]
    a = np.hypot(kk, ll)
    s1 = s0 - kk * h
    q_in = -(kk ** 2 + s0 ** 2 + ll ** 2) * u2[nz]
    dF1 = _f1(s0, a) - _f1(s1, a)
    dF2 = _f2(s0, a) - _f2(s1, a)
    out[1][nz] = -q_in * decay[nz] / (kk ** 2 + s1 ** 2 + ll ** 2)
    out[2][nz] = decay[nz] * (u3[nz] - 2.0 * ll * q_in * dF2)
    out[0][nz] = decay[nz] * (u1[nz] + (q_in / kk) * dF1 - 2.0 * kk * q_in * dF2)
    return field.with_coeffs(out, time=t)
