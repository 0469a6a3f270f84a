"""
Nonlinear perturbation dynamics of plane Couette flow in the shearing frame.

Coefficients are stored on the (k, eta, l) lattice of the sheared coordinate
X = x - (t - t0) y; derivatives act through the lab wavevector
(k, eta - k (t - t0), l).  Viscosity enters through the exact integrating
factor, everything else is advanced by RK4.
"""

from __future__ import annotations

import math
import time as wallclock
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from couette3d.core import (
    CFLViolationError,
    NumericalInstabilityError,
    RemapError,
    get_logger,
)
from couette3d.services.spectral_core import (
    SpectralGrid,
    SpectralVectorField,
    dealias,
    if_rk4_step,
    inner_product,
    shear_viscous_exponent,
)

logger = get_logger(__name__)

SIM_CFL_LIMIT = 0.5
CFL_WARN_RATIO = 0.8
Y_EDGE_WARN_FRACTION = 1e-3


@dataclass(frozen=True)
class SimState:
    """Shear-frame velocity with its viscosity and nominal amplitude."""

    uhat: SpectralVectorField
    nu: float
    eps_label: float = 0.0

    @property
    def t(self) -> float:
        return self.uhat.time

    @property
    def grid(self) -> SpectralGrid:
        return self.uhat.grid


@dataclass(frozen=True)
class PressureFields:
    pL_hat: np.ndarray
    pNL_hat: np.ndarray


@dataclass(frozen=True)
class QFields:
    q1: np.ndarray
    q2: np.ndarray
    q3: np.ndarray


def _inverse_symbol(field: SpectralVectorField) -> np.ndarray:
    k2 = field.laplacian_symbol()
    return np.divide(1.0, k2, out=np.zeros_like(k2), where=k2 > 0)


def linear_pressure(field: SpectralVectorField) -> np.ndarray:
    """p^L with Delta_L p^L = -2 d_X u2."""
    kx = field.grid.k
    return 2j * kx * field.coeffs[1] * _inverse_symbol(field)


def compute_pressure(state: SimState) -> PressureFields:
    """Both pressures; the nonlinear one from the pseudospectral d_i u^j d_j u^i."""
    field = dealias(state.uhat)
    g = field.grid
    kvec = field.wavevector()
    grads = [
        [g.inverse(1j * kvec[i] * field.coeffs[j]) for j in range(3)]
        for i in range(3)
    ]
    source = sum(grads[i][j] * grads[j][i] for i in range(3) for j in range(3))
    s_hat = g.forward(source) * g.dealias_mask
    p_nl = s_hat * _inverse_symbol(field)
    return PressureFields(pL_hat=linear_pressure(field), pNL_hat=p_nl)


def linear_tendency(field: SpectralVectorField) -> np.ndarray:
    """Lift-up forcing and linear pressure: (-u2, 0, 0) - i kL p^L."""
    kvec = field.wavevector()
    p_l = linear_pressure(field)
    out = np.stack([-1j * kvec[i] * p_l for i in range(3)])
    out[0] -= field.coeffs[1]
    return out


def transport_tendency(field: SpectralVectorField) -> np.ndarray:
    """
    Leray-projected transport -P[u . grad^L u], dealiased.

    Uses the divergence form i kL_j FT(u_j u_i); the projection removes the
    gradient part, which is the nonlinear pressure.
    """
    g = field.grid
    field = dealias(field)
    kx, ky, kz = field.wavevector()
    kvec = (kx, ky, kz)
    u = g.inverse(field.coeffs)
    flux = np.zeros_like(field.coeffs)
    for i in range(3):
        for j in range(i, 3):
            prod = g.forward(u[i] * u[j])
            flux[i] += 1j * kvec[j] * prod
            if j != i:
                flux[j] += 1j * kvec[i] * prod
    flux *= g.dealias_mask
    k2 = kx ** 2 + ky ** 2 + kz ** 2
    inv_k2 = np.divide(1.0, k2, out=np.zeros_like(k2), where=k2 > 0)
    kdotn = (kx * flux[0] + ky * flux[1] + kz * flux[2]) * inv_k2
    projected = np.stack([flux[0] - kx * kdotn, flux[1] - ky * kdotn, flux[2] - kz * kdotn])
    return -projected


def nonlinear_rhs(state: SimState, nonlinear: bool = True) -> np.ndarray:
    """Full tendency without the viscous term; preserves the divergence constraint."""
    tendency = linear_tendency(state.uhat)
    if nonlinear:
        tendency = tendency + transport_tendency(state.uhat)
    return tendency


def q_fields(state: SimState) -> QFields:
    k2 = state.uhat.laplacian_symbol()
    q = -k2 * state.uhat.coeffs
    return QFields(q1=q[0], q2=q[1], q3=q[2])


def remap_shear(state: SimState, tol: float = 1e-9) -> SimState:
    """
    Re-center the stored eta lattice so that stored eta equals eta - k (t - t0).

    Allowed when (t - t0) Ly / 2 pi is an integer; modes shifted off the
    lattice are dropped.
    """
    field = state.uhat
    g = field.grid
    elapsed = field.time - field.shear_origin
    shift = elapsed * g.spec.Ly / (2.0 * math.pi)
    m = int(round(shift))
    if abs(shift - m) > tol:
        raise RemapError(field.time, shift)
    if m == 0:
        return replace(state, uhat=replace(field, shear_origin=field.time))

    ny = g.spec.Ny
    new = np.zeros_like(field.coeffs)
    n_new = g.eta_index
    for kx in range(field.coeffs.shape[1]):
        n_old = n_new + kx * m
        valid = (n_old >= -(ny // 2)) & (n_old < ny // 2)
        src = np.mod(n_old[valid], ny)
        dst = np.mod(n_new[valid], ny)
        new[:, kx, dst, :] = field.coeffs[:, kx, src, :]
    logger.debug(f"Remapped shear lattice at t={field.time:.6g} by {m} eta cells per unit k")
    return replace(state, uhat=replace(field, coeffs=new, shear_origin=field.time, meta=dict(field.meta)))


class ShearFrameSolver:
    """IF-RK4 integrator of the shear-frame perturbation equations."""

    def __init__(self, grid: SpectralGrid, nu: float, nonlinear: bool = True, cfl: float = SIM_CFL_LIMIT):
        self.grid = grid
        self.nu = nu
        self.nonlinear = nonlinear
        self.cfl = cfl
        self.last_courant = 0.0

    def courant(self, state: SimState, dt: float) -> float:
        """dt * sum_i max|U_i| N_i / L_i with the sheared X-speed u1 - (t - t0) u2."""
        field = state.uhat
        g = self.grid
        spec = g.spec
        u = g.inverse(field.coeffs)
        elapsed = field.time - field.shear_origin
        speed_x = np.max(np.abs(u[0] - elapsed * u[1]))
        speed_y = np.max(np.abs(u[1]))
        speed_z = np.max(np.abs(u[2]))
        return dt * (speed_x * spec.Nx / spec.Lx + speed_y * spec.Ny / spec.Ly + speed_z * spec.Nz / spec.Lz)

    def _propagator(self, field: SpectralVectorField) -> Callable[[float, float], np.ndarray]:
        g = self.grid
        origin = field.shear_origin

        def propagator(ta: float, tb: float) -> np.ndarray:
            eta_a = g.eta - g.k * (ta - origin)
            return np.exp(shear_viscous_exponent(g.k, eta_a, g.l, tb - ta, self.nu))

        return propagator

    def step(self, state: SimState, dt: float) -> SimState:
        """Advance by ``dt``; rejects steps above the Courant limit and non-finite results."""
        if self.nonlinear:
            courant = self.courant(state, dt)
            self.last_courant = courant
            if courant > self.cfl:
                raise CFLViolationError(courant, self.cfl, state.t)
        field = state.uhat

        def rhs(t: float, coeffs: np.ndarray) -> np.ndarray:
            stage = SimState(field.with_coeffs(coeffs, time=t), self.nu, state.eps_label)
            return nonlinear_rhs(stage, nonlinear=self.nonlinear)

        coeffs = if_rk4_step(field.coeffs, field.time, dt, rhs, self._propagator(field))
        if not np.all(np.isfinite(coeffs)):
            raise NumericalInstabilityError(field.time + dt)
        return replace(state, uhat=field.with_coeffs(coeffs, time=field.time + dt), nu=self.nu)

    def energy_rate(self, state: SimState) -> tuple[float, float, float]:
        """(dE/dt from the tendency, -int u1 u2, nu ||grad^L u||^2)."""
        field = state.uhat
        g = self.grid
        u = field.coeffs
        k2 = field.laplacian_symbol()
        tendency = nonlinear_rhs(state, nonlinear=self.nonlinear) - self.nu * k2 * u
        rate = sum(inner_product(g, u[i], tendency[i]) for i in range(3))
        production = -inner_product(g, u[0], u[1])
        dissipation = self.nu * sum(inner_product(g, k2 * u[i], u[i]) for i in range(3))
        return rate, production, dissipation

    def run(
        self,
        state: SimState,
        t_end: float,
        dt: float,
        dt_out: float,
        callback: Callable[[SimState], None] | None = None,
        remap: bool = False,
    ) -> SimState:
        """Integrate to ``t_end`` with outputs every ``dt_out``; optional remap at commensurate outputs."""
        substeps = max(1, int(math.ceil(dt_out / dt - 1e-9)))
        h = dt_out / substeps
        n_out = int(round((t_end - state.t) / dt_out))
        if not math.isclose(state.t + n_out * dt_out, t_end, rel_tol=1e-9, abs_tol=1e-9):
            logger.warning(
                f"t_end={t_end} is not a whole number of outputs dt_out={dt_out} after t={state.t}; "
                f"stopping at t={state.t + n_out * dt_out:.6g}"
            )
        logger.info(
            f"Shear-frame run: grid={self.grid.spec.physical_shape} nu={self.nu} "
            f"nonlinear={self.nonlinear} outputs={n_out} dt={h:.4g}"
        )
        started = wallclock.perf_counter()
        if callback:
            callback(state)
        t_start = state.t
        for i in range(n_out):
            for _ in range(substeps):
                state = self.step(state, h)
            t_exact = t_start + (i + 1) * dt_out
            state = replace(state, uhat=replace(state.uhat, time=t_exact))
            if remap:
                shift = (t_exact - state.uhat.shear_origin) * self.grid.spec.Ly / (2.0 * math.pi)
                if abs(shift - round(shift)) < 1e-9 and round(shift) != 0:
                    state = remap_shear(state)
            self._check_output(state)
            if callback:
                callback(state)
            logger.debug(f"Output t={t_exact:.4g}")
        logger.info(f"Shear-frame run finished at t={state.t:.4g} in {wallclock.perf_counter() - started:.2f}s")
        return state

    def _check_output(self, state: SimState) -> None:
        if self.nonlinear and self.last_courant > CFL_WARN_RATIO * self.cfl:
            logger.warning(f"Courant number {self.last_courant:.3g} close to the limit {self.cfl} at t={state.t:.4g}")
        leak = y_edge_fraction(state.uhat)
        if leak > Y_EDGE_WARN_FRACTION:
            logger.warning(f"{leak:.2e} of the energy sits in the outermost eta shell at t={state.t:.4g}; Ly truncation may be felt")


def step(state: SimState, dt: float, nonlinear: bool = True) -> SimState:
    return ShearFrameSolver(state.grid, state.nu, nonlinear=nonlinear).step(state, dt)


def y_edge_fraction(field: SpectralVectorField) -> float:
    """Share of the squared coefficients in the outermost retained eta shell."""
    g = field.grid
    n = np.abs(g.eta_index)
    edge = n == n[3 * n < g.spec.Ny].max()
    power = np.sum(np.abs(field.coeffs) ** 2, axis=(0, 1, 3))
    total = float(power.sum())
    return float(power[edge].sum()) / total if total > 0 else 0.0
