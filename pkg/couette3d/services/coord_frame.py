"""
Nonlinear change of coordinates adapted to the streak.

The x-averaged velocity U0 deforms the shear; the coordinates
(X, Y, Z) = (x - t (y + psi), y + psi, z) absorb it.  ``psi`` is tracked
through C(t, Y, Z) = psi(t, y, z) and g = (U0^1 - C) / t, both plane fields
on the (eta, l) lattice.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence, Union

import numpy as np
from scipy.interpolate import CubicSpline

from couette3d.core import (
    JacobianError,
    NumericalInstabilityError,
    ParameterRangeError,
    SamplingCadenceError,
    get_logger,
)
from couette3d.services.spectral_core import SpectralGrid, if_rk4_step, plane_inner_product

logger = get_logger(__name__)

JACOBIAN_LIMIT = 0.5

PlaneInput = Union[np.ndarray, Callable[[float], np.ndarray]]


@dataclass(frozen=True)
class CoordState:
    """C, g and the co-evolved U0^1, as plane spectra."""

    C: np.ndarray
    g: np.ndarray
    U01: np.ndarray
    grid: SpectralGrid
    time: float = 1.0
    nu: float = 0.0

    def stacked(self) -> np.ndarray:
        return np.stack([self.C, self.g, self.U01])

    def identity_residual(self) -> float:
        """||C - (U0^1 - t g)|| relative to ||U0^1||."""
        g = self.grid
        diff = self.C - (self.U01 - self.time * self.g)
        scale = math.sqrt(max(plane_inner_product(g, self.U01, self.U01), 0.0))
        value = math.sqrt(max(plane_inner_product(g, diff, diff), 0.0))
        return value / scale if scale > 0 else value


@dataclass(frozen=True)
class JacobianFactors:
    """Physical-space psi_y, psi_z and G = (1 + psi_y)^2 + psi_z^2 - 1."""

    psi_y: np.ndarray
    psi_z: np.ndarray
    G: np.ndarray
    sup_dyc: float

    def spectral(self, grid: SpectralGrid) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return grid.forward_plane(self.psi_y), grid.forward_plane(self.psi_z), grid.forward_plane(self.G)


def _derivatives(grid: SpectralGrid, f: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return 1j * grid.plane_eta * f, 1j * grid.plane_l * f


def jacobians_from_C(C: np.ndarray, grid: SpectralGrid, t: float | None = None) -> JacobianFactors:
    """psi_y = dY C / (1 - dY C) and psi_z = dZ C / (1 - dY C), pointwise."""
    dyc_hat, dzc_hat = _derivatives(grid, C)
    dyc = grid.inverse_plane(dyc_hat)
    dzc = grid.inverse_plane(dzc_hat)
    sup = float(np.max(np.abs(dyc))) if dyc.size else 0.0
    if sup >= JACOBIAN_LIMIT:
        raise JacobianError(float("nan") if t is None else t, sup)
    inv = 1.0 / (1.0 - dyc)
    psi_y = dyc * inv
    psi_z = dzc * inv
    G = (1.0 + psi_y) ** 2 + psi_z ** 2 - 1.0
    return JacobianFactors(psi_y, psi_z, G, sup)


def modified_laplacian(grid: SpectralGrid, f: np.ndarray, jac: JacobianFactors) -> np.ndarray:
    """Delta F + G dYY F + 2 psi_z dYZ F, dealiased."""
    eta, l = grid.plane_eta, grid.plane_l
    lap = -(eta ** 2 + l ** 2) * f
    f_yy = grid.inverse_plane(-eta * eta * f)
    f_yz = grid.inverse_plane(-eta * l * f)
    correction = grid.forward_plane(jac.G * f_yy + 2.0 * jac.psi_z * f_yz)
    return lap + correction * grid.plane_dealias_mask


def _advect(grid: SpectralGrid, vy: np.ndarray, vz: np.ndarray, f: np.ndarray) -> np.ndarray:
    """(vy dY + vz dZ) f with physical advecting velocities."""
    fy, fz = _derivatives(grid, f)
    prod = vy * grid.inverse_plane(fy) + vz * grid.inverse_plane(fz)
    return grid.forward_plane(prod) * grid.plane_dealias_mask


def _as_function(value: PlaneInput) -> Callable[[float], np.ndarray]:
    if callable(value):
        return value
    return lambda t: value


class CoordSolver:
    """IF-RK4 integrator of (C, g, U0^1); the constant-coefficient Laplacian is integrated exactly."""

    def __init__(self, grid: SpectralGrid, nu: float):
        self.grid = grid
        self.nu = nu
        self._k2 = grid.plane_eta ** 2 + grid.plane_l ** 2

    def tendency(self, t: float, y: np.ndarray, U0_2: np.ndarray, U0_3: np.ndarray, force_g: np.ndarray) -> np.ndarray:
        """Full tendency, viscous part included."""
        return self._rhs(t, y, U0_2, U0_3, force_g) - self.nu * self._k2 * y

    def _rhs(self, t: float, y: np.ndarray, U0_2: np.ndarray, U0_3: np.ndarray, force_g: np.ndarray) -> np.ndarray:
        g = self.grid
        C, gg, U01 = y
        jac = jacobians_from_C(C, g, t)
        vy = g.inverse_plane(gg)
        vz = g.inverse_plane(U0_3)
        out = np.empty_like(y)
        out[0] = -_advect(g, vy, vz, C) + gg - U0_2
        out[1] = -_advect(g, vy, vz, gg) - 2.0 * gg / t + force_g
        out[2] = -_advect(g, vy, vz, U01) - U0_2 + t * force_g
        if self.nu:
            for i in range(3):
                lap = modified_laplacian(g, y[i], jac)
                out[i] += self.nu * (lap + self._k2 * y[i])
        return out

    def step(self, state: CoordState, U0_2: PlaneInput, U0_3: PlaneInput, force_g: PlaneInput, dt: float) -> CoordState:
        if state.time < 1.0:
            raise ParameterRangeError(f"the coordinate system is evolved for t >= 1, got {state.time}")
        u2, u3, force = _as_function(U0_2), _as_function(U0_3), _as_function(force_g)
        jacobians_from_C(state.C, self.grid, state.time)

        def rhs(t: float, y: np.ndarray) -> np.ndarray:
            return self._rhs(t, y, u2(t), u3(t), force(t))

        def propagator(ta: float, tb: float) -> np.ndarray:
            return np.exp(-self.nu * self._k2 * (tb - ta))

        y = if_rk4_step(state.stacked(), state.time, dt, rhs, propagator)
        if not np.all(np.isfinite(y)):
            raise NumericalInstabilityError(state.time + dt, "non-finite coordinate fields")
        return replace(state, C=y[0], g=y[1], U01=y[2], time=state.time + dt, nu=self.nu)


def step_cg(state: CoordState, U0_2: PlaneInput, U0_3: PlaneInput, force_g: PlaneInput, dt: float) -> CoordState:
    """Advance (C, g) and U0^1 by one step; inputs are plane spectra or functions of t."""
    return CoordSolver(state.grid, state.nu).step(state, U0_2, U0_3, force_g, dt)


def relative_velocity_y(
    state: CoordState,
    U0_2: np.ndarray,
    U0_3: np.ndarray,
    force_g: np.ndarray | None = None,
    dCdt: np.ndarray | None = None,
) -> np.ndarray:
    """
    (1 + psi_y) U0^2 + psi_z U0^3 + psi_t - nu (1 + psi_y) dtilde C in physical space.

    psi_t = (1 + psi_y) dC/dt.  Equals g when C is evolved by its own equation.
    """
    g = state.grid
    jac = jacobians_from_C(state.C, g, state.time)
    if dCdt is None:
        force = np.zeros_like(state.g) if force_g is None else force_g
        dCdt = CoordSolver(g, state.nu).tendency(state.time, state.stacked(), U0_2, U0_3, force)[0]
    lap = modified_laplacian(g, state.C, jac)
    one_py = 1.0 + jac.psi_y
    return (
        one_py * g.inverse_plane(U0_2)
        + jac.psi_z * g.inverse_plane(U0_3)
        + one_py * g.inverse_plane(dCdt)
        - state.nu * one_py * g.inverse_plane(lap)
    )


def _check_uniform(times: np.ndarray) -> float:
    if times.ndim != 1 or times.size < 2:
        raise SamplingCadenceError("need at least two sample times")
    steps = np.diff(times)
    if np.any(steps <= 0) or not np.allclose(steps, steps[0], rtol=1e-9, atol=1e-12):
        raise SamplingCadenceError(f"sample times must be uniformly spaced, got steps in [{steps.min()}, {steps.max()}]")
    return float(steps[0])


def _history_spline(grid: SpectralGrid, times: np.ndarray, series: Sequence[np.ndarray]) -> CubicSpline:
    physical = np.stack([[grid.inverse_plane(c) for c in sample] for sample in series])
    return CubicSpline(times, physical, axis=0)


def initial_phi(grid: SpectralGrid, times: np.ndarray, spline: CubicSpline) -> tuple[float, np.ndarray]:
    """
    Start time and t psi there, as a physical field.

    A history from t = 0 seeds t psi(1) with the time integral of u0^1 over
    [0, 1]; otherwise t psi(t0) = t0 u0^1(t0).
    """
    t0 = float(times[0])
    if t0 == 0.0:
        if times[-1] < 1.0:
            raise ParameterRangeError("a history from t = 0 must reach t = 1")
        return 1.0, spline.integrate(0.0, 1.0)[0]
    if t0 < 1.0:
        raise ParameterRangeError(f"histories must start at t = 0 or at t >= 1, got {t0}")
    return t0, t0 * spline(t0)[0]


def psi_from_history(
    times: Sequence[float],
    u0_series: Sequence[np.ndarray],
    grid: SpectralGrid,
    nu: float,
    substeps: int = 4,
) -> tuple[np.ndarray, np.ndarray]:
    """
    Reconstruct psi from sampled x-averages u0 = (u0^1, u0^2, u0^3).

    Integrates d(t psi)/dt = u0^1 - t u0^2 - u0^2 dy(t psi) - u0^3 dz(t psi)
    + nu Delta(t psi), with the samples interpolated by cubic splines.
    Returns the output times (t >= 1) and psi as plane spectra.
    """
    times = np.asarray(times, dtype=float)
    cadence = _check_uniform(times)
    if len(u0_series) != times.size:
        raise SamplingCadenceError(f"{times.size} sample times but {len(u0_series)} samples")
    spline = _history_spline(grid, times, u0_series)
    t_start, phi_phys = initial_phi(grid, times, spline)
    k2 = grid.plane_eta ** 2 + grid.plane_l ** 2
    mask = grid.plane_dealias_mask

    def rhs(t: float, phi: np.ndarray) -> np.ndarray:
        u1, u2, u3 = spline(t)
        fy, fz = _derivatives(grid, phi)
        transport = u2 * grid.inverse_plane(fy) + u3 * grid.inverse_plane(fz)
        return grid.forward_plane(u1 - t * u2 - transport) * mask

    def propagator(ta: float, tb: float) -> np.ndarray:
        return np.exp(-nu * k2 * (tb - ta))

    out_times = times[times >= t_start - 1e-12]
    phi = grid.forward_plane(phi_phys)
    psi = [phi / t_start]
    t = t_start
    h = cadence / substeps
    for t_next in out_times[1:]:
        n = max(1, int(round((t_next - t) / h)))
        hh = (t_next - t) / n
        for _ in range(n):
            phi = if_rk4_step(phi, t, hh, rhs, propagator)
            t += hh
        t = float(t_next)
        psi.append(phi / t)
    logger.debug(f"Reconstructed psi on {len(psi)} samples from t={t_start}")
    return np.asarray(out_times), np.stack(psi)


def initial_coord_state(grid: SpectralGrid, times: Sequence[float], u0_series: Sequence[np.ndarray], nu: float) -> CoordState:
    """C(t0) = psi(t0) from the history seed, g(t0) = (U0^1(t0) - C(t0)) / t0."""
    times = np.asarray(times, dtype=float)
    _check_uniform(times)
    spline = _history_spline(grid, times, u0_series)
    t0, phi_phys = initial_phi(grid, times, spline)
    C = grid.forward_plane(phi_phys / t0)
    U01 = grid.forward_plane(spline(t0)[0])
    return CoordState(C=C, g=(U01 - C) / t0, U01=U01, grid=grid, time=t0, nu=nu)


def coevolve(
    state: CoordState,
    times: Sequence[float],
    u0_series: Sequence[np.ndarray],
    force_series: Sequence[np.ndarray],
    substeps: int = 4,
    callback: Callable[[CoordState], None] | None = None,
) -> CoordState:
    """Drive (C, g, U0^1) with spline-interpolated U0^2, U0^3 and forcing along the sample times."""
    times = np.asarray(times, dtype=float)
    cadence = _check_uniform(times)
    if not (len(u0_series) == len(force_series) == times.size):
        raise SamplingCadenceError("velocity and forcing histories must share the sample times")
    g = state.grid
    u_spline = _history_spline(g, times, u0_series)
    f_spline = CubicSpline(times, np.stack([g.inverse_plane(f) for f in force_series]), axis=0)

    def u2(t):
        return g.forward_plane(u_spline(t)[1])

    def u3(t):
        return g.forward_plane(u_spline(t)[2])

    def force(t):
        return g.forward_plane(f_spline(t))

    solver = CoordSolver(g, state.nu)
    h = cadence / substeps
    if callback:
        callback(state)
    for t_next in times[times > state.time + 1e-12]:
        n = max(1, int(round((t_next - state.time) / h)))
        hh = (t_next - state.time) / n
        for _ in range(n):
            state = solver.step(state, u2, u3, force, hh)
        state = replace(state, time=float(t_next))
        if callback:
            callback(state)
    logger.info(f"Co-evolved coordinates to t={state.time:.4g}; identity residual {state.identity_residual():.3e}")
    return state
