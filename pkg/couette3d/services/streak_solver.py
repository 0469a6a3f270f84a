"""
Exact x-independent ("streak") dynamics.

(u2, u3) solve the 2D Navier-Stokes equations in (y, z), written in
vorticity/streamfunction form, and u1 is a passive scalar advected by them
and forced by -u2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from couette3d.core import CFLViolationError, DivergenceError, NumericalInstabilityError, get_logger
from couette3d.services.spectral_core import SpectralGrid, SpectralVectorField, if_rk4_step, plane_inner_product

logger = get_logger(__name__)

STREAK_CFL_LIMIT = 1.0
DIVERGENCE_TOL = 1e-10


@dataclass(frozen=True)
class StreakState:
    """Plane spectra (eta, l) of the three velocity components."""

    u1: np.ndarray
    u2: np.ndarray
    u3: np.ndarray
    grid: SpectralGrid
    time: float = 0.0
    nu: float = 0.0

    def stacked(self) -> np.ndarray:
        return np.stack([self.u1, self.u2, self.u3])

    def divergence_residual(self) -> float:
        g = self.grid
        div = g.plane_eta * self.u2 + g.plane_l * self.u3
        scale = float(np.sqrt(np.sum(np.abs(self.u2) ** 2 + np.abs(self.u3) ** 2)))
        if scale == 0.0:
            return 0.0
        return float(np.max(np.abs(div))) / scale

    def energies(self) -> tuple[float, float]:
        """(E1, E23): half squared L^2 norms of u1 and of (u2, u3)."""
        g = self.grid
        e1 = 0.5 * plane_inner_product(g, self.u1, self.u1)
        e23 = 0.5 * (plane_inner_product(g, self.u2, self.u2) + plane_inner_product(g, self.u3, self.u3))
        return e1, e23

    def gradient_norm_sq(self) -> float:
        """||grad (u2, u3)||^2."""
        g = self.grid
        k2 = g.plane_eta ** 2 + g.plane_l ** 2
        return plane_inner_product(g, k2 * self.u2, self.u2) + plane_inner_product(g, k2 * self.u3, self.u3)


def streak_from_physical(grid: SpectralGrid, u1, u2, u3, time: float = 0.0, nu: float = 0.0) -> StreakState:
    return StreakState(
        grid.forward_plane(np.asarray(u1, dtype=float)),
        grid.forward_plane(np.asarray(u2, dtype=float)),
        grid.forward_plane(np.asarray(u3, dtype=float)),
        grid,
        time,
        nu,
    )


def streak_from_3d(field: SpectralVectorField, nu: float = 0.0) -> StreakState:
    """The x-average (k = 0 slice) of a 3D field."""
    c = field.coeffs[:, 0]
    return StreakState(c[0].copy(), c[1].copy(), c[2].copy(), field.grid, field.time, nu)


def streak_to_3d(state: StreakState) -> SpectralVectorField:
    """Embed a streak state as an x-independent 3D field."""
    g = state.grid
    coeffs = np.zeros((3, *g.spec.spectral_shape), dtype=complex)
    coeffs[:, 0] = state.stacked()
    return SpectralVectorField(coeffs, g, "shear", state.time, state.time)


def lift_up_reference(u_in: StreakState, t: float, nu: float) -> np.ndarray:
    """Heat-semigroup reference e^{nu t Delta}(u1_in - t u2_in), as a plane spectrum."""
    g = u_in.grid
    k2 = g.plane_eta ** 2 + g.plane_l ** 2
    return np.exp(-nu * k2 * t) * (u_in.u1 - t * u_in.u2)


def _plane_velocity(grid: SpectralGrid, omega: np.ndarray, mean23: tuple[complex, complex]) -> tuple[np.ndarray, np.ndarray]:
    eta, l = grid.plane_eta, grid.plane_l
    k2 = eta ** 2 + l ** 2
    phi = np.divide(omega, k2, out=np.zeros_like(omega), where=k2 > 0)
    u2 = 1j * l * phi
    u3 = -1j * eta * phi
    u2[0, 0] = mean23[0]
    u3[0, 0] = mean23[1]
    return u2, u3


class StreakSolver:
    """IF-RK4 integrator of the streak system on a fixed plane grid."""

    def __init__(self, grid: SpectralGrid, nu: float, cfl_limit: float = STREAK_CFL_LIMIT):
        self.grid = grid
        self.nu = nu
        self.cfl_limit = cfl_limit
        self._k2 = grid.plane_eta ** 2 + grid.plane_l ** 2
        self._mask = grid.plane_dealias_mask

    def courant(self, state: StreakState, dt: float) -> float:
        g = self.grid
        u2 = g.inverse_plane(state.u2)
        u3 = g.inverse_plane(state.u3)
        spec = g.spec
        return dt * (np.max(np.abs(u2)) * spec.Ny / spec.Ly + np.max(np.abs(u3)) * spec.Nz / spec.Lz)

    def _rhs_factory(self, mean23: tuple[complex, complex]) -> Callable[[float, np.ndarray], np.ndarray]:
        g = self.grid
        eta, l = g.plane_eta, g.plane_l
        mask = self._mask

        def rhs(t: float, y: np.ndarray) -> np.ndarray:
            omega, u1 = y[0] * mask, y[1] * mask
            u2, u3 = _plane_velocity(g, omega, mean23)
            v2 = g.inverse_plane(u2)
            v3 = g.inverse_plane(u3)
            w = g.inverse_plane(omega)
            a = g.inverse_plane(u1)
            adv_omega = 1j * eta * g.forward_plane(v2 * w) + 1j * l * g.forward_plane(v3 * w)
            adv_u1 = 1j * eta * g.forward_plane(v2 * a) + 1j * l * g.forward_plane(v3 * a)
            return np.stack([-adv_omega * mask, (-adv_u1 - u2) * mask])

        return rhs

    def _propagator(self, ta: float, tb: float) -> np.ndarray:
        return np.exp(-self.nu * self._k2 * (tb - ta))

    def step(self, state: StreakState, dt: float) -> StreakState:
        """Advance the streak system by one step of size ``dt``."""
        residual = state.divergence_residual()
        if residual > DIVERGENCE_TOL:
            raise DivergenceError(residual)
        courant = self.courant(state, dt)
        if courant > self.cfl_limit:
            raise CFLViolationError(courant, self.cfl_limit, state.time)

        g = self.grid
        omega = 1j * g.plane_eta * state.u3 - 1j * g.plane_l * state.u2
        mean23 = (state.u2[0, 0], state.u3[0, 0])
        y = np.stack([omega, state.u1])
        y = if_rk4_step(y, state.time, dt, self._rhs_factory(mean23), lambda ta, tb: self._propagator(ta, tb))
        if not np.all(np.isfinite(y)):
            raise NumericalInstabilityError(state.time + dt)

        u2, u3 = _plane_velocity(g, y[0], mean23)
        return replace(state, u1=y[1], u2=u2, u3=u3, time=state.time + dt, nu=self.nu)

    def run(
        self,
        state: StreakState,
        t_end: float,
        dt: float,
        dt_out: float,
        callback: Callable[[StreakState], None] | None = None,
    ) -> StreakState:
        """Integrate to ``t_end``, calling ``callback`` at every output time (including the start)."""
        substeps = max(1, int(math.ceil(dt_out / dt - 1e-9)))
        h = dt_out / substeps
        n_out = int(round((t_end - state.time) / dt_out))
        if not math.isclose(state.time + n_out * dt_out, t_end, rel_tol=1e-9, abs_tol=1e-9):
            logger.warning(
                f"t_end={t_end} is not a whole number of outputs dt_out={dt_out} after t={state.time}; "
                f"stopping at t={state.time + n_out * dt_out:.6g}"
            )
        logger.info(f"Streak run: {n_out} outputs, {substeps} substeps of {h:.4g}, nu={self.nu}")
        if callback:
            callback(state)
        t_start = state.time
        for i in range(n_out):
            for _ in range(substeps):
                state = self.step(state, h)
            state = replace(state, time=t_start + (i + 1) * dt_out)
            if callback:
                callback(state)
            logger.debug(f"Streak output t={state.time:.4g}")
        return state


def step_streak(state: StreakState, dt: float) -> StreakState:
    return StreakSolver(state.grid, state.nu).step(state, dt)
