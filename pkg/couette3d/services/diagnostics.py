"""Energies, Sobolev norms, power-law fits and the x-averaged forcing consumed by the coordinate system."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy import stats

from couette3d.core import ParameterRangeError, get_logger
from couette3d.services.coord_frame import JacobianFactors
from couette3d.services.spectral_core import SpectralGrid, SpectralVectorField, plane_inner_product

logger = get_logger(__name__)

FIT_SKIP = 5
FIT_MIN_SAMPLES = 8
DEFAULT_SIGMA_PRIME = 3.5


@dataclass(frozen=True)
class TimeSeries:
    name: str
    t: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.shape != v.shape or t.ndim != 1:
            raise ParameterRangeError(f"series '{self.name}': times and values must be matching 1D arrays")
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise ParameterRangeError(f"series '{self.name}': times must be strictly increasing")
        if not np.all(np.isfinite(v)):
            raise ParameterRangeError(f"series '{self.name}': values must be finite")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "values", v)

    def window(self, t_lo: float | None = None, t_hi: float | None = None) -> "TimeSeries":
        sel = np.ones(self.t.shape, dtype=bool)
        if t_lo is not None:
            sel &= self.t >= t_lo
        if t_hi is not None:
            sel &= self.t <= t_hi
        return TimeSeries(self.name, self.t[sel], self.values[sel])


@dataclass(frozen=True)
class ComponentEnergies:
    E_total: float
    E_neq: float
    E0_1: float
    E0_2: float
    E0_3: float

    @property
    def neq_fraction(self) -> float:
        return self.E_neq / self.E_total if self.E_total > 0 else 0.0


def component_energies(field: SpectralVectorField) -> ComponentEnergies:
    """E = ||.||^2 / 2 split into the x-dependent part and the three x-averages."""
    g = field.grid
    deta = g.spec.deta
    c = field.coeffs
    zero = [0.5 * deta * float(np.sum(np.abs(c[i, 0]) ** 2)) for i in range(3)]
    neq = 0.5 * deta * float(np.sum(g.hermitian_weight[1:] * np.abs(c[:, 1:]) ** 2))
    return ComponentEnergies(neq + sum(zero), neq, *zero)


def _weights(field: SpectralVectorField, lab: bool) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    g = field.grid
    if lab:
        return field.wavevector()
    return g.k, g.eta, g.l


def sobolev_norm(
    field: SpectralVectorField,
    sigma: float,
    component: int | None = None,
    lab: bool = False,
) -> float:
    """
    ||<k, eta, l>^sigma f|| in coefficient form, with |.| the l1 magnitude.

    ``lab`` uses (k, eta - k (t - t0), l) for shear-frame fields.
    """
    g = field.grid
    kx, ky, kz = _weights(field, lab)
    mag = np.abs(kx) + np.abs(ky) + np.abs(kz)
    weight = (1.0 + mag ** 2) ** sigma
    coeffs = field.coeffs if component is None else field.coeffs[component : component + 1]
    total = 0.5 * float(np.sum(g.hermitian_weight * weight * np.abs(coeffs) ** 2))
    return math.sqrt(total)


def neq_sobolev_norm(field: SpectralVectorField, sigma: float, component: int, lab: bool = False) -> float:
    """Sobolev norm of the x-dependent part of one component."""
    coeffs = field.coeffs.copy()
    coeffs[:, 0] = 0.0
    return sobolev_norm(field.with_coeffs(coeffs), sigma, component, lab)


def plane_l2(grid: SpectralGrid, f: np.ndarray) -> float:
    return math.sqrt(max(plane_inner_product(grid, f, f), 0.0))


@dataclass(frozen=True)
class PowerLawFit:
    exponent: float
    prefactor: float
    r2: float
    samples: int


def fit_scaling(x: Sequence[float], y: Sequence[float]) -> PowerLawFit:
    """Least-squares y = a x^p in log-log space, using every sample."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 2 or x.shape != y.shape:
        raise ParameterRangeError("a scaling fit needs at least two matching samples")
    if np.any(x <= 0) or np.any(y <= 0):
        raise ParameterRangeError("a scaling fit needs positive samples")
    if np.allclose(y, y[0]):
        return PowerLawFit(0.0, float(y[0]), 1.0, int(x.size))
    fit = stats.linregress(np.log(x), np.log(y))
    return PowerLawFit(float(fit.slope), float(math.exp(fit.intercept)), float(fit.rvalue ** 2), int(x.size))


def fit_power_law(series: TimeSeries, window: tuple[float | None, float | None] | None = None) -> PowerLawFit:
    """Growth/decay exponent of a positive series; the first samples of the window are dropped as transient."""
    if window is not None:
        series = series.window(*window)
    t, v = series.t[FIT_SKIP:], series.values[FIT_SKIP:]
    if t.size < FIT_MIN_SAMPLES:
        raise ParameterRangeError(
            f"series '{series.name}' has {t.size} samples after the transient cut, need {FIT_MIN_SAMPLES}"
        )
    return fit_scaling(t, v)


def crossing_time(series: TimeSeries, threshold: float = 0.01) -> float | None:
    """First time after the last local maximum where the series drops below ``threshold``."""
    v = series.values
    if v.size == 0:
        return None
    peaks = [i for i in range(1, v.size - 1) if v[i] > v[i - 1] and v[i] >= v[i + 1]]
    start = peaks[-1] if peaks else 0
    for i in range(start, v.size):
        if v[i] < threshold:
            if i == start:
                return float(series.t[i])
            t0, t1 = series.t[i - 1], series.t[i]
            v0, v1 = v[i - 1], v[i]
            return float(t0 + (v0 - threshold) / (v0 - v1) * (t1 - t0))
    return None


@dataclass(frozen=True)
class BudgetSample:
    rate: float
    production: float
    dissipation: float
    residual: float
    relative: float


def energy_budget_residual(state, solver) -> BudgetSample:
    """dE/dt - (-int u1 u2 - nu ||grad^L u||^2) from the solver tendency."""
    rate, production, dissipation = solver.energy_rate(state)
    residual = rate - production + dissipation
    energy = component_energies(state.uhat).E_total
    scale = max(energy, dissipation, 1e-300)
    return BudgetSample(rate, production, dissipation, residual, abs(residual) / scale)


def forcing_series(
    fields: SpectralVectorField | Iterable[SpectralVectorField],
    jacobians: Sequence[JacobianFactors] | JacobianFactors | None = None,
) -> list[np.ndarray]:
    """
    -(1/t) times the x-average of u_neq . grad u1_neq, as plane spectra.

    Without ``jacobians`` the shear-frame gradient grad^L is used; with them
    d_y and d_z act as (1 + psi_y) d_Y^t and d_Z + psi_z d_Y^t.
    """
    if isinstance(fields, SpectralVectorField):
        fields = [fields]
    fields = list(fields)
    if jacobians is None or isinstance(jacobians, JacobianFactors):
        jacobians = [jacobians] * len(fields)
    if len(jacobians) != len(fields):
        raise ParameterRangeError("one set of jacobians per field is required")
    return [_forcing(f, j) for f, j in zip(fields, jacobians)]


def _forcing(field: SpectralVectorField, jac: JacobianFactors | None) -> np.ndarray:
    if field.time <= 0:
        raise ParameterRangeError(f"the forcing is defined for t > 0, got {field.time}")
    g = field.grid
    coeffs = field.coeffs * g.dealias_mask
    coeffs[:, 0] = 0.0
    kx, ky, kz = field.wavevector()
    u = g.inverse(coeffs)
    dx = g.inverse(1j * kx * coeffs[0])
    dy = g.inverse(1j * ky * coeffs[0])
    dz = g.inverse(1j * kz * coeffs[0])
    if jac is not None:
        psi_y = jac.psi_y[None]
        psi_z = jac.psi_z[None]
        dz = dz + psi_z * dy
        dy = (1.0 + psi_y) * dy
    product = u[0] * dx + u[1] * dy + u[2] * dz
    averaged = g.forward(product)[0] * g.plane_dealias_mask
    return -averaged / field.time
