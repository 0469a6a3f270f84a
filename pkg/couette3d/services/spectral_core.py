"""
Fourier grids, transforms and projections shared by every solver.

Conventions:

* Physical arrays are indexed ``[x, y, z]`` on the collocation lattice of a
  :class:`GridSpec`; vector fields carry a leading component axis.
* Spectral arrays keep the half spectrum in x, ``[k, eta, l]`` with
  ``k = 0 .. Nx/2`` and full ``fftfreq`` ordering in eta and l.
* ``f_hat = (2 pi)^(-3/2) * (Vol / N) * FFT(f)``, so that
  ``int |f|^2 = deta * sum_k,eta,l |f_hat|^2`` over the full lattice.
* Plane (y, z) fields use the normalization of their x-independent extension,
  which makes the k = 0 slice of a 3D field a plane field as-is.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dataclass_field, replace
from typing import Callable, Literal

import numpy as np
from scipy import fft

from couette3d.core import GridMismatchError, get_logger, get_settings
from couette3d.schemas.grid import GridSpec

logger = get_logger(__name__)

Frame = Literal["lab", "shear"]

_AXES_3D = (-2, -1, -3)
_AXES_2D = (-2, -1)


class SpectralGrid:
    """Wavenumber lattices, normalizations and masks of a :class:`GridSpec`."""

    def __init__(self, spec: GridSpec, workers: int | None = None):
        self.spec = spec
        self.workers = workers if workers is not None else get_settings().threads

        nkx = spec.Nx // 2 + 1
        self.k = np.arange(nkx, dtype=float)[:, None, None]
        self.eta_index = np.rint(fft.fftfreq(spec.Ny, 1.0 / spec.Ny)).astype(int)
        self.eta = (spec.deta * self.eta_index.astype(float))[None, :, None]
        self.l = fft.fftfreq(spec.Nz, 1.0 / spec.Nz)[None, None, :]

        self.hermitian_weight = np.full((nkx, 1, 1), 2.0)
        self.hermitian_weight[0] = 1.0
        if spec.Nx % 2 == 0:
            self.hermitian_weight[-1] = 1.0

        npts = spec.Nx * spec.Ny * spec.Nz
        self.norm3 = (2.0 * math.pi) ** -1.5 * spec.volume / npts
        self.norm2 = self.norm3 * spec.Nx

        l_index = np.rint(self.l).astype(int)
        self.dealias_mask = (
            (3 * self.k < spec.Nx)
            & (3 * np.abs(self.eta_index)[None, :, None] < spec.Ny)
            & (3 * np.abs(l_index) < spec.Nz)
        )

    # -- plane views -------------------------------------------------
    @property
    def plane_eta(self) -> np.ndarray:
        return self.eta[0]

    @property
    def plane_l(self) -> np.ndarray:
        return self.l[0]

    @property
    def plane_dealias_mask(self) -> np.ndarray:
        return self.dealias_mask[0]

    # -- transforms --------------------------------------------------
    def forward(self, physical: np.ndarray) -> np.ndarray:
        return self.norm3 * fft.rfftn(physical, axes=_AXES_3D, workers=self.workers)

    def inverse(self, spectral: np.ndarray) -> np.ndarray:
        s = (self.spec.Ny, self.spec.Nz, self.spec.Nx)
        return fft.irfftn(spectral / self.norm3, s=s, axes=_AXES_3D, workers=self.workers)

    def forward_plane(self, physical: np.ndarray) -> np.ndarray:
        return self.norm2 * fft.fft2(physical, axes=_AXES_2D, workers=self.workers)

    def inverse_plane(self, spectral: np.ndarray) -> np.ndarray:
        return fft.ifft2(spectral / self.norm2, axes=_AXES_2D, workers=self.workers).real

    # -- coordinates ---------------------------------------------------
    def coordinates(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Collocation coordinates broadcastable to the physical shape."""
        spec = self.spec
        x = np.arange(spec.Nx) * (spec.Lx / spec.Nx)
        y = np.arange(spec.Ny) * (spec.Ly / spec.Ny)
        z = np.arange(spec.Nz) * (spec.Lz / spec.Nz)
        return x[:, None, None], y[None, :, None], z[None, None, :]

    def plane_coordinates(self) -> tuple[np.ndarray, np.ndarray]:
        _, y, z = self.coordinates()
        return y[0], z[0]


@dataclass(frozen=True)
class ShearWavevector:
    """Lab-frame wavevector (k, eta - k t, l) of a shear-frame mode."""

    k: int
    eta_t: float
    l: int

    def as_array(self) -> np.ndarray:
        return np.array([self.k, self.eta_t, self.l], dtype=float)

    @property
    def norm_sq(self) -> float:
        return float(self.k ** 2 + self.eta_t ** 2 + self.l ** 2)


def shear_wavevector(k: int, eta: float, l: int, t: float) -> ShearWavevector:
    return ShearWavevector(k=k, eta_t=eta - k * t, l=l)


@dataclass
class SpectralVectorField:
    """Three spectral components on the (k, eta, l) half lattice."""

    coeffs: np.ndarray
    grid: SpectralGrid
    frame: Frame = "shear"
    time: float = 0.0
    shear_origin: float = 0.0
    meta: dict = dataclass_field(default_factory=dict)

    def __post_init__(self):
        expected = (3, *self.grid.spec.spectral_shape)
        if self.coeffs.shape != expected:
            raise GridMismatchError(expected, self.coeffs.shape)

    def wavevector(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Broadcastable (k, eta - k (t - t0), l) arrays."""
        g = self.grid
        if self.frame == "lab":
            return g.k, g.eta, g.l
        return g.k, g.eta - g.k * (self.time - self.shear_origin), g.l

    def laplacian_symbol(self) -> np.ndarray:
        """|k, eta - kt, l|^2, the symbol of -Delta_L."""
        kx, ky, kz = self.wavevector()
        return kx ** 2 + ky ** 2 + kz ** 2

    def divergence(self) -> np.ndarray:
        kx, ky, kz = self.wavevector()
        u = self.coeffs
        return kx * u[0] + ky * u[1] + kz * u[2]

    def divergence_residual(self) -> float:
        """Largest |kL . u| relative to the coefficient norm."""
        scale = float(np.sqrt(np.sum(np.abs(self.coeffs) ** 2)))
        if scale == 0.0:
            return 0.0
        return float(np.max(np.abs(self.divergence()))) / scale

    def with_coeffs(self, coeffs: np.ndarray, time: float | None = None) -> "SpectralVectorField":
        return replace(self, coeffs=coeffs, time=self.time if time is None else time, meta=dict(self.meta))

    def copy(self) -> "SpectralVectorField":
        return self.with_coeffs(self.coeffs.copy())


def forward_transform(
    grid: SpectralGrid,
    physical: np.ndarray,
    frame: Frame = "shear",
    time: float = 0.0,
    shear_origin: float = 0.0,
) -> SpectralVectorField:
    expected = (3, *grid.spec.physical_shape)
    if physical.shape != expected:
        raise GridMismatchError(expected, physical.shape)
    return SpectralVectorField(grid.forward(physical), grid, frame, time, shear_origin)


def inverse_transform(field: SpectralVectorField) -> np.ndarray:
    return field.grid.inverse(field.coeffs)


def leray_project(uhat: np.ndarray, kvec: ShearWavevector) -> np.ndarray:
    """Remove the component of ``uhat`` parallel to ``kvec``."""
    uhat = np.asarray(uhat, dtype=complex)
    kv = kvec.as_array()
    k2 = kvec.norm_sq
    if k2 == 0.0:
        return uhat.copy()
    return uhat - kv * (kv @ uhat) / k2


def project_field(field: SpectralVectorField) -> SpectralVectorField:
    """Mode-wise Leray projection; the zero wavevector is left untouched."""
    kx, ky, kz = field.wavevector()
    k2 = kx ** 2 + ky ** 2 + kz ** 2
    inv_k2 = np.divide(1.0, k2, out=np.zeros_like(k2), where=k2 > 0)
    u = field.coeffs
    kdotu = (kx * u[0] + ky * u[1] + kz * u[2]) * inv_k2
    projected = np.stack([u[0] - kx * kdotu, u[1] - ky * kdotu, u[2] - kz * kdotu])
    return field.with_coeffs(projected)


def dealias(field: SpectralVectorField) -> SpectralVectorField:
    return field.with_coeffs(field.coeffs * field.grid.dealias_mask)


def inner_product(grid: SpectralGrid, a: np.ndarray, b: np.ndarray) -> float:
    """Real L^2 inner product of two real fields from their half spectra."""
    summand = grid.hermitian_weight * (a * np.conj(b)).real
    return float(grid.spec.deta * np.sum(summand))


def plane_inner_product(grid: SpectralGrid, a: np.ndarray, b: np.ndarray) -> float:
    """Inner product of plane fields, consistent with their x-independent extension."""
    return float(grid.spec.deta * np.sum((a * np.conj(b)).real))


def l2_norm(field: SpectralVectorField) -> float:
    g = field.grid
    return math.sqrt(sum(inner_product(g, c, c) for c in field.coeffs))


def shear_viscous_exponent(
    k: np.ndarray, eta_a: np.ndarray, l: np.ndarray, h: float, nu: float
) -> np.ndarray:
    """-nu * int_0^h |k, eta_a - k tau, l|^2 dtau, exact for every k."""
    b = eta_a - k * h
    return -nu * ((k ** 2 + l ** 2) * h + h * (eta_a ** 2 + eta_a * b + b ** 2) / 3.0)


RHS = Callable[[float, np.ndarray], np.ndarray]
Propagator = Callable[[float, float], np.ndarray]


def if_rk4_step(u: np.ndarray, t: float, h: float, rhs: RHS, propagator: Propagator) -> np.ndarray:
    """
    One classical RK4 step in integrating-factor (Lawson) form.

    ``propagator(ta, tb)`` returns the mode-wise linear propagator from ta to tb
    (exact viscous decay); ``rhs(t, u)`` is the remaining tendency.
    """
    e_half = propagator(t, t + 0.5 * h)
    e_full = propagator(t, t + h)
    e_second_half = propagator(t + 0.5 * h, t + h)

    k1 = rhs(t, u)
    k2 = rhs(t + 0.5 * h, e_half * (u + 0.5 * h * k1))
    k3 = rhs(t + 0.5 * h, e_half * u + 0.5 * h * k2)
    k4 = rhs(t + h, e_full * u + h * e_second_half * k3)
    return e_full * (u + h / 6.0 * k1) + h / 3.0 * e_second_half * (k2 + k3) + h / 6.0 * k4
