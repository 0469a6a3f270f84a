"""Seeded, divergence-free initial perturbations."""

from __future__ import annotations

from typing import Literal

import numpy as np

from couette3d.core import ParameterRangeError, get_logger
from couette3d.services.spectral_core import (
    SpectralGrid,
    SpectralVectorField,
    forward_transform,
    l2_norm,
    project_field,
)

logger = get_logger(__name__)

Envelope = Literal["gevrey", "bandlimited"]


def spectral_envelope(
    grid: SpectralGrid,
    envelope: Envelope = "gevrey",
    lam: float = 1.0,
    s: float = 0.5,
    kappa0: float = 4.0,
) -> np.ndarray:
    """e^{-lam |k,eta,l|^s} or the indicator of |k,eta,l| <= kappa0, restricted to the dealiased band."""
    mag = np.abs(grid.k) + np.abs(grid.eta) + np.abs(grid.l)
    if envelope == "gevrey":
        if lam < 0 or not 0 < s <= 1:
            raise ParameterRangeError(f"gevrey envelope needs lam >= 0 and 0 < s <= 1, got lam={lam}, s={s}")
        weight = np.exp(-lam * mag ** s)
    elif envelope == "bandlimited":
        if kappa0 <= 0:
            raise ParameterRangeError(f"band limit must be positive, got {kappa0}")
        weight = (mag <= kappa0).astype(float)
    else:
        raise ParameterRangeError(f"unknown envelope '{envelope}'")
    return weight * grid.dealias_mask


def _normalized(field: SpectralVectorField, amplitude: float) -> SpectralVectorField:
    norm = l2_norm(field)
    if norm == 0.0:
        raise ParameterRangeError("the envelope leaves no modes to excite")
    return field.with_coeffs(field.coeffs * (amplitude / norm))


def _white_noise(grid: SpectralGrid, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return grid.forward(rng.standard_normal((3, *grid.spec.physical_shape)))


def random_initial_data(
    seed: int,
    grid: SpectralGrid,
    amplitude: float,
    envelope: Envelope = "gevrey",
    lam: float = 1.0,
    s: float = 0.5,
    kappa0: float = 4.0,
) -> SpectralVectorField:
    """Leray-projected, mean-free random field with ||u||_2 = amplitude at t = 0."""
    if amplitude < 0:
        raise ParameterRangeError(f"amplitude must be >= 0, got {amplitude}")
    if amplitude == 0:
        return SpectralVectorField(np.zeros((3, *grid.spec.spectral_shape), dtype=complex), grid)
    coeffs = _white_noise(grid, seed) * spectral_envelope(grid, envelope, lam, s, kappa0)
    coeffs[:, 0, 0, 0] = 0.0
    field = project_field(SpectralVectorField(coeffs, grid))
    field = _normalized(field, amplitude)
    logger.debug(f"Random initial data: seed={seed} envelope={envelope} amplitude={amplitude}")
    return field


def cascade_initial_data(
    seed: int,
    grid: SpectralGrid,
    amplitude: float,
    u2_ratio: float,
    envelope: Envelope = "gevrey",
    lam: float = 1.0,
    s: float = 0.5,
    kappa0: float = 4.0,
) -> SpectralVectorField:
    """
    x-dependent data with ||u3|| = amplitude and ||u2|| = u2_ratio * amplitude.

    u1 follows from the divergence constraint, so it is of the size of u3.
    """
    if amplitude < 0 or u2_ratio < 0:
        raise ParameterRangeError("amplitude and u2_ratio must be >= 0")
    coeffs = _white_noise(grid, seed) * spectral_envelope(grid, envelope, lam, s, kappa0)
    coeffs[:, 0] = 0.0
    component_field = SpectralVectorField(coeffs, grid)

    def scaled(component: int, target: float) -> np.ndarray:
        c = coeffs[component]
        norm = l2_norm(component_field.with_coeffs(np.stack([c, 0 * c, 0 * c])))
        if norm == 0.0:
            raise ParameterRangeError("the envelope leaves no modes to excite")
        return c * (target / norm)

    u2 = scaled(1, u2_ratio * amplitude)
    u3 = scaled(2, amplitude)
    k = np.broadcast_to(grid.k, u2.shape)
    inv_k = np.divide(1.0, k, out=np.zeros(u2.shape), where=k > 0)
    u1 = -(grid.eta * u2 + grid.l * u3) * inv_k
    return SpectralVectorField(np.stack([u1, u2, u3]), grid)


def streak_cos(grid: SpectralGrid, amplitude: float = 1.0) -> SpectralVectorField:
    """u = (0, amplitude cos z, 0)."""
    _, _, z = grid.coordinates()
    physical = np.zeros((3, *grid.spec.physical_shape))
    physical[1] = amplitude * np.cos(z)
    return forward_transform(grid, physical)


def mode_field(grid: SpectralGrid, k: int, eta: float, l: int, uhat: tuple[complex, complex, complex]) -> SpectralVectorField:
    """A single lattice mode (and its conjugate) carrying ``uhat``."""
    spec = grid.spec
    n = int(round(eta / spec.deta))
    if abs(n * spec.deta - eta) > 1e-9 or not -(spec.Ny // 2) < n < spec.Ny // 2:
        raise ParameterRangeError(f"eta={eta} is not a resolved lattice frequency")
    if not 0 <= k < spec.Nx // 2 or not -(spec.Nz // 2) < l < spec.Nz // 2:
        raise ParameterRangeError(f"mode ({k}, {l}) is not resolved on the grid")
    coeffs = np.zeros((3, *spec.spectral_shape), dtype=complex)
    value = np.asarray(uhat, dtype=complex)
    coeffs[:, k, n % spec.Ny, l % spec.Nz] = value
    if k == 0:
        coeffs[:, 0, (-n) % spec.Ny, (-l) % spec.Nz] = np.conj(value)
        if n == 0 and l == 0:
            coeffs[:, 0, 0, 0] = value.real
    return SpectralVectorField(coeffs, grid)
