"""Shared fixtures: small grids that keep every test well under a second."""

import math

import numpy as np
import pytest
from scipy import signal

from couette3d.schemas.grid import GridSpec
from couette3d.services.spectral_core import SpectralGrid


@pytest.fixture
def small_grid():
    """8 x 16 x 8 collocation points, Ly = 4 pi."""
    return SpectralGrid(GridSpec(Nx=8, Ny=16, Nz=8))


@pytest.fixture
def plane_grid():
    """A grid with a finer (y, z) plane for streak tests, Ly = 2 pi."""
    return SpectralGrid(GridSpec(Nx=8, Ny=16, Nz=16, Ly=2.0 * math.pi))


class RetainedBand:
    """
    Direct-convolution reference for products of band-limited fields.

    Coefficients are those of f = sum_n c_n e^{i n . x}, stored as a dense cube
    indexed by n + radius over the retained band 3|n| < N.
    """

    def __init__(self, shape):
        self.shape = tuple(shape)
        self.radius = tuple((n - 1) // 3 for n in self.shape)
        self._index = np.ix_(*[np.arange(-r, r + 1) for r in self.radius])

    def random_field(self, seed):
        rng = np.random.default_rng(seed)
        spectrum = np.zeros(self.shape, dtype=complex)
        spectrum[self._index] = np.fft.fftn(rng.standard_normal(self.shape))[self._index]
        return np.fft.ifftn(spectrum).real

    def cube(self, physical):
        return (np.fft.fftn(physical) / physical.size)[self._index]

    def convolve(self, a, b):
        full = signal.convolve(a, b, method="direct")
        return full[tuple(slice(r, 3 * r + 1) for r in self.radius)]

    def to_physical(self, cube):
        spectrum = np.zeros(self.shape, dtype=complex)
        spectrum[self._index] = cube
        return np.fft.ifftn(spectrum * spectrum.size).real

    def wavenumbers(self, lengths):
        axes = []
        for axis, (r, length) in enumerate(zip(self.radius, lengths)):
            shape = [1, 1, 1]
            shape[axis] = 2 * r + 1
            axes.append((2.0 * math.pi / length * np.arange(-r, r + 1)).reshape(shape))
        return axes


@pytest.fixture
def retained_band():
    return RetainedBand
