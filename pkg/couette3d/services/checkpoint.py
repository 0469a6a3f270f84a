"""
Binary checkpoints of shear-frame states.

Layout: an 8-byte magic, little-endian u64 Nx, Ny, Nz, f64 Ly, t, nu, then the
three complex128 half spectra in (k, eta, l) order.
"""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np

from couette3d.core import (
    CheckpointCorruptError,
    CheckpointVersionError,
    GridMismatchError,
    ParameterRangeError,
    get_logger,
)
from couette3d.schemas.grid import GridSpec
from couette3d.services.nonlinear_solver import SimState
from couette3d.services.spectral_core import SpectralGrid, SpectralVectorField

logger = get_logger(__name__)

MAGIC = b"CUET3D01"
HEADER_DTYPE = np.dtype(
    [
        ("magic", "S8"),
        ("nx", "<u8"),
        ("ny", "<u8"),
        ("nz", "<u8"),
        ("ly", "<f8"),
        ("t", "<f8"),
        ("nu", "<f8"),
    ]
)
COEFF_DTYPE = np.dtype("<c16")


def write_checkpoint(state: SimState, path: str | Path) -> Path:
    """Write ``state`` atomically; only states whose shear origin is t = 0 are representable."""
    field = state.uhat
    if field.frame != "shear" or field.shear_origin != 0.0:
        raise ParameterRangeError(
            f"checkpoints store shear-frame fields with origin 0, got frame={field.frame} origin={field.shear_origin}"
        )
    spec = field.grid.spec
    header = np.zeros(1, dtype=HEADER_DTYPE)
    header[0] = (MAGIC, spec.Nx, spec.Ny, spec.Nz, spec.Ly, field.time, state.nu)

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".part")
    with open(tmp, "wb") as fh:
        fh.write(header.tobytes())
        fh.write(np.ascontiguousarray(field.coeffs, dtype=COEFF_DTYPE).tobytes())
    os.replace(tmp, path)
    logger.debug(f"Checkpoint written: {path} (t={field.time:.6g})")
    return path


def read_checkpoint(path: str | Path, expected: GridSpec | None = None, grid: SpectralGrid | None = None) -> SimState:
    """
    Read a checkpoint.

    Raises CheckpointVersionError on an unknown magic, CheckpointCorruptError
    on truncation and GridMismatchError when ``expected`` (or ``grid``)
    disagrees with the stored dimensions.
    """
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < HEADER_DTYPE.itemsize:
        raise CheckpointCorruptError(str(path), f"{len(raw)} bytes is shorter than the header")
    header = np.frombuffer(raw, dtype=HEADER_DTYPE, count=1)[0]
    magic = bytes(header["magic"])
    if magic != MAGIC:
        raise CheckpointVersionError(str(path), magic)

    dims = (int(header["nx"]), int(header["ny"]), int(header["nz"]))
    try:
        spec = GridSpec(Nx=dims[0], Ny=dims[1], Nz=dims[2], Ly=float(header["ly"]))
    except ValueError as exc:
        raise CheckpointCorruptError(str(path), f"invalid grid header {dims}") from exc
    if grid is not None:
        expected = grid.spec
    if expected is not None and expected.physical_shape != spec.physical_shape:
        raise GridMismatchError(expected.physical_shape, spec.physical_shape)

    shape = (3, *spec.spectral_shape)
    count = int(np.prod(shape))
    payload = len(raw) - HEADER_DTYPE.itemsize
    if payload != count * COEFF_DTYPE.itemsize:
        raise CheckpointCorruptError(
            str(path), f"expected {count * COEFF_DTYPE.itemsize} payload bytes, found {payload}"
        )
    coeffs = np.frombuffer(raw, dtype=COEFF_DTYPE, count=count, offset=HEADER_DTYPE.itemsize).reshape(shape)
    grid = grid if grid is not None and grid.spec == spec else SpectralGrid(spec)
    field = SpectralVectorField(coeffs.astype(complex), grid, "shear", float(header["t"]), 0.0)
    return SimState(field, float(header["nu"]))
