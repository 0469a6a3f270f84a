import math

from pydantic import BaseModel, Field, field_validator

TWO_PI = 2.0 * math.pi


class GridSpec(BaseModel):
    """Collocation counts and periods of the (x, y, z) torus.

    x and z have period 2π; the unbounded y direction is truncated to a
    periodic interval of length ``Ly``.
    """

    Nx: int = Field(..., description="Collocation points in x (streamwise)", examples=[32])
    Ny: int = Field(..., description="Collocation points in y (shear direction)", examples=[64])
    Nz: int = Field(..., description="Collocation points in z (spanwise)", examples=[32])
    Ly: float = Field(4.0 * math.pi, description="Truncation period in y", examples=[12.566370614359172])

    model_config = {
        "frozen": True,
        "json_schema_extra": {
            "examples": [
                {"Nx": 32, "Ny": 64, "Nz": 32, "Ly": 12.566370614359172}
            ]
        }
    }

    @field_validator("Nx", "Ny", "Nz")
    @classmethod
    def _even_and_large_enough(cls, value: int) -> int:
        if value < 8 or value % 2:
            raise ValueError(f"collocation counts must be even and >= 8, got {value}")
        return value

    @field_validator("Ly")
    @classmethod
    def _period_at_least_two_pi(cls, value: float) -> float:
        if not value >= TWO_PI * (1.0 - 1e-12):
            raise ValueError(f"Ly must be >= 2*pi, got {value}")
        return value

    @property
    def Lx(self) -> float:
        return TWO_PI

    @property
    def Lz(self) -> float:
        return TWO_PI

    @property
    def deta(self) -> float:
        """Lattice spacing of the y wavenumber."""
        return TWO_PI / self.Ly

    @property
    def volume(self) -> float:
        return self.Lx * self.Ly * self.Lz

    @property
    def physical_shape(self) -> tuple[int, int, int]:
        return (self.Nx, self.Ny, self.Nz)

    @property
    def spectral_shape(self) -> tuple[int, int, int]:
        return (self.Nx // 2 + 1, self.Ny, self.Nz)

    @property
    def plane_shape(self) -> tuple[int, int]:
        return (self.Ny, self.Nz)
