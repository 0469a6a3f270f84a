import math
from typing import List, Literal

from pydantic import BaseModel, Field, model_validator

from couette3d.schemas.grid import GridSpec
from couette3d.schemas.params import MultiplierParams, ToyModelSwitches, ToyParams
from couette3d.utils.hashing import parameter_hash

ExperimentKind = Literal["linear", "streak", "sim3d", "toy", "multiplier-table", "coord"]
KINDS: tuple[str, ...] = ("linear", "streak", "sim3d", "toy", "multiplier-table", "coord")

# Fields that change where or how often results are written, not what they are.
NON_PHYSICAL_FIELDS = frozenset({"output_dir", "dt_out"})


class ModeSpec(BaseModel):
    """A single real-amplitude shear-frame mode; u1 follows from the constraint when k != 0."""

    k: int = Field(..., ge=0, description="Streamwise frequency", examples=[1])
    eta: float = Field(..., description="Shear direction frequency at t = 0", examples=[0.0])
    l: int = Field(0, description="Spanwise frequency", examples=[0])
    u1: float = Field(0.0, description="Streamwise amplitude, used only when k = 0")
    u2: float = Field(1.0, description="Wall-normal amplitude")
    u3: float = Field(0.0, description="Spanwise amplitude")

    model_config = {"frozen": True}

    @model_validator(mode="after")
    def _divergence_free(self):
        if self.k == 0 and abs(self.eta * self.u2 + self.l * self.u3) > 1e-12:
            raise ValueError("a k = 0 mode needs eta*u2 + l*u3 = 0")
        return self

    def uhat(self) -> tuple[complex, complex, complex]:
        if self.k == 0:
            u1 = self.u1
        else:
            u1 = -(self.eta * self.u2 + self.l * self.u3) / self.k
        return complex(u1), complex(self.u2), complex(self.u3)


class ExperimentConfig(BaseModel):
    """One reproducible experiment, read from a flat TOML file or a JSON request body."""

    kind: ExperimentKind = Field(..., description="Experiment kind", examples=["sim3d"])

    Nx: int = Field(16, description="Collocation points in x", examples=[16])
    Ny: int = Field(32, description="Collocation points in y", examples=[32])
    Nz: int = Field(16, description="Collocation points in z", examples=[16])
    Ly: float = Field(4.0 * math.pi, description="Truncation period in y")

    nu: float = Field(1e-3, ge=0.0, le=1.0, description="Inverse Reynolds number")
    eps: float = Field(1e-4, ge=0.0, description="Size of the initial perturbation")
    c0: float = Field(1.0, gt=0.0, description="Threshold constant of the regime flag")
    seed: int = Field(0, ge=0, lt=2 ** 64, description="Seed of the random initial data")

    t_start: float = Field(0.0, ge=0.0, description="Start time")
    t_end: float = Field(10.0, gt=0.0, description="End time")
    dt_out: float = Field(1.0, gt=0.0, description="Output cadence")
    dt: float | None = Field(None, gt=0.0, description="Time step; defaults to the output cadence / 10")

    initial: Literal["random", "cascade", "streak_cos", "mode"] = Field("random", description="Initial data family")
    envelope: Literal["gevrey", "bandlimited"] = Field("gevrey", description="Spectral envelope of random data")
    envelope_lambda: float = Field(1.0, ge=0.0, description="Radius of the Gevrey envelope")
    envelope_s: float = Field(0.5, gt=0.0, le=1.0, description="Index of the Gevrey envelope")
    kappa0: float = Field(4.0, gt=0.0, description="Band limit of the bandlimited envelope")
    u2_ratio: float = Field(1e-2, ge=0.0, description="||u2|| / ||u3|| of cascade data")
    mode: ModeSpec | None = Field(None, description="Single mode for linear runs")

    nonlinear: bool = Field(True, description="Keep the quadratic terms (sim3d)")
    remap: bool = Field(False, description="Remap the shear lattice at commensurate outputs")
    cfl: float = Field(0.5, gt=0.0, le=0.5, description="Courant limit of the 3D solver")
    sigma_prime: float = Field(3.5, gt=3.0, description="Sobolev order of the low-frequency diagnostics")
    checkpoint_every: int = Field(0, ge=0, description="Checkpoint every n outputs; 0 keeps only the final state")
    checkpoint_dir: str | None = Field(None, description="Existing sim3d checkpoints for the coord kind")

    etas: List[float] = Field(default_factory=list, description="Frequencies of multiplier tables and toy sweeps")
    multiplier: MultiplierParams = Field(default_factory=MultiplierParams)
    toy_alpha: int = Field(1, ge=0, description="Power of the toy enhanced dissipation damping")
    toy_k: int = Field(1, ge=1, description="Resonant frequency of the toy model")
    toy_kprime: int = Field(2, ge=1, description="Neighbouring frequency of the toy model")
    toy_l: int = Field(1, ge=0, description="Spanwise frequency of the toy model")
    switches: ToyModelSwitches = Field(default_factory=ToyModelSwitches)

    output_dir: str | None = Field(None, description="Root of run directories; defaults to COUETTE3D_OUTPUT_DIR")

    model_config = {
        "frozen": True,
        "extra": "forbid",
        "json_schema_extra": {
            "examples": [
                {
                    "kind": "sim3d",
                    "Nx": 16, "Ny": 32, "Nz": 16,
                    "nu": 1e-2, "eps": 1e-4, "seed": 7,
                    "t_end": 20.0, "dt_out": 1.0
                }
            ]
        }
    }

    @model_validator(mode="after")
    def _check_consistency(self):
        if not self.t_end > self.t_start:
            raise ValueError(f"t_end={self.t_end} must exceed t_start={self.t_start}")
        if self.dt is not None and self.dt > self.dt_out:
            raise ValueError("dt must not exceed dt_out")
        if self.initial == "mode" and self.mode is None:
            raise ValueError("initial = 'mode' needs a mode")
        if self.kind == "coord":
            if self.t_end < 1.0:
                raise ValueError("coordinate runs start at t = 1 and need t_end >= 1")
            steps = 1.0 / self.dt_out
            if abs(steps - round(steps)) > 1e-9:
                raise ValueError("coordinate runs need an output cadence that divides 1")
            if self.t_start not in (0.0, 1.0):
                raise ValueError("coordinate runs start their history at t = 0 or t = 1")
        if any(e <= 0 for e in self.etas):
            raise ValueError("etas must be positive")
        if abs(self.toy_k - self.toy_kprime) != 1:
            raise ValueError("toy_k and toy_kprime must be neighbours")
        try:
            self.grid
        except ValueError as exc:
            raise ValueError(f"invalid grid: {exc}") from exc
        return self

    @property
    def grid(self) -> GridSpec:
        return GridSpec(Nx=self.Nx, Ny=self.Ny, Nz=self.Nz, Ly=self.Ly)

    @property
    def time_step(self) -> float:
        return self.dt if self.dt is not None else self.dt_out / 10.0

    @property
    def below_threshold(self) -> bool:
        return self.eps <= self.c0 * self.nu

    @property
    def regime(self) -> str:
        return "below-threshold" if self.below_threshold else "above-threshold"

    @property
    def parameter_hash(self) -> str:
        physical = self.model_dump(mode="json", exclude=set(NON_PHYSICAL_FIELDS))
        return parameter_hash(physical)

    def toy_params(self, eta: float) -> ToyParams:
        return ToyParams(
            eps=self.eps,
            c0=self.c0,
            nu=self.nu,
            alpha=self.toy_alpha,
            k=self.toy_k,
            kprime=self.toy_kprime,
            eta=eta,
            l=self.toy_l,
            switches=self.switches,
        )


class ArtifactInfo(BaseModel):
    filename: str = Field(..., description="Artifact file name", examples=["timeseries.csv"])
    file_url: str = Field(..., description="URL to download the artifact", examples=["/api/v1/experiments/download/sim3d_0123456789ab_001/timeseries.csv"])
    file_size: int = Field(..., description="Size in bytes", examples=[4096])


class RunResponse(BaseModel):
    run_id: str = Field(..., description="Run directory name", examples=["sim3d_0123456789ab_001"])
    kind: ExperimentKind = Field(..., description="Experiment kind")
    parameter_hash: str = Field(..., description="SHA-256 of the physical parameters")
    regime: str = Field(..., description="below-threshold when eps <= c0 * nu", examples=["below-threshold"])
    artifacts: List[ArtifactInfo] = Field(default_factory=list)
    fits: dict = Field(default_factory=dict, description="Fitted exponents and constants")
