from pydantic import BaseModel, Field, model_validator


class MultiplierParams(BaseModel):
    """Parameters of the Gevrey norms and their multipliers."""

    s: float = Field(0.6, gt=0.5, lt=1.0, description="Gevrey index, norms are Gevrey-1/s")
    lambda0: float = Field(1.0, gt=0.0, description="Initial Gevrey radius")
    lambda_prime: float = Field(0.1, gt=0.0, description="Final Gevrey radius")
    delta_lambda: float = Field(0.05, ge=0.0, description="Decay rate of the Gevrey radius")
    sigma: float = Field(90.0, description="Sobolev correction of the high norms")
    kappa: float = Field(4.0, gt=2.0, description="Strength of the resonance weight")
    alpha: int = Field(10, ge=10, description="Power of the dissipation clock")
    beta: float = Field(37.0, description="Sobolev index of the enhanced dissipation norms")
    gamma: float = Field(80.0, description="Sobolev index of the intermediate norms")
    delta1: float = Field(0.5, gt=0.0, lt=1.0, description="Low frequency decay exponent")
    mu: float | None = Field(None, gt=0.0, description="Gevrey-2 compensation, calibrated when omitted")
    nu: float = Field(1e-3, gt=0.0, le=1.0, description="Inverse Reynolds number")

    model_config = {
        "frozen": True,
        "json_schema_extra": {
            "examples": [
                {"s": 0.6, "lambda0": 1.0, "lambda_prime": 0.1, "delta_lambda": 0.05, "kappa": 4.0, "nu": 1e-3}
            ]
        }
    }

    @model_validator(mode="after")
    def _check_orderings(self):
        if not self.lambda0 > self.lambda_prime:
            raise ValueError("lambda0 must exceed lambda_prime")
        if not self.beta > 3 * self.alpha + 6:
            raise ValueError(f"beta must exceed 3*alpha+6 = {3 * self.alpha + 6}")
        if not self.gamma > self.beta + 3 * self.alpha + 12:
            raise ValueError(f"gamma must exceed beta+3*alpha+12 = {self.beta + 3 * self.alpha + 12}")
        if not self.sigma > self.gamma + 6:
            raise ValueError(f"sigma must exceed gamma+6 = {self.gamma + 6}")

        # Imported here: the multiplier service depends on this module.
        from couette3d.services.multipliers import lambda_at_infinity

        floor = 0.5 * (self.lambda0 + self.lambda_prime)
        if not lambda_at_infinity(self) > floor:
            raise ValueError(
                f"delta_lambda={self.delta_lambda} lets the Gevrey radius fall below {floor}"
            )
        return self


class ToyModelSwitches(BaseModel):
    """Coupling switches of the toy model; all on gives the final model."""

    nonresonant: bool = Field(True, description="Couple the neighbouring mode k' to mode k")
    zero_modes: bool = Field(True, description="Force the x-averaged amplitudes")
    stretching: bool = Field(True, description="Keep the linear stretching kernel of Q3_k")
    dissipation: bool = Field(True, description="Keep the viscous damping terms")

    model_config = {"frozen": True}


class ToyParams(BaseModel):
    """Parameters of the six-amplitude resonance toy model."""

    eps: float = Field(1e-4, ge=0.0, description="Size of the initial disturbance")
    c0: float = Field(1.0, ge=0.0, description="Size of the streak")
    nu: float = Field(1e-3, ge=0.0, description="Inverse Reynolds number")
    alpha: int = Field(1, ge=0, description="Power of the enhanced dissipation damping")
    k: int = Field(1, ge=1, description="Resonant streamwise frequency")
    kprime: int = Field(2, ge=1, description="Neighbouring streamwise frequency")
    eta: float = Field(50.0, gt=0.0, description="Shear direction frequency")
    l: int = Field(1, ge=0, description="Spanwise frequency")
    switches: ToyModelSwitches = Field(default_factory=ToyModelSwitches)

    model_config = {
        "frozen": True,
        "json_schema_extra": {
            "examples": [
                {"eps": 1e-4, "c0": 1.0, "nu": 1e-3, "alpha": 1, "k": 1, "kprime": 2, "eta": 50.0, "l": 1}
            ]
        }
    }

    @model_validator(mode="after")
    def _neighbouring_frequencies(self):
        if abs(self.k - self.kprime) != 1:
            raise ValueError("k and kprime must be neighbours (|k - kprime| = 1)")
        return self

    @property
    def below_threshold(self) -> bool:
        return self.eps <= self.c0 * self.nu
