"""Request/response models shared by the HTTP service and the CLI."""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field

from ..model import ModelParams


class ModelIn(BaseModel):
    model_config = ConfigDict(extra="forbid")

    mu: float
    sigma: float
    q: float
    a: float
    cbar: float

    def to_params(self) -> ModelParams:
        return ModelParams(
            mu=self.mu, sigma=self.sigma, q=self.q, a=self.a, cbar=self.cbar
        )


class SolveRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    model: ModelIn
    n_steps: int = Field(default=2000, ge=2)
    stepper: Literal["euler", "heun"] = "euler"
    c_low: float = 0.0


class BoundaryOut(BaseModel):
    cbar: float
    interesting_regime: bool
    bstar: float
    zstar: Optional[float] = None
    xstar: Optional[float] = None
    xstar_absent: bool = False
    limit: Optional[float] = None
    bstar_pred: Optional[float] = None
    zstar_pred: Optional[float] = None
    xstar_pred: Optional[float] = None


class SolveResponse(BaseModel):
    boundary: BoundaryOut
    curves_csv: Optional[str] = None
    truncated: bool = False
    c_trunc: Optional[float] = None
    truncation_reason: Optional[str] = None


class VerifyRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    model: ModelIn
    curves_csv: str
    n_x: int = Field(default=400, ge=2)
    n_c: int = Field(default=200, ge=2)
    tol: Optional[float] = None


class VerifyResponse(BaseModel):
    passed: bool
    report: dict


class ValueRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    model: ModelIn
    curves_csv: str
    c: float
    x_start: float = 0.0
    x_stop: float
    x_n: int = Field(default=500, ge=2)


class ValueResponse(BaseModel):
    csv: str


class SimulateRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    model: ModelIn
    strategy: Literal["constant", "refraction", "two-curve", "lump-sum"]
    x0: float
    c0: float = 0.0
    d: Optional[float] = None  # constant strategy rate
    b: Optional[float] = None  # refraction threshold
    low: Optional[float] = None
    high: Optional[float] = None
    curves_csv: Optional[str] = None  # two-curve strategy input
    dt: float = Field(default=1e-3, gt=0.0)
    horizon: Optional[float] = None
    n_paths: int = Field(default=100_000, ge=1)
    seed: int = 0


class SimulateResponse(BaseModel):
    estimate: float
    std_error: float
    n_paths: int
    mean_ruin_time: Optional[float] = None
    fraction_ruined_by_horizon: float
    seed: int
    algorithm: str
    strategy: str
    dt: float
    horizon: float


class DetRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    mu: float
    q: float
    a: float
    cbar: float
    x: Optional[float] = None
    b: Optional[float] = None  # defaults to the optimal switch level


class DetResponse(BaseModel):
    optimal_b: Optional[float] = None
    indifference_x: float
    value: Optional[float] = None


class AsymptoticsRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    mu: float
    sigma: float
    q: float
    a: float
    cbar_grid: list[float]
    include_xstar: bool = True


class AsymptoticsResponse(BaseModel):
    csv: str


class ErrorResponse(BaseModel):
    error: str
    message: str
