import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from qtraj.exceptions import DomainError, ShapeError


class TwoParticleField(BaseModel):
    """
    The slices of a two-particle quantum matrix that carry single-particle physics:
      diag[t, i, j] = phi(x1_i, x2_j, xD = 0)
      d1[t, i, j]   = d phi / d x1D at xD = 0
      d2[t, i, j]   = d phi / d x2D at xD = 0
    A single snapshot is stored with one time entry.
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    x1: np.ndarray
    x2: np.ndarray
    times: np.ndarray
    diag: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    m1: float = Field(1.0, gt=0)
    m2: float = Field(2.0, gt=0)
    hbar: float = Field(1.0, gt=0)

    @model_validator(mode="after")
    def _check(self) -> "TwoParticleField":
        if self.m1 == self.m2:
            raise DomainError("particle masses must differ; equal masses need the symmetrized treatment")
        shape = (np.size(self.times), np.size(self.x1), np.size(self.x2))
        for name in ("diag", "d1", "d2"):
            if np.shape(getattr(self, name)) != shape:
                raise ShapeError(f"{name} has shape {np.shape(getattr(self, name))}, expected {shape}")
        return self


class SeparabilityResiduals(BaseModel):
    t: float
    r0: float = Field(..., ge=0, description="Rank-one defect of the diagonal slice")
    r1: float = Field(..., ge=0, description="Defect of particle-1 momentum factorization")
    r2: float = Field(..., ge=0, description="Defect of particle-2 momentum factorization")

    @property
    def worst(self) -> float:
        return max(self.r0, self.r1, self.r2)


class TwoParticleObservables(BaseModel):
    t: float
    Q: float = Field(..., description="Sum of particle mean positions")
    P: float = Field(..., description="Sum of particle momenta")
    Q1: float
    Q2: float
    P1: float
    P2: float
    sigma1: float = Field(..., ge=0)
    sigma2: float = Field(..., ge=0)
