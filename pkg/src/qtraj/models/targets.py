import enum
import math

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from qtraj.exceptions import ShapeError


class MollifierKind(str, enum.Enum):
    COS4 = "cos4"
    GAUSSIAN = "gaussian"


class TargetKind(str, enum.Enum):
    REFLECTED = "reflected"
    TRANSMITTED = "transmitted"
    NAIVE_TRANSMITTED = "naive-transmitted"
    FREE = "free"


# Standard deviation of the unit-width cos4 bump; the Gaussian kind shares it.
COS4_SIGMA = math.sqrt(math.pi ** 2 / 12.0 - 5.0 / 8.0)


class Mollifier(BaseModel):
    """
    Smooth compact bump of unit mass.
    COS4: (8 / (3 pi dx)) cos^4(x / dx) on |x| < pi dx / 2, zero elsewhere.
    GAUSSIAN: normal density with the same second moment.
    """
    model_config = ConfigDict(frozen=True)

    kind: MollifierKind = MollifierKind.COS4
    width: float = Field(..., gt=0, description="dx")

    @property
    def sigma(self) -> float:
        return COS4_SIGMA * self.width

    @property
    def support_half_width(self) -> float:
        if self.kind is MollifierKind.COS4:
            return 0.5 * math.pi * self.width
        # Gaussian tails below 1e-14 of the peak
        return 8.0 * self.sigma

    def scaled(self, factor: float) -> "Mollifier":
        return Mollifier(kind=self.kind, width=self.width * factor)


class TargetTrajectory(BaseModel):
    """A prescribed classical-looking density triple: one packet, one speed, one scenario."""
    model_config = ConfigDict(frozen=True)

    kind: TargetKind = TargetKind.REFLECTED
    v: float = Field(1.0, gt=0)
    mollifier: Mollifier
    g1: Mollifier | None = Field(None, description="Counterterm profile multiplying delta(vt)")
    g2: Mollifier | None = Field(None, description="Counterterm profile multiplying delta'(vt)")
    m: float = Field(1.0, gt=0)
    hbar: float = Field(1.0, gt=0)
    V0: float = Field(1.0, gt=0)

    @model_validator(mode="before")
    @classmethod
    def _default_counterterms(cls, data: dict) -> dict:
        if isinstance(data, dict) and data.get("mollifier") is not None:
            data = {**data}
            for name in ("g1", "g2"):
                if data.get(name) is None:
                    data[name] = data["mollifier"]
        return data

    @property
    def time_mollifier(self) -> Mollifier:
        """Smoothing of delta(vt): same shape, width dx / v in time."""
        return self.mollifier.scaled(1.0 / self.v)


class DensityTriple(BaseModel):
    """
    rho, P, E sampled on x (rows) and times (columns), plus optional
    hierarchy components phi1..phi3 and the pure-state interference term.
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    x: np.ndarray
    times: np.ndarray
    rho: np.ndarray
    momentum: np.ndarray
    energy: np.ndarray
    phi1: np.ndarray | None = None
    phi2: np.ndarray | None = None
    phi3: np.ndarray | None = None
    interference: np.ndarray | None = None
    m: float = Field(1.0, gt=0)
    hbar: float = Field(1.0, gt=0)

    @model_validator(mode="after")
    def _check_shapes(self) -> "DensityTriple":
        shape = (np.size(self.x), np.size(self.times))
        for name in ("rho", "momentum", "energy", "phi1", "phi2", "phi3", "interference"):
            value = getattr(self, name)
            if value is not None and np.shape(value) != shape:
                raise ShapeError(f"{name} has shape {np.shape(value)}, expected {shape}")
        return self

    @property
    def hierarchy(self) -> list[np.ndarray | None]:
        """[phi0, phi1, phi2, phi3] with phi0 = rho."""
        return [self.rho, self.phi1, self.phi2, self.phi3]
