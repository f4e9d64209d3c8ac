import numpy as np
from numpy.polynomial.legendre import leggauss
from pydantic import BaseModel, ConfigDict, Field, model_validator


class Grid1D(BaseModel):
    """Uniform grid of `count` nodes from lower to upper, both included."""
    model_config = ConfigDict(frozen=True)

    lower: float
    upper: float
    count: int = Field(..., ge=2)

    @model_validator(mode="after")
    def _check_order(self) -> "Grid1D":
        if not self.upper > self.lower:
            raise ValueError(f"upper ({self.upper}) must exceed lower ({self.lower})")
        return self

    @property
    def spacing(self) -> float:
        return (self.upper - self.lower) / (self.count - 1)

    def points(self) -> np.ndarray:
        return self.lower + self.spacing * np.arange(self.count)

    def index_of_zero(self) -> int | None:
        """Index of the node sitting at 0, if any."""
        j = -self.lower / self.spacing
        jr = int(round(j))
        if 0 <= jr < self.count and abs(j - jr) < 1e-9:
            return jr
        return None

    @classmethod
    def linspace(cls, lower: float, upper: float, count: int) -> "Grid1D":
        return cls(lower=lower, upper=upper, count=count)

    @classmethod
    def centered(cls, count: int, spacing: float) -> "Grid1D":
        """FFT-centered grid: j in [-count//2, count - count//2 - 1], so index count//2 is 0."""
        lower = -(count // 2) * spacing
        return cls(lower=lower, upper=lower + (count - 1) * spacing, count=count)

    def conjugate(self, hbar: float = 1.0) -> "Grid1D":
        """Momentum grid conjugate to this one under the discrete Fourier transform."""
        return Grid1D.centered(self.count, 2.0 * np.pi * hbar / (self.count * self.spacing))


class QuadratureRule(BaseModel):
    """Composite Gauss-Legendre rule: `panels` equal panels, `nodes` points each."""
    model_config = ConfigDict(frozen=True)

    panels: int = Field(..., ge=1)
    nodes: int = Field(..., ge=1)
    reference_nodes: tuple[float, ...] = ()
    reference_weights: tuple[float, ...] = ()

    @model_validator(mode="before")
    @classmethod
    def _fill_reference(cls, data: dict) -> dict:
        if isinstance(data, dict) and not data.get("reference_nodes") and data.get("nodes"):
            x, w = leggauss(int(data["nodes"]))
            data = {**data, "reference_nodes": tuple(x.tolist()), "reference_weights": tuple(w.tolist())}
        return data

    @model_validator(mode="after")
    def _check_tables(self) -> "QuadratureRule":
        if len(self.reference_nodes) != self.nodes or len(self.reference_weights) != self.nodes:
            raise ValueError("node and weight tables must both have `nodes` entries")
        return self

    def refined(self, factor: int = 2) -> "QuadratureRule":
        return QuadratureRule(panels=self.panels * factor, nodes=self.nodes)
