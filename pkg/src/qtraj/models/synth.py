import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from qtraj.exceptions import ShapeError, SymmetryError


class ScalarProductSpec(BaseModel):
    """
    Weighted L2 product over [-L, L] x [-T, T]:
        <a, b> = int w0 rho_a rho_b + w1 P_a P_b + w2 E_a E_b dx dt
    optionally minus the rectangle |x| < mask_space, |t| < mask_time.
    """
    model_config = ConfigDict(frozen=True)

    w0: float = Field(1.0, ge=0)
    w1: float = Field(1.0, ge=0)
    w2: float = Field(1.0, ge=0)
    T: float = Field(..., gt=0)
    mask: bool = False
    mask_space: float = Field(0.0, ge=0, description="Half-width of the excluded strip in x")
    mask_time: float = Field(0.0, ge=0, description="Half-width of the excluded strip in t")
    ridge: float | None = Field(None, ge=0, description="None selects 1e-8 * trace(G) / dim")

    @model_validator(mode="after")
    def _check(self) -> "ScalarProductSpec":
        if self.w0 == 0 and self.w1 == 0 and self.w2 == 0:
            raise ValueError("at least one density weight must be positive")
        if self.mask and self.mask_time >= self.T:
            raise ValueError(f"mask_time={self.mask_time} must be below T={self.T}")
        return self

    @property
    def active_mask(self) -> tuple[float, float]:
        """(space, time) half-widths actually removed; zeros when masking is off."""
        if not self.mask:
            return 0.0, 0.0
        return self.mask_space, self.mask_time


class CoefficientMatrix(BaseModel):
    """Hermitian (N+1) x (N+1) complex matrix C_ij of the quantum-matrix expansion."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    values: np.ndarray

    @model_validator(mode="after")
    def _check_hermitian(self) -> "CoefficientMatrix":
        values = self.values
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise ShapeError(f"coefficient matrix must be square, got {values.shape}")
        scale = max(float(np.max(np.abs(values))) if values.size else 0.0, 1.0)
        if values.size and np.max(np.abs(values - values.conj().T)) > 1e-10 * scale:
            raise SymmetryError("coefficient matrix is not Hermitian")
        return self

    @property
    def size(self) -> int:
        return self.values.shape[0]

    @classmethod
    def from_real_vector(cls, c: np.ndarray, size: int) -> "CoefficientMatrix":
        """
        Inverse of `to_real_vector`. Order: for i <= j, (i, i) gives one real entry,
        (i, j) with i < j gives Re C_ij then Im C_ij.
        """
        c = np.asarray(c, dtype=float)
        expected = size * size
        if c.shape != (expected,):
            raise ShapeError(f"expected {expected} real coefficients, got {c.shape}")
        values = np.zeros((size, size), dtype=complex)
        pos = 0
        for i in range(size):
            values[i, i] = c[pos]
            pos += 1
            for j in range(i + 1, size):
                values[i, j] = c[pos] + 1j * c[pos + 1]
                values[j, i] = c[pos] - 1j * c[pos + 1]
                pos += 2
        return cls(values=values)

    def to_real_vector(self) -> np.ndarray:
        size = self.size
        out = np.empty(size * size)
        pos = 0
        for i in range(size):
            out[pos] = self.values[i, i].real
            pos += 1
            for j in range(i + 1, size):
                out[pos] = self.values[i, j].real
                out[pos + 1] = self.values[i, j].imag
                pos += 2
        return out


class PacketStats(BaseModel):
    """Center and width of a packet, both under rho^4 weighting."""
    model_config = ConfigDict(frozen=True)

    t: float
    x_mean: float
    sigma_x: float = Field(..., ge=0)


class ProjectionResult(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    coefficients: CoefficientMatrix
    residual: float = Field(..., ge=0, description="||G c - b|| / ||b||")
    misfit: float = Field(0.0, ge=0, description="||target - fit|| / ||target|| in the scalar-product norm")
    ridge: float = Field(..., ge=0)
    dimension: int
    gram_trace: float
    rhs_norm: float
