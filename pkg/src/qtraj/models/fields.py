import enum
import math

import numpy as np
from numpy.polynomial import Polynomial
from pydantic import BaseModel, ConfigDict, Field, model_validator

from qtraj.exceptions import DerivativeError, ShapeError, UnsupportedPotentialError
from qtraj.models.grid import Grid1D


class QuantumMatrixField(BaseModel):
    """
    phi(x_S, x_D) sampled on a rectangular grid, values[i, j] = phi(xs[i], xd[j]).
    The x_D grid is FFT-centered so that index count//2 sits at x_D = 0.
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    xs: Grid1D
    xd: Grid1D
    values: np.ndarray
    m: float = Field(1.0, gt=0)
    hbar: float = Field(1.0, gt=0)

    @model_validator(mode="after")
    def _check_shape(self) -> "QuantumMatrixField":
        if self.values.shape != (self.xs.count, self.xd.count):
            raise ShapeError(f"values shape {self.values.shape} does not match grid {(self.xs.count, self.xd.count)}")
        return self


class WignerField(BaseModel):
    """F(x_S, p_S) on a rectangular phase-space grid, values[i, q] = F(xs[i], p[q])."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    xs: Grid1D
    p: Grid1D
    values: np.ndarray
    m: float = Field(1.0, gt=0)
    hbar: float = Field(1.0, gt=0)

    @model_validator(mode="after")
    def _check_shape(self) -> "WignerField":
        if self.values.shape != (self.xs.count, self.p.count):
            raise ShapeError(f"values shape {self.values.shape} does not match grid {(self.xs.count, self.p.count)}")
        return self


class GeneratorRate(BaseModel):
    """
    H F for one of the phase-space generators. `time_derivative` is dF/dt = H F / (i hbar);
    it is real for a real Wigner function.
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    field: WignerField
    values: np.ndarray

    @property
    def time_derivative(self) -> np.ndarray:
        return self.values / (1j * self.field.hbar)


# ── Potentials ───────────────────────────────────────────────────────────────

class PotentialKind(str, enum.Enum):
    ZERO = "ZERO"
    LINEAR = "LINEAR"
    QUADRATIC = "QUADRATIC"
    QUARTIC = "QUARTIC"
    DELTA_BARRIER = "DELTA_BARRIER"
    TABULATED = "TABULATED"


class PotentialSpec(BaseModel):
    """
    V(x). Polynomial kinds are strength * x^degree; TABULATED interpolates
    samples (and, if given, derivative samples keyed by order).
    """
    model_config = ConfigDict(frozen=True)

    kind: PotentialKind = PotentialKind.ZERO
    strength: float = 0.0
    samples_x: tuple[float, ...] = ()
    samples_v: tuple[float, ...] = ()
    derivative_samples: dict[int, tuple[float, ...]] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _check_table(self) -> "PotentialSpec":
        if self.kind is PotentialKind.TABULATED:
            if len(self.samples_x) < 2 or len(self.samples_x) != len(self.samples_v):
                raise ValueError("tabulated potential needs matching x and V samples")
            for order, values in self.derivative_samples.items():
                if len(values) != len(self.samples_x):
                    raise ValueError(f"derivative order {order} has {len(values)} samples")
        return self

    @classmethod
    def harmonic(cls, omega0: float, m: float = 1.0) -> "PotentialSpec":
        return cls(kind=PotentialKind.QUADRATIC, strength=0.5 * m * omega0 ** 2)

    @property
    def polynomial(self) -> Polynomial | None:
        degree = {
            PotentialKind.ZERO: 0,
            PotentialKind.LINEAR: 1,
            PotentialKind.QUADRATIC: 2,
            PotentialKind.QUARTIC: 4,
        }.get(self.kind)
        if degree is None:
            return None
        coef = np.zeros(degree + 1)
        coef[degree] = 0.0 if self.kind is PotentialKind.ZERO else self.strength
        return Polynomial(coef)

    def value(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        poly = self.polynomial
        if poly is not None:
            return poly(x)
        if self.kind is PotentialKind.TABULATED:
            return np.interp(x, self.samples_x, self.samples_v)
        raise UnsupportedPotentialError("delta barrier has no pointwise value; use its strength directly")

    def derivative(self, x: np.ndarray, order: int = 1) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if order == 0:
            return self.value(x)
        poly = self.polynomial
        if poly is not None:
            return poly.deriv(order)(x)
        if self.kind is PotentialKind.TABULATED:
            if order not in self.derivative_samples:
                raise DerivativeError(f"no tabulated derivative of order {order}")
            return np.interp(x, self.samples_x, self.derivative_samples[order])
        raise UnsupportedPotentialError("delta barrier derivatives are distributions")

    @property
    def moyal_orders(self) -> list[int]:
        """Odd derivative orders >= 3 that can be nonzero (empty for polynomials up to degree 2)."""
        poly = self.polynomial
        if poly is not None:
            return [n for n in range(3, poly.degree() + 1, 2)]
        if self.kind is PotentialKind.TABULATED:
            return sorted(n for n in self.derivative_samples if n >= 3 and n % 2 == 1)
        return []


# ── Closed-form quantum-matrix states ────────────────────────────────────────

class LocalizedMatrix(BaseModel):
    """delta(x_S - x0) e^{i p0 x_D / hbar}: a point in phase space."""
    x0: float = 0.0
    p0: float = 0.0


class PointWigner(BaseModel):
    """Wigner function delta(x_S - x0) delta(p_S - p0)."""
    x0: float = 0.0
    p0: float = 0.0


class MomentumShell(BaseModel):
    """delta(p_S^2 / 2m - E): support on the two momenta +-sqrt(2mE)."""
    energy: float = Field(..., gt=0)
    m: float = Field(1.0, gt=0)

    @property
    def momenta(self) -> tuple[float, float]:
        p = math.sqrt(2.0 * self.m * self.energy)
        return -p, p


class ClassicalFan(BaseModel):
    """
    Classical free-particle phase-space density from a point source at t = 0:
    F(x, p, t) = delta(x - p t / m) g(p), g a normalized Gaussian of width sigma_p.
    """
    sigma_p: float = Field(..., gt=0)
    m: float = Field(1.0, gt=0)


class PhaseSpaceObservables(BaseModel):
    """Integrals of the diagonal densities; Q, P, E are expectation values once mass == 1."""
    mass: float
    Q: float
    P: float
    E: float
