import enum
import math

from pydantic import BaseModel, ConfigDict, Field, model_validator


class Parity(str, enum.Enum):
    EVEN = "EVEN"
    ODD = "ODD"


class Units(BaseModel):
    """Mass, hbar and barrier strength; the box problem is solved in these units."""
    model_config = ConfigDict(frozen=True)

    m: float = Field(1.0, gt=0)
    hbar: float = Field(1.0, gt=0)
    V0: float = Field(1.0, gt=0)

    @property
    def coupling(self) -> float:
        """m V0 / hbar^2, the inverse length set by the barrier."""
        return self.m * self.V0 / self.hbar ** 2


class ModeSolution(BaseModel):
    """
    One eigenmode of the box [-L, L] with a delta barrier at 0.
    Even modes: f = cos(k|x| - phi). Odd modes: f = sin(kx), phi = 0.
    """
    model_config = ConfigDict(frozen=True)

    n: int = Field(..., ge=0)
    parity: Parity
    k: float = Field(..., gt=0)
    phi: float = Field(..., ge=0, le=math.pi / 2)
    omega: float = Field(..., gt=0, description="hbar k^2 / 2m")
    scale: float = Field(1.0, description="Per-mode amplitude; modes are left unnormalized by default")

    @property
    def phase(self) -> float:
        """theta in f(u) = cos(k u - theta) for u >= 0."""
        return self.phi if self.parity is Parity.EVEN else 0.5 * math.pi

    @property
    def mirror_sign(self) -> float:
        """f(-u) = mirror_sign * f(u)."""
        return 1.0 if self.parity is Parity.EVEN else -1.0


class BasisSet(BaseModel):
    model_config = ConfigDict(frozen=True)

    L: float = Field(..., gt=0)
    units: Units = Field(default_factory=Units)
    modes: tuple[ModeSolution, ...]

    @model_validator(mode="after")
    def _check_order(self) -> "BasisSet":
        ks = [mode.k for mode in self.modes]
        if any(b <= a for a, b in zip(ks, ks[1:])):
            raise ValueError("mode wavenumbers must be strictly increasing")
        if any(mode.n != i for i, mode in enumerate(self.modes)):
            raise ValueError("modes must be indexed 0..N in order")
        return self

    @property
    def N(self) -> int:
        return len(self.modes) - 1

    @property
    def k_max(self) -> float:
        return self.modes[-1].k
