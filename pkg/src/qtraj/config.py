import math
from enum import Enum
from pathlib import Path

from pydantic import BaseModel, Field, model_validator
from pydantic_settings import (
    BaseSettings,
    PydanticBaseSettingsSource,
    SettingsConfigDict,
    TomlConfigSettingsSource,
)

from qtraj.exceptions import ConfigError
from qtraj.models.targets import MollifierKind, TargetKind


class RuntimeSettings(BaseSettings):
    model_config = SettingsConfigDict(env_file=".env", env_file_encoding="utf-8", extra="ignore", populate_by_name=True,)

    # Worker pool for Gram assembly; results never depend on it
    threads: int = Field(1, alias="QTRAJ_THREADS", ge=1)
    debug: bool = Field(False, alias="QTRAJ_DEBUG")


settings = RuntimeSettings()


# ── Run configuration (TOML file + CLI overrides) ─────────────────────────────

class Subcommand(str, Enum):
    BASIS = "basis"
    WIGNER = "wigner"
    TARGET = "target"
    SYNTHESIZE = "synthesize"
    VERIFY = "verify"
    MIXTURE = "mixture"
    TWO_PARTICLE = "two-particle"


class WignerState(str, Enum):
    HO_GROUND = "ho-ground"
    HO_CLASSICAL = "ho-classical"
    FREE_GAUSSIAN = "free-gaussian"
    FREE_PLANE = "free-plane"
    FREE_POINT = "free-point"


class UnitsBlock(BaseModel):
    m: float = Field(1.0, gt=0, description="Particle mass")
    hbar: float = Field(1.0, gt=0, description="Reduced Planck constant")
    V0: float = Field(1.0, gt=0, description="Delta-barrier strength")


class PhysicsBlock(BaseModel):
    L: float = Field(40.0, gt=0, description="Box half-width")
    N: int = Field(40, ge=1, description="Highest mode index")
    dx: float = Field(3.0, gt=0, description="Packet width")
    v: float = Field(1.0, gt=0, description="Packet speed")
    omega0: float = Field(1.0, gt=0, description="Oscillator frequency")
    dx0: float = Field(1.0, gt=0, description="Initial Gaussian width")
    k: float = Field(1.0, gt=0, description="Stationary wavenumber")
    p0: float = Field(0.0, description="Gaussian mean momentum")
    E0: float = Field(0.5, ge=0, description="Classical oscillator energy")
    sigma_p: float = Field(1.0, gt=0, description="Momentum spread of the free point source")
    m1: float = Field(1.0, gt=0)
    m2: float = Field(2.0, gt=0)


class ScalarProductBlock(BaseModel):
    # None means "derive from units and physics" (see synth.default_scalar_product)
    w0: float | None = Field(None, ge=0)
    w1: float | None = Field(None, ge=0)
    w2: float | None = Field(None, ge=0)
    T: float | None = Field(None, gt=0)
    mask: bool | None = None
    ridge: float | None = Field(None, ge=0)


class GridBlock(BaseModel):
    nx: int = Field(801, ge=5, description="Spatial samples for sampled artifacts")
    nt: int = Field(81, ge=3, description="Time samples for series artifacts")
    n_phase: int = Field(512, ge=8, description="Phase-space samples per axis")
    span_sigmas: float = Field(10.0, gt=0, description="Phase-space half-width in units of sigma")
    nodes_per_panel: int = Field(8, ge=2, description="Gauss-Legendre nodes per panel")


class RunConfig(BaseSettings):
    """
    One run of the CLI.
    Sources, highest priority first: explicit overrides (CLI flags), TOML file.
    """
    model_config = SettingsConfigDict(extra="forbid")

    subcommand: Subcommand = Subcommand.SYNTHESIZE
    units: UnitsBlock = Field(default_factory=UnitsBlock)
    physics: PhysicsBlock = Field(default_factory=PhysicsBlock)
    scalar_product: ScalarProductBlock = Field(default_factory=ScalarProductBlock)
    grid: GridBlock = Field(default_factory=GridBlock)

    target: TargetKind = TargetKind.REFLECTED
    mollifier: MollifierKind = MollifierKind.COS4
    state: WignerState = WignerState.HO_GROUND
    time: float = 0.0
    snapshot_times: list[float] | None = None
    input_path: Path | None = None
    output_dir: Path = Path("artifacts")
    seed: int = 0

    @classmethod
    def settings_customise_sources(
            cls,
            settings_cls: type[BaseSettings],
            init_settings: PydanticBaseSettingsSource,
            env_settings: PydanticBaseSettingsSource,
            dotenv_settings: PydanticBaseSettingsSource,
            file_secret_settings: PydanticBaseSettingsSource,
    ) -> tuple[PydanticBaseSettingsSource, ...]:
        return init_settings, TomlConfigSettingsSource(settings_cls)

    @model_validator(mode="after")
    def _check_time_window(self) -> "RunConfig":
        T = self.scalar_product.T
        if T is None or self.subcommand not in (Subcommand.TARGET, Subcommand.SYNTHESIZE):
            return self
        p = self.physics
        limit = (p.L - 0.5 * math.pi * p.dx) / p.v
        if T > limit + 1e-12:
            raise ValueError(
                f"scalar_product.T={T} exceeds (L - pi*dx/2)/v = {limit}: the packet would leave the box"
            )
        return self

    @property
    def window(self) -> float:
        """Time half-window; defaults to the longest one keeping the packet inside the box."""
        if self.scalar_product.T is not None:
            return self.scalar_product.T
        p = self.physics
        return (p.L - 0.5 * math.pi * p.dx) / p.v


def load_run_config(path: Path | None = None, overrides: dict | None = None) -> RunConfig:
    """Build a RunConfig from an optional TOML file, with `overrides` (nested dict) on top."""
    if path is not None and not Path(path).is_file():
        raise ConfigError(f"config file not found: {path}")

    class FileBackedRunConfig(RunConfig):
        model_config = SettingsConfigDict(toml_file=path, extra="forbid")

    return FileBackedRunConfig(**(overrides or {}))
