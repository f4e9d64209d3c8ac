"""
Pieces shared by the subcommands: the common flag set, flag -> config
override mapping, and builders for the objects every pipeline needs.
"""
import argparse
from typing import Any

import numpy as np

from qtraj.config import RunConfig, WignerState
from qtraj.models.basis import Units
from qtraj.models.synth import ScalarProductSpec
from qtraj.models.targets import DensityTriple, Mollifier, MollifierKind, TargetKind, TargetTrajectory
from qtraj.services.synth import default_scalar_product

# flag dest -> (config block or None, field)
FLAG_FIELDS: dict[str, tuple[str | None, str]] = {
    "m": ("units", "m"),
    "hbar": ("units", "hbar"),
    "V0": ("units", "V0"),
    "L": ("physics", "L"),
    "N": ("physics", "N"),
    "dx": ("physics", "dx"),
    "v": ("physics", "v"),
    "omega0": ("physics", "omega0"),
    "dx0": ("physics", "dx0"),
    "k": ("physics", "k"),
    "p0": ("physics", "p0"),
    "E0": ("physics", "E0"),
    "sigma_p": ("physics", "sigma_p"),
    "m1": ("physics", "m1"),
    "m2": ("physics", "m2"),
    "w0": ("scalar_product", "w0"),
    "w1": ("scalar_product", "w1"),
    "w2": ("scalar_product", "w2"),
    "T": ("scalar_product", "T"),
    "mask": ("scalar_product", "mask"),
    "ridge": ("scalar_product", "ridge"),
    "nx": ("grid", "nx"),
    "nt": ("grid", "nt"),
    "n_phase": ("grid", "n_phase"),
    "span_sigmas": ("grid", "span_sigmas"),
    "nodes_per_panel": ("grid", "nodes_per_panel"),
    "target": (None, "target"),
    "mollifier": (None, "mollifier"),
    "state": (None, "state"),
    "time": (None, "time"),
    "snapshot_times": (None, "snapshot_times"),
    "input_path": (None, "input_path"),
    "output_dir": (None, "output_dir"),
    "seed": (None, "seed"),
}


def common_parser() -> argparse.ArgumentParser:
    """Parent parser with one flag per RunConfig field; unset flags leave the config untouched."""
    parser = argparse.ArgumentParser(add_help=False)
    parser.add_argument("--config", type=str, default=None, help="TOML run configuration")
    parser.add_argument("--verbose", action="store_true", help="DEBUG logging")

    units = parser.add_argument_group("units")
    for name in ("m", "hbar", "V0"):
        units.add_argument(f"--{name}", type=float, default=None)

    physics = parser.add_argument_group("physics")
    for name in ("L", "dx", "v", "omega0", "dx0", "k", "p0", "E0", "sigma-p", "m1", "m2"):
        physics.add_argument(f"--{name}", type=float, default=None)
    physics.add_argument("--N", type=int, default=None)

    product = parser.add_argument_group("scalar product")
    for name in ("w0", "w1", "w2", "T", "ridge"):
        product.add_argument(f"--{name}", type=float, default=None)
    product.add_argument("--mask", action=argparse.BooleanOptionalAction, default=None)

    grid = parser.add_argument_group("grid")
    for name in ("nx", "nt", "n-phase", "nodes-per-panel"):
        grid.add_argument(f"--{name}", type=int, default=None)
    grid.add_argument("--span-sigmas", type=float, default=None)

    run = parser.add_argument_group("run")
    run.add_argument("--target", choices=[kind.value for kind in TargetKind], default=None)
    run.add_argument("--mollifier", choices=[kind.value for kind in MollifierKind], default=None)
    run.add_argument("--state", choices=[state.value for state in WignerState], default=None)
    run.add_argument("--time", type=float, default=None)
    run.add_argument("--snapshot-times", type=float, nargs="+", default=None)
    run.add_argument("--input", dest="input_path", type=str, default=None)
    run.add_argument("--output-dir", type=str, default=None)
    run.add_argument("--seed", type=int, default=None)
    return parser


def overrides_from_args(args: argparse.Namespace) -> dict[str, Any]:
    overrides: dict[str, Any] = {"subcommand": args.subcommand}
    for dest, (block, field) in FLAG_FIELDS.items():
        value = getattr(args, dest, None)
        if value is None:
            continue
        if block is None:
            overrides[field] = value
        else:
            overrides.setdefault(block, {})[field] = value
    return overrides


# ── Builders ─────────────────────────────────────────────────────────────────

def units_of(config: RunConfig) -> Units:
    return Units(m=config.units.m, hbar=config.units.hbar, V0=config.units.V0)


def target_of(config: RunConfig, kind: TargetKind | None = None) -> TargetTrajectory:
    return TargetTrajectory(
        kind=kind or config.target,
        v=config.physics.v,
        mollifier=Mollifier(kind=config.mollifier, width=config.physics.dx),
        m=config.units.m,
        hbar=config.units.hbar,
        V0=config.units.V0,
    )


def scalar_product_of(config: RunConfig) -> ScalarProductSpec:
    """Unset mask follows the target: only transmitted runs cut out the barrier strip."""
    block = config.scalar_product
    mask = block.mask if block.mask is not None else config.target is TargetKind.TRANSMITTED
    return default_scalar_product(
        units_of(config),
        v=config.physics.v,
        T=config.window,
        dx=config.physics.dx,
        mask=mask,
        ridge=block.ridge,
        w0=block.w0,
        w1=block.w1,
        w2=block.w2,
    )


def space_grid(config: RunConfig) -> np.ndarray:
    L = config.physics.L
    return np.linspace(-L, L, config.grid.nx)


def time_grid(config: RunConfig) -> np.ndarray:
    T = config.window
    return np.linspace(-T, T, config.grid.nt)


def snapshot_times(config: RunConfig) -> np.ndarray:
    if config.snapshot_times:
        return np.asarray(config.snapshot_times, dtype=float)
    T = config.window
    return np.array([-0.5 * T, 0.0, 0.5 * T])


STENCIL_POINTS = 7
# stencil spacing in units of dx / v
STENCIL_STEP = 0.02


def stencil_times(config: RunConfig, centres: np.ndarray) -> np.ndarray:
    """
    STENCIL_POINTS evenly spaced times around each centre, centres ascending.
    Centres closer than one stencil span to the previous kept one are dropped.
    """
    step = STENCIL_STEP * config.physics.dx / config.physics.v
    span = step * STENCIL_POINTS
    kept: list[float] = []
    for centre in np.unique(np.asarray(centres, dtype=float)):
        if not kept or centre - kept[-1] > span:
            kept.append(float(centre))
    offsets = step * (np.arange(STENCIL_POINTS) - STENCIL_POINTS // 2)
    return (np.asarray(kept)[:, None] + offsets).ravel()


def select_times(triple: DensityTriple, keep: np.ndarray) -> DensityTriple:
    update = {"times": triple.times[keep]}
    for name in ("rho", "momentum", "energy", "phi1", "phi2", "phi3", "interference"):
        value = getattr(triple, name)
        if value is not None:
            update[name] = value[:, keep]
    return triple.model_copy(update=update)


def long_table(x: np.ndarray, times: np.ndarray, **fields: np.ndarray) -> dict[str, np.ndarray]:
    """(nx, nt) fields to long CSV columns ordered by t, then x."""
    X, T = np.meshgrid(x, times, indexing="ij")
    columns = {"t": T.T.ravel(), "x": X.T.ravel()}
    for name, values in fields.items():
        columns[name] = np.asarray(values).T.ravel()
    return columns


def hierarchy_columns(x: np.ndarray, triple: DensityTriple) -> dict[str, np.ndarray]:
    """Long-table columns of a triple with its hierarchy (phi1, phi3 imaginary, phi2 real)."""
    return long_table(
        x, triple.times,
        rho=triple.rho,
        momentum=triple.momentum,
        energy=triple.energy,
        phi1_im=np.imag(triple.phi1),
        phi2_re=np.real(triple.phi2),
        phi3_im=np.imag(triple.phi3),
    )
