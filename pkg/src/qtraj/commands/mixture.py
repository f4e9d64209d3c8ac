import logging

import numpy as np

from qtraj.commands.common import space_grid, units_of
from qtraj.config import RunConfig
from qtraj.dao.artifact_store import write_csv
from qtraj.models.report import PhysicsReport
from qtraj.models.targets import Mollifier
from qtraj.services.basis import scattering_amplitudes
from qtraj.services.manifest_service import record_artifact, record_event, stage
from qtraj.services.targets import mixture_density, stationary_pure_densities
from qtraj.services.verify import interference_contrast
from qtraj.states.run_state import RunState

logger = logging.getLogger(__name__)

PLATEAU_TOL = 1e-6


def register(subparsers, parents) -> None:
    parser = subparsers.add_parser("mixture", parents=parents, help="Stationary scattering mixture versus the pure state")
    parser.set_defaults(handler=run)


def run(config: RunConfig, state: RunState) -> PhysicsReport:
    units = units_of(config)
    k, dx = config.physics.k, config.physics.dx
    x = space_grid(config)
    with stage(state, "mixture"):
        mixture = mixture_density(k, x, dx, units, kind=config.mollifier, nodes_per_panel=config.grid.nodes_per_panel)
        pure = stationary_pure_densities(k, x, units)
    A_R, A_T = scattering_amplitudes(k, units)
    r2, t2 = abs(A_R) ** 2, abs(A_T) ** 2
    record_event(state, "MIXTURE_INTEGRATED", "mixture", detail={"k": k, "reflection": r2, "transmission": t2})

    record_artifact(state, write_csv(config.output_dir, "mixture.csv", {
        "x": x,
        "rho_mixture": mixture.rho[:, 0],
        "momentum_mixture": mixture.momentum[:, 0],
        "energy_mixture": mixture.energy[:, 0],
        "rho_pure": pure.rho[:, 0],
        "momentum_pure": pure.momentum[:, 0],
        "energy_pure": pure.energy[:, 0],
        "interference": pure.interference[:, 0],
    }))

    # away from the barrier strip where the packets overlap their mirror images
    clear = np.abs(x) > Mollifier(kind=config.mollifier, width=dx).support_half_width
    left, right = clear & (x < 0), clear & (x > 0)
    hk = units.hbar * k
    kinetic = hk * hk / (2.0 * units.m)
    report = PhysicsReport()
    for name, column, expected_left, expected_right in (
            ("mixture_density", mixture.rho[:, 0], 1.0 + r2, t2),
            ("mixture_momentum", mixture.momentum[:, 0], t2 * hk, t2 * hk),
            ("mixture_energy", mixture.energy[:, 0], (1.0 + r2) * kinetic, t2 * kinetic),
    ):
        deviation = max(
            float(np.max(np.abs(column[left] - expected_left))) if np.any(left) else 0.0,
            float(np.max(np.abs(column[right] - expected_right))) if np.any(right) else 0.0,
        )
        report.add(name, deviation, PLATEAU_TOL)
    # pure-state fringes the mixture plateaus average out
    contrast = interference_contrast(pure.interference[left, 0], PLATEAU_TOL)
    report.checks.append(contrast)
    record_event(state, "PURE_INTERFERENCE", "mixture", detail=contrast.detail)
    return report
