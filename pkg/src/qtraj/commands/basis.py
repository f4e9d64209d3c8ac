import logging

import numpy as np

from qtraj.commands.common import units_of
from qtraj.config import RunConfig
from qtraj.dao.artifact_store import write_csv
from qtraj.models.report import PhysicsReport
from qtraj.services.basis import build_basis, overlap_matrix, scattering_amplitudes
from qtraj.services.manifest_service import record_artifact, record_event, stage
from qtraj.states.run_state import RunState

logger = logging.getLogger(__name__)

ORTHOGONALITY_TOL = 1e-8
SCATTERING_TOL = 1e-12


def register(subparsers, parents) -> None:
    parser = subparsers.add_parser("basis", parents=parents, help="Solve and tabulate the delta-barrier eigenbasis")
    parser.set_defaults(handler=run)


def run(config: RunConfig, state: RunState) -> PhysicsReport:
    units = units_of(config)
    run_dir = config.output_dir
    with stage(state, "basis"):
        basis = build_basis(config.physics.N, config.physics.L, units)
    record_event(state, "BASIS_SOLVED", "basis", detail={"modes": len(basis.modes), "k_max": basis.k_max})

    record_artifact(state, write_csv(run_dir, "basis.csv", {
        "n": [mode.n for mode in basis.modes],
        "parity": [mode.parity.value for mode in basis.modes],
        "k": [mode.k for mode in basis.modes],
        "phi": [mode.phi for mode in basis.modes],
        "omega": [mode.omega for mode in basis.modes],
    }))

    report = PhysicsReport()
    with stage(state, "overlaps"):
        S = overlap_matrix(basis)
    norms = np.sqrt(np.diag(S))
    off = np.abs(S - np.diag(np.diag(S))) / np.outer(norms, norms)
    report.add("orthogonality", float(np.max(off)) if off.size else 0.0, ORTHOGONALITY_TOL)

    A_R, A_T = scattering_amplitudes(config.physics.k, units)
    report.add(
        "scattering_unitarity",
        abs(abs(A_R) ** 2 + abs(A_T) ** 2 - 1.0),
        SCATTERING_TOL,
        transmission=abs(A_T) ** 2,
        reflection=abs(A_R) ** 2,
    )
    return report
