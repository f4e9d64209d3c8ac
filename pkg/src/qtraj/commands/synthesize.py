import logging

import numpy as np

from qtraj.commands.common import (
    hierarchy_columns,
    scalar_product_of,
    snapshot_times,
    space_grid,
    stencil_times,
    target_of,
    time_grid,
    units_of,
)
from qtraj.config import RunConfig, settings
from qtraj.dao.artifact_store import write_csv
from qtraj.models.report import PhysicsReport
from qtraj.models.targets import TargetKind
from qtraj.services.basis import build_basis
from qtraj.services.manifest_service import record_artifact, record_event, stage
from qtraj.services.synth import density_totals, packet_series, project_target, reconstruct, reconstruct_hierarchy
from qtraj.services.verify import localization_report, trajectory_properties
from qtraj.states.run_state import RunState

logger = logging.getLogger(__name__)


def register(subparsers, parents) -> None:
    parser = subparsers.add_parser("synthesize", parents=parents, help="Fit a quantum trajectory to a target in the eigenbasis")
    parser.set_defaults(handler=run)


def run(config: RunConfig, state: RunState) -> PhysicsReport:
    units = units_of(config)
    tt = target_of(config)
    spec = scalar_product_of(config)

    with stage(state, "basis"):
        basis = build_basis(config.physics.N, config.physics.L, units)
    with stage(state, "projection"):
        result = project_target(tt, basis, spec, config.grid.nodes_per_panel, threads=settings.threads)
    record_event(state, "PROJECTED", tt.kind.value, detail={
        "dimension": result.dimension,
        "ridge": result.ridge,
        "residual": result.residual,
        "misfit": result.misfit,
        "rhs_norm": result.rhs_norm,
        "scalar_product": spec.model_dump(mode="json"),
    })

    C = result.coefficients.values
    i, j = np.triu_indices(C.shape[0])
    record_artifact(state, write_csv(config.output_dir, "coefficients.csv", {
        "i": i, "j": j, "re": C[i, j].real, "im": C[i, j].imag,
    }))

    x, times = space_grid(config), time_grid(config)
    with stage(state, "reconstruction"):
        series = reconstruct(result.coefficients, basis, x, times)
        snapshots = reconstruct_hierarchy(result.coefficients, basis, x, snapshot_times(config))
        hierarchy = reconstruct_hierarchy(result.coefficients, basis, x, stencil_times(config, snapshot_times(config)))
    stats = packet_series(series)
    totals = density_totals(series)
    record_artifact(state, write_csv(config.output_dir, "series.csv", {
        "t": times,
        "mass": totals["mass"],
        "momentum": totals["momentum"],
        "energy": totals["energy"],
        "x_mean": [s.x_mean for s in stats],
        "sigma_x": [s.sigma_x for s in stats],
    }))
    record_artifact(state, write_csv(config.output_dir, "snapshots.csv", hierarchy_columns(x, snapshots)))
    record_artifact(state, write_csv(config.output_dir, "hierarchy.csv", hierarchy_columns(x, hierarchy)))

    # localization has no sharp threshold: reported, never part of the exit status
    localization = localization_report(stats, tt.mollifier.sigma, spec.T).get("localization")
    record_event(state, "LOCALIZATION", tt.kind.value, detail=localization.model_dump(mode="json"))

    report = PhysicsReport()
    if tt.kind in (TargetKind.REFLECTED, TargetKind.TRANSMITTED):
        report = trajectory_properties(series, tt.kind, tt.v, config.physics.dx, config.physics.L)
    return report
