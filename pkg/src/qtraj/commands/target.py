import logging

import numpy as np

from qtraj.commands.common import (
    hierarchy_columns,
    select_times,
    snapshot_times,
    space_grid,
    stencil_times,
    target_of,
    time_grid,
)
from qtraj.config import RunConfig
from qtraj.dao.artifact_store import write_csv
from qtraj.models.report import PhysicsReport
from qtraj.models.targets import TargetKind
from qtraj.services.manifest_service import record_artifact, record_event, stage
from qtraj.services.targets import evaluate_target, target_totals
from qtraj.services.verify import BOUNDARY_FRACTION, check_boundary_decay, check_unitarity
from qtraj.states.run_state import RunState

logger = logging.getLogger(__name__)

INVARIANT_TOL = 1e-8


def register(subparsers, parents) -> None:
    parser = subparsers.add_parser("target", parents=parents, help="Sample a target trajectory and check its invariants")
    parser.set_defaults(handler=run)


def run(config: RunConfig, state: RunState) -> PhysicsReport:
    tt = target_of(config)
    x, times = space_grid(config), time_grid(config)
    with stage(state, "target"):
        triple = evaluate_target(tt, x, times, L=config.physics.L)
        totals = target_totals(tt, times, config.grid.nodes_per_panel)
    record_event(state, "TARGET_SAMPLED", tt.kind.value, detail={"nx": x.size, "nt": times.size})

    record_artifact(state, write_csv(config.output_dir, "target.csv", hierarchy_columns(x, triple)))

    # hierarchy stencils stay clear of the barrier crossing, where the target is only mollified
    centres = snapshot_times(config)
    clear = 2.0 * tt.mollifier.support_half_width / tt.v
    stencils = stencil_times(config, centres[(np.abs(centres) > clear) & (np.abs(centres) < 0.9 * config.window)])
    if stencils.size:
        with stage(state, "hierarchy"):
            hierarchy = evaluate_target(tt, x, stencils, L=config.physics.L)
        record_artifact(state, write_csv(config.output_dir, "hierarchy.csv", hierarchy_columns(x, hierarchy)))

    report = check_unitarity(totals["mass"], INVARIANT_TOL)
    mv = tt.m * tt.v
    if tt.kind is TargetKind.REFLECTED:
        report.add("energy_constancy", float(np.max(np.abs(totals["energy"] - 0.5 * mv * tt.v))), INVARIANT_TOL)
    elif tt.kind in (TargetKind.TRANSMITTED, TargetKind.FREE):
        report.add("momentum_constancy", float(np.max(np.abs(totals["momentum"] - mv))), INVARIANT_TOL)

    # edge sups only mean something while the packet is clear of the edge strips
    inner = tt.v * np.abs(times) + tt.mollifier.support_half_width <= (1.0 - 2.0 * BOUNDARY_FRACTION) * config.physics.L
    if np.any(inner):
        report = report.merge(check_boundary_decay(select_times(triple, inner)))
    return report
