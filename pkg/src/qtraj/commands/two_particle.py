import logging

import numpy as np

from qtraj.config import RunConfig
from qtraj.dao.artifact_store import read_npz, write_json
from qtraj.exceptions import SeparabilityError
from qtraj.models.report import PhysicsReport
from qtraj.models.two_particle import TwoParticleField
from qtraj.services.manifest_service import record_artifact, record_event, stage
from qtraj.services.multiparticle import (
    mollified_product,
    separability_residual,
    two_particle_observables,
    two_particle_report,
)
from qtraj.states.run_state import RunState

logger = logging.getLogger(__name__)

FIELD_ARRAYS = ("x1", "x2", "times", "diag", "d1", "d2")
DEMO_POINTS = 201
DEMO_TIMES = 11


def register(subparsers, parents) -> None:
    parser = subparsers.add_parser(
        "two-particle", parents=parents,
        help="Separability and decoupled continuity of a two-particle field (.npz via --input, else a demo product state)",
    )
    parser.set_defaults(handler=run)


def _load_field(config: RunConfig) -> TwoParticleField:
    p = config.physics
    if config.input_path is not None:
        arrays = read_npz(config.input_path, FIELD_ARRAYS)
        return TwoParticleField(
            **{name: arrays[name] for name in FIELD_ARRAYS},
            m1=p.m1, m2=p.m2, hbar=config.units.hbar,
        )
    x = np.linspace(-0.5 * p.L, 0.5 * p.L, min(config.grid.nx, DEMO_POINTS))
    times = np.linspace(-1.0, 1.0, min(config.grid.nt, DEMO_TIMES))
    return mollified_product(
        x, x, times, velocities=(p.v, -p.v), dx=p.dx, m1=p.m1, m2=p.m2, hbar=config.units.hbar,
    )


def run(config: RunConfig, state: RunState) -> PhysicsReport:
    field = _load_field(config)
    source = str(config.input_path) if config.input_path is not None else "demo"
    record_event(state, "FIELD_LOADED", source, detail={"shape": list(field.diag.shape)})

    with stage(state, "two-particle"):
        report = two_particle_report(field)
        residuals = separability_residual(field)
        try:
            stats = [o.model_dump() for o in two_particle_observables(field)]
        except SeparabilityError as e:
            logger.warning("[TwoParticle] No factor observables: %s", e)
            stats = []

    record_artifact(state, write_json(config.output_dir, "two_particle.json", {
        "source": source,
        "residuals": [r.model_dump() for r in residuals],
        "observables": stats,
        **report.model_dump(mode="json"),
    }))
    return report
