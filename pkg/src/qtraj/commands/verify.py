"""
Re-checks a finished run from its artifacts alone: manifest.json plus
target.csv (target runs) or series.csv / snapshots.csv (synthesize runs),
plus hierarchy.csv when the run wrote hierarchy stencils.
"""
import logging
from pathlib import Path

import numpy as np

from qtraj.commands.common import STENCIL_POINTS, select_times
from qtraj.config import RunConfig
from qtraj.dao.artifact_store import read_csv, read_json, write_json
from qtraj.exceptions import ArtifactError
from qtraj.models.fields import PotentialKind, PotentialSpec
from qtraj.models.report import CheckResult, PhysicsReport
from qtraj.models.targets import DensityTriple
from qtraj.services.manifest_service import MANIFEST_NAME, record_artifact, record_event, stage
from qtraj.services.verify import BOUNDARY_FRACTION, check_boundary_decay, check_hierarchy, check_unitarity
from qtraj.states.run_state import RunState

logger = logging.getLogger(__name__)

SUBDIR = "verify"
# trapezoid on the written grid; counterterm profiles have kinks at their support edges
TARGET_TOL = 1e-3
# spectral solutions only approximate the target; same threshold as the synthesis acceptance
SYNTH_TOL = 0.05


def register(subparsers, parents) -> None:
    parser = subparsers.add_parser("verify", parents=parents, help="Check a finished run directory (--input)")
    parser.set_defaults(handler=run)


def load_long_table(path: Path, m: float, hbar: float) -> DensityTriple:
    """Inverse of the long t/x CSV layout used for target.csv and snapshots.csv."""
    columns = read_csv(path)
    times = np.unique(columns["t"])
    nx = columns["x"].size // times.size
    if nx * times.size != columns["x"].size:
        raise ArtifactError(f"{path}: rows do not form a t-by-x grid")

    def grid(name: str) -> np.ndarray:
        return columns[name].reshape(times.size, nx).T

    return DensityTriple(
        x=columns["x"][:nx],
        times=times,
        rho=grid("rho"),
        momentum=grid("momentum"),
        energy=grid("energy"),
        phi1=1j * grid("phi1_im"),
        phi2=grid("phi2_re").astype(complex),
        phi3=1j * grid("phi3_im"),
        m=m,
        hbar=hbar,
    )


def hierarchy_report(path: Path, m: float, hbar: float, V: PotentialSpec | None, tolerance: float) -> PhysicsReport:
    """check_hierarchy per stencil of hierarchy.csv; each check keeps its worst stencil."""
    triple = load_long_table(path, m, hbar)
    if triple.times.size % STENCIL_POINTS:
        raise ArtifactError(f"{path}: {triple.times.size} times do not split into {STENCIL_POINTS}-point stencils")
    worst: dict[str, CheckResult] = {}
    for group in np.split(np.arange(triple.times.size), triple.times.size // STENCIL_POINTS):
        keep = np.zeros(triple.times.size, dtype=bool)
        keep[group] = True
        centre = float(np.mean(triple.times[group]))
        for check in check_hierarchy(select_times(triple, keep), V, tolerance).checks:
            if check.name not in worst or check.residual > worst[check.name].residual:
                worst[check.name] = check.model_copy(update={"detail": {**check.detail, "t": centre}})
    return PhysicsReport(checks=list(worst.values()))


def run(config: RunConfig, state: RunState) -> PhysicsReport:
    if config.input_path is None:
        raise ArtifactError("verify needs --input pointing at a run directory")
    source = Path(config.input_path)
    manifest = read_json(source / MANIFEST_NAME)
    source_config = manifest.get("config", {})
    units = source_config.get("units", {})
    m, hbar = float(units.get("m", 1.0)), float(units.get("hbar", 1.0))
    physics = source_config.get("physics", {})
    L, v, dx = (float(physics.get(key, default)) for key, default in (("L", 40.0), ("v", 1.0), ("dx", 3.0)))
    subcommand = source_config.get("subcommand")
    record_event(state, "VERIFY_SOURCE", str(source), detail={"subcommand": subcommand})

    report = PhysicsReport()
    with stage(state, "verify"):
        if subcommand == "target":
            triple = load_long_table(source / "target.csv", m, hbar)
            report = report.merge(check_unitarity(triple, TARGET_TOL))
            # packet half-width is at most pi dx / 2
            inner = v * np.abs(triple.times) + 0.5 * np.pi * dx <= (1.0 - 2.0 * BOUNDARY_FRACTION) * L
            if np.any(inner):
                report = report.merge(check_boundary_decay(select_times(triple, inner)))
            if (source / "hierarchy.csv").is_file():
                # stencils sit away from the crossing, where every target is a free packet
                report = report.merge(hierarchy_report(source / "hierarchy.csv", m, hbar, None, TARGET_TOL))
        elif subcommand == "synthesize":
            series = read_csv(source / "series.csv")
            mass = series["mass"]
            report = report.merge(check_unitarity(mass, SYNTH_TOL * abs(float(mass[0]))))
            snapshots = load_long_table(source / "snapshots.csv", m, hbar)
            report = report.merge(check_boundary_decay(snapshots, SYNTH_TOL))
            barrier = PotentialSpec(kind=PotentialKind.DELTA_BARRIER, strength=float(units.get("V0", 1.0)))
            report = report.merge(hierarchy_report(source / "hierarchy.csv", m, hbar, barrier, SYNTH_TOL))
        else:
            raise ArtifactError(f"nothing to verify for a {subcommand!r} run")

    run_dir = Path(config.output_dir) / SUBDIR
    state["run_dir"] = str(run_dir)
    record_artifact(state, write_json(run_dir, "report.json", {
        "source": str(source),
        "subcommand": subcommand,
        **report.model_dump(mode="json"),
    }))
    return report
