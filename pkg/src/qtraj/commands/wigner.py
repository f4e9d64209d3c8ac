import logging
import math

import numpy as np

from qtraj.commands.common import units_of
from qtraj.config import RunConfig, WignerState
from qtraj.dao.artifact_store import write_csv, write_json
from qtraj.models.fields import PotentialSpec, WignerField
from qtraj.models.report import PhysicsReport
from qtraj.services.manifest_service import record_artifact, record_event, stage
from qtraj.services.phasespace import (
    free_gaussian_psi,
    harmonic_ground_psi,
    moyal_wigner,
    observables,
    phase_grids,
    phase_space_expectation,
    phase_space_variance,
    pure_to_matrix,
    quantum_generator,
    reference_solution,
)
from qtraj.states.run_state import RunState

logger = logging.getLogger(__name__)

GRID_TOL = 1e-3
REFERENCE_TOL = 1e-6
STATIONARY_TOL = 1e-8


def register(subparsers, parents) -> None:
    parser = subparsers.add_parser("wigner", parents=parents, help="Phase-space function and observables of a reference state")
    parser.set_defaults(handler=run)


def _moments(F: WignerField, V: PotentialSpec) -> dict[str, float]:
    def kinetic(p: np.ndarray) -> np.ndarray:
        return p * p / (2.0 * F.m)

    mass = phase_space_expectation(F, np.ones_like)
    return {
        "mass": mass,
        "Q": phase_space_expectation(F, lambda x: x) / mass,
        "P": phase_space_expectation(F, np.zeros_like, lambda p: p) / mass,
        "E": phase_space_expectation(F, V.value, kinetic) / mass,
        "dE": math.sqrt(max(phase_space_variance(F, V.value, kinetic), 0.0)),
    }


def run(config: RunConfig, state: RunState) -> PhysicsReport:
    units = units_of(config)
    m, hbar = units.m, units.hbar
    p = config.physics
    t = config.time
    kind = config.state
    report = PhysicsReport()

    V = PotentialSpec.harmonic(p.omega0, m) if kind in (WignerState.HO_GROUND, WignerState.HO_CLASSICAL) else PotentialSpec()
    if kind is WignerState.HO_GROUND:
        sigma = math.sqrt(hbar / (2.0 * m * p.omega0))
    elif kind is WignerState.FREE_GAUSSIAN:
        sigma = math.hypot(p.dx0, hbar * t / (2.0 * m * p.dx0)) + abs(p.p0 * t / m) / config.grid.span_sigmas
    elif kind is WignerState.HO_CLASSICAL:
        sigma = max(0.5 * math.sqrt(2.0 * p.E0 / m) / p.omega0, p.dx0)
    else:
        sigma = p.dx0
    xs, xd = phase_grids(sigma, config.grid.n_phase, config.grid.span_sigmas)
    momenta = xd.conjugate(hbar)

    reference = reference_solution(
        kind, xs, momenta, t=t, omega0=p.omega0, dx0=p.dx0, p0=p.p0,
        energy=p.E0, sigma_p=p.sigma_p, m=m, hbar=hbar,
    )
    F = reference
    matrix_observables = None
    with stage(state, "wigner"):
        if kind in (WignerState.HO_GROUND, WignerState.FREE_GAUSSIAN):
            if kind is WignerState.HO_GROUND:
                field = pure_to_matrix(lambda x: harmonic_ground_psi(x, p.omega0, m, hbar), xs, xd, m, hbar)
            else:
                field = pure_to_matrix(lambda x: free_gaussian_psi(x, t, p.dx0, p0=p.p0, m=m, hbar=hbar), xs, xd, m, hbar)
            F = moyal_wigner(field, momenta)
            matrix_observables = observables(field, V)
            peak = float(np.max(np.abs(reference.values)))
            report.add("wigner_reference", float(np.max(np.abs(F.values - reference.values))) / peak, REFERENCE_TOL)
    record_event(state, "WIGNER_COMPUTED", kind.value, detail={"grid": xs.count, "sigma": sigma})

    moments = _moments(F, V)
    if matrix_observables is not None:
        moments.update({f"{key}_matrix": value for key, value in matrix_observables.model_dump().items()})

    if kind is WignerState.HO_GROUND:
        half = 0.5 * hbar * p.omega0
        report.add("energy_mean", abs(moments["E"] - half) / half, GRID_TOL)
        report.add("energy_spread", abs(moments["dE"] - half) / half, GRID_TOL)
        rate = quantum_generator(F, V).time_derivative
        report.add("stationarity", float(np.linalg.norm(rate)) / float(np.linalg.norm(F.values)), STATIONARY_TOL)
    elif kind is WignerState.FREE_GAUSSIAN:
        x = xs.points()
        rho = F.values.sum(axis=1) * F.p.spacing
        mass = float(rho.sum()) * xs.spacing
        center = float((x * rho).sum()) * xs.spacing / mass
        width = math.sqrt(float(((x - center) ** 2 * rho).sum()) * xs.spacing / mass)
        expected = math.sqrt(p.dx0 ** 2 + (hbar * t / (2.0 * m * p.dx0)) ** 2)
        report.add("spreading", abs(width - expected) / expected, GRID_TOL, width=width, expected=expected)
        moments["dx"] = width

    S, Pm = np.meshgrid(xs.points(), momenta.points(), indexing="ij")
    record_artifact(state, write_csv(config.output_dir, "wigner.csv", {
        "x_S": S.ravel(), "p_S": Pm.ravel(), "F": F.values.ravel(),
    }))
    record_artifact(state, write_json(config.output_dir, "observables.json", {
        "state": kind.value, "t": t, **moments,
    }))
    return report
