"""
Physical-principle checks on sampled trajectories.

Every check returns a PhysicsReport fragment of named, nonnegative residuals
compared against a tolerance; nothing here raises on a failed check.
"""
import logging
import math
from collections.abc import Sequence

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.integrate import trapezoid

from qtraj.exceptions import DomainError, ShapeError
from qtraj.models.fields import PotentialKind, PotentialSpec
from qtraj.models.report import CheckResult, PhysicsReport
from qtraj.models.synth import PacketStats
from qtraj.models.targets import DensityTriple, TargetKind
from qtraj.services.numerics import differentiate
from qtraj.services.synth import density_totals, packet_series

logger = logging.getLogger(__name__)

BOUNDARY_FRACTION = 0.1
BOUNDARY_TOL = 1e-6
HIERARCHY_TOL = 1e-3
UNITARITY_TOL = 1e-10
QUANTIZATION_TOL = 1e-9
EHRENFEST_TOL = 0.02
JUMP_POINTS = 4
# pure-state fringes must clear the mixture plateau tolerance by this factor
INTERFERENCE_FACTOR = 100.0


# ── Boundary decay ───────────────────────────────────────────────────────────

def _edge_ratio(values: np.ndarray, edge: np.ndarray) -> tuple[float, float]:
    magnitude = np.abs(values)
    peak = float(np.max(magnitude)) if magnitude.size else 0.0
    sup = float(np.max(magnitude[edge])) if np.any(edge) else 0.0
    return (sup / peak if peak > 0 else 0.0), sup


def check_boundary_decay(triple: DensityTriple, tolerance: float = BOUNDARY_TOL) -> PhysicsReport:
    """
    Sup of |phi1|, |x phi1|, |phi2|, |phi3| over the outer 10% of the x range,
    relative to each component's peak over the whole sample. Missing components
    are skipped.
    """
    x = np.asarray(triple.x, dtype=float)
    lo, hi = float(np.min(x)), float(np.max(x))
    margin = BOUNDARY_FRACTION * (hi - lo)
    edge = (x <= lo + margin) | (x >= hi - margin)

    report = PhysicsReport()
    if triple.phi1 is not None:
        ratio, sup = _edge_ratio(triple.phi1, edge)
        report.add("unitarity_boundary", ratio, tolerance, edge_sup=sup)
    if triple.phi1 is not None or triple.phi2 is not None:
        ratios, sups = [], []
        if triple.phi1 is not None:
            r, s = _edge_ratio(x[:, None] * triple.phi1, edge)
            ratios.append(r)
            sups.append(s)
        if triple.phi2 is not None:
            r, s = _edge_ratio(triple.phi2, edge)
            ratios.append(r)
            sups.append(s)
        report.add("ehrenfest_boundary", max(ratios), tolerance, edge_sup=max(sups))
    if triple.phi3 is not None:
        ratio, sup = _edge_ratio(triple.phi3, edge)
        report.add("energy_boundary", ratio, tolerance, edge_sup=sup)
    return report


# ── Hierarchy relations ──────────────────────────────────────────────────────

def _relative(lhs: np.ndarray, rhs: np.ndarray) -> float:
    diff = float(np.linalg.norm(lhs - rhs))
    for scale in (float(np.linalg.norm(rhs)), float(np.linalg.norm(lhs))):
        if scale > 0:
            return diff / scale
    return 0.0


def _interior(size: int) -> slice:
    return slice(2, size - 2) if size >= 7 else slice(0, size)


def _one_sided(x: np.ndarray, values: np.ndarray, side: int) -> tuple[np.ndarray, np.ndarray]:
    """Cubic through the JUMP_POINTS samples nearest 0 on one side: value and slope at 0, per time."""
    index = np.flatnonzero(x > 0) if side > 0 else np.flatnonzero(x < 0)[::-1]
    if index.size < JUMP_POINTS:
        raise ShapeError(f"need {JUMP_POINTS} samples on each side of the barrier")
    index = index[np.argsort(np.abs(x[index]))][:JUMP_POINTS]
    coef = np.linalg.solve(P.polyvander(x[index], JUMP_POINTS - 1), values[index])
    return coef[0], coef[1]


def check_hierarchy(
        triple: DensityTriple,
        V: PotentialSpec | None = None,
        tolerance: float = HIERARCHY_TOL,
        exclude: float = 0.0,
) -> PhysicsReport:
    """
    Finite-difference residuals of
        d_S phi1 = -i (m/hbar) d_t phi0
        d_S phi2 = -i (m/hbar) d_t phi1 + (m/hbar^2) V' phi0
        d_S phi3 = -i (m/hbar) d_t phi2 + 2 (m/hbar^2) V' phi1
    For a delta barrier V' vanishes pointwise; the strip |x| <= exclude (at
    least two samples) is left out and the barrier enters through the jump
        phi2(0+) - phi2(0-) = -(m V0 / hbar^2) * mean of phi0'(0+-).
    """
    V = V or PotentialSpec()
    phi = triple.hierarchy
    if phi[1] is None:
        raise ShapeError("hierarchy check needs at least phi1")
    x = np.asarray(triple.x, dtype=float)
    t = np.asarray(triple.times, dtype=float)
    m, hbar = triple.m, triple.hbar

    keep = np.ones(x.size, dtype=bool)
    if V.kind is PotentialKind.DELTA_BARRIER:
        h = float(np.min(np.diff(x))) if x.size > 1 else 0.0
        keep = np.abs(x) > max(exclude, 2.0 * h * (1.0 + 1e-9))
        force = np.zeros((x.size, 1))
    else:
        force = V.derivative(x, 1)[:, None]
    keep[: 2 if x.size >= 7 else 0] = False
    if x.size >= 7:
        keep[-2:] = False
    rows = np.flatnonzero(keep)
    cols = _interior(t.size)

    report = PhysicsReport()
    for n in range(1, 4):
        upper, lower = phi[n], phi[n - 1]
        if upper is None or lower is None:
            continue
        lhs = differentiate(upper, x, axis=0)
        rhs = -1j * (m / hbar) * differentiate(lower, t, axis=1)
        if n >= 2:
            rhs = rhs + (n - 1) * (m / hbar ** 2) * force * phi[n - 2]
        residual = _relative(lhs[rows][:, cols], rhs[rows][:, cols])
        report.add(f"hierarchy_{n}", residual, tolerance)

    if V.kind is PotentialKind.DELTA_BARRIER and phi[2] is not None:
        right, _ = _one_sided(x, phi[2], 1)
        left, _ = _one_sided(x, phi[2], -1)
        _, slope_right = _one_sided(x, phi[0], 1)
        _, slope_left = _one_sided(x, phi[0], -1)
        expected = -(m * V.strength / hbar ** 2) * 0.5 * (slope_right + slope_left)
        report.add("hierarchy_jump", _relative(right - left, expected), tolerance)
    return report


# ── Conservation ─────────────────────────────────────────────────────────────

def check_unitarity(source: DensityTriple | Sequence[float] | np.ndarray, tolerance: float = UNITARITY_TOL) -> PhysicsReport:
    """max_t |mass(t) - mass(t0)|, from sampled rho (trapezoid) or from precomputed masses."""
    if isinstance(source, DensityTriple):
        masses = trapezoid(source.rho, source.x, axis=0)
    else:
        masses = np.asarray(source, dtype=float)
    if masses.size < 2:
        raise ShapeError("unitarity needs at least two time samples")
    drift = float(np.max(np.abs(masses - masses[0])))
    report = PhysicsReport()
    report.add("unitarity", drift, tolerance, initial_mass=float(masses[0]))
    return report


def quantization_check(
        E_a: float,
        E_b: float,
        T_cl: float,
        hbar: float = 1.0,
        tolerance: float = QUANTIZATION_TOL,
) -> CheckResult:
    """Is (E_a - E_b) / hbar an integer multiple of 2 pi / T_cl? detail['n'] is the nearest integer."""
    if T_cl <= 0:
        raise DomainError(f"revolution time must be positive, got {T_cl}")
    cycles = (E_a - E_b) * T_cl / (2.0 * math.pi * hbar)
    n = round(cycles)
    return CheckResult(name="quantization", residual=abs(cycles - n), tolerance=tolerance, detail={"n": int(n)})


def interference_contrast(interference: np.ndarray, suppressed: float, factor: float = INTERFERENCE_FACTOR) -> CheckResult:
    """
    Pure-state fringe peak-to-peak against the level a mixture plateau must
    suppress them to. Passes when the fringes reach factor * suppressed;
    the residual is the missing fraction of that threshold.
    """
    if suppressed <= 0:
        raise DomainError(f"suppression level must be positive, got {suppressed}")
    values = np.asarray(interference, dtype=float)
    peak_to_peak = float(np.ptp(values)) if values.size else 0.0
    threshold = factor * suppressed
    return CheckResult(
        name="pure_interference",
        residual=max(threshold - peak_to_peak, 0.0) / threshold,
        tolerance=0.0,
        detail={"peak_to_peak": peak_to_peak, "threshold": threshold},
    )


# ── Trajectory-level properties ──────────────────────────────────────────────

def _nearest(times: np.ndarray, t: float) -> int:
    return int(np.argmin(np.abs(times - t)))


def trajectory_properties(
        triple: DensityTriple,
        kind: TargetKind,
        v: float,
        dx: float,
        L: float,
        masses: np.ndarray | None = None,
) -> PhysicsReport:
    """
    Shape checks of a synthesized trajectory against its target scenario on the
    window 0.25 L/v <= |t| <= 0.75 L/v: mass drift, total momentum (reflected),
    packet center within dx of the classical path, width dip (reflected) or
    rise (transmitted) at t = 0 compared with t = +-L/2v.
    """
    times = np.asarray(triple.times, dtype=float)
    stats = packet_series(triple)
    centers = np.array([s.x_mean for s in stats])
    widths = np.array([s.sigma_x for s in stats])
    totals = density_totals(triple)
    mass = totals["mass"] if masses is None else np.asarray(masses, dtype=float)
    window = (np.abs(times) >= 0.25 * L / v) & (np.abs(times) <= 0.75 * L / v)
    if not np.any(window):
        raise DomainError(f"no samples with {0.25 * L / v:g} <= |t| <= {0.75 * L / v:g}")

    report = PhysicsReport()
    report.add("mass_drift", float(np.max(np.abs(mass - mass[0]))) / abs(float(mass[0])), 0.05)

    mv = triple.m * v
    if kind is TargetKind.REFLECTED:
        expected_center = -np.abs(times) * v
        before, after = window & (times < 0), window & (times > 0)
        momentum = totals["momentum"] / mass
        report.add(
            "momentum_reversal",
            max(
                float(np.max(np.abs(momentum[before] - mv))) if np.any(before) else 0.0,
                float(np.max(np.abs(momentum[after] + mv))) if np.any(after) else 0.0,
            ) / mv,
            0.10,
        )
    else:
        expected_center = times * v
    report.add("center_track", float(np.max(np.abs(centers[window] - expected_center[window]))) / dx, 1.0)

    at_zero = widths[_nearest(times, 0.0)]
    sides = [widths[_nearest(times, s * 0.5 * L / v)] for s in (-1.0, 1.0)]
    if kind is TargetKind.REFLECTED:
        report.add("width_dip", max(0.0, at_zero - min(sides)), 0.0, sigma_zero=at_zero, sigma_sides=sides)
    else:
        report.add("width_rise", max(0.0, max(sides) - at_zero), 0.0, sigma_zero=at_zero, sigma_sides=sides)
    logger.info("[Verify] %s trajectory: %s", kind.value, "passed" if report.passed else f"failed {report.failures()}")
    return report


def check_target_ehrenfest(
        times: np.ndarray,
        x_mean: np.ndarray,
        velocity_before: float,
        velocity_after: float,
        exclude: float,
        tolerance: float = EHRENFEST_TOL,
) -> PhysicsReport:
    """d<x>/dt against the classical velocity on each side of |t| < exclude."""
    times = np.asarray(times, dtype=float)
    velocity = differentiate(np.asarray(x_mean, dtype=float), times)
    report = PhysicsReport()
    deviations = []
    for mask, expected in ((times <= -exclude, velocity_before), (times >= exclude, velocity_after)):
        rows = mask.copy()
        rows[:2] = rows[-2:] = False
        if np.any(rows):
            deviations.append(float(np.max(np.abs(velocity[rows] - expected))) / abs(expected))
    report.add("target_ehrenfest", max(deviations, default=0.0), tolerance)
    return report


def localization_report(stats: Sequence[PacketStats], mollifier_sigma: float, T: float, factor: float = 2.0) -> PhysicsReport:
    """Flags sigma_x(+-T/2) above `factor` times the mollifier width."""
    times = np.array([s.t for s in stats])
    widths = np.array([s.sigma_x for s in stats])
    worst = max(widths[_nearest(times, -0.5 * T)], widths[_nearest(times, 0.5 * T)])
    report = PhysicsReport()
    report.add("localization", float(worst) / mollifier_sigma, factor, sigma_half_window=float(worst))
    return report


def ehrenfest_force_deviation(
        rho: np.ndarray,
        x: np.ndarray,
        V: PotentialSpec,
        order: int | None = None,
) -> tuple[float, float]:
    """
    <V'(x)> - V'(<x>) directly and through the central-moment expansion
    sum_{n>=2} V^(n+1)(<x>) / n! <(x - <x>)^n>, truncated at `order`
    (default: exact for polynomial potentials).
    """
    x = np.asarray(x, dtype=float)
    rho = np.asarray(rho, dtype=float)
    mass = float(trapezoid(rho, x))
    if mass == 0:
        raise DomainError("density has zero mass")
    center = float(trapezoid(x * rho, x)) / mass
    direct = float(trapezoid(V.derivative(x, 1) * rho, x)) / mass - float(V.derivative(np.array(center), 1))

    if order is None:
        poly = V.polynomial
        if poly is None:
            raise DomainError("series order must be given for non-polynomial potentials")
        order = max(poly.degree() - 1, 1)
    series = 0.0
    for n in range(2, order + 1):
        moment = float(trapezoid((x - center) ** n * rho, x)) / mass
        series += float(V.derivative(np.array(center), n + 1)) * moment / math.factorial(n)
    return direct, series
