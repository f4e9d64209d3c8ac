"""
Two distinguishable particles in a separable potential.

Only the xD = 0 slices of the two-particle quantum matrix are handled: the diagonal
(joint density) and the first derivatives along x1D and x2D. A product state has
    diag = rho1 (x) rho2,   d1 = (i/hbar) P1 (x) rho2,   d2 = (i/hbar) rho1 (x) P2
and each factor then obeys its own continuity equation d_x P_i = -m_i d_t rho_i.
"""
import logging
from collections.abc import Sequence

import numpy as np
from scipy.integrate import trapezoid

from qtraj.exceptions import SeparabilityError, ShapeError
from qtraj.models.report import PhysicsReport
from qtraj.models.targets import Mollifier
from qtraj.models.two_particle import SeparabilityResiduals, TwoParticleField, TwoParticleObservables
from qtraj.services.numerics import differentiate
from qtraj.services.targets import mollifier_eval

logger = logging.getLogger(__name__)

SEPARABILITY_TOL = 1e-10
CONTINUITY_TOL = 1e-3
FACTOR_TOL = 1e-6


def product_field(
        x1: np.ndarray,
        x2: np.ndarray,
        times: np.ndarray,
        rho1: np.ndarray,
        P1: np.ndarray,
        rho2: np.ndarray,
        P2: np.ndarray,
        m1: float = 1.0,
        m2: float = 2.0,
        hbar: float = 1.0,
) -> TwoParticleField:
    """Slices of the product of two one-particle quantum matrices; factor arrays are (nt, n_i)."""
    rho1, P1, rho2, P2 = (np.atleast_2d(np.asarray(a, dtype=float)) for a in (rho1, P1, rho2, P2))
    return TwoParticleField(
        x1=np.asarray(x1, dtype=float),
        x2=np.asarray(x2, dtype=float),
        times=np.atleast_1d(np.asarray(times, dtype=float)),
        diag=np.einsum("ti,tj->tij", rho1, rho2).astype(complex),
        d1=(1j / hbar) * np.einsum("ti,tj->tij", P1, rho2),
        d2=(1j / hbar) * np.einsum("ti,tj->tij", rho1, P2),
        m1=m1,
        m2=m2,
        hbar=hbar,
    )


def mollified_product(
        x1: np.ndarray,
        x2: np.ndarray,
        times: np.ndarray,
        centers: tuple[float, float] = (-5.0, 5.0),
        velocities: tuple[float, float] = (1.0, -1.0),
        dx: float = 1.0,
        m1: float = 1.0,
        m2: float = 2.0,
        hbar: float = 1.0,
) -> TwoParticleField:
    """Two free mollified packets, one per particle, moving at constant velocity."""
    times = np.atleast_1d(np.asarray(times, dtype=float))
    bump = Mollifier(width=dx)
    factors = []
    for x, c, v, m in zip((x1, x2), centers, velocities, (m1, m2)):
        rho = mollifier_eval(bump, np.asarray(x)[None, :] - c - v * times[:, None])
        factors += [rho, m * v * rho]
    return product_field(x1, x2, times, *factors, m1=m1, m2=m2, hbar=hbar)


def superpose(fields: Sequence[TwoParticleField], weights: Sequence[float]) -> TwoParticleField:
    """Linear combination of fields on a shared grid (entangled when the terms are distinct products)."""
    if not fields or len(fields) != len(weights):
        raise ShapeError("need one weight per field")
    first = fields[0]
    update = {
        name: sum(w * getattr(f, name) for w, f in zip(weights, fields))
        for name in ("diag", "d1", "d2")
    }
    return first.model_copy(update=update)


# ── Factorization ────────────────────────────────────────────────────────────

def _relative(defect: np.ndarray, reference: np.ndarray) -> float:
    scale = float(np.linalg.norm(reference))
    return float(np.linalg.norm(defect)) / scale if scale > 0 else 0.0


def _factorize(f: TwoParticleField, n: int) -> tuple[SeparabilityResiduals, dict[str, np.ndarray]]:
    """Dominant singular pair of diag[n], normalized to unit-mass densities, then least-squares momentum factors."""
    diag = f.diag[n]
    U, s, Vh = np.linalg.svd(diag)
    energy = float(np.sum(s ** 2))
    if energy == 0:
        raise SeparabilityError(f"diagonal slice vanishes at t={f.times[n]}")
    r0 = float(np.sqrt(np.sum(s[1:] ** 2) / energy))

    a = U[:, 0] * np.sqrt(s[0])
    b = Vh[0] * np.sqrt(s[0])
    mass_a, mass_b = trapezoid(a, f.x1), trapezoid(b, f.x2)
    if mass_a == 0 or mass_b == 0:
        raise SeparabilityError(f"factor densities have zero mass at t={f.times[n]}")
    rho1 = (a / mass_a).real
    rho2 = (b / mass_b).real
    total = mass_a * mass_b

    c1 = f.d1[n] @ rho2 / (rho2 @ rho2)
    c2 = rho1 @ f.d2[n] / (rho1 @ rho1)
    r1 = _relative(f.d1[n] - np.outer(c1, rho2), f.d1[n])
    r2 = _relative(f.d2[n] - np.outer(rho1, c2), f.d2[n])

    factors = {
        "rho1": rho1,
        "rho2": rho2,
        "P1": (-1j * f.hbar * c1 / total).real,
        "P2": (-1j * f.hbar * c2 / total).real,
    }
    return SeparabilityResiduals(t=float(f.times[n]), r0=r0, r1=r1, r2=r2), factors


def separability_residual(f: TwoParticleField) -> list[SeparabilityResiduals]:
    """(r0, r1, r2) per time: rank-one defect of diag, then of d1 and d2 given those factors."""
    return [_factorize(f, n)[0] for n in range(f.times.size)]


def factor_densities(f: TwoParticleField, threshold: float = FACTOR_TOL) -> dict[str, np.ndarray]:
    """rho_i and P_i of the factors, shape (nt, n_i); the diagonal must be rank one within `threshold`."""
    out: dict[str, list[np.ndarray]] = {"rho1": [], "rho2": [], "P1": [], "P2": []}
    for n in range(f.times.size):
        residuals, factors = _factorize(f, n)
        if residuals.r0 > threshold:
            raise SeparabilityError(f"state is not separable at t={residuals.t} (r0={residuals.r0:.3e})")
        for name, value in factors.items():
            out[name].append(value)
    return {name: np.stack(values) for name, values in out.items()}


def two_particle_observables(f: TwoParticleField, threshold: float = FACTOR_TOL) -> list[TwoParticleObservables]:
    factors = factor_densities(f, threshold)
    result = []
    for n, t in enumerate(f.times):
        rho1, rho2 = factors["rho1"][n], factors["rho2"][n]
        Q1 = float(trapezoid(f.x1 * rho1, f.x1))
        Q2 = float(trapezoid(f.x2 * rho2, f.x2))
        P1 = float(trapezoid(factors["P1"][n], f.x1))
        P2 = float(trapezoid(factors["P2"][n], f.x2))
        result.append(TwoParticleObservables(
            t=float(t),
            Q=Q1 + Q2,
            P=P1 + P2,
            Q1=Q1,
            Q2=Q2,
            P1=P1,
            P2=P2,
            sigma1=float(np.sqrt(max(trapezoid((f.x1 - Q1) ** 2 * rho1, f.x1), 0.0))),
            sigma2=float(np.sqrt(max(trapezoid((f.x2 - Q2) ** 2 * rho2, f.x2), 0.0))),
        ))
    return result


def check_decoupled_continuity(f: TwoParticleField, threshold: float = FACTOR_TOL) -> tuple[float, float]:
    """Relative residuals of d_x P_i + m_i d_t rho_i for both particles."""
    if f.times.size < 3:
        raise ShapeError(f"continuity needs at least 3 time samples, got {f.times.size}")
    factors = factor_densities(f, threshold)
    cols = slice(2, -2) if f.times.size >= 7 else slice(None)
    residuals = []
    for rho, P, x, m in (
            (factors["rho1"], factors["P1"], f.x1, f.m1),
            (factors["rho2"], factors["P2"], f.x2, f.m2),
    ):
        flux = differentiate(P, x, axis=1)[cols]
        rate = m * differentiate(rho, f.times, axis=0)[cols]
        scale = float(np.linalg.norm(rate)) or float(np.linalg.norm(flux))
        residuals.append(float(np.linalg.norm(flux + rate)) / scale if scale > 0 else 0.0)
    return residuals[0], residuals[1]


def two_particle_report(
        f: TwoParticleField,
        separability_tol: float = SEPARABILITY_TOL,
        continuity_tol: float = CONTINUITY_TOL,
) -> PhysicsReport:
    """Worst separability residuals over time plus, for separable inputs, the continuity residuals."""
    residuals = separability_residual(f)
    report = PhysicsReport()
    for name in ("r0", "r1", "r2"):
        worst = max(getattr(r, name) for r in residuals)
        report.add(f"separability_{name}", worst, separability_tol)
    if report.passed and f.times.size >= 3:
        first, second = check_decoupled_continuity(f)
        report.add("continuity_1", first, continuity_tol)
        report.add("continuity_2", second, continuity_tol)
    logger.info("[TwoParticle] %d time samples, r0 max=%.3e", f.times.size, report.get("separability_r0").residual)
    return report
