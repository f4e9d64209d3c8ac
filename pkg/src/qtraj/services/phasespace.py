"""
Phase-space representation of one-particle quantum matrices.

phi(x_S, x_D) = <x_S + x_D/2 | rho | x_S - x_D/2> and its Moyal-Wigner transform
    F(x_S, p_S) = (1 / 2 pi hbar) int phi(x_S, x_D) e^{-i p_S x_D / hbar} dx_D
On conjugate grids (dp = 2 pi hbar / (N dx_D)) both directions are exact discrete
Fourier transforms computed with scipy.fft.
"""
import logging
import math
from collections.abc import Callable, Sequence

import numpy as np
from scipy import fft
from scipy.integrate import trapezoid

from qtraj.config import WignerState
from qtraj.exceptions import (
    DerivativeError,
    DomainError,
    ResolutionError,
    ShapeError,
    SymmetryError,
    UnsupportedPotentialError,
)
from qtraj.models.fields import (
    ClassicalFan,
    GeneratorRate,
    LocalizedMatrix,
    MomentumShell,
    PhaseSpaceObservables,
    PointWigner,
    PotentialKind,
    PotentialSpec,
    QuantumMatrixField,
    WignerField,
)
from qtraj.models.grid import Grid1D
from qtraj.services.numerics import differentiate

logger = logging.getLogger(__name__)

HERMITIAN_TOL = 1e-8
MIN_FEATURE_SAMPLES = 5


# ── Grids and sampling ───────────────────────────────────────────────────────

def phase_grids(sigma: float, count: int = 512, span_sigmas: float = 10.0) -> tuple[Grid1D, Grid1D]:
    """
    (x_S, x_D) grids for a state of position width sigma: x_S covers +-span*sigma,
    x_D covers twice that (the coherence length of a pure state is 2 sigma).
    """
    if sigma <= 0 or count < 8:
        raise DomainError(f"need sigma > 0 and at least 8 samples (got {sigma}, {count})")
    xs = Grid1D.centered(count, 2.0 * span_sigmas * sigma / count)
    xd = Grid1D.centered(count, 4.0 * span_sigmas * sigma / count)
    return xs, xd


def pure_to_matrix(
        psi: Callable[[np.ndarray], np.ndarray],
        xs: Grid1D,
        xd: Grid1D,
        m: float = 1.0,
        hbar: float = 1.0,
) -> QuantumMatrixField:
    """phi(x_S, x_D) = psi(x_S + x_D/2) conj(psi(x_S - x_D/2)) for a callable wavefunction."""
    S, D = np.meshgrid(xs.points(), xd.points(), indexing="ij")
    values = np.asarray(psi(S + 0.5 * D), dtype=complex) * np.conj(np.asarray(psi(S - 0.5 * D), dtype=complex))
    return QuantumMatrixField(xs=xs, xd=xd, values=values, m=m, hbar=hbar)


def pure_samples_to_matrix(samples: np.ndarray, grid: Grid1D, m: float = 1.0, hbar: float = 1.0) -> QuantumMatrixField:
    """
    Sampled wavefunction psi[i] = psi(x_i) to phi[i, j] = psi[i + j] conj(psi[i - j]).
    x_S keeps the sample grid, x_D = 2 j h; pairs falling off the grid are 0.
    """
    samples = np.asarray(samples, dtype=complex)
    if samples.shape != (grid.count,):
        raise ShapeError(f"expected {grid.count} samples, got {samples.shape}")
    n = grid.count
    xd = Grid1D.centered(n, 2.0 * grid.spacing)
    offsets = np.arange(n) - n // 2
    i = np.arange(n)[:, None]
    plus, minus = i + offsets[None, :], i - offsets[None, :]
    valid = (plus >= 0) & (plus < n) & (minus >= 0) & (minus < n)
    values = np.where(
        valid,
        samples[np.clip(plus, 0, n - 1)] * np.conj(samples[np.clip(minus, 0, n - 1)]),
        0.0,
    )
    return QuantumMatrixField(xs=grid, xd=xd, values=values, m=m, hbar=hbar)


def _is_conjugate(xd: Grid1D, p: Grid1D, hbar: float) -> bool:
    expected = xd.conjugate(hbar)
    return (
        p.count == expected.count
        and math.isclose(p.spacing, expected.spacing, rel_tol=1e-12)
        and math.isclose(p.lower, expected.lower, rel_tol=1e-12, abs_tol=1e-15)
    )


def _check_hermitian(field: QuantumMatrixField) -> None:
    center = field.xd.index_of_zero()
    if center is None:
        raise ResolutionError("x_D grid does not contain 0")
    reach = min(center, field.xd.count - 1 - center)
    ahead = field.values[:, center:center + reach + 1]
    behind = field.values[:, center - reach:center + 1][:, ::-1]
    defect = float(np.max(np.abs(ahead - np.conj(behind)))) if reach >= 0 else 0.0
    scale = float(np.max(np.abs(field.values))) or 1.0
    if defect > HERMITIAN_TOL * scale:
        raise SymmetryError(f"phi(x_S, -x_D) != conj(phi(x_S, x_D)) (defect {defect:.3e})")


# ── Moyal-Wigner transform ───────────────────────────────────────────────────

def moyal_wigner(field: QuantumMatrixField, p: Grid1D | None = None) -> WignerField:
    """Wigner function on `p` (default: the grid conjugate to x_D)."""
    _check_hermitian(field)
    hbar = field.hbar
    p = p or field.xd.conjugate(hbar)
    h = field.xd.spacing
    if _is_conjugate(field.xd, p, hbar):
        shifted = fft.ifftshift(field.values, axes=1)
        values = h / (2.0 * math.pi * hbar) * fft.fftshift(fft.fft(shifted, axis=1), axes=1)
    else:
        kernel = np.exp(-1j * np.outer(field.xd.points(), p.points()) / hbar)
        values = h / (2.0 * math.pi * hbar) * (field.values @ kernel)
    return WignerField(xs=field.xs, p=p, values=values.real, m=field.m, hbar=hbar)


def inverse_moyal(F: WignerField, xd: Grid1D | None = None) -> QuantumMatrixField:
    """phi(x_S, x_D) = int F(x_S, p) e^{i p x_D / hbar} dp."""
    hbar = F.hbar
    xd = xd or F.p.conjugate(hbar)
    if _is_conjugate(xd, F.p, hbar):
        shifted = fft.ifftshift(F.values.astype(complex), axes=1)
        values = F.p.spacing * F.p.count * fft.fftshift(fft.ifft(shifted, axis=1), axes=1)
    else:
        kernel = np.exp(1j * np.outer(F.p.points(), xd.points()) / hbar)
        values = F.p.spacing * (F.values @ kernel)
    return QuantumMatrixField(xs=F.xs, xd=xd, values=values, m=F.m, hbar=hbar)


def superpose_wigner(fields: Sequence[WignerField], weights: Sequence[float]) -> WignerField:
    """Statistical mixture sum_k w_k F_k (w_k >= 0) on a shared grid."""
    if len(fields) != len(weights) or not fields:
        raise ShapeError("need one nonnegative weight per field")
    if any(w < 0 for w in weights):
        raise DomainError(f"mixture weights must be nonnegative, got {list(weights)}")
    first = fields[0]
    for other in fields[1:]:
        if other.xs != first.xs or other.p != first.p:
            raise ShapeError("all fields must share the same phase-space grid")
    values = sum(w * f.values for w, f in zip(weights, fields))
    return first.model_copy(update={"values": values})


# ── Observables ──────────────────────────────────────────────────────────────

def _feature_samples(field: QuantumMatrixField, center: int) -> int:
    """Samples across the half-maximum core of |phi| around x_D = 0."""
    profile = np.sum(np.abs(field.values), axis=0)
    if profile[center] == 0:
        return 0
    above = profile >= 0.5 * profile[center]
    lo = center
    while lo > 0 and above[lo - 1]:
        lo -= 1
    hi = center
    while hi < profile.size - 1 and above[hi + 1]:
        hi += 1
    return hi - lo + 1


def observables(field: QuantumMatrixField, V: PotentialSpec | None = None) -> PhaseSpaceObservables:
    """
    Q = int x rho, P = int P, E = int E from the diagonal slice and its x_D
    derivatives (5-point centered stencil at x_D = 0):
        rho = phi(x, 0),  P = -i hbar d phi / d x_D,  E = -(hbar^2 / 2m) d^2 phi / d x_D^2 + V rho
    """
    V = V or PotentialSpec()
    center = field.xd.index_of_zero()
    if center is None or center < 2 or center > field.xd.count - 3:
        raise ResolutionError("x_D grid must contain 0 with two samples on each side")
    if _feature_samples(field, center) < MIN_FEATURE_SAMPLES:
        raise ResolutionError(f"fewer than {MIN_FEATURE_SAMPLES} x_D samples across the half-max core")

    h = field.xd.spacing
    phi = field.values[:, center - 2:center + 3]
    d1 = (phi[:, 0] - 8.0 * phi[:, 1] + 8.0 * phi[:, 3] - phi[:, 4]) / (12.0 * h)
    d2 = (-phi[:, 0] + 16.0 * phi[:, 1] - 30.0 * phi[:, 2] + 16.0 * phi[:, 3] - phi[:, 4]) / (12.0 * h * h)
    x = field.xs.points()
    rho = phi[:, 2].real
    momentum = (-1j * field.hbar * d1).real
    energy = (-(field.hbar ** 2) / (2.0 * field.m) * d2).real + V.value(x) * rho
    return PhaseSpaceObservables(
        mass=float(trapezoid(rho, x)),
        Q=float(trapezoid(x * rho, x)),
        P=float(trapezoid(momentum, x)),
        E=float(trapezoid(energy, x)),
    )


def phase_space_expectation(
        F: WignerField,
        g1: Callable[[np.ndarray], np.ndarray],
        g2: Callable[[np.ndarray], np.ndarray] | None = None,
) -> float:
    """Double integral of (g1(x) + g2(p)) F over the grid."""
    X, P = np.meshgrid(F.xs.points(), F.p.points(), indexing="ij")
    g = np.asarray(g1(X)) + (np.asarray(g2(P)) if g2 is not None else 0.0)
    return float(np.sum(g * F.values)) * F.xs.spacing * F.p.spacing


def phase_space_variance(
        F: WignerField,
        g1: Callable[[np.ndarray], np.ndarray],
        g2: Callable[[np.ndarray], np.ndarray],
) -> float:
    """Second central moment of g1(x) + g2(p) under the (normalized) Wigner function."""
    X, P = np.meshgrid(F.xs.points(), F.p.points(), indexing="ij")
    cell = F.xs.spacing * F.p.spacing
    mass = float(np.sum(F.values)) * cell
    if mass == 0:
        raise DomainError("Wigner function has zero mass")
    g = np.asarray(g1(X)) + np.asarray(g2(P))
    mean = float(np.sum(g * F.values)) * cell / mass
    return float(np.sum((g - mean) ** 2 * F.values)) * cell / mass


# ── Generators ───────────────────────────────────────────────────────────────

def _spectral_dx(values: np.ndarray, grid: Grid1D) -> np.ndarray:
    """Derivative along axis 0 by FFT; fields must decay at the grid edges."""
    k = 2.0 * math.pi * fft.fftfreq(grid.count, d=grid.spacing)
    return fft.ifft(1j * k[:, None] * fft.fft(values, axis=0), axis=0)


def _kinetic(F: WignerField) -> np.ndarray:
    p = F.p.points()
    return (p[None, :] / F.m) * (-1j * F.hbar) * _spectral_dx(F.values, F.xs)


def _odd_series(V: PotentialSpec, x: np.ndarray, D: np.ndarray, orders: list[int]) -> np.ndarray:
    """sum_n V^(n)(x) D^n / (n! 2^(n-1)) over the given odd orders."""
    total = np.zeros(np.broadcast(x, D).shape)
    for n in orders:
        total = total + V.derivative(x, n) * D ** n / (math.factorial(n) * 2.0 ** (n - 1))
    return total


def _potential_term(F: WignerField, multiplier: np.ndarray) -> np.ndarray:
    """FT_D[multiplier(x, D) * phi(x, D)] back on the momentum grid."""
    field = inverse_moyal(F)
    shifted = fft.ifftshift(multiplier * field.values, axes=1)
    h = field.xd.spacing
    return h / (2.0 * math.pi * F.hbar) * fft.fftshift(fft.fft(shifted, axis=1), axes=1)


def _require_smooth(V: PotentialSpec) -> None:
    if V.kind is PotentialKind.DELTA_BARRIER:
        raise UnsupportedPotentialError("phase-space generators need a pointwise potential")


def quantum_generator(F: WignerField, V: PotentialSpec) -> GeneratorRate:
    """H_Q F = -i hbar (p/m) dF/dx + FT[(V(x + D/2) - V(x - D/2)) phi]."""
    _require_smooth(V)
    xd = F.p.conjugate(F.hbar)
    x, D = F.xs.points()[:, None], xd.points()[None, :]
    poly = V.polynomial
    if poly is not None:
        delta_v = _odd_series(V, x, D, list(range(1, poly.degree() + 1, 2)))
    else:
        delta_v = V.value(x + 0.5 * D) - V.value(x - 0.5 * D)
    return GeneratorRate(field=F, values=_kinetic(F) + _potential_term(F, delta_v))


def classical_generator(F: WignerField, V: PotentialSpec) -> GeneratorRate:
    """H_C F = -i hbar (p/m) dF/dx + i hbar V'(x) dF/dp (via the x_D round trip)."""
    _require_smooth(V)
    xd = F.p.conjugate(F.hbar)
    x, D = F.xs.points()[:, None], xd.points()[None, :]
    return GeneratorRate(field=F, values=_kinetic(F) + _potential_term(F, V.derivative(x, 1) * D))


def moyal_correction(F: WignerField, V: PotentialSpec, order: int | None = None) -> GeneratorRate:
    """
    H_Q - H_C, the odd potential derivatives of order >= 3. With `order` = n only
    the n-th term V^(2n+1)(x_S) x_D^(2n+1) / ((2n+1)! 4^n) is applied.
    """
    _require_smooth(V)
    if order is not None and order < 1:
        raise DomainError(f"Moyal term index must be >= 1, got {order}")
    orders = V.moyal_orders
    if order is not None:
        if V.kind is PotentialKind.TABULATED and 2 * order + 1 not in orders:
            raise DerivativeError(f"tabulated potential has no derivative of order {2 * order + 1}")
        orders = [n for n in orders if n == 2 * order + 1]
    elif V.kind is PotentialKind.TABULATED and not orders:
        raise DerivativeError("tabulated potential has no derivative data of odd order >= 3")
    xd = F.p.conjugate(F.hbar)
    x, D = F.xs.points()[:, None], xd.points()[None, :]
    if not orders:
        return GeneratorRate(field=F, values=np.zeros(F.values.shape, dtype=complex))
    return GeneratorRate(field=F, values=_potential_term(F, _odd_series(V, x, D, orders)))


def apply_matrix_hamiltonian(field: QuantumMatrixField, V: PotentialSpec) -> np.ndarray:
    """
    [-(hbar^2/2m)(d_x^2 - d_y^2) + V(x) - V(y)] phi in (x_S, x_D) form,
    -(hbar^2/m) d_S d_D phi + (V(x_S + x_D/2) - V(x_S - x_D/2)) phi, by finite differences.
    """
    _require_smooth(V)
    xs, xd = field.xs.points(), field.xd.points()
    mixed = differentiate(differentiate(field.values, xs, axis=0), xd, axis=1)
    S, D = np.meshgrid(xs, xd, indexing="ij")
    delta_v = V.value(S + 0.5 * D) - V.value(S - 0.5 * D)
    return -(field.hbar ** 2) / field.m * mixed + delta_v * field.values


# ── Closed-form references ───────────────────────────────────────────────────

def harmonic_ground_psi(x: np.ndarray, omega0: float, m: float = 1.0, hbar: float = 1.0) -> np.ndarray:
    a = m * omega0 / hbar
    return (a / math.pi) ** 0.25 * np.exp(-0.5 * a * np.asarray(x) ** 2)


def free_gaussian_psi(
        x: np.ndarray,
        t: float,
        dx0: float,
        x0: float = 0.0,
        p0: float = 0.0,
        m: float = 1.0,
        hbar: float = 1.0,
) -> np.ndarray:
    """Freely spreading Gaussian, |psi|^2 of width dx0 |alpha(t)|, alpha = 1 + i hbar t / (2 m dx0^2)."""
    alpha = 1.0 + 1j * hbar * t / (2.0 * m * dx0 ** 2)
    u = np.asarray(x, dtype=float) - x0 - p0 * t / m
    envelope = (2.0 * math.pi) ** -0.25 * (dx0 * alpha) ** -0.5 * np.exp(-u * u / (4.0 * dx0 ** 2 * alpha))
    return envelope * np.exp(1j * (p0 * (np.asarray(x) - x0) - 0.5 * p0 * p0 * t / m) / hbar)


def _discrete_delta(points: np.ndarray, spacing: float, at: float) -> np.ndarray:
    out = np.zeros(points.size)
    index = int(np.argmin(np.abs(points - at)))
    out[index] = 1.0 / spacing
    return out


def harmonic_orbit(energy: float, t: float, omega0: float, phase: float = 0.0, m: float = 1.0) -> PointWigner:
    """Classical oscillator phase point x = A sin(w t + phase), p = sqrt(2 m E) cos(w t + phase)."""
    if energy < 0 or omega0 <= 0:
        raise DomainError(f"need energy >= 0 and omega0 > 0 (got {energy}, {omega0})")
    angle = omega0 * t + phase
    return PointWigner(
        x0=math.sqrt(2.0 * energy / m) / omega0 * math.sin(angle),
        p0=math.sqrt(2.0 * m * energy) * math.cos(angle),
    )


def reference_solution(
        kind: WignerState | str,
        xs: Grid1D,
        p: Grid1D,
        t: float = 0.0,
        omega0: float = 1.0,
        dx0: float = 1.0,
        x0: float = 0.0,
        p0: float = 0.0,
        energy: float = 0.5,
        sigma_p: float = 1.0,
        m: float = 1.0,
        hbar: float = 1.0,
) -> WignerField:
    """
    Closed-form Wigner functions at time t:
      ho-ground:      (1 / pi hbar) exp(-x^2 / 2 sx^2 - p^2 / 2 sp^2), sx^2 = hbar / 2 m w
      ho-classical:   point on the oscillator orbit of the given energy
      free-gaussian:  F0(x - p t / m, p), F0 Gaussian of widths dx0 and hbar / (2 dx0)
      free-plane:     delta(p - p0), uniform in x
      free-point:     delta(x - p t / m) g(p), g Gaussian of width sigma_p
    """
    try:
        kind = WignerState(kind)
    except ValueError:
        raise DomainError(f"unknown reference state {kind!r}")
    if omega0 <= 0 or dx0 <= 0 or sigma_p <= 0:
        raise DomainError(f"omega0, dx0 and sigma_p must be positive (got {omega0}, {dx0}, {sigma_p})")

    X, P = np.meshgrid(xs.points(), p.points(), indexing="ij")
    if kind is WignerState.HO_GROUND:
        sx2 = hbar / (2.0 * m * omega0)
        sp2 = m * hbar * omega0 / 2.0
        values = np.exp(-X ** 2 / (2.0 * sx2) - P ** 2 / (2.0 * sp2)) / (math.pi * hbar)
    elif kind is WignerState.HO_CLASSICAL:
        return analytic_wigner(harmonic_orbit(energy, t, omega0, m=m), xs, p, hbar=hbar)
    elif kind is WignerState.FREE_GAUSSIAN:
        U = X - x0 - P * t / m
        values = np.exp(-U ** 2 / (2.0 * dx0 ** 2) - 2.0 * dx0 ** 2 * (P - p0) ** 2 / hbar ** 2) / (math.pi * hbar)
    elif kind is WignerState.FREE_PLANE:
        values = np.broadcast_to(_discrete_delta(p.points(), p.spacing, p0), X.shape).copy()
    else:
        return analytic_wigner(ClassicalFan(sigma_p=sigma_p, m=m), xs, p, t=t, hbar=hbar)
    return WignerField(xs=xs, p=p, values=values, m=m, hbar=hbar)


def analytic_observables(state: LocalizedMatrix | PointWigner, V: PotentialSpec | None = None, m: float = 1.0) -> PhaseSpaceObservables:
    """Observables of a phase-space point, evaluated symbolically (no grid)."""
    V = V or PotentialSpec()
    return PhaseSpaceObservables(
        mass=1.0,
        Q=state.x0,
        P=state.p0,
        E=state.p0 ** 2 / (2.0 * m) + float(V.value(state.x0)),
    )


def analytic_matrix(
        state: LocalizedMatrix | MomentumShell,
        xs: Grid1D,
        xd: Grid1D,
        hbar: float = 1.0,
) -> QuantumMatrixField:
    """Grid samples of closed-form quantum matrices (delta factors become 1/h spikes)."""
    D = xd.points()[None, :]
    if isinstance(state, LocalizedMatrix):
        values = _discrete_delta(xs.points(), xs.spacing, state.x0)[:, None] * np.exp(1j * state.p0 * D / hbar)
        return QuantumMatrixField(xs=xs, xd=xd, values=values, hbar=hbar)
    _, p_shell = state.momenta
    values = np.broadcast_to((2.0 * state.m / p_shell) * np.cos(p_shell * D / hbar), (xs.count, xd.count))
    return QuantumMatrixField(xs=xs, xd=xd, values=values.astype(complex), m=state.m, hbar=hbar)


def analytic_wigner(
        state: PointWigner | ClassicalFan,
        xs: Grid1D,
        p: Grid1D,
        t: float = 0.0,
        hbar: float = 1.0,
) -> WignerField:
    x, momenta = xs.points(), p.points()
    if isinstance(state, PointWigner):
        values = np.outer(_discrete_delta(x, xs.spacing, state.x0), _discrete_delta(momenta, p.spacing, state.p0))
        return WignerField(xs=xs, p=p, values=values, hbar=hbar)
    weight = np.exp(-0.5 * (momenta / state.sigma_p) ** 2) / (math.sqrt(2.0 * math.pi) * state.sigma_p)
    values = np.zeros((xs.count, p.count))
    for q, momentum in enumerate(momenta):
        landing = momentum * t / state.m
        if x[0] - 0.5 * xs.spacing <= landing <= x[-1] + 0.5 * xs.spacing:
            values[:, q] = weight[q] * _discrete_delta(x, xs.spacing, landing)
    return WignerField(xs=xs, p=p, values=values, m=state.m, hbar=hbar)
