"""
Eigenmodes of the box [-L, L] with a repulsive delta barrier V0 delta(x) at the center.

Odd modes do not see the barrier:   f = sin(k x),         k L = (n + 1) pi / 2
Even modes carry a kink at 0:       f = cos(k|x| - phi),  k L = phi + n pi / 2,
                                    tan(phi) = m V0 / (hbar^2 k)
"""
import logging
import math

import numpy as np

from qtraj.exceptions import DomainError, ModeSolveError, UnsupportedOrderError
from qtraj.models.basis import BasisSet, ModeSolution, Parity, Units
from qtraj.models.grid import QuadratureRule
from qtraj.services.numerics import composite_nodes, find_root_bracketed

logger = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-10
DOMAIN_SLACK = 1e-12


def solve_mode(n: int, L: float, units: Units | None = None) -> ModeSolution:
    """
    n-th mode (n >= 0) of the box. Even n gives an even mode, odd n an odd mode.
    Even modes solve (phi + n pi/2) sin(phi) - a L cos(phi) = 0 on (0, pi/2),
    a = m V0 / hbar^2, which is tan(phi) k = a without the pole at pi/2.
    """
    if n < 0:
        raise DomainError(f"mode index must be nonnegative, got {n}")
    if L <= 0:
        raise DomainError(f"box half-width must be positive, got {L}")
    units = units or Units()

    def omega(k: float) -> float:
        return units.hbar * k * k / (2.0 * units.m)

    if n % 2 == 1:
        k = (n + 1) * math.pi / (2.0 * L)
        return ModeSolution(n=n, parity=Parity.ODD, k=k, phi=0.0, omega=omega(k))

    a = units.coupling
    shift = 0.5 * n * math.pi

    def h(phi: float) -> float:
        return (phi + shift) * math.sin(phi) - a * L * math.cos(phi)

    phi = find_root_bracketed(h, (0.0, 0.5 * math.pi))
    k = (phi + shift) / L
    if k <= 0:
        raise ModeSolveError(f"mode {n}: root phi={phi} gives nonpositive k (bracket [0, pi/2])")

    # tan(phi) k = a, checked in the form that stays finite near pi/2
    residual = abs(k * math.sin(phi) - a * math.cos(phi)) / max(a * math.cos(phi), k * math.sin(phi), 1e-300)
    if residual > RESIDUAL_TOL:
        raise ModeSolveError(
            f"mode {n}: residual {residual:.3e} after bisection on [0, pi/2] (phi={phi!r}, k={k!r})"
        )
    return ModeSolution(n=n, parity=Parity.EVEN, k=k, phi=phi, omega=omega(k))


def build_basis(N: int, L: float, units: Units | None = None) -> BasisSet:
    if N < 1:
        raise DomainError(f"basis needs at least two modes, got N={N}")
    units = units or Units()
    modes = tuple(solve_mode(n, L, units) for n in range(N + 1))
    logger.info("[Basis] Solved %d modes on L=%g (k_max=%.6g)", len(modes), L, modes[-1].k)
    return BasisSet(L=L, units=units, modes=modes)


def eval_mode(mode: ModeSolution, x: np.ndarray, derivative: int = 0, L: float | None = None) -> np.ndarray:
    """
    f_n or one of its first three derivatives at x.

    Derivatives are the regular (pointwise) parts. At x = 0 the odd derivatives
    of an even mode return the mean of the one-sided limits, i.e. 0; the jump is
    available from `kink_jump`.
    """
    if derivative not in (0, 1, 2, 3):
        raise UnsupportedOrderError(f"derivative order {derivative} not in 0..3")
    x = np.asarray(x, dtype=float)
    if L is not None and np.any(np.abs(x) > L * (1.0 + DOMAIN_SLACK)):
        raise DomainError(f"x outside [-{L}, {L}]")
    k = mode.k
    if mode.parity is Parity.ODD:
        phase = k * x + 0.5 * math.pi * derivative
        return mode.scale * k ** derivative * np.sin(phase)
    u = np.abs(x)
    arg = k * u - mode.phi
    sign = np.sign(x)
    if derivative == 0:
        return mode.scale * np.cos(arg)
    if derivative == 1:
        return -mode.scale * k * np.sin(arg) * sign
    if derivative == 2:
        return -mode.scale * k * k * np.cos(arg)
    return mode.scale * k ** 3 * np.sin(arg) * sign


def kink_jump(mode: ModeSolution) -> float:
    """f'(0+) - f'(0-); equals 2 (m V0 / hbar^2) f(0) for even modes, 0 for odd ones."""
    if mode.parity is Parity.ODD:
        return 0.0
    return 2.0 * mode.scale * mode.k * math.sin(mode.phi)


def eval_basis(basis: BasisSet, x: np.ndarray, derivative: int = 0) -> np.ndarray:
    """Matrix [n, i] = f_n^(derivative)(x_i)."""
    return np.stack([eval_mode(mode, x, derivative, L=basis.L) for mode in basis.modes])


def overlap_matrix(basis: BasisSet, nodes_per_panel: int = 16) -> np.ndarray:
    """int_{-L}^{L} f_m f_n dx by quadrature, panels aligned with the kink at 0."""
    width = min(basis.L, math.pi / (2.0 * basis.k_max))
    panels = max(1, math.ceil(basis.L / width))
    rule = QuadratureRule(panels=panels, nodes=nodes_per_panel)
    xr, wr = composite_nodes((0.0, basis.L), rule)
    x = np.concatenate([-xr[::-1], xr])
    w = np.concatenate([wr[::-1], wr])
    F = eval_basis(basis, x)
    return (F * w) @ F.T


def scattering_amplitudes(k: float, units: Units | None = None, incident: complex = 1.0) -> tuple[complex, complex]:
    """
    Reflected and transmitted amplitudes of a plane wave e^{ikx} hitting V0 delta(x):
        A_R = A0 m V0 / (i k hbar^2 - m V0),   A_T = A0 i k hbar^2 / (i k hbar^2 - m V0)
    """
    if k <= 0:
        raise DomainError(f"wavenumber must be positive, got {k}")
    units = units or Units()
    denominator = 1j * k * units.hbar ** 2 - units.m * units.V0
    return incident * units.m * units.V0 / denominator, incident * 1j * k * units.hbar ** 2 / denominator
