"""
Synthesis of quantum trajectories in the delta-barrier eigenbasis.

A quantum matrix phi(x, y, t) = sum_ij C_ij f_i(x) f_j(y) e^{i (w_j - w_i) t} with Hermitian C
has, on the diagonal,
    rho_ij = f_i f_j e^{i dw t}
    P_ij   = -(i hbar / 2) (f_i' f_j - f_i f_j') e^{i dw t}
    E_ij   = (hbar^2 / 4m) (k_i^2 + k_j^2) f_i f_j e^{i dw t}     (barrier terms cancel)
with dw = w_j - w_i. C is fitted to a target density triple by least squares in a
weighted space-time scalar product; every Gram entry is a closed-form product
of a space integral and a time integral.
"""
import logging
import math
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid

from qtraj.config import settings
from qtraj.exceptions import DomainError, EvaluationError, ShapeError, UndefinedStatsError
from qtraj.models.basis import BasisSet, Units
from qtraj.models.synth import CoefficientMatrix, PacketStats, ProjectionResult, ScalarProductSpec
from qtraj.models.targets import DensityTriple, TargetTrajectory
from qtraj.services.basis import eval_basis, eval_mode
from qtraj.services.numerics import default_ridge, piecewise_nodes, solve_regularized_symmetric
from qtraj.services.targets import evaluate_target

logger = logging.getLogger(__name__)

ROW_CHUNK = 128

DensityFn = Callable[[np.ndarray, np.ndarray], DensityTriple]


# ── Pair and real-basis tables ───────────────────────────────────────────────

@dataclass(frozen=True)
class PairTable:
    """
    Unordered pairs i <= j in row-major order. On u >= 0
        f_i f_j                = sum_r p_amp[:, r] cos(p_kappa[:, r] u - p_beta[:, r])
        f_i' f_j - f_i f_j'    = sum_r w_amp[:, r] cos(w_kappa[:, r] u - w_beta[:, r])
    and both products pick up `parity` (= s_i s_j, up to a sign shared by every
    W product) under u -> -u.
    """
    i: np.ndarray
    j: np.ndarray
    parity: np.ndarray
    omega: np.ndarray
    energy: np.ndarray
    p_kappa: np.ndarray
    p_beta: np.ndarray
    p_amp: np.ndarray
    w_kappa: np.ndarray
    w_beta: np.ndarray
    w_amp: np.ndarray

    @property
    def size(self) -> int:
        return self.i.size


@dataclass(frozen=True)
class RealBasis:
    """
    Real unknowns: one per diagonal pair (C_ii), two per off-diagonal pair (Re C_ij, Im C_ij).
    Each unknown contributes rho = rho_amp f_i f_j tau(t), P = mom_amp W_ij tau~(t),
    where tau is sin(dw t) when `rho_sin` (else cos) and tau~ likewise with `mom_sin`.
    """
    pair: np.ndarray
    rho_amp: np.ndarray
    mom_amp: np.ndarray
    rho_sin: np.ndarray
    mom_sin: np.ndarray
    omega: np.ndarray
    energy: np.ndarray

    @property
    def size(self) -> int:
        return self.pair.size


def build_pair_table(basis: BasisSet) -> PairTable:
    modes = basis.modes
    i, j = np.triu_indices(len(modes))
    k = np.array([mode.k for mode in modes])
    theta = np.array([mode.phase for mode in modes])
    sign = np.array([mode.mirror_sign for mode in modes])
    scale = np.array([mode.scale for mode in modes])
    omega = np.array([mode.omega for mode in modes])
    units = basis.units

    ki, kj = k[i], k[j]
    amp = scale[i] * scale[j]
    kappa = np.stack([ki + kj, ki - kj], axis=1)
    beta = np.stack([theta[i] + theta[j], theta[i] - theta[j]], axis=1)
    w_amp = np.stack([0.5 * (ki - kj) * amp, 0.5 * (ki + kj) * amp], axis=1)
    w_amp[i == j] = 0.0
    return PairTable(
        i=i,
        j=j,
        parity=sign[i] * sign[j],
        omega=omega[j] - omega[i],
        energy=units.hbar ** 2 * (ki ** 2 + kj ** 2) / (4.0 * units.m),
        p_kappa=kappa,
        p_beta=beta,
        p_amp=np.stack([0.5 * amp, 0.5 * amp], axis=1),
        w_kappa=kappa,
        w_beta=beta - 0.5 * math.pi,
        w_amp=w_amp,
    )


def build_real_basis(table: PairTable, hbar: float = 1.0) -> RealBasis:
    pair, rho_amp, mom_amp, rho_sin, mom_sin = [], [], [], [], []
    for p in range(table.size):
        if table.i[p] == table.j[p]:
            pair.append(p)
            rho_amp.append(1.0)
            mom_amp.append(0.0)
            rho_sin.append(False)
            mom_sin.append(False)
        else:
            # Re C_ij: rho ~ 2 cos, P ~ hbar sin;  Im C_ij: rho ~ -2 sin, P ~ hbar cos
            pair += [p, p]
            rho_amp += [2.0, -2.0]
            mom_amp += [hbar, hbar]
            rho_sin += [False, True]
            mom_sin += [True, False]
    pair = np.array(pair, dtype=int)
    return RealBasis(
        pair=pair,
        rho_amp=np.array(rho_amp),
        mom_amp=np.array(mom_amp),
        rho_sin=np.array(rho_sin, dtype=bool),
        mom_sin=np.array(mom_sin, dtype=bool),
        omega=table.omega[pair],
        energy=table.energy[pair],
    )


# ── Closed-form integrals ────────────────────────────────────────────────────

def _cos_integral(kappa: np.ndarray, beta: np.ndarray, a: float) -> np.ndarray:
    """int_0^a cos(kappa u - beta) du."""
    return a * np.cos(0.5 * kappa * a - beta) * np.sinc(0.5 * kappa * a / math.pi)


def _space_block(table: PairTable, rows: np.ndarray, half_width: float, channel: str) -> np.ndarray:
    """int_{-a}^{a} X_p X_q dx for p in rows, all q; X is f_i f_j ('p') or W_ij ('w')."""
    kappa = getattr(table, f"{channel}_kappa")
    beta = getattr(table, f"{channel}_beta")
    amp = getattr(table, f"{channel}_amp")
    total = np.zeros((rows.size, table.size))
    if half_width <= 0:
        return total
    for r in range(2):
        for s in range(2):
            weight = 0.5 * amp[rows, r, None] * amp[None, :, s]
            for sign in (1.0, -1.0):
                total += weight * _cos_integral(
                    kappa[rows, r, None] + sign * kappa[None, :, s],
                    beta[rows, r, None] + sign * beta[None, :, s],
                    half_width,
                )
    return (1.0 + table.parity[rows, None] * table.parity[None, :]) * total


def _time_block(
        omega_a: np.ndarray, sin_a: np.ndarray,
        omega_b: np.ndarray, sin_b: np.ndarray,
        half_width: float,
) -> np.ndarray:
    """int_{-T}^{T} tau_a tau_b dt for cos/sin time factors; cos x sin integrates to 0."""
    if half_width <= 0:
        return np.zeros((omega_a.size, omega_b.size))
    diff = omega_a[:, None] - omega_b[None, :]
    summ = omega_a[:, None] + omega_b[None, :]
    c_minus = 2.0 * half_width * np.sinc(diff * half_width / math.pi)
    c_plus = 2.0 * half_width * np.sinc(summ * half_width / math.pi)
    same = sin_a[:, None] == sin_b[None, :]
    value = np.where(sin_a[:, None], 0.5 * (c_minus - c_plus), 0.5 * (c_minus + c_plus))
    return np.where(same, value, 0.0)


def _check_mask(basis: BasisSet, spec: ScalarProductSpec) -> None:
    space, time = spec.active_mask
    if spec.mask and (space >= basis.L or time >= spec.T):
        raise DomainError(
            f"mask rectangle |x|<{space}, |t|<{time} must lie strictly inside [-{basis.L}, {basis.L}] x [-{spec.T}, {spec.T}]"
        )


# ── Gram matrix ──────────────────────────────────────────────────────────────

def _gram_rows(basis: BasisSet, table: PairTable, real: RealBasis, spec: ScalarProductSpec, rows: slice) -> np.ndarray:
    pair_rows = real.pair[rows]
    unique, inverse = np.unique(pair_rows, return_inverse=True)
    mask_space, mask_time = spec.active_mask

    weight_rho = (spec.w0 + spec.w2 * real.energy[rows, None] * real.energy[None, :]) \
        * real.rho_amp[rows, None] * real.rho_amp[None, :]
    weight_mom = spec.w1 * real.mom_amp[rows, None] * real.mom_amp[None, :]

    def block(space_half: float, time_half: float) -> np.ndarray:
        spp = _space_block(table, unique, space_half, "p")[inverse][:, real.pair]
        sww = _space_block(table, unique, space_half, "w")[inverse][:, real.pair]
        t_rho = _time_block(real.omega[rows], real.rho_sin[rows], real.omega, real.rho_sin, time_half)
        t_mom = _time_block(real.omega[rows], real.mom_sin[rows], real.omega, real.mom_sin, time_half)
        return weight_rho * spp * t_rho + weight_mom * sww * t_mom

    out = block(basis.L, spec.T)
    if spec.mask:
        out -= block(mask_space, mask_time)
    return out


def assemble_gram(basis: BasisSet, spec: ScalarProductSpec, threads: int | None = None) -> np.ndarray:
    """
    Real symmetric Gram matrix of the real-basis densities under `spec`.
    Rows are filled in independent chunks; the result does not depend on `threads`.
    """
    _check_mask(basis, spec)
    table = build_pair_table(basis)
    real = build_real_basis(table, basis.units.hbar)
    n = real.size
    G = np.empty((n, n))
    chunks = [slice(start, min(start + ROW_CHUNK, n)) for start in range(0, n, ROW_CHUNK)]

    def fill(rows: slice) -> None:
        G[rows] = _gram_rows(basis, table, real, spec, rows)

    with ThreadPoolExecutor(max_workers=threads or settings.threads) as pool:
        list(pool.map(fill, chunks))
    G = 0.5 * (G + G.T)
    logger.info("[Gram] Assembled %dx%d (N=%d, T=%g, mask=%s)", n, n, basis.N, spec.T, spec.mask)
    return G


# ── Right-hand side ──────────────────────────────────────────────────────────

def quadrature_grid(
        basis: BasisSet,
        spec: ScalarProductSpec,
        feature_width: float,
        speed: float = 1.0,
        nodes_per_panel: int = 8,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """
    Space and time Gauss-Legendre nodes for target inner products.
    Panels are no wider than feature/6 and a third of the shortest basis
    half-wavelength, with edges at 0 and at the mask boundary.
    """
    mask_space, mask_time = spec.active_mask
    hx = min(feature_width / 6.0, math.pi / (3.0 * basis.k_max))
    omega_max = float(max(abs(mode.omega - basis.modes[0].omega) for mode in basis.modes))
    ht = feature_width / (6.0 * speed)
    if omega_max > 0:
        ht = min(ht, math.pi / (3.0 * omega_max))
    L, T = basis.L, spec.T
    x, wx = piecewise_nodes([-L, -mask_space, 0.0, mask_space, L], hx, nodes_per_panel)
    t, wt = piecewise_nodes([-T, -mask_time, 0.0, mask_time, T], ht, nodes_per_panel)
    return x, wx, t, wt


def _pair_profiles(basis: BasisSet, table: PairTable, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    F = eval_basis(basis, x)
    dF = eval_basis(basis, x, 1)
    products = F[table.i] * F[table.j]
    wronskians = dF[table.i] * F[table.j] - F[table.i] * dF[table.j]
    return products, wronskians


def _time_factors(real: RealBasis, rows: slice, t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    phase = real.omega[rows, None] * t[None, :]
    cos, sin = np.cos(phase), np.sin(phase)
    return (
        np.where(real.rho_sin[rows, None], sin, cos),
        np.where(real.mom_sin[rows, None], sin, cos),
    )


def _target_samples(
        basis: BasisSet,
        spec: ScalarProductSpec,
        target: TargetTrajectory | DensityFn,
        nodes_per_panel: int,
        feature_width: float | None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, DensityTriple]:
    """Quadrature nodes x, t, masked product weights and the target sampled on them."""
    _check_mask(basis, spec)
    if isinstance(target, TargetTrajectory):
        width = feature_width or target.mollifier.width
        speed = target.v
    else:
        width = feature_width or basis.L
        speed = 1.0
    x, wx, t, wt = quadrature_grid(basis, spec, width, speed, nodes_per_panel)

    if isinstance(target, TargetTrajectory):
        triple = evaluate_target(target, x, t, L=basis.L)
    else:
        triple = target(x, t)
    if triple.rho.shape != (x.size, t.size):
        raise ShapeError(f"target returned {triple.rho.shape}, expected {(x.size, t.size)}")

    mask_space, mask_time = spec.active_mask
    inside = (np.abs(x)[:, None] < mask_space) & (np.abs(t)[None, :] < mask_time)
    weights = wx[:, None] * wt[None, :] * np.where(inside, 0.0, 1.0)
    return x, t, weights, triple


def _target_norm_squared(spec: ScalarProductSpec, weights: np.ndarray, triple: DensityTriple) -> float:
    return float(np.sum(weights * (
        spec.w0 * triple.rho ** 2 + spec.w1 * triple.momentum ** 2 + spec.w2 * triple.energy ** 2
    )))


def _rhs_from_samples(
        basis: BasisSet,
        spec: ScalarProductSpec,
        x: np.ndarray,
        t: np.ndarray,
        weights: np.ndarray,
        triple: DensityTriple,
) -> np.ndarray:
    table = build_pair_table(basis)
    real = build_real_basis(table, basis.units.hbar)
    products, wronskians = _pair_profiles(basis, table, x)
    r_rho = products @ (weights * triple.rho)
    r_mom = wronskians @ (weights * triple.momentum)
    r_en = products @ (weights * triple.energy)

    b = np.empty(real.size)
    for start in range(0, real.size, ROW_CHUNK):
        rows = slice(start, min(start + ROW_CHUNK, real.size))
        tau_rho, tau_mom = _time_factors(real, rows, t)
        pair = real.pair[rows]
        b[rows] = (
            spec.w0 * real.rho_amp[rows] * np.einsum("at,at->a", r_rho[pair], tau_rho)
            + spec.w2 * real.rho_amp[rows] * real.energy[rows] * np.einsum("at,at->a", r_en[pair], tau_rho)
            + spec.w1 * real.mom_amp[rows] * np.einsum("at,at->a", r_mom[pair], tau_mom)
        )
    return b


def assemble_rhs(
        basis: BasisSet,
        spec: ScalarProductSpec,
        target: TargetTrajectory | DensityFn,
        nodes_per_panel: int = 8,
        feature_width: float | None = None,
) -> np.ndarray:
    """b_a = <density_a, target> by composite Gauss-Legendre quadrature in x and t."""
    x, t, weights, triple = _target_samples(basis, spec, target, nodes_per_panel, feature_width)
    return _rhs_from_samples(basis, spec, x, t, weights, triple)


# ── Projection ───────────────────────────────────────────────────────────────

def project_target(
        target: TargetTrajectory | DensityFn,
        basis: BasisSet,
        spec: ScalarProductSpec,
        nodes_per_panel: int = 8,
        threads: int | None = None,
        feature_width: float | None = None,
) -> ProjectionResult:
    """Least-squares coefficients C minimizing ||target - sum C_ij rho_ij|| in the `spec` norm."""
    G = assemble_gram(basis, spec, threads)
    x, t, weights, triple = _target_samples(basis, spec, target, nodes_per_panel, feature_width)
    b = _rhs_from_samples(basis, spec, x, t, weights, triple)
    ridge = spec.ridge if spec.ridge is not None else default_ridge(G)
    c = solve_regularized_symmetric(G, b, ridge)
    rhs_norm = float(np.linalg.norm(b))
    residual = float(np.linalg.norm(G @ c - b)) / rhs_norm if rhs_norm > 0 else 0.0
    # ||target - fit||^2 = <t, t> - 2 c.b + c.G c
    target_norm = _target_norm_squared(spec, weights, triple)
    distance = max(target_norm - 2.0 * float(c @ b) + float(c @ G @ c), 0.0)
    misfit = math.sqrt(distance / target_norm) if target_norm > 0 else 0.0
    logger.info("[Project] dim=%d ridge=%.3e residual=%.3e misfit=%.3e", G.shape[0], ridge, residual, misfit)
    return ProjectionResult(
        coefficients=CoefficientMatrix.from_real_vector(c, len(basis.modes)),
        residual=residual,
        misfit=misfit,
        ridge=ridge,
        dimension=G.shape[0],
        gram_trace=float(np.trace(G)),
        rhs_norm=rhs_norm,
    )


# ── Reconstruction ───────────────────────────────────────────────────────────

def _pair_phases(C: CoefficientMatrix, table: PairTable, times: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Multiplicity-weighted Re and Im of C_ij e^{i dw t} per pair (off-diagonal pairs count twice)."""
    if C.size != int(table.i.max()) + 1:
        raise ShapeError(f"coefficient matrix of size {C.size} does not match the basis")
    z = C.values[table.i, table.j][:, None] * np.exp(1j * table.omega[:, None] * times[None, :])
    mult = np.where(table.i == table.j, 1.0, 2.0)[:, None]
    return mult * z.real, mult * z.imag


def reconstruct(C: CoefficientMatrix, basis: BasisSet, x: np.ndarray, times: np.ndarray) -> DensityTriple:
    """rho, P, E of the expansion on x (rows) by times (columns); real by construction."""
    x = np.asarray(x, dtype=float)
    times = np.atleast_1d(np.asarray(times, dtype=float))
    table = build_pair_table(basis)
    re, im = _pair_phases(C, table, times)
    products, wronskians = _pair_profiles(basis, table, x)
    hbar = basis.units.hbar
    return DensityTriple(
        x=x,
        times=times,
        rho=products.T @ re,
        momentum=0.5 * hbar * (wronskians.T @ im),
        energy=products.T @ (table.energy[:, None] * re),
        m=basis.units.m,
        hbar=hbar,
    )


def reconstruct_hierarchy(C: CoefficientMatrix, basis: BasisSet, x: np.ndarray, times: np.ndarray) -> DensityTriple:
    """
    `reconstruct` plus the regular parts of phi1..phi3 (x_D derivatives of the
    quantum matrix at x_D = 0). Barrier-localized delta terms are not included.
    """
    x = np.asarray(x, dtype=float)
    times = np.atleast_1d(np.asarray(times, dtype=float))
    base = reconstruct(C, basis, x, times)
    table = build_pair_table(basis)
    re, im = _pair_phases(C, table, times)
    F = [eval_basis(basis, x, d) for d in range(4)]
    i, j = table.i, table.j
    # d^n/dx_D^n of f_i(x_S + x_D/2) f_j(x_S - x_D/2) at x_D = 0
    q1 = 0.5 * (F[1][i] * F[0][j] - F[0][i] * F[1][j])
    q2 = 0.25 * (F[2][i] * F[0][j] - 2.0 * F[1][i] * F[1][j] + F[0][i] * F[2][j])
    q3 = 0.125 * (F[3][i] * F[0][j] - 3.0 * F[2][i] * F[1][j] + 3.0 * F[1][i] * F[2][j] - F[0][i] * F[3][j])
    return base.model_copy(update={
        "phi1": 1j * (q1.T @ im),
        "phi2": (q2.T @ re).astype(complex),
        "phi3": 1j * (q3.T @ im),
    })


class PairDensity:
    """Complex rho_ij, P_ij, E_ij of one ordered pair (i, j)."""

    def __init__(self, basis: BasisSet, i: int, j: int):
        n = len(basis.modes)
        if not (0 <= i < n and 0 <= j < n):
            raise DomainError(f"pair ({i}, {j}) outside 0..{n - 1}")
        self.basis = basis
        self.i, self.j = i, j
        mi, mj = basis.modes[i], basis.modes[j]
        self.omega = mj.omega - mi.omega
        units = basis.units
        self.energy_factor = units.hbar ** 2 * (mi.k ** 2 + mj.k ** 2) / (4.0 * units.m)

    def __call__(self, x: np.ndarray, t: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        x, t = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(t, dtype=float))
        modes = self.basis.modes
        fi, fj = eval_mode(modes[self.i], x), eval_mode(modes[self.j], x)
        dfi, dfj = eval_mode(modes[self.i], x, 1), eval_mode(modes[self.j], x, 1)
        phase = np.exp(1j * self.omega * t)
        rho = fi * fj * phase
        momentum = -0.5j * self.basis.units.hbar * (dfi * fj - fi * dfj) * phase
        return rho, momentum, self.energy_factor * rho


def pair_densities(basis: BasisSet, i: int, j: int) -> PairDensity:
    return PairDensity(basis, i, j)


def real_basis_densities(basis: BasisSet, index: int, x: np.ndarray, t: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """rho, P, E of real unknown `index` at broadcastable (x, t)."""
    table = build_pair_table(basis)
    real = build_real_basis(table, basis.units.hbar)
    if not 0 <= index < real.size:
        raise DomainError(f"real basis index {index} outside 0..{real.size - 1}")
    p = real.pair[index]
    mode_i, mode_j = basis.modes[int(table.i[p])], basis.modes[int(table.j[p])]
    x, t = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(t, dtype=float))
    fi, fj = eval_mode(mode_i, x), eval_mode(mode_j, x)
    dfi, dfj = eval_mode(mode_i, x, 1), eval_mode(mode_j, x, 1)
    phase = real.omega[index] * t
    tau = np.sin(phase) if real.rho_sin[index] else np.cos(phase)
    tau_m = np.sin(phase) if real.mom_sin[index] else np.cos(phase)
    rho = real.rho_amp[index] * fi * fj * tau
    momentum = real.mom_amp[index] * (dfi * fj - fi * dfj) * tau_m
    return rho, momentum, real.energy[index] * rho


def gram_by_quadrature(
        basis: BasisSet,
        spec: ScalarProductSpec,
        entries: list[tuple[int, int]],
        nodes_per_panel: int = 16,
) -> np.ndarray:
    """Brute-force 2D quadrature of selected Gram entries; a reference for `assemble_gram`."""
    _check_mask(basis, spec)
    x, wx, t, wt = quadrature_grid(basis, spec, basis.L, 1.0, nodes_per_panel)
    mask_space, mask_time = spec.active_mask
    inside = (np.abs(x)[:, None] < mask_space) & (np.abs(t)[None, :] < mask_time)
    weights = wx[:, None] * wt[None, :] * np.where(inside, 0.0, 1.0)
    X, T = np.meshgrid(x, t, indexing="ij")

    out = np.empty(len(entries))
    for n, (a, b) in enumerate(entries):
        ra, pa, ea = real_basis_densities(basis, a, X, T)
        rb, pb, eb = real_basis_densities(basis, b, X, T)
        out[n] = np.sum(weights * (spec.w0 * ra * rb + spec.w1 * pa * pb + spec.w2 * ea * eb))
    return out


PairFn = Callable[[np.ndarray, np.ndarray], DensityTriple | tuple[np.ndarray, np.ndarray, np.ndarray]]


def _channels(result, shape: tuple[int, int]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if isinstance(result, DensityTriple):
        result = (result.rho, result.momentum, result.energy)
    if len(result) != 3:
        raise ShapeError(f"density function returned {len(result)} channels, expected 3")
    channels = tuple(np.broadcast_to(np.asarray(c), shape) for c in result)
    if not all(np.all(np.isfinite(c)) for c in channels):
        raise EvaluationError("density function returned non-finite values")
    return channels


def scalar_product(
        basis: BasisSet,
        spec: ScalarProductSpec,
        a: PairFn,
        b: PairFn,
        nodes_per_panel: int = 16,
) -> complex:
    """
    <a, b> = w0 ∬ conj(rho_a) rho_b + w1 ∬ conj(P_a) P_b + w2 ∬ conj(E_a) E_b
    over the window, minus the mask rectangle when enabled. Linear in `b`.
    """
    _check_mask(basis, spec)
    x, wx, t, wt = quadrature_grid(basis, spec, basis.L, 1.0, nodes_per_panel)
    mask_space, mask_time = spec.active_mask
    inside = (np.abs(x)[:, None] < mask_space) & (np.abs(t)[None, :] < mask_time)
    weights = wx[:, None] * wt[None, :] * np.where(inside, 0.0, 1.0)
    X, T = np.meshgrid(x, t, indexing="ij")

    ra, pa, ea = _channels(a(X, T), X.shape)
    rb, pb, eb = _channels(b(X, T), X.shape)
    value = np.sum(weights * (
        spec.w0 * np.conj(ra) * rb + spec.w1 * np.conj(pa) * pb + spec.w2 * np.conj(ea) * eb
    ))
    if not np.isfinite(value):
        raise EvaluationError("scalar product diverged")
    return complex(value)


# ── Packet statistics ────────────────────────────────────────────────────────

def packet_stats(x: np.ndarray, rho: np.ndarray, t: float = 0.0) -> PacketStats:
    """
    Center and width under rho^4 weighting, which suppresses small ripples
    and tails relative to the main packet.
    """
    x = np.asarray(x, dtype=float)
    weight = np.asarray(rho, dtype=float) ** 4
    total = trapezoid(weight, x)
    if not total > 0:
        raise UndefinedStatsError(f"density is identically zero at t={t}")
    mean = trapezoid(x * weight, x) / total
    variance = trapezoid((x - mean) ** 2 * weight, x) / total
    return PacketStats(t=float(t), x_mean=float(mean), sigma_x=float(math.sqrt(max(variance, 0.0))))


def packet_series(triple: DensityTriple) -> list[PacketStats]:
    return [packet_stats(triple.x, triple.rho[:, n], float(t)) for n, t in enumerate(triple.times)]


def density_totals(triple: DensityTriple) -> dict[str, np.ndarray]:
    """int rho, int P, int E over x at each sampled time."""
    return {
        "mass": trapezoid(triple.rho, triple.x, axis=0),
        "momentum": trapezoid(triple.momentum, triple.x, axis=0),
        "energy": trapezoid(triple.energy, triple.x, axis=0),
    }


def default_scalar_product(
        units: Units,
        v: float,
        T: float,
        dx: float,
        mask: bool = False,
        ridge: float | None = None,
        w0: float | None = None,
        w1: float | None = None,
        w2: float | None = None,
) -> ScalarProductSpec:
    """
    Weights default to the inverse squared density scales of a packet moving at v:
    1, 1/(m v)^2, 1/(m v^2 / 2)^2. The mask removes |x| < pi dx, |t| < pi dx / (2 v).
    """
    return ScalarProductSpec(
        w0=1.0 if w0 is None else w0,
        w1=1.0 / (units.m * v) ** 2 if w1 is None else w1,
        w2=1.0 / (0.5 * units.m * v * v) ** 2 if w2 is None else w2,
        T=T,
        mask=mask,
        mask_space=math.pi * dx,
        mask_time=0.5 * math.pi * dx / v,
        ridge=ridge,
    )
