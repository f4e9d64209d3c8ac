"""
Prescribed trajectories built from mollified delta packets:
  - reflected:          packet in from the left, bounces at t = 0
  - transmitted:        packet passes the barrier, with localized counterterms
  - naive-transmitted:  pass-through without counterterms (leaves tails)
  - free:               no barrier at all
plus the stationary scattering state and its time-averaged mixture.
"""
import logging
import math

import numpy as np
from numpy.polynomial.hermite_e import hermeval
from scipy.special import erf

from qtraj.exceptions import DomainError, IntegrationError, ResolutionError, UnsupportedOrderError
from qtraj.models.basis import Units
from qtraj.models.grid import QuadratureRule
from qtraj.models.targets import DensityTriple, Mollifier, MollifierKind, TargetKind, TargetTrajectory
from qtraj.services.basis import scattering_amplitudes
from qtraj.services.numerics import piecewise_nodes

logger = logging.getLogger(__name__)

MAX_DERIVATIVE = 4
MIN_SAMPLES_PER_HALF_WIDTH = 4
CROSSING_LEAD = 0.5


# ── Mollifiers ───────────────────────────────────────────────────────────────

def mollifier_eval(mollifier: Mollifier, x: np.ndarray, derivative: int = 0) -> np.ndarray:
    """
    d^derivative/dx^derivative of the unit-mass bump.
    cos4 uses cos^4(u) = 3/8 + cos(2u)/2 + cos(4u)/8, u = x / dx, and is 0 for |x| >= pi dx / 2.
    """
    if not 0 <= derivative <= MAX_DERIVATIVE:
        raise UnsupportedOrderError(f"mollifier derivative {derivative} not in 0..{MAX_DERIVATIVE}")
    x = np.asarray(x, dtype=float)

    if mollifier.kind is MollifierKind.COS4:
        dx = mollifier.width
        u = x / dx
        shift = 0.5 * math.pi * derivative
        value = 0.5 * (2.0 / dx) ** derivative * np.cos(2.0 * u + shift) \
            + 0.125 * (4.0 / dx) ** derivative * np.cos(4.0 * u + shift)
        if derivative == 0:
            value = value + 0.375
        value = 8.0 / (3.0 * math.pi * dx) * value
        return np.where(np.abs(x) < mollifier.support_half_width, value, 0.0)

    s = mollifier.sigma
    z = x / s
    coef = np.zeros(derivative + 1)
    coef[derivative] = 1.0
    # d^n/dx^n e^{-z^2/2} = (-1/s)^n He_n(z) e^{-z^2/2}
    return (-1.0 / s) ** derivative * hermeval(z, coef) * np.exp(-0.5 * z * z) / (math.sqrt(2.0 * math.pi) * s)


def mollifier_cumulative(mollifier: Mollifier, x: np.ndarray) -> np.ndarray:
    """int_{-inf}^x of the bump."""
    x = np.asarray(x, dtype=float)
    if mollifier.kind is MollifierKind.GAUSSIAN:
        return 0.5 * (1.0 + erf(x / (math.sqrt(2.0) * mollifier.sigma)))
    half = mollifier.support_half_width
    u = np.clip(x, -half, half) / mollifier.width
    inner = 0.5 + 8.0 / (3.0 * math.pi) * (0.375 * u + 0.25 * np.sin(2.0 * u) + np.sin(4.0 * u) / 32.0)
    return np.clip(inner, 0.0, 1.0)


def peak_fourth_derivative(mollifier: Mollifier) -> float:
    """g''''(0), the normalization of the counterterm profiles."""
    return float(mollifier_eval(mollifier, np.array(0.0), 4))


# ── Elementwise target fields ────────────────────────────────────────────────

def _heaviside(x: np.ndarray) -> np.ndarray:
    return np.heaviside(x, 0.5)


def target_fields(tt: TargetTrajectory, X: np.ndarray, T: np.ndarray) -> dict[str, np.ndarray]:
    """
    rho, momentum, energy and phi1..phi3 at broadcastable (X, T).
    The energy density excludes the barrier term (it is localized at x = 0).
    """
    X, T = np.broadcast_arrays(np.asarray(X, dtype=float), np.asarray(T, dtype=float))
    m, hbar, v = tt.m, tt.hbar, tt.v
    lam = 1j * m * v / hbar
    f = tt.mollifier

    if tt.kind is TargetKind.REFLECTED:
        incoming = mollifier_eval(f, X - v * T) * _heaviside(-T)
        outgoing = mollifier_eval(f, X + v * T) * _heaviside(T)
        rho = incoming + outgoing
        flux = incoming - outgoing
        fields = {
            "rho": rho,
            "momentum": m * v * flux,
            "energy": 0.5 * m * v * v * rho,
            "phi1": lam * flux,
            "phi2": lam ** 2 * rho,
            "phi3": lam ** 3 * flux,
        }

    elif tt.kind is TargetKind.FREE:
        packet = mollifier_eval(f, X - v * T)
        fields = {
            "rho": packet,
            "momentum": m * v * packet,
            "energy": 0.5 * m * v * v * packet,
            "phi1": lam * packet,
            "phi2": lam ** 2 * packet,
            "phi3": lam ** 3 * packet,
        }

    elif tt.kind is TargetKind.TRANSMITTED:
        packet = mollifier_eval(f, X - v * T)
        g1, g2 = tt.g1, tt.g2
        G1, G2 = peak_fourth_derivative(g1), peak_fourth_derivative(g2)
        ft = [mollifier_eval(tt.time_mollifier, T, n) for n in range(MAX_DERIVATIVE + 1)]
        # phi^(n) = lam^n [f(x - vt) + (-1)^(n+1) g1^(4-n)/G1 delta^(n)(vt) + (-1)^n g2^(3-n)/G2 delta^(n+1)(vt)]
        # with delta^(n)(vt) -> ft^(n)(t) / v^(n+1)
        branches = []
        for n in range(4):
            term1 = (-1) ** (n + 1) * mollifier_eval(g1, X, 4 - n) / G1 * ft[n] / v ** (n + 1)
            term2 = (-1) ** n * mollifier_eval(g2, X, 3 - n) / G2 * ft[n + 1] / v ** (n + 2)
            branches.append(packet + term1 + term2)
        fields = {
            "rho": branches[0],
            "momentum": m * v * branches[1],
            "energy": 0.5 * m * v * v * branches[2],
            "phi1": lam * branches[1],
            "phi2": lam ** 2 * branches[2],
            "phi3": lam ** 3 * branches[3],
        }

    else:
        fields = _naive_transmitted_fields(tt, X, T)

    return fields


def _naive_transmitted_fields(tt: TargetTrajectory, X: np.ndarray, T: np.ndarray) -> dict[str, np.ndarray]:
    """
    Pass-through packet with the barrier terms of the hierarchy integrated directly.
    Its phi2 and phi3 do not decay away from the barrier.

    delta(vt) is smoothed by the time bump centred at t = -CROSSING_LEAD * sigma_t,
    so its odd derivatives, and with them the theta(x) tails, are nonzero at t = 0.
    The hierarchy relations still hold exactly off the barrier.
    """
    m, hbar, v, V0 = tt.m, tt.hbar, tt.v, tt.V0
    lam = 1j * m * v / hbar
    g = tt.g1
    packet = mollifier_eval(tt.mollifier, X - v * T)
    bump = tt.time_mollifier
    shifted = T + CROSSING_LEAD * bump.sigma
    ft0, ft1, ft2 = (mollifier_eval(bump, shifted, n) for n in range(3))
    step = _heaviside(X)

    phi2 = (m / hbar ** 2) * (
        -m * v * v * packet
        + V0 * mollifier_eval(g, X) * ft0 / v
        + V0 * step * ft1 / v ** 2
    )
    slope_at_barrier = mollifier_eval(tt.mollifier, -v * T, 1)
    phi3 = (
        lam ** 3 * packet
        - 1j * (m * m * V0 / hbar ** 3) * (mollifier_cumulative(g, X) * ft1 / v + X * step * ft2 / v ** 2)
        - 2.0 * (m * V0 / hbar ** 2) * lam * slope_at_barrier * step
    )
    return {
        "rho": packet,
        "momentum": m * v * packet,
        "energy": np.real(-(hbar ** 2) / (2.0 * m) * phi2),
        "phi1": lam * packet,
        "phi2": phi2.astype(complex),
        "phi3": phi3,
    }


# ── Sampled targets ──────────────────────────────────────────────────────────

def _check_domain(tt: TargetTrajectory, times: np.ndarray, L: float | None) -> None:
    if L is None or np.size(times) == 0:
        return
    reach = tt.v * float(np.max(np.abs(times))) + tt.mollifier.support_half_width
    if reach > L * (1.0 + 1e-12):
        raise DomainError(f"packet reaches |x|={reach:.6g} beyond the box L={L}")


def _check_resolution(x: np.ndarray, g: Mollifier) -> None:
    if np.size(x) < 2:
        return
    h = float(np.max(np.diff(np.sort(x))))
    if g.support_half_width < MIN_SAMPLES_PER_HALF_WIDTH * h:
        raise ResolutionError(
            f"counterterm width {g.width} is too narrow for spacing {h:.3g}: "
            f"need {MIN_SAMPLES_PER_HALF_WIDTH} samples per half-width"
        )


def evaluate_target(
        tt: TargetTrajectory,
        x: np.ndarray,
        times: np.ndarray,
        L: float | None = None,
) -> DensityTriple:
    """Target fields sampled on the outer product x (rows) by times (columns)."""
    x = np.asarray(x, dtype=float)
    times = np.atleast_1d(np.asarray(times, dtype=float))
    _check_domain(tt, times, L)
    if tt.kind is TargetKind.TRANSMITTED:
        _check_resolution(x, tt.g1)
        _check_resolution(x, tt.g2)
    X, T = np.meshgrid(x, times, indexing="ij")
    fields = target_fields(tt, X, T)
    return DensityTriple(x=x, times=times, m=tt.m, hbar=tt.hbar, **fields)


def reflected_target(tt: TargetTrajectory, x: np.ndarray, times: np.ndarray, L: float | None = None) -> DensityTriple:
    return evaluate_target(tt.model_copy(update={"kind": TargetKind.REFLECTED}), x, times, L)


def transmitted_target(tt: TargetTrajectory, x: np.ndarray, times: np.ndarray, L: float | None = None) -> DensityTriple:
    return evaluate_target(tt.model_copy(update={"kind": TargetKind.TRANSMITTED}), x, times, L)


def naive_transmitted_target(tt: TargetTrajectory, x: np.ndarray, times: np.ndarray, L: float | None = None) -> DensityTriple:
    return evaluate_target(tt.model_copy(update={"kind": TargetKind.NAIVE_TRANSMITTED}), x, times, L)


def _support_breakpoints(tt: TargetTrajectory, t: float) -> list[float]:
    w = tt.mollifier.support_half_width
    points = [0.0]
    for center in (tt.v * t, -tt.v * t):
        points += [center - w, center + w]
    for g in (tt.g1, tt.g2):
        points += [-g.support_half_width, g.support_half_width]
    return points


def target_totals(
        tt: TargetTrajectory,
        times: np.ndarray,
        nodes_per_panel: int = 8,
) -> dict[str, np.ndarray]:
    """
    int rho dx, int P dx, int E dx at each time, with panels aligned to every
    support edge so each piece is a smooth trigonometric polynomial.
    """
    times = np.atleast_1d(np.asarray(times, dtype=float))
    totals = {"mass": np.empty(times.size), "momentum": np.empty(times.size), "energy": np.empty(times.size)}
    for n, t in enumerate(times):
        breaks = _support_breakpoints(tt, float(t))
        reach = max(abs(b) for b in breaks) + 1.0
        width = min(0.25 * min(g.support_half_width for g in (tt.mollifier, tt.g1, tt.g2)), reach)
        x, w = piecewise_nodes([-reach, *breaks, reach], width, nodes_per_panel)
        fields = target_fields(tt, x, np.full_like(x, t))
        totals["mass"][n] = np.dot(w, fields["rho"])
        totals["momentum"][n] = np.dot(w, fields["momentum"])
        totals["energy"][n] = np.dot(w, fields["energy"])
    return totals


# ── Stationary scattering ────────────────────────────────────────────────────

def stationary_pure_densities(
        k: float,
        x: np.ndarray,
        units: Units | None = None,
        side: str | None = None,
) -> DensityTriple:
    """
    Densities of A0 e^{ikx} + A_R e^{-ikx} (x < 0) and A_T e^{ikx} (x > 0), A0 = 1.
    `side` ("left"/"right") forces one formula on every x.
    """
    units = units or Units()
    x = np.asarray(x, dtype=float)
    A_R, A_T = scattering_amplitudes(k, units)
    r2, t2 = abs(A_R) ** 2, abs(A_T) ** 2
    hk = units.hbar * k
    kinetic = hk * hk / (2.0 * units.m)

    if side is None:
        left = x < 0
    elif side in ("left", "right"):
        left = np.full(x.shape, side == "left")
    else:
        raise DomainError(f"side must be 'left' or 'right', got {side!r}")

    interference = np.where(left, 2.0 * np.real(np.conj(A_R) * np.exp(2j * k * x)), 0.0)
    rho = np.where(left, 1.0 + r2, t2) + interference
    momentum = np.where(left, (1.0 - r2) * hk, t2 * hk)
    energy = np.where(left, (1.0 + r2) * kinetic, t2 * kinetic)
    return DensityTriple(
        x=x, times=np.array([0.0]), m=units.m, hbar=units.hbar,
        rho=rho[:, None], momentum=momentum[:, None], energy=energy[:, None], interference=interference[:, None],
    )


def _mixture_pass(
        members: list[tuple[float, TargetTrajectory]],
        x: np.ndarray,
        breaks: np.ndarray,
        rule: QuadratureRule,
) -> dict[str, np.ndarray]:
    """v * int ds of each member over s = t - t0, breakpoint pieces per x row."""
    ref_x = np.asarray(rule.reference_nodes)
    ref_w = np.asarray(rule.reference_weights)
    a, b = breaks[:, :-1], breaks[:, 1:]
    h = (b - a) / rule.panels
    panel = np.arange(rule.panels)
    # nodes[i, piece, panel, node]
    centers = a[:, :, None] + h[:, :, None] * (panel[None, None, :] + 0.5)
    nodes = centers[..., None] + 0.5 * h[:, :, None, None] * ref_x
    weights = 0.5 * h[:, :, None, None] * np.broadcast_to(ref_w, nodes.shape)
    nodes = nodes.reshape(x.size, -1)
    weights = weights.reshape(x.size, -1)

    out = {name: np.zeros(x.size) for name in ("rho", "momentum", "energy")}
    for weight, tt in members:
        fields = target_fields(tt, x[:, None], nodes)
        for name in out:
            out[name] += weight * tt.v * np.sum(weights * fields[name], axis=1)
    return out


def mixture_density(
        k: float,
        x: np.ndarray,
        dx: float,
        units: Units | None = None,
        kind: MollifierKind = MollifierKind.COS4,
        weights: tuple[float, float] | None = None,
        panels: int = 4,
        nodes_per_panel: int = 8,
        tol: float = 1e-10,
) -> DensityTriple:
    """
    Uniform mixture over emission times t0 of reflected and transmitted packets,
    weighted |A_R|^2 and |A_T|^2 (or `weights`). The result is stationary.
    """
    units = units or Units()
    x = np.asarray(x, dtype=float)
    v = units.hbar * k / units.m
    if weights is None:
        A_R, A_T = scattering_amplitudes(k, units)
        weights = (abs(A_R) ** 2, abs(A_T) ** 2)
    packet = Mollifier(kind=kind, width=dx)
    common = dict(v=v, mollifier=packet, m=units.m, hbar=units.hbar, V0=units.V0)
    members = [
        (weights[0], TargetTrajectory(kind=TargetKind.REFLECTED, **common)),
        (weights[1], TargetTrajectory(kind=TargetKind.TRANSMITTED, **common)),
    ]

    w = packet.support_half_width
    w_t = members[1][1].time_mollifier.support_half_width
    span = (np.abs(x) + w) / v + w_t
    breaks = np.stack([
        -span, (x - w) / v, (x + w) / v, (-x - w) / v, (-x + w) / v,
        np.full_like(x, -w_t), np.zeros_like(x), np.full_like(x, w_t), span,
    ], axis=1)
    breaks = np.sort(np.clip(breaks, -span[:, None], span[:, None]), axis=1)

    coarse = _mixture_pass(members, x, breaks, QuadratureRule(panels=panels, nodes=nodes_per_panel))
    fine = _mixture_pass(members, x, breaks, QuadratureRule(panels=2 * panels, nodes=nodes_per_panel))
    for name in fine:
        scale = max(1.0, float(np.max(np.abs(fine[name]))))
        gap = float(np.max(np.abs(fine[name] - coarse[name]))) if x.size else 0.0
        if gap > tol * scale:
            raise IntegrationError(f"mixture {name} did not converge: panel doubling changed it by {gap:.3e}")
    logger.info("[Mixture] k=%g v=%g weights=(%.6g, %.6g) over %d points", k, v, weights[0], weights[1], x.size)

    return DensityTriple(
        x=x, times=np.array([0.0]), m=units.m, hbar=units.hbar,
        rho=fine["rho"][:, None], momentum=fine["momentum"][:, None], energy=fine["energy"][:, None],
        interference=np.zeros((x.size, 1)),
    )
