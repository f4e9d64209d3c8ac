import math

import numpy as np
import pytest
from scipy.integrate import trapezoid

from qtraj.exceptions import DomainError, ResolutionError, UnsupportedOrderError
from qtraj.models.targets import Mollifier, MollifierKind, TargetKind, TargetTrajectory
from qtraj.services.basis import scattering_amplitudes
from qtraj.services.targets import (
    evaluate_target,
    mixture_density,
    mollifier_cumulative,
    mollifier_eval,
    naive_transmitted_target,
    reflected_target,
    stationary_pure_densities,
    target_totals,
    transmitted_target,
)


def _target(kind: TargetKind, dx: float = 3.0, v: float = 1.0) -> TargetTrajectory:
    return TargetTrajectory(kind=kind, v=v, mollifier=Mollifier(width=dx))


# ── Mollifiers ───────────────────────────────────────────────────────────────

def test_cos4_peak_value():
    assert float(mollifier_eval(Mollifier(width=3.0), np.array(0.0))) == pytest.approx(8.0 / (9.0 * math.pi), rel=1e-14)


def test_cos4_fourth_derivative_at_origin():
    dx = 1.7
    value = float(mollifier_eval(Mollifier(width=dx), np.array(0.0), 4))
    assert value == pytest.approx(320.0 / (3.0 * math.pi * dx ** 5), rel=1e-12)


def test_cos4_vanishes_outside_support():
    moll = Mollifier(width=2.0)
    x = np.array([-moll.support_half_width - 0.1, moll.support_half_width, 10.0])
    for d in range(5):
        np.testing.assert_array_equal(mollifier_eval(moll, x, d), 0.0)


def test_mollifier_derivative_order_limit():
    with pytest.raises(UnsupportedOrderError):
        mollifier_eval(Mollifier(width=1.0), np.zeros(3), 5)


@pytest.mark.parametrize("kind", list(MollifierKind))
def test_mollifier_unit_mass_and_width(kind):
    moll = Mollifier(kind=kind, width=2.0)
    x = np.linspace(-30.0, 30.0, 60001)
    f = mollifier_eval(moll, x)
    assert trapezoid(f, x) == pytest.approx(1.0, abs=1e-9)
    assert math.sqrt(trapezoid(x * x * f, x)) == pytest.approx(moll.sigma, rel=1e-6)


@pytest.mark.parametrize("kind", list(MollifierKind))
def test_cumulative_limits(kind):
    moll = Mollifier(kind=kind, width=2.0)
    values = mollifier_cumulative(moll, np.array([-50.0, 0.0, 50.0]))
    np.testing.assert_allclose(values, [0.0, 0.5, 1.0], atol=1e-14)


def test_gaussian_derivatives_match_differences():
    moll = Mollifier(kind=MollifierKind.GAUSSIAN, width=1.0)
    x = np.linspace(-3.0, 3.0, 13)
    h = 1e-4
    for d in range(1, 5):
        numeric = (mollifier_eval(moll, x + h, d - 1) - mollifier_eval(moll, x - h, d - 1)) / (2.0 * h)
        np.testing.assert_allclose(mollifier_eval(moll, x, d), numeric, atol=1e-5)


# ── Targets ──────────────────────────────────────────────────────────────────

def test_reflected_packet_positions():
    tt = _target(TargetKind.REFLECTED)
    x = np.linspace(-50.0, 50.0, 2001)
    triple = reflected_target(tt, x, np.array([-40.0, 40.0]))
    assert x[np.argmax(triple.rho[:, 0])] == pytest.approx(-40.0)
    assert x[np.argmax(triple.rho[:, 1])] == pytest.approx(-40.0)
    assert trapezoid(triple.momentum[:, 0], x) == pytest.approx(1.0, abs=1e-8)
    assert trapezoid(triple.momentum[:, 1], x) == pytest.approx(-1.0, abs=1e-8)


def test_reflected_turning_point_has_no_net_flux():
    tt = _target(TargetKind.REFLECTED)
    triple = reflected_target(tt, np.linspace(-10.0, 10.0, 401), np.array([0.0]))
    np.testing.assert_allclose(triple.momentum[:, 0], 0.0, atol=1e-15)


@pytest.mark.parametrize("kind", [TargetKind.REFLECTED, TargetKind.TRANSMITTED])
def test_target_mass_is_conserved(kind):
    times = np.linspace(-30.0, 30.0, 21)
    totals = target_totals(_target(kind), times)
    np.testing.assert_allclose(totals["mass"], 1.0, atol=1e-8)


def test_reflected_energy_is_constant():
    totals = target_totals(_target(TargetKind.REFLECTED, v=1.5), np.linspace(-20.0, 20.0, 21))
    np.testing.assert_allclose(totals["energy"], 0.5 * 1.5 ** 2, atol=1e-8)


def test_transmitted_momentum_is_constant():
    totals = target_totals(_target(TargetKind.TRANSMITTED), np.linspace(-20.0, 20.0, 21))
    np.testing.assert_allclose(totals["momentum"], 1.0, atol=1e-8)


def test_transmitted_counterterms_live_near_the_barrier():
    tt = _target(TargetKind.TRANSMITTED)
    x = np.linspace(-40.0, 40.0, 1601)
    corrected = transmitted_target(tt, x, np.array([0.0]))
    free = evaluate_target(tt.model_copy(update={"kind": TargetKind.FREE}), x, np.array([0.0]))
    far = np.abs(x) > tt.g1.support_half_width
    np.testing.assert_allclose(corrected.phi2[far], free.phi2[far], atol=1e-14)
    assert np.max(np.abs(corrected.phi2 - free.phi2)) > 1e-3


def test_naive_transmitted_leaves_a_tail():
    tt = _target(TargetKind.NAIVE_TRANSMITTED)
    x = np.linspace(-40.0, 40.0, 801)
    triple = naive_transmitted_target(tt, x, np.array([0.0]))
    tail = x > 20.0
    assert np.max(np.abs(triple.phi3[tail, 0])) > 1e-3


def test_hierarchy_components_follow_phase_convention():
    tt = _target(TargetKind.FREE)
    triple = evaluate_target(tt, np.linspace(-10.0, 10.0, 101), np.array([0.0]))
    np.testing.assert_allclose(triple.phi1.real, 0.0)
    np.testing.assert_allclose(triple.phi2.imag, 0.0)
    np.testing.assert_allclose(triple.phi1.imag, triple.momentum)


def test_target_leaving_the_box():
    with pytest.raises(DomainError):
        evaluate_target(_target(TargetKind.REFLECTED), np.linspace(-40.0, 40.0, 81), np.array([-40.0]), L=40.0)


def test_coarse_grid_cannot_resolve_counterterms():
    with pytest.raises(ResolutionError):
        evaluate_target(_target(TargetKind.TRANSMITTED), np.linspace(-40.0, 40.0, 21), np.array([0.0]))


# ── Stationary scattering ────────────────────────────────────────────────────

def test_pure_state_shows_interference_on_the_left():
    x = np.linspace(-20.0, 20.0, 801)
    pure = stationary_pure_densities(1.0, x)
    A_R, A_T = scattering_amplitudes(1.0)
    left, right = x < 0, x > 0
    assert np.ptp(pure.rho[left, 0]) == pytest.approx(4.0 * abs(A_R), rel=5e-3)
    np.testing.assert_allclose(pure.rho[right, 0], abs(A_T) ** 2)
    np.testing.assert_allclose(pure.momentum[:, 0], abs(A_T) ** 2, atol=1e-14)


def test_pure_state_side_override():
    with pytest.raises(DomainError):
        stationary_pure_densities(1.0, np.zeros(3), side="middle")


def test_mixture_plateaus_without_interference():
    k, dx = 1.0, 3.0
    x = np.concatenate([np.linspace(-30.0, -6.0, 25), np.linspace(6.0, 30.0, 25)])
    mixture = mixture_density(k, x, dx)
    A_R, A_T = scattering_amplitudes(k)
    r2, t2 = abs(A_R) ** 2, abs(A_T) ** 2
    left, right = x < 0, x > 0
    np.testing.assert_allclose(mixture.rho[left, 0], 1.0 + r2, atol=1e-6)
    np.testing.assert_allclose(mixture.rho[right, 0], t2, atol=1e-6)
    np.testing.assert_allclose(mixture.momentum[:, 0], t2 * k, atol=1e-6)
    np.testing.assert_allclose(mixture.energy[right, 0], 0.5 * t2 * k * k, atol=1e-6)
    assert np.ptp(mixture.rho[left, 0]) < 1e-6
