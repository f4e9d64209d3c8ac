import math

import numpy as np
import pytest

from qtraj.exceptions import DomainError, ShapeError
from qtraj.models.fields import PotentialKind, PotentialSpec
from qtraj.models.synth import PacketStats
from qtraj.models.targets import DensityTriple, Mollifier, TargetKind, TargetTrajectory
from qtraj.services.synth import packet_series
from qtraj.services.targets import evaluate_target, naive_transmitted_target, reflected_target, transmitted_target
from qtraj.services.verify import (
    check_boundary_decay,
    check_hierarchy,
    check_target_ehrenfest,
    check_unitarity,
    ehrenfest_force_deviation,
    interference_contrast,
    localization_report,
    quantization_check,
    trajectory_properties,
)


def _target(kind: TargetKind, dx: float = 3.0, v: float = 1.0) -> TargetTrajectory:
    return TargetTrajectory(kind=kind, v=v, mollifier=Mollifier(width=dx))


def _gaussian(x: np.ndarray, center: float, sigma: float) -> np.ndarray:
    return np.exp(-0.5 * ((x - center) / sigma) ** 2) / (math.sqrt(2.0 * math.pi) * sigma)


# ── Boundary decay ───────────────────────────────────────────────────────────

def test_naive_transmitted_target_leaks_to_the_box_edge():
    x = np.linspace(-40.0, 40.0, 801)
    report = check_boundary_decay(naive_transmitted_target(_target(TargetKind.NAIVE_TRANSMITTED), x, np.array([0.0, 0.5])))
    assert not report.get("energy_boundary").passed
    assert not report.get("ehrenfest_boundary").passed
    assert report.get("unitarity_boundary").passed


def test_naive_transmitted_target_fails_at_the_crossing_instant():
    x = np.linspace(-40.0, 40.0, 801)
    report = check_boundary_decay(naive_transmitted_target(_target(TargetKind.NAIVE_TRANSMITTED), x, np.array([0.0])))
    assert not report.get("ehrenfest_boundary").passed
    assert report.get("ehrenfest_boundary").residual > 1e-2
    assert not report.get("energy_boundary").passed
    assert report.get("unitarity_boundary").passed


def test_corrected_transmitted_target_decays():
    x = np.linspace(-40.0, 40.0, 1601)
    report = check_boundary_decay(transmitted_target(_target(TargetKind.TRANSMITTED), x, np.array([0.0, 0.5])))
    assert report.passed, report.failures()
    assert {check.name for check in report.checks} == {"unitarity_boundary", "ehrenfest_boundary", "energy_boundary"}


def test_boundary_decay_skips_missing_components():
    x = np.linspace(-1.0, 1.0, 21)
    zeros = np.zeros((21, 1))
    report = check_boundary_decay(DensityTriple(x=x, times=np.array([0.0]), rho=zeros, momentum=zeros, energy=zeros))
    assert report.checks == []


def test_hierarchy_needs_the_first_component():
    x = np.linspace(-1.0, 1.0, 21)
    zeros = np.zeros((21, 3))
    with pytest.raises(ShapeError):
        check_hierarchy(DensityTriple(x=x, times=np.arange(3.0), rho=zeros, momentum=zeros, energy=zeros))


# ── Conservation ─────────────────────────────────────────────────────────────

def test_reflected_target_conserves_mass():
    triple = reflected_target(_target(TargetKind.REFLECTED), np.linspace(-50.0, 50.0, 2001), np.linspace(-30.0, 30.0, 13))
    report = check_unitarity(triple)
    assert report.passed
    assert report.get("unitarity").detail["initial_mass"] == pytest.approx(1.0, abs=1e-6)


def test_unitarity_from_precomputed_masses():
    assert not check_unitarity([1.0, 1.0, 1.0 + 1e-6]).passed
    assert check_unitarity([2.0, 2.0]).get("unitarity").residual == 0.0


def test_unitarity_needs_two_samples():
    with pytest.raises(ShapeError):
        check_unitarity([1.0])


# ── Quantization ─────────────────────────────────────────────────────────────

@pytest.mark.parametrize("a, b", [(3, 0), (5, 2), (1, 4)])
def test_oscillator_level_spacing_is_quantized(a, b):
    check = quantization_check(a + 0.5, b + 0.5, 2.0 * math.pi)
    assert check.passed
    assert check.detail["n"] == a - b


def test_off_grid_energy_difference_fails():
    check = quantization_check(0.5, 0.7, 1.0)
    assert not check.passed
    assert check.detail["n"] == 0
    assert check.residual == pytest.approx(0.2 / (2.0 * math.pi))


def test_equal_energies_are_trivially_quantized():
    check = quantization_check(1.25, 1.25, 3.0)
    assert check.passed
    assert check.detail["n"] == 0


def test_quantization_needs_a_positive_period():
    with pytest.raises(DomainError):
        quantization_check(1.0, 0.5, 0.0)


# ── Interference contrast ────────────────────────────────────────────────────

def test_pure_fringes_clear_the_plateau_threshold():
    x = np.linspace(-20.0, -5.0, 301)
    check = interference_contrast(1.4 * np.cos(2.0 * x), 1e-6)
    assert check.passed
    assert check.residual == 0.0
    assert check.detail["peak_to_peak"] == pytest.approx(2.8, rel=1e-2)


def test_flat_pure_state_fails_the_contrast_check():
    check = interference_contrast(np.full(50, 0.3), 1e-6)
    assert not check.passed
    assert check.residual == pytest.approx(1.0)


def test_weak_fringes_report_the_missing_fraction():
    check = interference_contrast(np.array([0.0, 2.5e-5, 0.0]), 1e-6)
    assert check.residual == pytest.approx(0.75)
    assert check.detail["threshold"] == pytest.approx(1e-4)


def test_contrast_needs_a_positive_level():
    with pytest.raises(DomainError):
        interference_contrast(np.ones(3), 0.0)


# ── Ehrenfest ────────────────────────────────────────────────────────────────

def test_reflected_target_center_follows_the_classical_path():
    triple = reflected_target(_target(TargetKind.REFLECTED), np.linspace(-50.0, 50.0, 2001), np.linspace(-30.0, 30.0, 121))
    centers = np.array([s.x_mean for s in packet_series(triple)])
    report = check_target_ehrenfest(triple.times, centers, 1.0, -1.0, exclude=5.0)
    assert report.passed, report.get("target_ehrenfest").residual


def test_wrong_outgoing_velocity_is_flagged():
    times = np.linspace(-10.0, 10.0, 41)
    report = check_target_ehrenfest(times, -np.abs(times), 1.0, 1.0, exclude=2.0)
    assert report.get("target_ehrenfest").residual == pytest.approx(2.0)


def test_no_force_deviation_in_a_quadratic_potential():
    x = np.linspace(-8.0, 8.0, 4001)
    direct, series = ehrenfest_force_deviation(_gaussian(x, 1.0, 0.5), x, PotentialSpec.harmonic(2.0))
    assert direct == pytest.approx(0.0, abs=1e-12)
    assert series == 0.0


def test_quartic_force_deviation_matches_moment_series():
    x = np.linspace(-6.0, 8.0, 4001)
    V = PotentialSpec(kind=PotentialKind.QUARTIC, strength=1.0)
    direct, series = ehrenfest_force_deviation(_gaussian(x, 1.0, 0.5), x, V)
    # <4 x^3> - 4 <x>^3 = 12 <x> sigma^2 for a symmetric packet
    assert direct == pytest.approx(3.0, rel=1e-8)
    assert series == pytest.approx(direct, rel=1e-8)


def test_force_deviation_needs_an_order_for_tables():
    x = np.linspace(-1.0, 1.0, 11)
    V = PotentialSpec(kind=PotentialKind.TABULATED, samples_x=tuple(x.tolist()), samples_v=tuple((x * x).tolist()),
                      derivative_samples={1: tuple((2.0 * x).tolist())})
    with pytest.raises(DomainError):
        ehrenfest_force_deviation(np.ones(11), x, V)


def test_force_deviation_of_empty_density():
    x = np.linspace(-1.0, 1.0, 11)
    with pytest.raises(DomainError):
        ehrenfest_force_deviation(np.zeros(11), x, PotentialSpec.harmonic(1.0))


# ── Trajectory shape ─────────────────────────────────────────────────────────

def _stats(widths: dict[float, float]) -> list[PacketStats]:
    times = np.linspace(-10.0, 10.0, 21)
    return [PacketStats(t=float(t), x_mean=0.0, sigma_x=widths.get(float(t), 1.0)) for t in times]


def test_localized_packet_passes():
    assert localization_report(_stats({}), mollifier_sigma=1.0, T=10.0).passed


def test_spread_packet_is_flagged():
    report = localization_report(_stats({5.0: 3.0}), mollifier_sigma=1.0, T=10.0)
    assert not report.passed
    assert report.get("localization").detail["sigma_half_window"] == 3.0


def test_trajectory_properties_need_the_outer_window():
    triple = evaluate_target(_target(TargetKind.REFLECTED), np.linspace(-40.0, 40.0, 401), np.array([0.0, 1.0]))
    with pytest.raises(DomainError):
        trajectory_properties(triple, TargetKind.REFLECTED, 1.0, 3.0, 40.0)
