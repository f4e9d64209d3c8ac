import math

import numpy as np
import pytest

from qtraj.exceptions import DomainError, UnsupportedOrderError
from qtraj.models.basis import Parity, Units
from qtraj.services.basis import (
    build_basis,
    eval_mode,
    kink_jump,
    overlap_matrix,
    scattering_amplitudes,
    solve_mode,
)


@pytest.fixture(scope="module")
def basis_100():
    return build_basis(100, 100.0)


def test_odd_mode_wavenumber():
    mode = solve_mode(1, 100.0)
    assert mode.parity is Parity.ODD
    assert mode.k == pytest.approx(math.pi / 100.0, rel=1e-15)
    assert mode.phi == 0.0


def test_ground_mode_solves_phase_equation():
    mode = solve_mode(0, 100.0)
    assert mode.parity is Parity.EVEN
    assert 0.0 < mode.phi < 0.5 * math.pi
    assert abs(mode.phi * math.tan(mode.phi) - 100.0) / 100.0 < 1e-10
    assert mode.k == pytest.approx(mode.phi / 100.0, rel=1e-15)


def test_high_even_modes_approach_free_box():
    mode = solve_mode(400, 10.0)
    assert mode.phi < 0.02
    assert mode.k * 10.0 - 200.0 * math.pi == pytest.approx(mode.phi)


def test_negative_index_rejected():
    with pytest.raises(DomainError):
        solve_mode(-1, 10.0)


def test_basis_has_increasing_wavenumbers(basis_100):
    ks = [mode.k for mode in basis_100.modes]
    assert len(ks) == 101
    assert all(b > a for a, b in zip(ks, ks[1:]))


def test_even_mode_identity(basis_100):
    for mode in basis_100.modes:
        if mode.parity is Parity.EVEN:
            assert abs(mode.k * math.sin(mode.phi) - math.cos(mode.phi)) < 1e-12
        else:
            assert mode.k * basis_100.L == pytest.approx((mode.n + 1) * 0.5 * math.pi, rel=1e-15)


def test_smallest_basis():
    basis = build_basis(1, 10.0)
    assert [mode.parity for mode in basis.modes] == [Parity.EVEN, Parity.ODD]


@pytest.mark.parametrize("N", [0, -3])
def test_basis_needs_two_modes(N):
    with pytest.raises(DomainError):
        build_basis(N, 10.0)


def test_modes_are_orthogonal(basis_100):
    S = overlap_matrix(basis_100)
    norms = np.sqrt(np.diag(S))
    off = np.abs(S - np.diag(np.diag(S))) / np.outer(norms, norms)
    assert off.max() < 1e-8


def test_modes_match_across_the_box_edge():
    basis = build_basis(12, 7.0)
    for mode in basis.modes:
        for derivative in (0, 1):
            left, right = eval_mode(mode, np.array([-7.0, 7.0]), derivative)
            assert left == pytest.approx(right, abs=1e-10)


def test_mode_values_at_origin():
    even, odd = solve_mode(2, 10.0), solve_mode(3, 10.0)
    assert eval_mode(even, np.array(0.0)) == pytest.approx(math.cos(even.phi))
    assert eval_mode(odd, np.array(0.0)) == 0.0


def test_kink_jump_matches_one_sided_differences():
    mode = solve_mode(4, 10.0)
    h = 1e-6
    right = (eval_mode(mode, np.array(2 * h)) - eval_mode(mode, np.array(h))) / h
    left = (eval_mode(mode, np.array(-h)) - eval_mode(mode, np.array(-2 * h))) / h
    assert kink_jump(mode) == pytest.approx(2.0 * mode.k * math.sin(mode.phi))
    assert right - left == pytest.approx(kink_jump(mode), rel=1e-4)


def test_mode_equation_away_from_barrier():
    mode = solve_mode(6, 10.0)
    x = np.linspace(0.5, 9.5, 50)
    residual = eval_mode(mode, x, 2) + mode.k ** 2 * eval_mode(mode, x)
    assert np.max(np.abs(residual)) < 1e-8


def test_eval_outside_box():
    with pytest.raises(DomainError):
        eval_mode(solve_mode(0, 5.0), np.array([6.0]), L=5.0)


def test_eval_unsupported_derivative():
    with pytest.raises(UnsupportedOrderError):
        eval_mode(solve_mode(0, 5.0), np.array([1.0]), derivative=4)


# ── Scattering ───────────────────────────────────────────────────────────────

def test_equal_split_at_unit_wavenumber():
    A_R, A_T = scattering_amplitudes(1.0)
    assert abs(A_T) ** 2 == pytest.approx(0.5, abs=1e-15)
    assert abs(A_R) ** 2 == pytest.approx(0.5, abs=1e-15)


def test_transmission_at_k_two():
    _, A_T = scattering_amplitudes(2.0)
    assert abs(A_T) ** 2 == pytest.approx(0.8, abs=1e-14)


def test_barrier_transparent_at_high_energy():
    _, A_T = scattering_amplitudes(1e6)
    assert abs(A_T) ** 2 == pytest.approx(1.0, abs=1e-11)


@pytest.mark.parametrize("units", [Units(), Units(m=2.0, hbar=0.5, V0=3.0)])
def test_scattering_unitarity(units):
    for k in np.logspace(-1, 1, 100):
        A_R, A_T = scattering_amplitudes(float(k), units)
        assert abs(abs(A_R) ** 2 + abs(A_T) ** 2 - 1.0) < 1e-12


def test_nonpositive_wavenumber_rejected():
    with pytest.raises(DomainError):
        scattering_amplitudes(0.0)
