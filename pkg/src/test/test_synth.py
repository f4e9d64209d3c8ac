import math

import numpy as np
import pytest

from qtraj.exceptions import DomainError, EvaluationError, SymmetryError, UndefinedStatsError
from qtraj.models.basis import Units
from qtraj.models.fields import PotentialKind, PotentialSpec
from qtraj.models.synth import CoefficientMatrix, ScalarProductSpec
from qtraj.models.targets import DensityTriple, Mollifier, TargetKind, TargetTrajectory
from qtraj.services.basis import build_basis
from qtraj.services.numerics import piecewise_nodes
from qtraj.services.synth import (
    assemble_gram,
    assemble_rhs,
    build_pair_table,
    build_real_basis,
    default_scalar_product,
    density_totals,
    gram_by_quadrature,
    packet_stats,
    pair_densities,
    project_target,
    reconstruct,
    real_basis_densities,
    reconstruct_hierarchy,
    scalar_product,
)
from qtraj.services.targets import mollifier_eval
from qtraj.services.verify import check_hierarchy, trajectory_properties


def _random_hermitian(size: int, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((size, size)) + 1j * rng.standard_normal((size, size))
    return 0.5 * (A + A.conj().T)


@pytest.fixture(scope="module")
def small_basis():
    return build_basis(3, 3.0)


# ── Pair densities ───────────────────────────────────────────────────────────

def test_diagonal_pair_is_static(small_basis):
    pair = pair_densities(small_basis, 2, 2)
    x = np.linspace(-3.0, 3.0, 31)
    rho_0, _, _ = pair(x, 0.0)
    rho_t, momentum_t, energy_t = pair(x, 7.3)
    np.testing.assert_allclose(rho_t, rho_0)
    np.testing.assert_allclose(momentum_t, 0.0, atol=1e-15)
    np.testing.assert_allclose(energy_t, small_basis.modes[2].omega * rho_t)


def test_pair_index_out_of_range(small_basis):
    with pytest.raises(DomainError):
        pair_densities(small_basis, 0, 4)


# ── Gram matrix ──────────────────────────────────────────────────────────────

@pytest.mark.parametrize("mask", [False, True])
def test_gram_matches_quadrature_oracle(mask):
    basis = build_basis(10, 10.0)
    spec = default_scalar_product(Units(), v=1.0, T=5.0, dx=1.0, mask=mask)
    G = assemble_gram(basis, spec)
    rng = np.random.default_rng(11)
    entries = [tuple(int(a) for a in pair) for pair in rng.integers(0, G.shape[0], size=(200, 2))]
    oracle = gram_by_quadrature(basis, spec, entries)
    analytic = np.array([G[a, b] for a, b in entries])
    np.testing.assert_allclose(analytic, oracle, rtol=1e-6, atol=1e-9 * np.max(np.abs(G)))


def test_gram_single_entry_reduces_to_fourth_power_integral():
    basis = build_basis(2, 4.0)
    spec = ScalarProductSpec(w0=1.0, w1=0.0, w2=0.0, T=2.5)
    G = assemble_gram(basis, spec)
    x, w = piecewise_nodes([-4.0, 0.0, 4.0], 0.1, 16)
    f0 = np.cos(basis.modes[0].k * np.abs(x) - basis.modes[0].phi)
    assert G[0, 0] == pytest.approx(2.0 * 2.5 * np.dot(w, f0 ** 4), rel=1e-12)


def test_gram_is_symmetric_positive_semidefinite():
    basis = build_basis(6, 5.0)
    G = assemble_gram(basis, default_scalar_product(Units(), v=1.0, T=3.0, dx=1.0, mask=True))
    np.testing.assert_array_equal(G, G.T)
    assert np.linalg.eigvalsh(G).min() >= -1e-8 * np.linalg.norm(G)


def test_gram_does_not_depend_on_thread_count():
    basis = build_basis(12, 6.0)
    spec = default_scalar_product(Units(), v=1.0, T=3.0, dx=1.0)
    np.testing.assert_array_equal(assemble_gram(basis, spec, threads=1), assemble_gram(basis, spec, threads=4))


def test_mask_must_fit_inside_the_window():
    basis = build_basis(2, 2.0)
    spec = default_scalar_product(Units(), v=1.0, T=3.0, dx=1.0, mask=True)
    with pytest.raises(DomainError):
        assemble_gram(basis, spec)


def test_zero_width_mask_reproduces_the_unmasked_product():
    basis = build_basis(5, 5.0)
    plain = ScalarProductSpec(w0=1.0, w1=0.5, w2=0.25, T=3.0)
    empty = plain.model_copy(update={"mask": True, "mask_space": 0.0, "mask_time": 0.0})
    assert np.array_equal(assemble_gram(basis, empty), assemble_gram(basis, plain))
    tt = TargetTrajectory(kind=TargetKind.REFLECTED, v=1.0, mollifier=Mollifier(width=1.0))
    assert np.array_equal(assemble_rhs(basis, empty, tt), assemble_rhs(basis, plain, tt))


def test_real_basis_has_one_unknown_per_real_degree_of_freedom(small_basis):
    real = build_real_basis(build_pair_table(small_basis))
    assert real.size == 16


# ── Scalar product ───────────────────────────────────────────────────────────

def test_scalar_product_matches_gram_entries():
    basis = build_basis(4, 5.0)
    spec = default_scalar_product(Units(), v=1.0, T=3.0, dx=1.0, mask=True)
    G = assemble_gram(basis, spec)
    for a, b in [(0, 0), (1, 5), (7, 12)]:
        value = scalar_product(
            basis, spec,
            lambda x, t, a=a: real_basis_densities(basis, a, x, t),
            lambda x, t, b=b: real_basis_densities(basis, b, x, t),
        )
        assert value.real == pytest.approx(G[a, b], rel=1e-6, abs=1e-9 * np.max(np.abs(G)))
        assert value.imag == pytest.approx(0.0, abs=1e-12)


def test_scalar_product_is_hermitian(small_basis):
    spec = default_scalar_product(Units(), v=1.0, T=2.0, dx=1.0)
    a, b = pair_densities(small_basis, 0, 2), pair_densities(small_basis, 1, 3)
    ab = scalar_product(small_basis, spec, a, b)
    ba = scalar_product(small_basis, spec, b, a)
    assert ab == pytest.approx(ba.conjugate(), rel=1e-12, abs=1e-12)
    norm = scalar_product(small_basis, spec, a, a)
    assert norm.real > 0
    assert norm.imag == pytest.approx(0.0, abs=1e-12 * norm.real)


def test_scalar_product_rejects_divergent_densities(small_basis):
    spec = default_scalar_product(Units(), v=1.0, T=2.0, dx=1.0)

    def singular(x, t):
        with np.errstate(over="ignore"):
            rho = np.exp(1e3 * np.abs(x))
        return rho, np.zeros_like(rho), np.zeros_like(rho)

    with pytest.raises(EvaluationError):
        scalar_product(small_basis, spec, singular, pair_densities(small_basis, 0, 0))


# ── Projection ───────────────────────────────────────────────────────────────

def test_projection_recovers_coefficients_in_the_span(small_basis):
    C_star = CoefficientMatrix(values=_random_hermitian(4))

    def target(x: np.ndarray, t: np.ndarray) -> DensityTriple:
        return reconstruct(C_star, small_basis, x, t)

    spec = ScalarProductSpec(w0=1.0, w1=1.0, w2=0.5, T=5.0, ridge=1e-12)
    result = project_target(target, small_basis, spec, nodes_per_panel=16)
    np.testing.assert_allclose(result.coefficients.values, C_star.values, atol=1e-6)
    assert result.residual < 1e-8
    assert result.misfit < 1e-3


def test_enlarging_a_nested_basis_never_worsens_the_fit():
    rich = build_basis(6, 3.0)
    C_star = CoefficientMatrix(values=_random_hermitian(7, seed=3))

    def target(x: np.ndarray, t: np.ndarray) -> DensityTriple:
        return reconstruct(C_star, rich, x, t)

    spec = ScalarProductSpec(w0=1.0, w1=1.0, w2=0.5, T=5.0)
    misfits = [project_target(target, build_basis(n, 3.0), spec, nodes_per_panel=16).misfit for n in (2, 3, 4, 5)]
    assert misfits[0] > 1e-2
    for smaller, larger in zip(misfits, misfits[1:]):
        assert larger <= smaller + 1e-6


def test_zero_target_gives_zero_coefficients(small_basis):
    def target(x: np.ndarray, t: np.ndarray) -> DensityTriple:
        zeros = np.zeros((x.size, t.size))
        return DensityTriple(x=x, times=t, rho=zeros, momentum=zeros, energy=zeros)

    result = project_target(target, small_basis, ScalarProductSpec(T=2.0))
    np.testing.assert_array_equal(result.coefficients.values, 0.0)
    assert result.residual == 0.0


def test_non_hermitian_coefficients_rejected():
    with pytest.raises(SymmetryError):
        CoefficientMatrix(values=np.array([[1.0, 1.0j], [1.0j, 0.0]]))


# ── Reconstruction ───────────────────────────────────────────────────────────

def test_single_diagonal_coefficient_gives_static_mode_density(small_basis):
    values = np.zeros((4, 4), dtype=complex)
    values[1, 1] = 2.0
    x = np.linspace(-3.0, 3.0, 61)
    triple = reconstruct(CoefficientMatrix(values=values), small_basis, x, np.array([0.0, 1.0, 2.0]))
    expected = 2.0 * np.sin(small_basis.modes[1].k * x) ** 2
    for n in range(3):
        np.testing.assert_allclose(triple.rho[:, n], expected, atol=1e-14)
    np.testing.assert_allclose(triple.momentum, 0.0, atol=1e-14)


def test_reconstruction_obeys_the_hierarchy():
    basis = build_basis(6, 5.0)
    C = CoefficientMatrix(values=_random_hermitian(7, seed=3))
    x = np.linspace(-5.0, 5.0, 1001)
    times = np.linspace(-2.0, 2.0, 81)
    triple = reconstruct_hierarchy(C, basis, x, times)
    report = check_hierarchy(triple, PotentialSpec(kind=PotentialKind.DELTA_BARRIER, strength=1.0))
    assert report.passed, report.failures()
    assert {check.name for check in report.checks} == {"hierarchy_1", "hierarchy_2", "hierarchy_3", "hierarchy_jump"}


def test_corrupted_momentum_breaks_continuity():
    basis = build_basis(6, 5.0)
    C = CoefficientMatrix(values=_random_hermitian(7, seed=3))
    triple = reconstruct_hierarchy(C, basis, np.linspace(-5.0, 5.0, 1001), np.linspace(-2.0, 2.0, 81))
    corrupted = triple.model_copy(update={"phi1": 1.1 * triple.phi1})
    residual = check_hierarchy(corrupted).get("hierarchy_1").residual
    assert residual == pytest.approx(0.1, rel=0.05)


def test_energy_to_mass_ratio_of_a_mode(small_basis):
    values = np.zeros((4, 4), dtype=complex)
    values[2, 2] = 1.0
    x = np.linspace(-3.0, 3.0, 2001)
    totals = density_totals(reconstruct(CoefficientMatrix(values=values), small_basis, x, np.array([0.0, 1.0])))
    np.testing.assert_allclose(totals["energy"] / totals["mass"], small_basis.modes[2].omega, rtol=1e-12)


# ── Packet statistics ────────────────────────────────────────────────────────

def test_packet_center_by_symmetry():
    x = np.linspace(-20.0, 30.0, 5001)
    stats = packet_stats(x, mollifier_eval(Mollifier(width=3.0), x - 5.0))
    assert stats.x_mean == pytest.approx(5.0, abs=1e-12)


def test_packet_width_scales_with_mollifier_width():
    x = np.linspace(-20.0, 20.0, 8001)
    narrow = packet_stats(x, mollifier_eval(Mollifier(width=1.5), x)).sigma_x
    wide = packet_stats(x, mollifier_eval(Mollifier(width=3.0), x)).sigma_x
    assert wide / 3.0 == pytest.approx(narrow / 1.5, rel=1e-6)


def test_far_field_ripple_barely_moves_the_center():
    x = np.linspace(-40.0, 40.0, 8001)
    rho = mollifier_eval(Mollifier(width=3.0), x - 5.0)
    ripple = np.where(x < -20.0, 0.005 * rho.max() * (1.0 + np.cos(x)), 0.0)
    shifted = packet_stats(x, rho + ripple)
    assert abs(shifted.x_mean - 5.0) < 0.1 * 3.0


def test_zero_density_has_no_stats():
    with pytest.raises(UndefinedStatsError):
        packet_stats(np.linspace(0.0, 1.0, 11), np.zeros(11))


# ── Desk-scale synthesis ─────────────────────────────────────────────────────

@pytest.mark.slow
@pytest.mark.parametrize("kind", [TargetKind.REFLECTED, TargetKind.TRANSMITTED])
def test_synthesized_trajectory_follows_its_target(kind):
    L, dx, v = 40.0, 3.0, 1.0
    T = L - 0.5 * math.pi * dx
    basis = build_basis(40, L)
    tt = TargetTrajectory(kind=kind, v=v, mollifier=Mollifier(width=dx))
    spec = default_scalar_product(Units(), v=v, T=T, dx=dx, mask=kind is TargetKind.TRANSMITTED)
    result = project_target(tt, basis, spec)
    series = reconstruct(result.coefficients, basis, np.linspace(-L, L, 801), np.linspace(-T, T, 81))
    report = trajectory_properties(series, kind, v, dx, L)
    assert report.passed, report.failures()
