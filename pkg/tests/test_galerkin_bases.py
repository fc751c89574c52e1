"""
Тесты для src/galerkin_bases.py (балка, теплопроводность, гармоническое продолжение, матрицы связи).
"""
import numpy as np
import pytest

from src.galerkin_bases import (
    analytic_sine_lifting,
    basis_dump,
    build_bases,
    build_heat_basis,
    build_plate_basis,
    clamped_beam_roots,
    fluid_gram,
    harmonic_extension,
    spectral_residual,
)
from src.quadrature import OmegaQuadrature


# --- Защемлённая балка ---


def test_first_clamped_root():
    """μ₁ = 4.7300407… при L = 1."""
    assert clamped_beam_roots(1, 1.0)[0] == pytest.approx(4.7300407, abs=1e-6)


def test_roots_scale_with_length():
    """μ_i(L) = μ_i(1) / L; корни лежат в (iπ, (i+1)π)/L."""
    r1 = clamped_beam_roots(5, 1.0)
    r2 = clamped_beam_roots(5, 2.0)
    assert np.allclose(r2, r1 / 2.0, rtol=1e-13)
    i = np.arange(1, 6)
    assert np.all((r1 > i * np.pi) & (r1 < (i + 1) * np.pi))


def test_roots_reject_bad_arguments():
    with pytest.raises(ValueError):
        clamped_beam_roots(0, 1.0)
    with pytest.raises(ValueError):
        clamped_beam_roots(3, -1.0)


def test_plate_basis_orthonormal_and_clamped():
    """Ортонормированность и s = s' = 0 на концах."""
    plate = build_plate_basis(4, 1.0)
    gq = plate.quad
    gram = (plate.node_values[0] * gq.w) @ plate.node_values[0].T
    assert np.max(np.abs(gram - np.eye(4))) < 1e-8
    ends = np.array([0.0, 1.0])
    assert np.max(np.abs(plate.eval(ends, 0))) < 1e-8
    assert np.max(np.abs(plate.eval(ends, 1)) / plate.mu_roots[:, None]) < 1e-8


def test_spectral_residual_small():
    """s'''' = ξ s с относительной невязкой ≤ 1e−8 (k = 8)."""
    plate = build_plate_basis(8, 1.0)
    assert np.max(spectral_residual(plate)) <= 1e-8
    assert np.allclose(plate.xi_s, plate.mu_roots**4)


def test_plate_project_recovers_coefficients():
    """Проекция синтезированной функции возвращает её коэффициенты."""
    plate = build_plate_basis(3, 1.0)
    c = np.array([0.3, -0.1, 0.05])
    assert np.allclose(plate.project(plate.synthesize(c, plate.quad.x)), c, atol=1e-10)


def test_heat_basis():
    """h_i = √(2/L) sin(iπx/L): ортонормированы, ξ^h = (iπ/L)²."""
    heat = build_heat_basis(3, 2.0)
    gq = heat.quad
    gram = (heat.node_values[0] * gq.w) @ heat.node_values[0].T
    assert np.allclose(gram, np.eye(3), atol=1e-12)
    assert np.allclose(heat.xi_h, (np.arange(1, 4) * np.pi / 2.0) ** 2)


# --- Гармоническое продолжение ---


def test_lifting_matches_analytic_sine():
    """Ext[sin(πx)] совпадает с точным решением; значение в (0.5, −0.5) ≈ 0.19927."""
    xs = np.linspace(0.0, 1.0, 129)
    lift = harmonic_extension(np.sin(np.pi * xs), 1.0)
    x = np.linspace(0.0, 1.0, 65)
    z = np.linspace(-1.0, 0.0, 33)
    assert np.max(np.abs(lift.value(x, z) - analytic_sine_lifting(1, 1.0, x, z))) < 1e-6
    assert lift.value(np.array([0.5]), np.array([-0.5]))[0, 0] == pytest.approx(0.19927, abs=1e-5)


def test_lifting_boundary_values():
    """След на z = 0 воспроизводится в узлах, на дне — ноль."""
    xs = np.linspace(0.0, 1.0, 33)
    trace = xs * (1.0 - xs) * np.sin(3.0 * xs)
    lift = harmonic_extension(trace, 1.0)
    assert np.allclose(lift.value(xs, np.array([0.0]))[:, 0], trace, atol=1e-12)
    assert np.allclose(lift.value(xs, np.array([-1.0])), 0.0, atol=1e-12)


def test_lifting_rejects_short_trace():
    with pytest.raises(ValueError):
        harmonic_extension(np.array([0.0, 1.0]), 1.0)


# --- Базис жидкости и матрицы связи ---


def test_fluid_basis_dirichlet_modes_orthonormal(bases2):
    """Первые k функций базиса жидкости ортонормированы в L²(Ω)."""
    quad = OmegaQuadrature.build(1.0, 16, 8, 4)
    table = bases2.fluid.tabulate(quad)
    gram = fluid_gram(table, quad)
    k = bases2.fluid.k
    assert bases2.fluid.size == 2 * k
    assert np.allclose(gram[:k, :k], np.eye(k), atol=1e-6)


def test_fluid_velocity_on_grid_matches_table(bases2, quad_small):
    """velocity_on_grid = Σ α_i g_i по таблице значений."""
    alpha = np.array([0.5, -0.2, 0.1, 0.3])
    table = bases2.fluid.tabulate(quad_small)
    U = bases2.fluid.velocity_on_grid(alpha, quad_small.x, quad_small.z)
    assert np.allclose(U, np.einsum("i,icxz->cxz", alpha, table.vals))


def test_coupled_matrices(bases2):
    """E_k симметрична и положительно определена, квадратура разрешена."""
    mats = bases2.mats
    assert mats.k == 2
    assert mats.M_k.shape == (2, 2)
    assert np.allclose(mats.E_k, mats.E_k.T)
    assert np.min(np.linalg.eigvalsh(mats.E_k)) > 0
    assert not mats.underresolved


def test_build_bases_cached():
    """Повторная сборка с теми же аргументами возвращает тот же объект."""
    assert build_bases(1, 1.0, 16, 6, 64) is build_bases(1, 1.0, 16, 6, 64)


def test_basis_dump_keys(bases2):
    dump = basis_dump(bases2)
    assert dump["k"] == 2
    assert set(dump) >= {"plate", "heat", "fluid", "coupled"}
    assert dump["plate"]["orthonormality_defect"] < 1e-8
    assert len(dump["fluid"]["modes"]) == 2
