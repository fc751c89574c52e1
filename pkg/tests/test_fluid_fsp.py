"""
Тесты для src/fluid_fsp.py (закон давления, матрицы импульса, итерация Пикара на окне).
"""
from types import SimpleNamespace

import numpy as np
import pytest

from src.errors import DimensionMismatchError, FixedPointError, MassMatrixError
from src.fluid_fsp import (
    FluidParams,
    FluidState,
    PressureLaw,
    assemble_mass_matrix,
    build_fsp_tables,
    convection_matrix,
    fsp_fixed_point,
    initial_density,
    initial_velocity,
    momentum_rhs,
    momentum_terms,
    penalty_terms,
    pressure_vector,
    transformed_basis_gradients,
    viscous_matrix,
    weighted_mass,
)
from src.geometry_ale import AleMap
from src.quadrature import OmegaQuadrature
from src.structure_ssp import NonlinearitySpec, PlateState, TraceHistory, ssp_step


DT = 0.005


# --- Fixtures ---


@pytest.fixture
def press():
    return PressureLaw(gamma=1.4, delta=1e-3, a=9.0)


@pytest.fixture
def params():
    return FluidParams(mu=1.0, lam=0.0, eps=1e-2)


def _ssp_window(bases, beta0, gamma0=(0.0, 0.0), substeps=16):
    state = PlateState.from_modes(2, beta0, gamma0)
    trace = TraceHistory.constant(np.zeros(2), 0.0, DT)
    return ssp_step(state, trace, (0.0, DT), substeps, bases.mats, NonlinearitySpec(), bases.plate, 1e-3, DT)


# --- Закон давления ---


def test_pressure_law_validation():
    with pytest.raises(ValueError):
        PressureLaw(gamma=1.0)
    with pytest.raises(ValueError):
        PressureLaw(a=8.0)
    with pytest.raises(ValueError):
        PressureLaw(delta=-1.0)


def test_internal_energy_identity(press):
    """r H'(r) − H(r) = p(r)."""
    r = np.linspace(0.1, 3.0, 50)
    assert np.allclose(r * press.h_prime(r) - press.internal(r), press.pressure(r), rtol=1e-12)


def test_h_second_is_derivative_of_h_prime(press):
    """H'' — производная H' (вес диссипации FD_ε)."""
    r = np.linspace(0.5, 2.0, 7)
    h = 1e-6
    fd = (press.h_prime(r + h) - press.h_prime(r - h)) / (2 * h)
    assert np.allclose(fd, press.h_second(r), rtol=1e-6)


# --- Масса и матрицы ---


def test_weighted_mass_constant_displacement(quad_small):
    """∫J r = L при w ≡ 0 и 1.5 L при w ≡ 0.5 (r ≡ 1)."""
    r = np.ones((quad_small.nx, quad_small.nz))
    assert weighted_mass(r, AleMap.from_values(quad_small.x, 0.0), quad_small) == pytest.approx(1.0)
    assert weighted_mass(r, AleMap.from_values(quad_small.x, 0.5), quad_small) == pytest.approx(1.5)


def test_weighted_mass_shape_mismatch(quad_small):
    with pytest.raises(DimensionMismatchError):
        weighted_mass(np.ones((3, 3)), AleMap.from_values(quad_small.x, 0.0), quad_small)


def test_mass_matrix_spd_and_detection(tabs_small):
    """M(J, r) симметрична и положительно определена; r ≤ 0 — MassMatrixError."""
    quad = tabs_small.quad
    ale = tabs_small.ale(np.array([0.05, -0.02]), np.zeros(2))
    r = 1.0 + 0.3 * np.random.default_rng(1).uniform(-1, 1, (quad.nx, quad.nz))
    M = assemble_mass_matrix(r, ale, tabs_small.table, quad)
    assert np.allclose(M, M.T)
    assert np.min(np.linalg.eigvalsh(M)) > 0
    with pytest.raises(MassMatrixError) as exc:
        assemble_mass_matrix(-np.ones_like(r), ale, tabs_small.table, quad)
    assert exc.value.detail["min_eigenvalue"] < 0


def test_convection_is_skew(tabs_small):
    """C^T = −C для любой переносящей скорости."""
    quad, table = tabs_small.quad, tabs_small.table
    ale = tabs_small.ale(np.array([0.05, 0.01]), np.array([0.2, 0.0]))
    grad, _ = transformed_basis_gradients(table, ale, quad.z)
    jr = ale.J[:, None] * np.ones((quad.x.size, quad.z.size))
    transport = np.einsum("i,ilxz->lxz", np.array([0.3, -0.1, 0.2, 0.5]), table.vals)
    C = convection_matrix(table, grad, jr, transport, quad)
    assert np.allclose(C, -C.T)


def test_viscous_matrix_psd(tabs_small):
    quad, table = tabs_small.quad, tabs_small.table
    ale = tabs_small.ale(np.array([0.05, 0.01]), np.zeros(2))
    grad, div = transformed_basis_gradients(table, ale, quad.z)
    K = viscous_matrix(grad, div, ale.J, 1.0, 0.0, quad)
    assert np.allclose(K, K.T)
    assert np.min(np.linalg.eigvalsh(K)) > 0


def test_penalty_terms_only_on_lifting_slots():
    pen, b = penalty_terms(2, np.array([1.0, 2.0]), 0.1)
    assert np.allclose(pen[:2, :], 0.0)
    assert np.allclose(pen[2:, 2:], np.eye(2) * 5.0)
    assert np.allclose(b, [0.0, 0.0, 5.0, 10.0])


# --- Правая часть импульса ---


def _rest_terms(tabs, press, alpha_frozen, dw_dt_modal, r_value=1.0):
    quad = tabs.quad
    ale = tabs.ale(np.zeros(2), np.asarray(dw_dt_modal, float))
    r = np.full((quad.x.size, quad.z.size), r_value)
    return ale, r, momentum_terms(
        ale.J[:, None] * r, np.zeros_like(r), alpha_frozen, ale, press.pressure(r), dw_dt_modal, DT, tabs.table, quad, 1.0, 0.0
    )


def test_rest_state_rhs_is_pressure_only(tabs_small, press):
    """Покой, плоская пластина, постоянная r: правая часть — только давление."""
    quad, table = tabs_small.quad, tabs_small.table
    ale, r, terms = _rest_terms(tabs_small, press, np.zeros(4), np.zeros(2))
    rhs = momentum_rhs(np.zeros(4), r, np.zeros_like(r), np.zeros(4), ale, press, np.zeros(2), DT, table, quad, 1.0, 0.0)
    _, div = transformed_basis_gradients(table, ale, quad.z)
    assert np.allclose(rhs, pressure_vector(div, ale.J, press.pressure(r), quad), atol=1e-13)
    assert np.allclose(terms.D, 0.0) and np.allclose(terms.b, 0.0)


def test_convection_does_no_work(tabs_small, press):
    """u·C(u)u = 0: перенос не меняет кинетическую энергию."""
    u = np.array([0.4, -0.3, 0.2, 0.7])
    _, _, terms = _rest_terms(tabs_small, press, u, np.array([0.3, -0.1]), r_value=1.2)
    assert abs(u @ terms.C @ u) <= 1e-12 * (1.0 + np.abs(terms.C).max())


def test_penalty_pulls_trace_toward_plate_velocity(tabs_small, press):
    """Штраф −(v − ∂t w)/(2Δt) на слотах Ext: ноль при v = ∂t w, знак против разности."""
    u = np.array([0.0, 0.0, 0.5, -0.2])
    _, _, matched = _rest_terms(tabs_small, press, u, u[2:])
    assert np.allclose(-matched.pen @ u + matched.b, 0.0)
    _, _, lagging = _rest_terms(tabs_small, press, u, u[2:] + np.array([0.1, 0.0]))
    pen_force = -lagging.pen @ u + lagging.b
    assert np.allclose(pen_force[:2], 0.0)
    assert pen_force[2] == pytest.approx(0.1 / (2 * DT))
    assert pen_force[3] == pytest.approx(0.0, abs=1e-12)


def test_momentum_rhs_dimension_check(tabs_small, press):
    quad = tabs_small.quad
    ale = tabs_small.ale(np.zeros(2), np.zeros(2))
    r = np.ones((quad.x.size, quad.z.size))
    with pytest.raises(DimensionMismatchError):
        momentum_rhs(np.zeros(3), r, np.zeros_like(r), np.zeros(4), ale, press, np.zeros(2), DT, tabs_small.table, quad, 1.0, 0.0)


# --- Начальные данные ---


def test_initial_density_and_velocity(quad_small):
    cfg = SimpleNamespace(rho0=2.0, rho0_amplitude=0.0, u0_modes=[0.1, 0.2])
    assert np.allclose(initial_density(cfg, quad_small), 2.0)
    cfg.rho0_amplitude = 0.5
    r = initial_density(cfg, quad_small)
    assert r.min() > 0 and r.max() <= 3.0
    assert np.allclose(initial_velocity(cfg, 2), [0.1, 0.2, 0.0, 0.0])


# --- Окно FSP ---


def test_fixed_point_window(bases2, tabs_small, press, params):
    """Пикар сходится, масса сохраняется, невязка баланса мала."""
    quad = tabs_small.quad
    ssp = _ssp_window(bases2, [0.02, 0.0], [0.1, 0.0])
    state = FluidState(r=np.ones((quad.nx, quad.nz)), alpha=np.array([0.1, 0.0, 0.0, 0.0]))
    out = fsp_fixed_point(state, ssp, (0.0, DT), 4, tabs_small, press, params, dt=DT)
    rep, en = out.report, out.energy
    assert rep.increment < 1e-10
    assert rep.density_min > 0
    assert np.max(np.abs(out.continuity.mass - out.continuity.mass[0])) <= 1e-12 * out.continuity.mass[0]
    assert en.residual <= 0.1 * DT * (en.F_start + 1.0)
    assert en.FD >= 0 and en.gap_sq >= 0
    assert out.state.t == pytest.approx(DT)
    assert out.alphas.shape == (5, 4)


def test_trace_history_from_window(bases2, tabs_small, press, params):
    """След для следующего окна: сдвиг на Δt, слоты Ext[s_j]."""
    quad = tabs_small.quad
    ssp = _ssp_window(bases2, [0.02, 0.0])
    state = FluidState(r=np.ones((quad.nx, quad.nz)), alpha=np.zeros(4))
    out = fsp_fixed_point(state, ssp, (0.0, DT), 4, tabs_small, press, params, dt=DT)
    tr = out.trace_history(2, DT)
    assert tr.covers(DT, 2 * DT)
    assert np.allclose(tr.at(2 * DT), out.alphas[-1, 2:])


def test_fixed_point_failure_reported(bases2, tabs_small, press, params):
    """Одной итерации мало: FixedPointError с последним приращением."""
    quad = tabs_small.quad
    ssp = _ssp_window(bases2, [0.02, 0.0], [0.1, 0.0])
    state = FluidState(r=np.ones((quad.nx, quad.nz)), alpha=np.array([0.1, 0.0, 0.0, 0.0]))
    with pytest.raises(FixedPointError) as exc:
        fsp_fixed_point(state, ssp, (0.0, DT), 4, tabs_small, press, params, dt=DT, max_iter=1)
    assert exc.value.detail["iterations"] == 1
    assert exc.value.detail["last_increment"] > 0


def test_fixed_point_dimension_check(bases2, tabs_small, press, params):
    quad = tabs_small.quad
    ssp = _ssp_window(bases2, [0.0, 0.0])
    with pytest.raises(DimensionMismatchError):
        fsp_fixed_point(FluidState(r=np.ones((quad.nx, quad.nz)), alpha=np.zeros(3)), ssp, (0.0, DT), 2, tabs_small, press, params)


@pytest.mark.slow
def test_energy_residual_second_order(bases2, press, params):
    """Сетка и число подшагов измельчаются вместе: невязка баланса FSP убывает с порядком ≥ 1.5."""
    ssp = _ssp_window(bases2, [0.02, 0.0], [0.1, 0.0])
    residuals = []
    for nx, nz, substeps in [(8, 4, 4), (16, 8, 8), (32, 16, 16)]:
        tabs = build_fsp_tables(OmegaQuadrature.build(1.0, nx, nz, 2), bases2)
        quad = tabs.quad
        r0 = 1.0 + 0.1 * np.outer(np.cos(np.pi * quad.cell_x), np.cos(np.pi * (quad.cell_z + 1.0)))
        state = FluidState(r=r0, alpha=np.array([0.1, 0.0, 0.0, 0.0]))
        out = fsp_fixed_point(state, ssp, (0.0, DT), substeps, tabs, press, params, dt=DT)
        residuals.append(abs(out.energy.residual))
    order = np.log2(residuals[0] / residuals[-1]) / 2
    assert order >= 1.5, residuals
