"""
Тесты для src/continuity.py (конечные объёмы на опорной области, масса, положительность, огибающая).
"""
import numpy as np
import pytest

from src.continuity import (
    assemble_operator,
    build_continuity_tables,
    cell_mass,
    damped_continuity_step,
    diffusive_dissipation,
    face_weights,
    make_frame,
)
from src.errors import DensityPositivityError, DimensionMismatchError
from src.splitting_driver import envelope_margin


DT = 0.01
N_SUB = 8


# --- Fixtures ---


@pytest.fixture(scope="module")
def tables(bases2, quad_small):
    return build_continuity_tables(quad_small, bases2.plate, bases2.fluid)


def _window(k, beta0, beta1, alpha0, alpha1):
    """Линейные по времени модальные отсчёты на окне [0, DT]"""
    times = np.linspace(0.0, DT, N_SUB + 1)
    s = (times / DT)[:, None]
    betas = np.asarray(beta0)[None, :] * (1 - s) + np.asarray(beta1)[None, :] * s
    alphas = np.asarray(alpha0)[None, :] * (1 - s) + np.asarray(alpha1)[None, :] * s
    startup = (0.5 * (betas[0] + betas[1]), 0.5 * (alphas[0] + alphas[1]))
    return times, betas, alphas, startup


# --- Тесты ---


def test_static_constant_density_preserved(tables):
    """Покой жидкости и неподвижная пластина: постоянная плотность не меняется."""
    times, betas, alphas, startup = _window(2, [0.05, 0.0], [0.05, 0.0], np.zeros(4), np.zeros(4))
    r0 = np.full((tables.nx, tables.nz), 1.3)
    cont = damped_continuity_step(r0, times, betas, alphas, tables, 1e-2, startup=startup)
    assert np.allclose(cont.r_final, 1.3, rtol=1e-13)
    assert cont.r.shape == (N_SUB + 1, tables.nx, tables.nz)


def test_moving_plate_conserves_mass(tables):
    """Закрытый режим: ∫J r сохраняется при движущейся пластине и ненулевой скорости."""
    rng = np.random.default_rng(11)
    times, betas, alphas, startup = _window(2, [0.0, 0.0], [0.05, -0.02], rng.standard_normal(4), rng.standard_normal(4))
    r0 = 1.0 + 0.2 * rng.uniform(-1, 1, (tables.nx, tables.nz))
    cont = damped_continuity_step(r0, times, betas, alphas, tables, 1e-2, startup=startup)
    assert np.max(np.abs(cont.mass - cont.mass[0])) <= 1e-12 * cont.mass[0]
    assert np.all(cont.boundary_outflow == 0.0)
    assert cell_mass(r0, cont.Jc[0], tables) == pytest.approx(cont.mass[0])


def test_open_closure_balance(tables):
    """Открытый режим: сохраняется ∫J r + поток через Γ."""
    rng = np.random.default_rng(12)
    times, betas, alphas, startup = _window(2, [0.01, 0.0], [0.03, 0.01], rng.standard_normal(4), rng.standard_normal(4))
    r0 = 1.0 + 0.2 * rng.uniform(-1, 1, (tables.nx, tables.nz))
    cont = damped_continuity_step(r0, times, betas, alphas, tables, 1e-2, closure="open", startup=startup)
    balance = cont.mass_balance
    assert np.max(np.abs(balance - balance[0])) <= 1e-10 * balance[0]
    assert cont.closure == "open"


def test_density_stays_in_envelope(tables):
    """Плотность не выходит за дискретную огибающую min/max r0 · exp(показатель)."""
    rng = np.random.default_rng(13)
    for _ in range(10):
        times, betas, alphas, startup = _window(
            2, 0.1 * rng.uniform(-1, 1, 2), 0.1 * rng.uniform(-1, 1, 2), 0.5 * rng.standard_normal(4), 0.5 * rng.standard_normal(4)
        )
        r0 = 1.0 + 0.5 * rng.uniform(-1, 1, (tables.nx, tables.nz))
        cont = damped_continuity_step(r0, times, betas, alphas, tables, 1e-2, startup=startup)
        assert envelope_margin(cont) >= 0.0
        lo, hi = cont.envelope()
        assert np.all(lo > 0) and np.all(hi >= lo)


def test_without_startup_also_conserves(tables):
    """Шаги Кранка–Николсона без старта Раннахера тоже консервативны."""
    times, betas, alphas, _ = _window(2, [0.0, 0.0], [0.02, 0.0], np.ones(4), np.zeros(4))
    r0 = np.ones((tables.nx, tables.nz))
    cont = damped_continuity_step(r0, times, betas, alphas, tables, 1e-2)
    assert np.max(np.abs(cont.mass - cont.mass[0])) <= 1e-12


def test_negative_density_detected(tables):
    """Отрицательная плотность — DensityPositivityError с ячейкой и временем."""
    times, betas, alphas, _ = _window(2, [0.0, 0.0], [0.0, 0.0], np.zeros(4), np.zeros(4))
    r0 = -np.ones((tables.nx, tables.nz))
    with pytest.raises(DensityPositivityError) as exc:
        damped_continuity_step(r0, times, betas, alphas, tables, 1e-2)
    assert exc.value.detail["min_density"] < 0
    assert exc.value.detail["t"] == pytest.approx(times[1])


def test_bad_arguments(tables):
    times, betas, alphas, _ = _window(2, [0.0, 0.0], [0.0, 0.0], np.zeros(4), np.zeros(4))
    with pytest.raises(ValueError):
        damped_continuity_step(np.ones((tables.nx, tables.nz)), times, betas, alphas, tables, -1.0)
    with pytest.raises(DimensionMismatchError):
        damped_continuity_step(np.ones((3, 3)), times, betas, alphas, tables, 1e-2)
    with pytest.raises(DimensionMismatchError):
        make_frame(tables, np.zeros(3), np.zeros(4))


def test_operator_columns_sum_to_zero(tables):
    """Закрытый оператор консервативен: суммы по столбцам нулевые."""
    frame = make_frame(tables, np.array([0.05, 0.01]), np.array([0.3, -0.2, 0.1, 0.4]))
    A = assemble_operator(tables, frame, np.full(tables.nx, 0.2), 1e-2, "closed")
    assert np.max(np.abs(np.asarray(A.sum(axis=0)).ravel())) < 1e-12
    with pytest.raises(ValueError):
        assemble_operator(tables, frame, np.zeros(tables.nx), 1e-2, "leaky")


def test_diffusive_dissipation_sign(tables):
    """Σ D_f Δr ΔH'(r) ≥ 0 для монотонного H', ноль для постоянной r."""
    frame = make_frame(tables, np.zeros(2), np.zeros(4))
    h_prime = lambda r: 3.5 * r**0.4  # noqa: E731
    rng = np.random.default_rng(5)
    r = 1.0 + 0.3 * rng.uniform(-1, 1, (tables.nx, tables.nz))
    assert diffusive_dissipation(r, frame, tables, 1e-2, h_prime) > 0
    assert diffusive_dissipation(np.ones_like(r), frame, tables, 1e-2, h_prime) == 0.0


# --- Поток на гранях ---


def test_face_weights_limits():
    """Малое число Пекле — центральный поток, D = 0 — против потока, a_L − a_R = φ."""
    phi = np.array([1e-4, -1e-4, 0.0])
    dif = np.array([1.0, 1.0, 1.0])
    a_l, a_r = face_weights(phi, dif)
    assert np.allclose(a_l, phi / 2 + dif, atol=1e-8)
    assert np.allclose(a_r, dif - phi / 2, atol=1e-8)

    phi = np.array([3.0, -2.0, 0.5, -700.0, 900.0])
    a_l, a_r = face_weights(phi, np.zeros(5))
    assert np.array_equal(a_l, np.maximum(phi, 0.0))
    assert np.array_equal(a_r, np.maximum(-phi, 0.0))

    dif = np.array([1e-3, 1e-3, 1.0, 1e-2, 1e-2])
    a_l, a_r = face_weights(phi, dif)
    assert np.all(np.isfinite(a_l)) and np.all(np.isfinite(a_r))
    assert np.all(a_l >= 0) and np.all(a_r >= 0)
    assert np.allclose(a_l - a_r, phi, rtol=1e-12, atol=1e-12)


def test_operator_is_m_matrix_for_fast_plate(tables):
    """Большое число Пекле от быстрой пластины: внедиагональные элементы ≤ 0, суммы по столбцам нулевые."""
    frame = make_frame(tables, np.array([0.1, -0.05]), np.array([2.0, -1.5, 1.0, 3.0]))
    A = assemble_operator(tables, frame, np.full(tables.nx, 25.0), 1e-2, "closed").toarray()
    off = A - np.diag(np.diag(A))
    assert np.max(off) <= 0.0
    assert np.min(np.diag(A)) >= 0.0
    assert np.max(np.abs(A.sum(axis=0))) < 1e-10


def test_fast_plate_keeps_density_positive(tables):
    """Скорость пластины порядка 10–30 при ε = 1e-2: плотность положительна и внутри огибающей."""
    rng = np.random.default_rng(17)
    for _ in range(20):
        times, betas, alphas, startup = _window(
            2, 0.2 * rng.uniform(-1, 1, 2), 0.2 * rng.uniform(-1, 1, 2), 2.0 * rng.standard_normal(4), 2.0 * rng.standard_normal(4)
        )
        r0 = 1.0 + 0.5 * rng.uniform(-1, 1, (tables.nx, tables.nz))
        cont = damped_continuity_step(r0, times, betas, alphas, tables, 1e-2, startup=startup)
        assert np.min(cont.r) > 0.0
        assert envelope_margin(cont) >= 0.0
        assert np.max(np.abs(cont.mass - cont.mass[0])) <= 1e-11 * cont.mass[0]


def test_pure_diffusion_decays_like_heat_kernel(tables):
    """Покой и плоская пластина: мода cos(πx/L) затухает как exp(−ε π² t / L²)."""
    eps, T = 1.0, 0.1
    times = np.linspace(0.0, T, 21)
    betas = np.zeros((times.size, 2))
    alphas = np.zeros((times.size, 4))
    mode = np.cos(np.pi * tables.quad.cell_x / tables.quad.L)[:, None] * np.ones((1, tables.nz))
    r0 = 1.0 + 0.5 * mode
    cont = damped_continuity_step(r0, times, betas, alphas, tables, eps, startup=(betas[0], alphas[0]))
    amp = np.sum((cont.r_final - 1.0) * mode) / np.sum(0.5 * mode * mode)
    assert amp == pytest.approx(np.exp(-eps * np.pi**2 * T), rel=0.03)
    assert np.allclose(cont.r_final.mean(), 1.0, atol=1e-12)
