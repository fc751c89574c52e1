"""
Тесты для src/sweep.py (план свипа, проекция состояний, таблицы Коши).
"""
import math
from pathlib import Path

import numpy as np
import pytest

from src.errors import ConfigError, DimensionMismatchError
from src.run_schema import build_run_config
from src.sweep import (
    SweepState,
    axis_parameter,
    cauchy_table,
    fit_loglog_slope,
    load_sweep_plan,
    plan_from_tree,
    project_state,
    run_sweep,
    sweep_points,
)


# --- Fixtures ---


def _state(value=0.0, nx=4, nz=2, k=2):
    beta = np.zeros(k)
    beta[0] = value
    return SweepState(r=np.ones((nx, nz)), alpha=np.zeros(2 * k), beta=beta, gamma=np.zeros(k), theta=np.zeros(k))


# --- План ---


def test_plan_points_are_cartesian(tiny_tree):
    tree = {**tiny_tree, "plan": {"axes": {"basis": {"k": [1, 2]}, "fluid": {"eps": [0.1, 0.01, 0.001]}}, "reduction": "final_energy"}}
    plan = plan_from_tree(tree)
    assert plan.size == 6
    points = sweep_points(plan)
    assert [p.index for p in points] == list(range(6))
    assert points[1].overrides == {"basis.k": 1, "fluid.eps": 0.01}
    merged = points[1].config_tree(plan.base)
    assert merged["basis"]["k"] == 1
    assert merged["geometry"]["nx"] == tiny_tree["geometry"]["nx"]


def test_plan_errors(tiny_tree):
    with pytest.raises(ConfigError):
        plan_from_tree(tiny_tree)
    with pytest.raises(ConfigError):
        plan_from_tree({**tiny_tree, "plan": {"axes": {"fluid": {"viscosity": [1.0]}}}})
    with pytest.raises(ConfigError):
        plan_from_tree({**tiny_tree, "plan": {"axes": {"time": {"N": [2]}}, "reduction": "median"}})


def test_load_plan_from_file(tmp_path):
    path = tmp_path / "plan.cfg"
    path.write_text("time.T = 0.01\nplan.axes.time.N = 2, 4, 8\nplan.reduction = final_energy\n")
    plan = load_sweep_plan(path)
    assert plan.axes == [("time.N", [2, 4, 8])]
    with pytest.raises(ConfigError):
        load_sweep_plan(tmp_path / "missing.cfg")


# --- Проекция и Коши ---


def test_project_state_block_average():
    s = SweepState(r=np.arange(16.0).reshape(4, 4), alpha=np.arange(6.0), beta=np.ones(3), gamma=np.ones(3), theta=np.ones(3))
    p = project_state(s, (2, 2), 2)
    assert p.r[0, 0] == pytest.approx(np.mean([0, 1, 4, 5]))
    assert np.array_equal(p.alpha, [0.0, 1.0, 3.0, 4.0])
    with pytest.raises(DimensionMismatchError):
        project_state(s, (3, 4), 2)
    with pytest.raises(DimensionMismatchError):
        project_state(s, (2, 2), 4)


def test_cauchy_constant_sequence():
    table = cauchy_table([_state(), _state(), _state()], [1.0, 0.5, 0.25])
    assert np.all(table["difference"] == 0.0)
    assert math.isnan(table["order"].iloc[1])


def test_cauchy_linear_gives_first_order():
    """Разности пропорциональны шагу: порядок 1."""
    params = [1.0, 2.0, 4.0, 8.0]
    table = cauchy_table([_state(p) for p in params], params)
    assert np.allclose(table["difference"], [1.0, 2.0, 4.0])
    assert np.allclose(table["order"].iloc[1:], 1.0)


def test_cauchy_mixed_resolutions_and_errors():
    """Состояния на разных сетках и базисах приводятся к грубейшему."""
    table = cauchy_table([_state(1.0, 8, 4, 3), _state(2.0, 4, 2, 2), _state(4.0, 16, 4, 2)], [1.0, 2.0, 4.0])
    assert len(table) == 2
    with pytest.raises(DimensionMismatchError):
        cauchy_table([_state(), _state()], [1.0, 2.0])
    with pytest.raises(DimensionMismatchError):
        cauchy_table([_state(), _state(), _state()], [1.0, 2.0])


def test_axis_parameter(tiny_tree):
    cfg = build_run_config(tiny_tree)
    assert axis_parameter("time.N", cfg) == pytest.approx(cfg.time.T / cfg.time.N)
    assert axis_parameter("geometry.nx", cfg) == pytest.approx(1.0 / 8)
    assert axis_parameter("geometry.nz", cfg) == pytest.approx(1.0 / 4)
    assert axis_parameter("fluid.eps", cfg) == cfg.fluid.eps


def test_fit_loglog_slope():
    x = np.array([1e-3, 1e-2, 1e-1, 1.0])
    assert fit_loglog_slope(x, np.sqrt(x)) == pytest.approx(0.5)
    assert math.isnan(fit_loglog_slope([1.0], [1.0]))


# --- Выполнение ---


@pytest.mark.slow
def test_run_sweep_over_time_steps(tiny_tree, tmp_path):
    """Три прогона по N: таблица по точкам и таблица Коши по Δt."""
    plan = plan_from_tree({**tiny_tree, "plan": {"axes": {"time": {"N": [1, 2, 4]}}, "reduction": "coupling_gap"}})
    table, cauchy = run_sweep(plan, out_dir=tmp_path, jobs=1)
    assert list(table["point"]) == [0, 1, 2]
    assert set(table["status"]) == {"ok"}
    assert "coupling_gap" in table.columns
    assert cauchy is not None and len(cauchy) == 2
    assert list(cauchy["param"]) == pytest.approx([0.01, 0.005])
    assert (tmp_path / "point_000").is_dir()


@pytest.mark.slow
def test_coupling_gap_follows_sqrt_dt():
    """Несогласованные данные (v0 ≠ 0 при покоящейся жидкости): разрыв связи ~ √Δt по двоичной лестнице N."""
    plan = load_sweep_plan(Path(__file__).resolve().parents[1] / "configs" / "sweep_dt.cfg")
    table, _ = run_sweep(plan, jobs=1)
    assert set(table["status"]) == {"ok"}
    dt = build_run_config(plan.base).time.T / np.asarray(table["time.N"], float)
    slope = fit_loglog_slope(dt, table["coupling_gap"])
    assert slope == pytest.approx(0.5, abs=0.15)
