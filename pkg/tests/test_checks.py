"""
Тесты для src/checks.py (реестр встроенных проверок `fsisplit check`).
"""
import pytest

from src.checks import CHECKS, run_checks


FAST = ["clamped_root", "lifting_oracle", "potential_gradient", "handoff_detector", "lifespan_recurrence", "cauchy_order"]
SLOW = ["spectral_residual", "ssp_energy_order", "continuity_mass", "maximum_principle", "mass_matrix_spd", "korn_bound"]


def test_registry_complete():
    assert set(CHECKS) == set(FAST) | set(SLOW)


@pytest.mark.parametrize("name", FAST)
def test_fast_checks_pass(name):
    (v,) = [v for v in run_checks(name) if v.name == name]
    assert v.passed, v.detail
    assert v.detail["seconds"] >= 0


@pytest.mark.slow
@pytest.mark.parametrize("name", SLOW)
def test_slow_checks_pass(name):
    (v,) = [v for v in run_checks(name) if v.name == name]
    assert v.passed, v.detail


def test_filter_without_match():
    assert run_checks("no_such_check") == []
