"""
Общие фикстуры: маленькие базисы, квадратуры и конфиг быстрого прогона.
"""
import pytest

from src.fluid_fsp import build_fsp_tables
from src.galerkin_bases import build_bases
from src.quadrature import OmegaQuadrature


# Конфиг на пару окон: секунды на прогон
TINY_TREE = {
    "geometry": {"nx": 8, "nz": 4},
    "time": {"T": 0.01, "N": 2, "fsp_substeps": 2},
    "basis": {"k": 1, "gamma_cells": 32, "lift_nodes": 64},
    "fluid": {"rho0_amplitude": 0.1},
    "plate": {"w0_modes": [0.02]},
}


@pytest.fixture(scope="session")
def bases2():
    """Базисы k=2 на Γ = (0, 1)."""
    return build_bases(2, 1.0, 32, 6, 128)


@pytest.fixture(scope="session")
def quad_small():
    """Ω-квадратура 8 × 4 ячеек, 2 точки Гаусса на ячейку."""
    return OmegaQuadrature.build(1.0, 8, 4, 2)


@pytest.fixture(scope="session")
def quad_fine():
    """Ω-квадратура 8 × 8 ячеек, 4 точки Гаусса — для сравнения интегралов."""
    return OmegaQuadrature.build(1.0, 8, 8, 4)


@pytest.fixture(scope="session")
def tabs_small(bases2, quad_small):
    return build_fsp_tables(quad_small, bases2)


@pytest.fixture
def tiny_tree():
    """Копия дерева конфига быстрого прогона (тест может её менять)."""
    import copy

    return copy.deepcopy(TINY_TREE)
