"""
Составные квадратуры Гаусса–Лежандра на Γ = (0, L) и на Ω = Γ × (−1, 0).

Ω-квадратура привязана к сетке конечных объёмов плотности: внутри каждой
ячейки берётся тензорное правило порядка q, так что кусочно-постоянная по
ячейкам плотность интегрируется без интерполяции.
"""
from __future__ import annotations
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np


@lru_cache(maxsize=64)
def _leggauss(order: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def composite_gauss(a: float, b: float, cells: int, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Узлы и веса составного правила на [a, b]: cells отрезков по order точек"""
    xi, wi = _leggauss(order)
    edges = np.linspace(a, b, cells + 1)
    h = np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    nodes = (mid[:, None] + 0.5 * h[:, None] * xi[None, :]).ravel()
    weights = (0.5 * h[:, None] * wi[None, :]).ravel()
    return nodes, weights


@dataclass(frozen=True)
class GammaQuadrature:
    L: float
    cells: int
    order: int
    x: np.ndarray = field(repr=False)
    w: np.ndarray = field(repr=False)

    @classmethod
    def build(cls, L: float, cells: int = 64, order: int = 6) -> "GammaQuadrature":
        x, w = composite_gauss(0.0, L, cells, order)
        return cls(L=L, cells=cells, order=order, x=x, w=w)

    def refined(self) -> "GammaQuadrature":
        """Удвоенный порядок — для проверки недоразрешённости"""
        return GammaQuadrature.build(self.L, self.cells, 2 * self.order)

    def integrate(self, values: np.ndarray) -> np.ndarray:
        """∫_Γ по последней оси"""
        return values @ self.w


@dataclass(frozen=True)
class OmegaQuadrature:
    """Тензорная квадратура на ячейках nx × nz; индексы ячеек точек в cx, cz"""

    L: float
    nx: int
    nz: int
    order: int
    x: np.ndarray = field(repr=False)
    z: np.ndarray = field(repr=False)
    wx: np.ndarray = field(repr=False)
    wz: np.ndarray = field(repr=False)
    cx: np.ndarray = field(repr=False)
    cz: np.ndarray = field(repr=False)

    @classmethod
    def build(cls, L: float, nx: int, nz: int, order: int = 2) -> "OmegaQuadrature":
        x, wx = composite_gauss(0.0, L, nx, order)
        z, wz = composite_gauss(-1.0, 0.0, nz, order)
        cx = np.repeat(np.arange(nx), order)
        cz = np.repeat(np.arange(nz), order)
        return cls(L=L, nx=nx, nz=nz, order=order, x=x, z=z, wx=wx, wz=wz, cx=cx, cz=cz)

    def refined(self) -> "OmegaQuadrature":
        return OmegaQuadrature.build(self.L, self.nx, self.nz, 2 * self.order)

    @property
    def hx(self) -> float:
        return self.L / self.nx

    @property
    def hz(self) -> float:
        return 1.0 / self.nz

    @property
    def weights(self) -> np.ndarray:
        """Веса на тензорной сетке (Nx, Nz)"""
        return self.wx[:, None] * self.wz[None, :]

    @property
    def cell_x(self) -> np.ndarray:
        return (np.arange(self.nx) + 0.5) * self.hx

    @property
    def cell_z(self) -> np.ndarray:
        return -1.0 + (np.arange(self.nz) + 0.5) * self.hz

    def integrate(self, values: np.ndarray) -> np.ndarray:
        """∫_Ω по двум последним осям (Nx, Nz)"""
        return np.einsum("...ij,ij->...", values, self.weights)

    def cell_to_points(self, cell_field: np.ndarray) -> np.ndarray:
        """Кусочно-постоянное поле ячеек (nx, nz) -> значения в точках квадратуры"""
        return cell_field[np.ix_(self.cx, self.cz)]

    def cell_average_x(self, values_x: np.ndarray) -> np.ndarray:
        """Средние по ячейкам вдоль x для величины, заданной в узлах x (последняя ось)"""
        wx = self.wx.reshape(self.nx, self.order)
        v = values_x.reshape(values_x.shape[:-1] + (self.nx, self.order))
        return (v * wx).sum(axis=-1) / self.hx
