"""
Галеркинские базисы и матрицы модальных систем.

- PlateBasis: собственные функции защемлённой балки (бигармоническая задача,
  s = s' = 0 на концах), ξ^s = μ⁴;
- HeatBasis: h_i = sqrt(2/L) sin(iπx/L), ξ^h = (iπ/L)²;
- FluidBasis: 2k векторных функций — k собственных функций векторного
  лапласиана Дирихле на прямоугольнике и k гармонических продолжений Ext[s_i];
- CoupledMatrices: M_k = (h_i', s_j'), E_k = (s_i''', s_j''').
"""
from __future__ import annotations
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, List, Tuple
import logging

import numpy as np
from scipy.fft import dst
from scipy.optimize import brentq

from src.errors import BasisError, RootBracketError
from src.quadrature import GammaQuadrature, OmegaQuadrature

logger = logging.getLogger(__name__)

ORTHONORMAL_TOL = 1e-8
UNDERRESOLVED_TOL = 1e-10


# ============================
# Защемлённая балка
# ============================


def _clamped_char(beta: float) -> float:
    # cos β cosh β = 1, в масштабированной форме без переполнения
    return float(np.cos(beta) - 1.0 / np.cosh(beta))


def clamped_beam_roots(k: int, L: float) -> np.ndarray:
    """μ_i: корни cos(μL)cosh(μL) = 1, i = 1..k; i-й корень в (iπ, (i+1)π)/L"""
    if k < 1 or L <= 0:
        raise ValueError(f"need k >= 1 and L > 0, got k={k}, L={L}")
    roots = np.empty(k)
    for i in range(1, k + 1):
        lo, hi = i * np.pi, (i + 1) * np.pi
        f_lo, f_hi = _clamped_char(lo), _clamped_char(hi)
        if f_lo * f_hi > 0:
            raise RootBracketError("no sign change for clamped-beam root", index=i, interval=[lo, hi])
        roots[i - 1] = brentq(_clamped_char, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    return roots / L


def _beam_shape(mu: np.ndarray, L: float, x: np.ndarray, order: int) -> np.ndarray:
    """
    d^order/dx^order ненормированной формы
        cosh(μx) − cos(μx) − σ(sinh(μx) − sin(μx)),
    гиперболическая часть A e^{y} + B e^{−y} считается со сдвигом экспоненты.
    """
    mu = np.asarray(mu, float)[:, None]
    x = np.asarray(x, float)[None, :]
    beta = mu * L
    y = mu * x
    eb = np.exp(-beta)
    den = 1.0 - 2.0 * np.sin(beta) * eb - eb**2
    sigma = (1.0 - 2.0 * np.cos(beta) * eb + eb**2) / den
    a_exp = (np.cos(beta) - np.sin(beta) - eb) * np.exp(y - beta) / den  # ½(1−σ)e^{y}
    b_exp = 0.5 * (1.0 + sigma) * np.exp(-y)
    hyp = a_exp + (-1.0) ** order * b_exp
    shift = order * np.pi / 2.0
    trig = -np.cos(y + shift) + sigma * np.sin(y + shift)
    return mu**order * (hyp + trig)


@dataclass(frozen=True)
class PlateBasis:
    k: int
    L: float
    mu_roots: np.ndarray = field(repr=False)
    xi_s: np.ndarray = field(repr=False)
    norms: np.ndarray = field(repr=False)
    quad: GammaQuadrature = field(repr=False)
    node_values: Dict[int, np.ndarray] = field(repr=False)

    def eval(self, x: np.ndarray, order: int = 0) -> np.ndarray:
        """s_i^{(order)}(x), форма (k, len(x))"""
        return _beam_shape(self.mu_roots, self.L, np.atleast_1d(x), order) / self.norms[:, None]

    def synthesize(self, coeffs: np.ndarray, x: np.ndarray, order: int = 0) -> np.ndarray:
        return np.asarray(coeffs, float) @ self.eval(x, order)

    def project(self, values_at_nodes: np.ndarray) -> np.ndarray:
        """L²(Γ)-проекция функции, заданной в узлах квадратуры"""
        return self.node_values[0] @ (self.quad.w * values_at_nodes)


def build_plate_basis(k: int, L: float, quadrature: GammaQuadrature | None = None) -> PlateBasis:
    quad = quadrature or GammaQuadrature.build(L)
    mu = clamped_beam_roots(k, L)
    raw = _beam_shape(mu, L, quad.x, 0)
    norms = np.sqrt(quad.integrate(raw**2))
    node_values = {d: _beam_shape(mu, L, quad.x, d) / norms[:, None] for d in range(5)}
    gram = (node_values[0] * quad.w) @ node_values[0].T
    defect = float(np.max(np.abs(gram - np.eye(k))))
    if defect > ORTHONORMAL_TOL:
        raise BasisError("plate basis is not orthonormal", defect=defect, tol=ORTHONORMAL_TOL)
    logger.debug(f"[bases] plate basis k={k} L={L:g} mu1={mu[0]:.10f} defect={defect:.2e}")
    return PlateBasis(k=k, L=L, mu_roots=mu, xi_s=mu**4, norms=norms, quad=quad, node_values=node_values)


def spectral_residual(plate: PlateBasis) -> np.ndarray:
    """‖s_i'''' − ξ_i s_i‖∞ / ξ_i на узлах квадратуры"""
    res = plate.node_values[4] - plate.xi_s[:, None] * plate.node_values[0]
    return np.max(np.abs(res), axis=1) / plate.xi_s


# ============================
# Теплопроводность
# ============================


@dataclass(frozen=True)
class HeatBasis:
    k: int
    L: float
    xi_h: np.ndarray = field(repr=False)
    quad: GammaQuadrature = field(repr=False)
    node_values: Dict[int, np.ndarray] = field(repr=False)

    def eval(self, x: np.ndarray, order: int = 0) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, float))
        w = (np.arange(1, self.k + 1) * np.pi / self.L)[:, None]
        arg = w * x[None, :] + order * np.pi / 2.0
        return np.sqrt(2.0 / self.L) * w**order * np.sin(arg)


def build_heat_basis(k: int, L: float, quadrature: GammaQuadrature | None = None) -> HeatBasis:
    quad = quadrature or GammaQuadrature.build(L)
    xi_h = (np.arange(1, k + 1) * np.pi / L) ** 2
    proto = HeatBasis(k=k, L=L, xi_h=xi_h, quad=quad, node_values={})
    node_values = {d: proto.eval(quad.x, d) for d in range(3)}
    return HeatBasis(k=k, L=L, xi_h=xi_h, quad=quad, node_values=node_values)


# ============================
# Гармоническое продолжение
# ============================


def _sinh_profile(a: np.ndarray, z: np.ndarray, deriv: bool = False) -> np.ndarray:
    """sinh(a(z+1))/sinh(a) (или ∂z) без переполнения; форма (len(a), len(z))"""
    a = np.asarray(a, float)[:, None]
    z = np.asarray(z, float)[None, :]
    tail = np.exp(-2.0 * a * (z + 1.0))
    base = np.exp(a * z) / (1.0 - np.exp(-2.0 * a))
    if deriv:
        return a * base * (1.0 + tail)
    return base * (1.0 - tail)


@dataclass(frozen=True)
class HarmonicLifting:
    """r(x,z) = Σ c_m sin(mπx/L) sinh(mπ(z+1)/L)/sinh(mπ/L); Ext[s] = r e_z"""

    L: float
    coeffs: np.ndarray = field(repr=False)

    @property
    def _freq(self) -> np.ndarray:
        return np.arange(1, self.coeffs.size + 1) * np.pi / self.L

    def _active(self, tol: float = 1e-15) -> np.ndarray:
        scale = max(float(np.max(np.abs(self.coeffs))), 1e-300) if self.coeffs.size else 1.0
        return np.nonzero(np.abs(self.coeffs) > tol * scale)[0]

    def _eval(self, x: np.ndarray, z: np.ndarray, dx: bool, dz: bool) -> np.ndarray:
        idx = self._active()
        x = np.atleast_1d(np.asarray(x, float))
        z = np.atleast_1d(np.asarray(z, float))
        if idx.size == 0:
            return np.zeros((x.size, z.size))
        a = self._freq[idx]
        c = self.coeffs[idx]
        arg = a[:, None] * x[None, :]
        sx = (a[:, None] * np.cos(arg)) if dx else np.sin(arg)
        pz = _sinh_profile(a, z, deriv=dz)
        return np.einsum("m,mi,mj->ij", c, sx, pz)

    def value(self, x: np.ndarray, z: np.ndarray) -> np.ndarray:
        return self._eval(x, z, dx=False, dz=False)

    def grad(self, x: np.ndarray, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return self._eval(x, z, dx=True, dz=False), self._eval(x, z, dx=False, dz=True)

    def vector_field(self, x: np.ndarray, z: np.ndarray) -> np.ndarray:
        """Векторное поле (0, r) на тензорной сетке, форма (2, Nx, Nz)"""
        r = self.value(x, z)
        return np.stack([np.zeros_like(r), r])


def harmonic_extension(trace_values: np.ndarray, L: float) -> HarmonicLifting:
    """
    Решение Δr = 0 в Ω, r = s на Γ×{0}, r = 0 на остальной границе.

    trace_values — след s на равномерных узлах x_j = jL/N, j = 0..N.
    По x — дискретное синус-преобразование (точная интерполяция в узлах),
    по z — точный гиперболический профиль.
    """
    s = np.asarray(trace_values, float)
    if s.ndim != 1 or s.size < 3:
        raise ValueError("trace must be a 1D array sampled on at least 3 uniform nodes")
    n = s.size - 1
    interior = s[1:-1]
    if not np.all(np.isfinite(interior)):
        raise ValueError("trace contains non-finite values")
    coeffs = dst(interior, type=1) / n
    return HarmonicLifting(L=float(L), coeffs=coeffs)


def analytic_sine_lifting(m: int, L: float, x: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Точное Ext[sin(mπx/L)] (z-компонента) — оракул для проверок"""
    a = m * np.pi / L
    x = np.asarray(x, float)
    z = np.asarray(z, float)
    return np.sin(a * x)[:, None] * (np.sinh(a * (z[None, :] + 1.0)) / np.sinh(a))


# ============================
# Базис жидкости
# ============================


@dataclass(frozen=True)
class FluidBasis:
    k: int
    L: float
    modes: List[Tuple[int, int, int]]  # (m, n, компонента) для f_i
    xi_f: np.ndarray = field(repr=False)
    liftings: List[HarmonicLifting] = field(repr=False)

    @property
    def size(self) -> int:
        return 2 * self.k

    def tabulate(self, quad: OmegaQuadrature) -> "FluidTable":
        """Значения и градиенты всех g_i в точках Ω-квадратуры"""
        return self.tabulate_grid(quad.x, quad.z)

    def tabulate_grid(self, x: np.ndarray, z: np.ndarray) -> "FluidTable":
        x = np.atleast_1d(np.asarray(x, float))
        z = np.atleast_1d(np.asarray(z, float))
        n = self.size
        vals = np.zeros((n, 2, x.size, z.size))
        gx = np.zeros_like(vals)
        gz = np.zeros_like(vals)
        amp = 2.0 / np.sqrt(self.L)
        for i, (m, nn, comp) in enumerate(self.modes):
            am, an = m * np.pi / self.L, nn * np.pi
            sx, cx = np.sin(am * x), np.cos(am * x)
            sz, cz = np.sin(an * (z + 1.0)), np.cos(an * (z + 1.0))
            vals[i, comp] = amp * np.outer(sx, sz)
            gx[i, comp] = amp * am * np.outer(cx, sz)
            gz[i, comp] = amp * an * np.outer(sx, cz)
        for j, lift in enumerate(self.liftings):
            i = self.k + j
            vals[i, 1] = lift.value(x, z)
            gx[i, 1], gz[i, 1] = lift.grad(x, z)
        return FluidTable(vals=vals, gx=gx, gz=gz, k=self.k)

    def velocity_on_grid(self, coeffs: np.ndarray, x: np.ndarray, z: np.ndarray) -> np.ndarray:
        """U = Σ α_i g_i на произвольной тензорной сетке, форма (2, Nx, Nz)"""
        coeffs = np.asarray(coeffs, float)
        out = np.zeros((2, np.size(x), np.size(z)))
        amp = 2.0 / np.sqrt(self.L)
        for i, (m, nn, comp) in enumerate(self.modes):
            if coeffs[i] != 0.0:
                out[comp] += coeffs[i] * amp * np.outer(np.sin(m * np.pi * x / self.L), np.sin(nn * np.pi * (z + 1.0)))
        for j, lift in enumerate(self.liftings):
            if coeffs[self.k + j] != 0.0:
                out[1] += coeffs[self.k + j] * lift.value(x, z)
        return out


@dataclass(frozen=True)
class FluidTable:
    """vals, gx, gz: (2k, 2, Nx, Nz) — компонента c функции g_i и её ∂x, ∂z"""

    vals: np.ndarray = field(repr=False)
    gx: np.ndarray = field(repr=False)
    gz: np.ndarray = field(repr=False)
    k: int = 0


def _fluid_modes(k: int, L: float) -> tuple[list[tuple[int, int, int]], np.ndarray]:
    span = int(np.ceil(np.sqrt(k))) + 2
    cand = []
    for m in range(1, span * max(1, int(np.ceil(L))) + 2):
        for n in range(1, span + 2):
            lam = np.pi**2 * (m**2 / L**2 + n**2)
            cand.append((lam, m, n))
    cand.sort()
    modes: list[tuple[int, int, int]] = []
    xi: list[float] = []
    for lam, m, n in cand:
        for comp in (0, 1):
            if len(modes) < k:
                modes.append((m, n, comp))
                xi.append(lam)
    return modes, np.asarray(xi)


def build_fluid_basis(k: int, L: float, plate: PlateBasis, lift_nodes: int = 256) -> FluidBasis:
    modes, xi_f = _fluid_modes(k, L)
    xs = np.linspace(0.0, L, lift_nodes + 1)
    traces = plate.eval(xs, 0)
    traces[:, 0] = 0.0
    traces[:, -1] = 0.0
    liftings = [harmonic_extension(traces[i], L) for i in range(k)]
    return FluidBasis(k=k, L=L, modes=modes, xi_f=xi_f, liftings=liftings)


def fluid_gram(table: FluidTable, quad: OmegaQuadrature, weight: np.ndarray | None = None) -> np.ndarray:
    """∫ ω g_i·g_j (ω = J r; по умолчанию 1)"""
    W = quad.weights if weight is None else quad.weights * weight
    return np.einsum("icxz,jcxz,xz->ij", table.vals, table.vals, W)


# ============================
# Матрицы связи
# ============================


@dataclass(frozen=True)
class CoupledMatrices:
    M_k: np.ndarray = field(repr=False)  # (h_i', s_j')
    E_k: np.ndarray = field(repr=False)  # (s_i''', s_j''')
    Xi_s: np.ndarray = field(repr=False)
    Xi_h: np.ndarray = field(repr=False)
    underresolved: bool = False

    @property
    def k(self) -> int:
        return int(self.Xi_s.size)


def _raw_coupled(plate: PlateBasis, heat: HeatBasis, quad: GammaQuadrature) -> tuple[np.ndarray, np.ndarray]:
    s1, s3 = plate.eval(quad.x, 1), plate.eval(quad.x, 3)
    h1 = heat.eval(quad.x, 1)
    M = (h1 * quad.w) @ s1.T
    E = (s3 * quad.w) @ s3.T
    return M, 0.5 * (E + E.T)


def assemble_coupled_matrices(
    plate: PlateBasis, heat: HeatBasis, quadrature: GammaQuadrature | None = None
) -> CoupledMatrices:
    """Квадратура: составной Гаусс–Лежандр (cells × order), проверка удвоением порядка"""
    if plate.k != heat.k or plate.L != heat.L:
        raise ValueError("plate and heat bases must share k and L")
    quad = quadrature or plate.quad
    M, E = _raw_coupled(plate, heat, quad)
    M2, E2 = _raw_coupled(plate, heat, quad.refined())
    scale = max(float(np.max(np.abs(E2))), 1.0)
    change = max(float(np.max(np.abs(M - M2))) / max(float(np.max(np.abs(M2))), 1.0), float(np.max(np.abs(E - E2))) / scale)
    under = change > UNDERRESOLVED_TOL
    if under:
        logger.warning(f"[bases] coupled matrices under-resolved: relative change {change:.2e} under order doubling")
    return CoupledMatrices(M_k=M, E_k=E, Xi_s=plate.xi_s.copy(), Xi_h=heat.xi_h.copy(), underresolved=under)


# ============================
# Сборка всего набора (кэш по (k, L, сетка))
# ============================


@dataclass(frozen=True)
class GalerkinBases:
    plate: PlateBasis
    heat: HeatBasis
    fluid: FluidBasis
    mats: CoupledMatrices
    gamma_quad: GammaQuadrature


@lru_cache(maxsize=16)
def build_bases(k: int, L: float, gamma_cells: int = 64, gamma_order: int = 6, lift_nodes: int = 256) -> GalerkinBases:
    gq = GammaQuadrature.build(L, gamma_cells, gamma_order)
    plate = build_plate_basis(k, L, gq)
    heat = build_heat_basis(k, L, gq)
    fluid = build_fluid_basis(k, L, plate, lift_nodes)
    mats = assemble_coupled_matrices(plate, heat, gq)
    logger.info(f"[bases] built k={k} L={L:g} (Γ: {gamma_cells} cells × {gamma_order}, lift nodes {lift_nodes})")
    return GalerkinBases(plate=plate, heat=heat, fluid=fluid, mats=mats, gamma_quad=gq)


def basis_dump(bases: GalerkinBases) -> dict:
    """Диагностика базисов для JSON (команда `bases`)"""
    plate = bases.plate
    gq = bases.gamma_quad
    gram_s = (plate.node_values[0] * gq.w) @ plate.node_values[0].T
    gram_h = (bases.heat.node_values[0] * gq.w) @ bases.heat.node_values[0].T
    return {
        "k": plate.k,
        "L": plate.L,
        "plate": {
            "mu": plate.mu_roots,
            "xi_s": plate.xi_s,
            "orthonormality_defect": float(np.max(np.abs(gram_s - np.eye(plate.k)))),
            "spectral_residual": spectral_residual(plate),
        },
        "heat": {
            "xi_h": bases.heat.xi_h,
            "orthonormality_defect": float(np.max(np.abs(gram_h - np.eye(plate.k)))),
        },
        "fluid": {
            "xi_f": bases.fluid.xi_f,
            "modes": [{"m": m, "n": n, "component": "xz"[c]} for m, n, c in bases.fluid.modes],
            "lifting_terms": [int(lift.coeffs.size) for lift in bases.fluid.liftings],
        },
        "coupled": {
            "E_k_diag": np.diag(bases.mats.E_k),
            "M_k": bases.mats.M_k,
            "underresolved": bases.mats.underresolved,
        },
    }
