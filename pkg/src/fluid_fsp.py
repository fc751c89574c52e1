"""
Подзадача жидкости (FSP) на одном окне.

Неразрывность (src.continuity) и галеркинское уравнение импульса

  M(J,r) α' + (D + C + K + Pen) α = P + b,
  M_ij = ∫ J r g_i·g_j,          D = ½ ∫ ∂t(J r) g_i·g_j,
  C — кососимметричная конвекция с переносящей скоростью Ũ − w_ale,
  K — вязкость μ∫J ∇^w g:∇^w g + (μ+λ)∫J (∇^w·g)(∇^w·g),
  P_j = ∫ J (r^γ + δ r^a) ∇^w·g_j,
  Pen/b — штраф (v − ∂t w)/(2Δt) на слотах Ext[s_j],

связаны итерацией Пикара по Ũ. Импульс интегрируется неявной средней точкой.
"""
from __future__ import annotations
from dataclasses import dataclass, field
from typing import List, Optional
import logging

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, solve
from scipy.ndimage import uniform_filter

from src.continuity import (
    ContinuityResult,
    ContinuityTables,
    build_continuity_tables,
    damped_continuity_step,
    diffusive_dissipation,
    make_frame,
)
from src.errors import DimensionMismatchError, FixedPointError, LinearSolveError, MassMatrixError
from src.galerkin_bases import FluidTable, GalerkinBases
from src.geometry_ale import AleMap, transform_gradient_components
from src.quadrature import OmegaQuadrature
from src.structure_ssp import SspWindowOutput, TraceHistory

logger = logging.getLogger(__name__)


# ============================
# Типы
# ============================


@dataclass(frozen=True)
class PressureLaw:
    gamma: float = 1.4
    delta: float = 1e-3
    a: float = 9.0

    def __post_init__(self):
        if self.gamma <= 1.0:
            raise ValueError(f"adiabatic exponent must exceed 1, got {self.gamma}")
        if self.a < 9.0:
            raise ValueError(f"artificial exponent must be >= 9, got {self.a}")
        if self.delta < 0:
            raise ValueError(f"artificial pressure weight must be >= 0, got {self.delta}")

    @classmethod
    def from_config(cls, fluid_cfg) -> "PressureLaw":
        return cls(gamma=fluid_cfg.gamma, delta=fluid_cfg.delta, a=fluid_cfg.a)

    def pressure(self, r: np.ndarray) -> np.ndarray:
        r = np.maximum(r, 0.0)
        return r**self.gamma + self.delta * r**self.a

    def internal(self, r: np.ndarray) -> np.ndarray:
        """H(r) = r^γ/(γ−1) + δ r^a/(a−1); r H' − H = p"""
        r = np.maximum(r, 0.0)
        return r**self.gamma / (self.gamma - 1.0) + self.delta * r**self.a / (self.a - 1.0)

    def h_prime(self, r: np.ndarray) -> np.ndarray:
        r = np.maximum(r, 0.0)
        g, a = self.gamma, self.a
        return g / (g - 1.0) * r ** (g - 1.0) + self.delta * a / (a - 1.0) * r ** (a - 1.0)

    def h_second(self, r: np.ndarray) -> np.ndarray:
        """γ r^{γ−2} + δ a r^{a−2} — вес в диссипации FD_ε"""
        r = np.maximum(r, 1e-300)
        return self.gamma * r ** (self.gamma - 2.0) + self.delta * self.a * r ** (self.a - 2.0)


@dataclass
class FluidState:
    r: np.ndarray  # (nx, nz), значения по ячейкам
    alpha: np.ndarray  # (2k,)
    t: float = 0.0

    def finite(self) -> bool:
        return bool(np.all(np.isfinite(self.r)) and np.all(np.isfinite(self.alpha)))

    def copy(self) -> "FluidState":
        return FluidState(r=self.r.copy(), alpha=self.alpha.copy(), t=self.t)


@dataclass(frozen=True)
class FixedPointReport:
    iterations: int
    increment: float
    increments: List[float]
    density_min: float
    density_max: float
    mass_condition: float
    operator_norm: float  # max ‖M^{-1}(D + C + K + Pen)‖₂ по подшагам

    @property
    def contraction(self) -> Optional[float]:
        """Средний коэффициент уменьшения приращений (если итераций ≥ 3)"""
        inc = [x for x in self.increments if x > 0]
        if len(inc) < 3:
            return None
        ratios = np.array(inc[1:]) / np.array(inc[:-1])
        return float(np.exp(np.mean(np.log(ratios))))


@dataclass(frozen=True)
class FspEnergyReport:
    kinetic_start: float
    kinetic_end: float
    internal_start: float
    internal_end: float
    FD_visc: float
    FD_eps: float
    gap_sq: float  # ∫‖v − ∂t w‖²
    v_sq: float  # ∫‖v‖²
    wt_sq: float  # ∫‖∂t w‖²
    work_pressure: float  # ∫∫_Γ p(r)(v − ∂t w)
    work_internal: float  # ∫∫_Γ H(r)(v − ∂t w)
    closure: str
    dt: float

    @property
    def F_start(self) -> float:
        return self.kinetic_start + self.internal_start

    @property
    def F_end(self) -> float:
        return self.kinetic_end + self.internal_end

    @property
    def FD(self) -> float:
        return self.FD_visc + self.FD_eps

    @property
    def interface_term(self) -> float:
        """Вклад границы в левую часть баланса (знак зависит от замыкания потока)"""
        return -self.work_pressure if self.closure == "closed" else self.work_internal

    @property
    def residual(self) -> float:
        c = 1.0 / (4.0 * self.dt)
        lhs = self.F_end + self.FD + self.interface_term + c * (self.v_sq + self.gap_sq)
        return lhs - self.F_start - c * self.wt_sq


@dataclass(frozen=True)
class FspWindowOutput:
    state: FluidState
    times: np.ndarray = field(repr=False)
    alphas: np.ndarray = field(repr=False)  # (n+1, 2k)
    continuity: ContinuityResult = field(repr=False)
    report: FixedPointReport = None  # type: ignore[assignment]
    energy: FspEnergyReport = None  # type: ignore[assignment]
    betas: Optional[np.ndarray] = field(default=None, repr=False)  # геометрия, прочитанная FSP в узлах окна
    gammas: Optional[np.ndarray] = field(default=None, repr=False)

    def trace_history(self, k: int, dt: float) -> TraceHistory:
        """След v = Σ α_{k+j} s_j для SSP следующего окна"""
        return TraceHistory.from_samples(self.times, self.alphas[:, k:], shift=dt)


# ============================
# Таблицы и геометрия в точках квадратуры
# ============================


@dataclass(frozen=True)
class FspTables:
    quad: OmegaQuadrature = field(repr=False)
    table: FluidTable = field(repr=False)
    s_vals: np.ndarray = field(repr=False)  # s_i в узлах x квадратуры
    s_dx: np.ndarray = field(repr=False)
    continuity: ContinuityTables = field(repr=False)
    collision_floor: float = 1e-3

    @property
    def k(self) -> int:
        return int(self.s_vals.shape[0])

    def ale(self, beta: np.ndarray, beta_dot: np.ndarray) -> AleMap:
        return AleMap.from_modal(self.quad.x, beta, beta_dot, self.s_vals, self.s_dx, self.collision_floor)

    def points(self, r_cells: np.ndarray) -> np.ndarray:
        return self.quad.cell_to_points(r_cells)


def build_fsp_tables(quad: OmegaQuadrature, bases: GalerkinBases, collision_floor: float = 1e-3) -> FspTables:
    return FspTables(
        quad=quad,
        table=bases.fluid.tabulate(quad),
        s_vals=bases.plate.eval(quad.x, 0),
        s_dx=bases.plate.eval(quad.x, 1),
        continuity=build_continuity_tables(quad, bases.plate, bases.fluid),
        collision_floor=collision_floor,
    )


def transformed_basis_gradients(table: FluidTable, ale: AleMap, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """∇^w g_i: (2k, компонента, направление, Nx, Nz) и ∇^w·g_i: (2k, Nx, Nz)"""
    gx, gz = transform_gradient_components(table.gx, table.gz, ale, z)
    grad = np.stack([gx, gz], axis=2)
    return grad, grad[:, 0, 0] + grad[:, 1, 1]


def weighted_mass(r: np.ndarray, ale: AleMap, quad: OmegaQuadrature) -> float:
    """∫_Ω J r по квадратуре; r — значения по ячейкам (nx, nz) или в точках (Nx, Nz)"""
    r = np.asarray(r, float)
    pts = quad.cell_to_points(r) if r.shape == (quad.nx, quad.nz) else r
    if pts.shape != (quad.x.size, quad.z.size):
        raise DimensionMismatchError("density shape does not match quadrature", shape=list(r.shape))
    return float(quad.integrate(ale.J[:, None] * pts))


def _min_eig(M: np.ndarray) -> float:
    return float(np.min(np.linalg.eigvalsh(0.5 * (M + M.T))))


def factor_mass_matrix(M: np.ndarray):
    try:
        return cho_factor(M)
    except LinAlgError as e:
        raise MassMatrixError("mass matrix is not positive definite", min_eigenvalue=_min_eig(M)) from e


def assemble_mass_matrix(
    r: np.ndarray, ale: AleMap, table: FluidTable, quad: OmegaQuadrature, check: bool = True
) -> np.ndarray:
    """M(J, r) = ∫ J r g_i·g_j; r — по ячейкам или в точках квадратуры"""
    r = np.asarray(r, float)
    pts = quad.cell_to_points(r) if r.shape == (quad.nx, quad.nz) else r
    weight = quad.weights * ale.J[:, None] * pts
    M = np.einsum("ilxz,jlxz,xz->ij", table.vals, table.vals, weight)
    M = 0.5 * (M + M.T)
    if check:
        factor_mass_matrix(M)
    return M


def convection_matrix(
    table: FluidTable, grad: np.ndarray, jr: np.ndarray, transport: np.ndarray, quad: OmegaQuadrature
) -> np.ndarray:
    """C_ji = ½∫ J r a·(g_j·∇^w g_i − g_i·∇^w g_j), a = Ũ − w_ale; C^T = −C"""
    weight = 0.5 * quad.weights * jr
    T = np.einsum("dxz,jlxz,ildxz,xz->ji", transport, table.vals, grad, weight)
    return T - T.T


def viscous_matrix(grad: np.ndarray, div: np.ndarray, J: np.ndarray, mu: float, lam: float, quad: OmegaQuadrature) -> np.ndarray:
    weight = quad.weights * J[:, None]
    K = mu * np.einsum("ildxz,jldxz,xz->ij", grad, grad, weight) + (mu + lam) * np.einsum("ixz,jxz,xz->ij", div, div, weight)
    return 0.5 * (K + K.T)


def pressure_vector(div: np.ndarray, J: np.ndarray, p_pts: np.ndarray, quad: OmegaQuadrature) -> np.ndarray:
    return np.einsum("ixz,xz->i", div, quad.weights * J[:, None] * p_pts)


def penalty_terms(k: int, dw_dt_modal: np.ndarray, dt_window: float) -> tuple[np.ndarray, np.ndarray]:
    """Pen = diag(0, 1/(2Δt)) на слотах Ext; b_j = (∂t w, s_j)/(2Δt)"""
    pen = np.zeros((2 * k, 2 * k))
    pen[k:, k:] = np.eye(k) / (2.0 * dt_window)
    b = np.zeros(2 * k)
    b[k:] = np.asarray(dw_dt_modal, float) / (2.0 * dt_window)
    return pen, b


@dataclass(frozen=True)
class MomentumTerms:
    """Слагаемые M α' = −(D + C + K + Pen) α + P + b в один момент времени"""

    D: np.ndarray
    C: np.ndarray
    K: np.ndarray
    pen: np.ndarray
    P: np.ndarray
    b: np.ndarray

    @property
    def Q(self) -> np.ndarray:
        return self.D + self.C + self.K + self.pen

    @property
    def forcing(self) -> np.ndarray:
        return self.P + self.b

    def rhs(self, alpha: np.ndarray) -> np.ndarray:
        return -self.Q @ alpha + self.forcing


def momentum_terms(
    jr: np.ndarray,
    djr_dt: np.ndarray,
    U_frozen: np.ndarray,
    ale: AleMap,
    p_pts: np.ndarray,
    dw_dt_modal: np.ndarray,
    dt_window: float,
    table: FluidTable,
    quad: OmegaQuadrature,
    mu: float,
    lam: float,
) -> MomentumTerms:
    """jr, ∂t(J r), давление — в точках квадратуры; Ũ задаёт перенос в C"""
    n = table.vals.shape[0]
    if np.size(U_frozen) != n:
        raise DimensionMismatchError("modal vector does not match fluid basis", size=n, alpha=int(np.size(U_frozen)))
    grad, div = transformed_basis_gradients(table, ale, quad.z)
    D = 0.5 * np.einsum("ilxz,jlxz,xz->ij", table.vals, table.vals, quad.weights * djr_dt)
    transport = np.einsum("i,ilxz->lxz", np.asarray(U_frozen, float), table.vals)
    transport[1] -= (quad.z[None, :] + 1.0) * ale.dw_dt[:, None]
    pen, b = penalty_terms(n // 2, dw_dt_modal, dt_window)
    return MomentumTerms(
        D=0.5 * (D + D.T),
        C=convection_matrix(table, grad, jr, transport, quad),
        K=viscous_matrix(grad, div, ale.J, mu, lam, quad),
        pen=pen,
        P=pressure_vector(div, ale.J, p_pts, quad),
        b=b,
    )


def momentum_rhs(
    alpha: np.ndarray,
    r: np.ndarray,
    djr_dt: np.ndarray,
    U_frozen: np.ndarray,
    ale: AleMap,
    press: PressureLaw,
    dw_dt_modal: np.ndarray,
    dt_window: float,
    table: FluidTable,
    quad: OmegaQuadrature,
    mu: float,
    lam: float,
) -> np.ndarray:
    """
    Правая часть M α' = rhs(α) в один момент времени.
    r — плотность в точках квадратуры, djr_dt — ∂t(J r) там же, U_frozen — итерация Пикара Ũ.
    """
    alpha = np.asarray(alpha, float)
    n = table.vals.shape[0]
    if alpha.size != n:
        raise DimensionMismatchError("modal vector does not match fluid basis", size=n, alpha=int(alpha.size))
    r = np.asarray(r, float)
    terms = momentum_terms(
        ale.J[:, None] * r, djr_dt, U_frozen, ale, press.pressure(r), dw_dt_modal, dt_window, table, quad, mu, lam
    )
    return terms.rhs(alpha)


# ============================
# Начальные данные
# ============================


def initial_density(fluid_cfg, quad: OmegaQuadrature, floor_fraction: float = 1e-3) -> np.ndarray:
    """r0 = rho0 (1 + A cos(πx/L) cos(π(z+1))) по ячейкам; срезка снизу и сглаживание"""
    xc, zc = quad.cell_x, quad.cell_z
    r = fluid_cfg.rho0 * (1.0 + fluid_cfg.rho0_amplitude * np.outer(np.cos(np.pi * xc / quad.L), np.cos(np.pi * (zc + 1.0))))
    floor = floor_fraction * float(np.mean(r))
    if np.any(r < floor):
        r = uniform_filter(np.maximum(r, floor), size=3, mode="nearest")
        logger.info(f"[fsp] initial density clipped at {floor:.3e} and mollified")
    return r


def initial_velocity(fluid_cfg, k: int) -> np.ndarray:
    out = np.zeros(2 * k)
    vals = np.asarray(fluid_cfg.u0_modes, float)
    out[: vals.size] = vals
    return out


# ============================
# Импульс на окне
# ============================


@dataclass(frozen=True)
class FluidParams:
    mu: float
    lam: float
    eps: float
    closure: str = "closed"
    positivity_tol: float = 1e-12

    @classmethod
    def from_config(cls, cfg) -> "FluidParams":
        return cls(
            mu=cfg.fluid.mu,
            lam=cfg.fluid.lam,
            eps=cfg.fluid.eps,
            closure=cfg.fluid.interface_flux,
            positivity_tol=cfg.solver.positivity_tol,
        )


@dataclass
class _MomentumPass:
    alphas: np.ndarray
    mass_condition: float
    operator_norm: float
    kinetic_start: float
    kinetic_end: float
    FD_visc: float
    gap_sq: float
    v_sq: float
    wt_sq: float


def _integrate_momentum(
    alpha0: np.ndarray,
    guess: np.ndarray,
    cont: ContinuityResult,
    betas: np.ndarray,
    gammas: np.ndarray,
    tabs: FspTables,
    press: PressureLaw,
    params: FluidParams,
    dt_window: float,
) -> _MomentumPass:
    quad, table = tabs.quad, tabs.table
    k = tabs.k
    times = cont.times
    n = times.size - 1
    W = quad.weights
    vals = table.vals

    ales = [tabs.ale(betas[m], gammas[m]).require_regular() for m in range(n + 1)]
    r_pts = [tabs.points(cont.r[m]) for m in range(n + 1)]
    jr = [ales[m].J[:, None] * r_pts[m] for m in range(n + 1)]
    masses = [np.einsum("ilxz,jlxz,xz->ij", vals, vals, W * jr[m]) for m in range(n + 1)]
    masses = [0.5 * (M + M.T) for M in masses]

    alphas = np.empty((n + 1, 2 * k))
    alphas[0] = alpha0
    cond = 0.0
    op_norm = 0.0
    visc = gap = vsq = wsq = 0.0
    for m in range(n):
        h = times[m + 1] - times[m]
        Mbar = 0.5 * (masses[m] + masses[m + 1])
        factor_mass_matrix(Mbar)
        beta_mid = 0.5 * (betas[m] + betas[m + 1])
        gamma_mid = 0.5 * (gammas[m] + gammas[m + 1])
        ale_mid = tabs.ale(beta_mid, gamma_mid).require_regular()
        terms = momentum_terms(
            0.5 * (jr[m] + jr[m + 1]),
            (jr[m + 1] - jr[m]) / h,
            0.5 * (guess[m] + guess[m + 1]),
            ale_mid,
            0.5 * (press.pressure(r_pts[m]) + press.pressure(r_pts[m + 1])),
            gamma_mid,
            dt_window,
            table,
            quad,
            params.mu,
            params.lam,
        )
        Q, K = terms.Q, terms.K
        # неявная середина: M (α1 − α0)/h = ½ (rhs(α0) + rhs(α1))
        lhs = Mbar / h + 0.5 * Q
        rhs = Mbar / h @ alphas[m] + 0.5 * (terms.rhs(alphas[m]) + terms.forcing)
        try:
            alphas[m + 1] = solve(lhs, rhs)
        except LinAlgError as e:
            raise LinearSolveError("momentum system is singular", t=float(times[m])) from e
        cond = max(cond, float(np.linalg.cond(Mbar)))
        op_norm = max(op_norm, float(np.linalg.norm(solve(Mbar, Q, assume_a="pos"), 2)))

        a_mid = 0.5 * (alphas[m] + alphas[m + 1])
        visc += h * float(a_mid @ K @ a_mid)
        v_mid = a_mid[k:]
        gap += h * float(np.sum((v_mid - gamma_mid) ** 2))
        vsq += h * float(v_mid @ v_mid)
        wsq += h * float(gamma_mid @ gamma_mid)

    if not np.all(np.isfinite(alphas)):
        raise LinearSolveError("momentum integration produced non-finite coefficients")
    return _MomentumPass(
        alphas=alphas,
        mass_condition=cond,
        operator_norm=op_norm,
        kinetic_start=0.5 * float(alphas[0] @ masses[0] @ alphas[0]),
        kinetic_end=0.5 * float(alphas[-1] @ masses[-1] @ alphas[-1]),
        FD_visc=visc,
        gap_sq=gap,
        v_sq=vsq,
        wt_sq=wsq,
    )


def _boundary_and_diffusion(
    cont: ContinuityResult,
    alphas: np.ndarray,
    betas: np.ndarray,
    gammas: np.ndarray,
    tabs: FspTables,
    press: PressureLaw,
    eps: float,
) -> tuple[float, float, float, float, float]:
    """(FD_ε, ∫∫p(v−∂t w), ∫∫H(v−∂t w), внутренняя энергия в начале и в конце)"""
    ct = tabs.continuity
    hx, vol = ct.quad.hx, ct.volume
    times = cont.times
    n = times.size - 1
    fd = np.empty(n + 1)
    wp = np.empty(n + 1)
    wh = np.empty(n + 1)
    for m in range(n + 1):
        frame = make_frame(ct, betas[m], alphas[m])
        r = cont.r[m]
        fd[m] = diffusive_dissipation(r, frame, ct, eps, press.h_prime)
        gap = frame.v_top - gammas[m] @ ct.s_cellavg
        r_top = r[:, -1]
        wp[m] = hx * float(np.dot(press.pressure(r_top), gap))
        wh[m] = hx * float(np.dot(press.internal(r_top), gap))
    h = np.diff(times)
    trap = lambda f: float(np.sum(0.5 * h * (f[:-1] + f[1:])))  # noqa: E731
    internal0 = float(np.sum(cont.Jc[0][:, None] * press.internal(cont.r[0])) * vol)
    internal1 = float(np.sum(cont.Jc[-1][:, None] * press.internal(cont.r[-1])) * vol)
    return trap(fd), trap(wp), trap(wh), internal0, internal1


def fsp_fixed_point(
    state_in: FluidState,
    ssp: SspWindowOutput,
    window: tuple[float, float],
    substeps: int,
    tabs: FspTables,
    press: PressureLaw,
    params: FluidParams,
    dt: Optional[float] = None,
    tol: float = 1e-10,
    max_iter: int = 50,
) -> FspWindowOutput:
    """
    Итерация Пикара: Ũ -> r(Ũ) -> U; до sup-нормы приращения модальных
    коэффициентов на узлах окна < tol.
    """
    t0, t1 = float(window[0]), float(window[1])
    dt = float(dt if dt is not None else t1 - t0)
    times = t0 + (t1 - t0) * np.arange(substeps + 1) / substeps
    times[-1] = t1
    betas = np.atleast_2d(ssp.beta_at(times))
    gammas = np.atleast_2d(ssp.gamma_at(times))
    # концы окна совпадают с узлами SSP: берутся узловые значения
    for i, j in ((0, 0), (-1, -1)):
        if times[i] == ssp.times[j]:
            betas[i], gammas[i] = ssp.beta[j], ssp.gamma[j]
    t_half = 0.5 * (times[0] + times[1])
    beta_half = np.asarray(ssp.beta_at(t_half))
    alpha0 = np.asarray(state_in.alpha, float)
    if alpha0.size != 2 * tabs.k:
        raise DimensionMismatchError("fluid state does not match basis", size=2 * tabs.k, alpha=int(alpha0.size))

    guess = np.tile(alpha0, (substeps + 1, 1))
    increments: List[float] = []
    cont = None
    mom = None
    for it in range(1, max_iter + 1):
        cont = damped_continuity_step(
            state_in.r,
            times,
            betas,
            guess,
            tabs.continuity,
            params.eps,
            closure=params.closure,  # type: ignore[arg-type]
            positivity_tol=params.positivity_tol,
            startup=(beta_half, 0.5 * (guess[0] + guess[1])),
        )
        mom = _integrate_momentum(alpha0, guess, cont, betas, gammas, tabs, press, params, dt)
        inc = float(np.max(np.abs(mom.alphas - guess)))
        increments.append(inc)
        guess = mom.alphas
        if inc < tol:
            break
        if it >= 3 and increments[-1] > increments[-2] > increments[-3]:
            logger.warning(f"[fsp] Picard increments growing on [{t0:.6g}, {t1:.6g}]: {increments[-3:]}")
    else:
        raise FixedPointError(
            "Picard iteration did not converge", iterations=max_iter, last_increment=increments[-1], tol=tol
        )

    fd_eps, work_p, work_h, int0, int1 = _boundary_and_diffusion(cont, mom.alphas, betas, gammas, tabs, press, params.eps)
    r_all = cont.r
    report = FixedPointReport(
        iterations=len(increments),
        increment=increments[-1],
        increments=increments,
        density_min=float(np.min(r_all)),
        density_max=float(np.max(r_all)),
        mass_condition=mom.mass_condition,
        operator_norm=mom.operator_norm,
    )
    energy = FspEnergyReport(
        kinetic_start=mom.kinetic_start,
        kinetic_end=mom.kinetic_end,
        internal_start=int0,
        internal_end=int1,
        FD_visc=mom.FD_visc,
        FD_eps=fd_eps,
        gap_sq=mom.gap_sq,
        v_sq=mom.v_sq,
        wt_sq=mom.wt_sq,
        work_pressure=work_p,
        work_internal=work_h,
        closure=params.closure,
        dt=dt,
    )
    logger.debug(
        f"[fsp] window [{t0:.6g}, {t1:.6g}]: {report.iterations} Picard iterations, "
        f"increment {report.increment:.2e}, energy residual {energy.residual:.3e}"
    )
    state = FluidState(r=cont.r_final.copy(), alpha=mom.alphas[-1].copy(), t=t1)
    return FspWindowOutput(
        state=state, times=times, alphas=mom.alphas, continuity=cont, report=report, energy=energy, betas=betas, gammas=gammas
    )
