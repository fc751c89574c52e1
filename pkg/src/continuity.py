"""
Уравнение неразрывности с искусственной диффузией на опорной области.

Консервативная форма (после умножения на J):

  ∂t(J r) + ∇·(r F) = ε ∇·(J ∇r),
  F = J (∇A_w)^{-1} U − G = (J U_x, −(z+1) ∂x w U_x + U_z − (z+1) ∂t w),

конечные объёмы на ячейках nx × nz, поток Шарфеттера–Гуммеля на гранях
(центральный при малом сеточном числе Пекле, против потока при большом),
Нейман через нулевой диффузионный поток на границе. По времени
Кранк–Николсон, первый подшаг окна заменяется двумя неявными полушагами
Эйлера; подшаг, на котором явная половина КН теряет положительность
диагонали, тоже делается неявным Эйлером.

Поток ALE G_z = (z+1)(w̄^{m+1} − w̄^m)/Δτ по средним по ячейкам столбца,
поэтому J^{m+1} − J^m совпадает с дискретной дивергенцией G.
"""
from __future__ import annotations
from dataclasses import dataclass, field
from typing import Callable, Literal, Optional
import logging

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu
from scipy.special import exprel

from src.errors import DensityPositivityError, DimensionMismatchError, LinearSolveError
from src.galerkin_bases import FluidBasis, FluidTable, PlateBasis
from src.quadrature import OmegaQuadrature

logger = logging.getLogger(__name__)

FluxClosure = Literal["closed", "open"]


@dataclass(frozen=True)
class ContinuityTables:
    """Значения базисов в центрах граней ячеек (строятся один раз на прогон)"""

    quad: OmegaQuadrature = field(repr=False)
    s_cellavg: np.ndarray = field(repr=False)  # (k, nx) средние s_i по ячейкам
    s_xface: np.ndarray = field(repr=False)  # (k, nx−1)
    s_dx_center: np.ndarray = field(repr=False)  # (k, nx)
    xface: FluidTable = field(repr=False)  # сетка x_f × z_c
    zface: FluidTable = field(repr=False)  # сетка x_c × z_f
    top: FluidTable = field(repr=False)  # сетка x_c × {0}

    @property
    def nx(self) -> int:
        return self.quad.nx

    @property
    def nz(self) -> int:
        return self.quad.nz

    @property
    def volume(self) -> float:
        return self.quad.hx * self.quad.hz

    @property
    def z_faces(self) -> np.ndarray:
        return -1.0 + np.arange(1, self.nz) * self.quad.hz


def build_continuity_tables(quad: OmegaQuadrature, plate: PlateBasis, fluid: FluidBasis) -> ContinuityTables:
    hx, hz = quad.hx, quad.hz
    xc, zc = quad.cell_x, quad.cell_z
    xf = np.arange(1, quad.nx) * hx
    zf = -1.0 + np.arange(1, quad.nz) * hz
    return ContinuityTables(
        quad=quad,
        s_cellavg=quad.cell_average_x(plate.eval(quad.x, 0)),
        s_xface=plate.eval(xf, 0),
        s_dx_center=plate.eval(xc, 1),
        xface=fluid.tabulate_grid(xf, zc),
        zface=fluid.tabulate_grid(xc, zf),
        top=fluid.tabulate_grid(xc, np.array([0.0])),
    )


@dataclass(frozen=True)
class ContinuityFrame:
    """Коэффициенты потоков в один момент времени"""

    Jc: np.ndarray  # (nx,)
    J_xface: np.ndarray  # (nx−1,)
    wx_center: np.ndarray  # (nx,)
    ux_xface: np.ndarray  # (nx−1, nz)
    ux_zface: np.ndarray  # (nx, nz−1)
    uz_zface: np.ndarray  # (nx, nz−1)
    v_top: np.ndarray  # (nx,)

    @property
    def wbar(self) -> np.ndarray:
        return self.Jc - 1.0


def make_frame(tables: ContinuityTables, beta: np.ndarray, alpha: np.ndarray) -> ContinuityFrame:
    beta = np.asarray(beta, float)
    alpha = np.asarray(alpha, float)
    if beta.size != tables.s_cellavg.shape[0] or alpha.size != tables.xface.vals.shape[0]:
        raise DimensionMismatchError(
            "modal vectors do not match continuity tables",
            k=int(tables.s_cellavg.shape[0]),
            beta=int(beta.size),
            alpha=int(alpha.size),
        )
    return ContinuityFrame(
        Jc=1.0 + beta @ tables.s_cellavg,
        J_xface=1.0 + beta @ tables.s_xface,
        wx_center=beta @ tables.s_dx_center,
        ux_xface=np.einsum("i,ixz->xz", alpha, tables.xface.vals[:, 0]),
        ux_zface=np.einsum("i,ixz->xz", alpha, tables.zface.vals[:, 0]),
        uz_zface=np.einsum("i,ixz->xz", alpha, tables.zface.vals[:, 1]),
        v_top=alpha @ tables.top.vals[:, 1, :, 0],
    )


# ============================
# Сборка оператора
# ============================


def _face_pairs(nx: int, nz: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    idx = np.arange(nx * nz).reshape(nx, nz)
    return idx[:-1, :].ravel(), idx[1:, :].ravel(), idx[:, :-1].ravel(), idx[:, 1:].ravel()


def face_weights(phi: np.ndarray, dif: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """
    Коэффициенты потока Шарфеттера–Гуммеля через грань L → R:
    поток = a_L·r_L − a_R·r_R, a_L = D·B(−Pe), a_R = D·B(Pe), Pe = φ/D, B(x) = x/(eˣ − 1).
    a_L − a_R = φ при любом D; при D = 0 — чистый поток против потока.
    """
    phi = np.asarray(phi, float)
    dif = np.asarray(dif, float)
    up_l, up_r = np.maximum(phi, 0.0), np.maximum(-phi, 0.0)
    pos = dif > 0
    if not np.any(pos):
        return up_l, up_r
    pe = np.where(pos, phi / np.where(pos, dif, 1.0), 0.0)
    with np.errstate(over="ignore", divide="ignore"):
        b_plus = 1.0 / exprel(pe)
        b_minus = 1.0 / exprel(-pe)
    a_r = np.where(pos, dif * b_plus, up_r)
    a_l = np.where(pos, dif * b_minus, up_l)
    return a_l, a_r


def assemble_operator(
    tables: ContinuityTables,
    frame: ContinuityFrame,
    ale_rate: np.ndarray,
    eps: float,
    closure: FluxClosure = "closed",
) -> sp.csr_matrix:
    """
    A·r = сумма исходящих потоков по ячейке (адвекция − диффузия).
    ale_rate — (w̄^{m+1} − w̄^m)/Δτ по столбцам ячеек.
    """
    nx, nz = tables.nx, tables.nz
    hx, hz = tables.quad.hx, tables.quad.hz
    zf = tables.z_faces
    xL, xR, zL, zR = _face_pairs(nx, nz)

    phi_x = (frame.J_xface[:, None] * frame.ux_xface * hz).ravel()
    dif_x = np.repeat(eps * frame.J_xface * hz / hx, nz)
    flux_z = (
        -(zf[None, :] + 1.0) * frame.wx_center[:, None] * frame.ux_zface
        + frame.uz_zface
        - (zf[None, :] + 1.0) * ale_rate[:, None]
    )
    phi_z = (flux_z * hx).ravel()
    dif_z = np.repeat(eps * frame.Jc * hx / hz, nz - 1)

    L = np.concatenate([xL, zL])
    R = np.concatenate([xR, zR])
    phi = np.concatenate([phi_x, phi_z])
    dif = np.concatenate([dif_x, dif_z])
    rows = np.concatenate([L, L, R, R])
    cols = np.concatenate([L, R, L, R])
    a_l, a_r = face_weights(phi, dif)
    data = np.concatenate([a_l, -a_r, -a_l, a_r])

    if closure == "open":
        top_cells = np.arange(nx) * nz + (nz - 1)
        rows = np.concatenate([rows, top_cells])
        cols = np.concatenate([cols, top_cells])
        data = np.concatenate([data, (frame.v_top - ale_rate) * hx])
    elif closure != "closed":
        raise ValueError(f"unknown interface flux closure: {closure!r}")
    n = nx * nz
    return sp.csr_matrix((data, (rows, cols)), shape=(n, n))


# ============================
# Шаг по времени
# ============================


@dataclass(frozen=True)
class ContinuityResult:
    times: np.ndarray = field(repr=False)
    r: np.ndarray = field(repr=False)  # (n+1, nx, nz)
    Jc: np.ndarray = field(repr=False)  # (n+1, nx)
    mass: np.ndarray = field(repr=False)  # ∫ J r в узлах
    boundary_outflow: np.ndarray = field(repr=False)  # накопленный ∫∫_Γ r (v − ∂t w)
    envelope_lo: np.ndarray = field(repr=False)  # накопленный дискретный показатель (≤ 0)
    envelope_hi: np.ndarray = field(repr=False)  # (≥ 0)
    closure: str = "closed"

    @property
    def r_final(self) -> np.ndarray:
        return self.r[-1]

    @property
    def mass_balance(self) -> np.ndarray:
        """Сохраняющаяся величина: ∫J r + поток через Γ (в закрытом режиме поток нулевой)"""
        return self.mass + self.boundary_outflow

    def envelope(self, r_in: Optional[np.ndarray] = None) -> tuple[np.ndarray, np.ndarray]:
        r0 = self.r[0] if r_in is None else r_in
        return float(np.min(r0)) * np.exp(self.envelope_lo), float(np.max(r0)) * np.exp(self.envelope_hi)


def _solve(lhs: sp.csr_matrix, rhs: np.ndarray, t: float) -> np.ndarray:
    try:
        lu = splu(lhs.tocsc())
        out = lu.solve(rhs)
    except RuntimeError as e:
        raise LinearSolveError("continuity system is singular", t=t, reason=str(e)) from e
    if not np.all(np.isfinite(out)):
        raise LinearSolveError("continuity solve produced non-finite values", t=t)
    return out


def _stage(
    r: np.ndarray,
    tables: ContinuityTables,
    f0: ContinuityFrame,
    f1: ContinuityFrame,
    dtau: float,
    theta: float,
    eps: float,
    closure: FluxClosure,
    t: float,
) -> tuple[np.ndarray, float, float, float]:
    """Один θ-шаг; возвращает (r_new, поток через Γ, показатели нижней/верхней огибающей)"""
    nz = tables.nz
    vol = tables.volume
    rate = (f1.wbar - f0.wbar) / dtau
    A1 = assemble_operator(tables, f1, rate, eps, closure)
    J0 = np.repeat(f0.Jc, nz)
    J1 = np.repeat(f1.Jc, nz)
    rhs = J0 * vol / dtau * r
    A0 = assemble_operator(tables, f0, rate, eps, closure) if theta < 1.0 else None
    if A0 is not None:
        explicit_diag = J0 * vol / dtau - (1.0 - theta) * A0.diagonal()
        if np.min(explicit_diag) < 0.0:
            logger.debug(f"[continuity] explicit half loses positivity at t={t:.4e}, implicit Euler substep")
            theta, A0 = 1.0, None
    lhs = sp.diags(J1 * vol / dtau) + theta * A1
    a1 = np.asarray(A1.sum(axis=1)).ravel() / vol
    dJ = (J1 - J0) / dtau
    q1 = np.abs(a1 + dJ)
    if A0 is not None:
        rhs = rhs - (1.0 - theta) * (A0 @ r)
        a0 = np.asarray(A0.sum(axis=1)).ravel() / vol
        q0 = np.abs(a0 + dJ)
        Jbar = 0.5 * (J0 + J1)
        u = (1.0 - theta) * dtau * q0
        v = theta * dtau * q1
        hi = np.max(np.log(Jbar + u) - np.log(np.maximum(Jbar - v, 1e-300)))
        lo = np.min(np.log(np.maximum(Jbar - u, 1e-300)) - np.log(Jbar + v))
    else:
        hi = np.max(-np.log(np.maximum(1.0 - dtau * q1 / J0, 1e-300)))
        lo = np.min(-np.log(1.0 + dtau * q1 / J0))
    r_new = _solve(lhs, rhs, t)

    outflow = 0.0
    if closure == "open":
        top = np.arange(tables.nx) * nz + (nz - 1)
        rate_top = (f1.v_top - rate) * tables.quad.hx
        out1 = float(np.dot(rate_top, r_new[top]))
        if A0 is not None:
            rate_top0 = (f0.v_top - rate) * tables.quad.hx
            outflow = dtau * ((1.0 - theta) * float(np.dot(rate_top0, r[top])) + theta * out1)
        else:
            outflow = dtau * out1
    return r_new, outflow, float(lo), float(hi)


def damped_continuity_step(
    r_in: np.ndarray,
    times: np.ndarray,
    betas: np.ndarray,
    alphas: np.ndarray,
    tables: ContinuityTables,
    eps: float,
    closure: FluxClosure = "closed",
    positivity_tol: float = 1e-12,
    startup: Optional[tuple[np.ndarray, np.ndarray]] = None,
) -> ContinuityResult:
    """
    r на узлах times по заданным в тех же узлах β (перемещение) и α (скорость).
    startup = (β, α) в середине первого подшага: старт Раннахера.
    """
    if eps < 0:
        raise ValueError(f"eps must be non-negative, got {eps}")
    times = np.asarray(times, float)
    n = times.size - 1
    nx, nz = tables.nx, tables.nz
    r_in = np.asarray(r_in, float)
    if r_in.shape != (nx, nz):
        raise DimensionMismatchError("density grid does not match tables", expected=[nx, nz], got=list(r_in.shape))
    if betas.shape[0] != n + 1 or alphas.shape[0] != n + 1:
        raise DimensionMismatchError("modal samples do not match time nodes", nodes=n + 1)

    frames = [make_frame(tables, betas[m], alphas[m]) for m in range(n + 1)]
    vol = tables.volume
    r_all = np.empty((n + 1, nx, nz))
    r_all[0] = r_in
    mass = np.empty(n + 1)
    mass[0] = float(np.sum(frames[0].Jc[:, None] * r_in) * vol)
    outflow = np.zeros(n + 1)
    lo = np.zeros(n + 1)
    hi = np.zeros(n + 1)
    r = r_in.ravel().copy()

    for m in range(n):
        t, h = times[m], times[m + 1] - times[m]
        if m == 0 and startup is not None:
            half = make_frame(tables, startup[0], startup[1])
            r_h, o1, l1, h1 = _stage(r, tables, frames[0], half, h / 2, 1.0, eps, closure, t)
            r, o2, l2, h2 = _stage(r_h, tables, half, frames[1], h / 2, 1.0, eps, closure, t + h / 2)
            step_out, step_lo, step_hi = o1 + o2, l1 + l2, h1 + h2
        else:
            r, step_out, step_lo, step_hi = _stage(r, tables, frames[m], frames[m + 1], h, 0.5, eps, closure, t)
        r_min = float(np.min(r))
        if r_min < -positivity_tol:
            c = int(np.argmin(r))
            raise DensityPositivityError(
                "density became negative", t=float(times[m + 1]), min_density=r_min, cell=[c // nz, c % nz]
            )
        r_all[m + 1] = r.reshape(nx, nz)
        mass[m + 1] = float(np.sum(frames[m + 1].Jc[:, None] * r_all[m + 1]) * vol)
        outflow[m + 1] = outflow[m] + step_out
        lo[m + 1] = lo[m] + step_lo
        hi[m + 1] = hi[m] + step_hi

    Jc = np.stack([f.Jc for f in frames])
    drift = abs(mass[-1] + outflow[-1] - mass[0]) / max(abs(mass[0]), 1e-300)
    logger.debug(f"[continuity] {n} substeps, closure={closure}, relative mass drift {drift:.2e}")
    return ContinuityResult(
        times=times, r=r_all, Jc=Jc, mass=mass, boundary_outflow=outflow, envelope_lo=lo, envelope_hi=hi, closure=closure
    )


def cell_mass(r: np.ndarray, Jc: np.ndarray, tables: ContinuityTables) -> float:
    """∫ J r для кусочно-постоянной r и средних J по ячейкам"""
    return float(np.sum(Jc[:, None] * r) * tables.volume)


def diffusive_dissipation(
    r: np.ndarray,
    frame: ContinuityFrame,
    tables: ContinuityTables,
    eps: float,
    h_prime: Callable[[np.ndarray], np.ndarray],
) -> float:
    """
    Дискретный аналог ε∫J|∇r|² H''(r): Σ_граней D_f (r_R − r_L)(H'(r_R) − H'(r_L)),
    где D_f — диффузионный коэффициент грани схемы.
    """
    hx, hz = tables.quad.hx, tables.quad.hz
    hp = h_prime(r)
    dx = eps * frame.J_xface[:, None] * hz / hx * (r[1:, :] - r[:-1, :]) * (hp[1:, :] - hp[:-1, :])
    dz = eps * frame.Jc[:, None] * hx / hz * (r[:, 1:] - r[:, :-1]) * (hp[:, 1:] - hp[:, :-1])
    return float(np.sum(dx) + np.sum(dz))
